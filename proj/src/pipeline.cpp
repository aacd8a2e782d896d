#include "ssod/pipeline.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ssod/error.hpp"

namespace ssod {

namespace {

// Stream ids for derive_seed.
enum : std::uint64_t {
    kLabeledStream = 11,
    kUnlabeledStream = 12,
    kEmaStream = 13,
    kBatchStream = 14,
    kIterationStream = 15,
    kTeacherStream = 21,
    kLabeledTeacherStream = 22,
    kLossStream = 23,
    kStudentStream = 24,
};

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

double gap(const EmaState& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.teacher.size(); ++i) {
        const double d = s.teacher[i] - s.student[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

struct NegativePool {
    std::vector<RotatedBox> boxes;
    std::vector<double> bg;
    std::vector<double> loss;
};

// Proposals overlapping neither a target box nor a positive anchor.
NegativePool negative_proposals(const TeacherOutput& teacher, const std::vector<RotatedBox>& targets,
                                const AssignmentResult* assign, const AnchorSet& anchors, double iou_thr) {
    std::vector<RotatedBox> blockers = targets;
    if (assign != nullptr) {
        for (const auto& pos : assign->positives) {
            for (std::size_t a : pos) blockers.push_back(anchors.boxes()[a]);
        }
    }
    NegativePool pool;
    for (std::size_t i : unblocked_proposals(teacher.proposals, blockers, iou_thr)) {
        pool.boxes.push_back(teacher.proposals[i]);
        pool.bg.push_back(teacher.proposal_bg[i]);
        pool.loss.push_back(teacher.proposal_loss[i]);
    }
    return pool;
}

double mean_or_zero(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

// Supervised branch: ground truth are the targets, plain top-k positives
// and unweighted negatives.
double supervised_loss(const std::vector<SimScene>& labeled, const RunConfig& cfg, const AnchorSet& anchors,
                       std::uint64_t seed) {
    double total = 0.0;
    for (std::size_t s = 0; s < labeled.size(); ++s) {
        const SimScene& scene = labeled[s];
        const TeacherOutput proposals =
            simulate_teacher(scene, cfg.teacher, derive_seed(seed, kLabeledTeacherStream, s));
        std::mt19937_64 rng(derive_seed(seed, kLossStream, 1000 + s));
        std::vector<RotatedBox> targets;
        for (const Detection& d : scene.objects) targets.push_back(d.box);

        double pos_sum = 0.0;
        std::size_t n_pos = 0;
        AssignmentResult assign;
        const bool have_targets = !targets.empty();
        if (have_targets) {
            assign = topk_assign(targets, anchors, cfg.pipeline.k);
            n_pos = assign.num_positive();
            for (double v : sample_losses(n_pos, cfg.teacher.positive_loss_mean, rng)) pos_sum += v;
        }
        const NegativePool neg =
            negative_proposals(proposals, targets, have_targets ? &assign : nullptr, anchors, cfg.pipeline.negative_iou);
        double neg_sum = 0.0;
        for (double v : neg.loss) neg_sum += v;
        total += mean_or_zero(pos_sum, n_pos) + mean_or_zero(neg_sum, neg.loss.size());
    }
    return total;
}

}  // namespace

void validate(const PipelineConfig& c) {
    require(std::isfinite(c.alpha) && c.alpha >= 0.0, "pipeline: alpha must be >= 0");
    require(c.p >= 0.0 && c.p <= 100.0, "pipeline: p must lie in [0, 100]");
    require(c.k >= 1, "pipeline: k must be >= 1");
    require(c.bg_thr >= 0.0 && c.bg_thr <= 1.0, "pipeline: bg_thr must lie in [0, 1]");
    require(c.s_max > 0.0 && c.s_max <= 1.0, "pipeline: s_max must lie in (0, 1]");
    require(c.floor >= 0.0 && c.floor < 1.0, "pipeline: floor must lie in [0, 1)");
    require(c.small_area > 0.0, "pipeline: small_area must be positive");
    require(c.ema_momentum > 0.0 && c.ema_momentum < 1.0, "pipeline: ema_momentum must lie in (0, 1)");
    require(c.labeled_per_batch >= 0 && c.unlabeled_per_batch >= 0, "pipeline: batch composition must be >= 0");
    require(c.labeled_pool >= 1 && c.unlabeled_pool >= 1, "pipeline: pools must hold at least one scene");
    require(c.negative_iou > 0.0 && c.negative_iou <= 1.0, "pipeline: negative_iou must lie in (0, 1]");
    require(c.param_count >= 1, "pipeline: param_count must be >= 1");
    require(std::isfinite(c.student_lr) && c.student_lr >= 0.0, "pipeline: student_lr must be >= 0");
}

void validate(const RunConfig& c) {
    validate(c.pipeline);
    validate(c.scene);
    validate(c.teacher);
    require(c.anchors.width > 0 && c.anchors.height > 0 && !c.anchors.strides.empty() && !c.anchors.scales.empty() &&
                !c.anchors.ratios.empty(),
            "anchors: grid must be non-empty");
}

EmaState ema_update(const EmaState& state, double m) {
    require(m > 0.0 && m < 1.0, "EMA momentum must lie in (0, 1)");
    require(state.teacher.size() == state.student.size(), "EMA teacher and student differ in length");
    EmaState next = state;
    for (std::size_t i = 0; i < next.teacher.size(); ++i) {
        next.teacher[i] = m * state.teacher[i] + (1.0 - m) * state.student[i];
    }
    return next;
}

double combine_losses(double l_sup, double l_unsup, double alpha) { return l_sup + alpha * l_unsup; }

EmaState init_ema_state(std::size_t param_count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    EmaState s;
    s.student.resize(param_count);
    s.teacher.resize(param_count);
    for (std::size_t i = 0; i < param_count; ++i) {
        s.student[i] = unit(rng);
        s.teacher[i] = s.student[i] + 0.1 * unit(rng);
    }
    return s;
}

Dataset build_dataset(const RunConfig& config, std::uint64_t seed) {
    validate(config);
    Dataset d;
    for (int i = 0; i < config.pipeline.labeled_pool; ++i) {
        d.labeled.push_back(gen_scene(config.scene, derive_seed(seed, kLabeledStream, static_cast<std::uint64_t>(i))));
    }
    for (int i = 0; i < config.pipeline.unlabeled_pool; ++i) {
        d.unlabeled.push_back(
            gen_scene(config.scene, derive_seed(seed, kUnlabeledStream, static_cast<std::uint64_t>(i))));
    }
    return d;
}

DatasetBatch sample_batch(const Dataset& dataset, const PipelineConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DatasetBatch b;
    if (config.labeled_per_batch > 0 && !dataset.labeled.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, dataset.labeled.size() - 1);
        for (int i = 0; i < config.labeled_per_batch; ++i) b.labeled.push_back(dataset.labeled[pick(rng)]);
    }
    if (config.unlabeled_per_batch > 0 && !dataset.unlabeled.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, dataset.unlabeled.size() - 1);
        for (int i = 0; i < config.unlabeled_per_batch; ++i) b.unlabeled.push_back(dataset.unlabeled[pick(rng)]);
    }
    return b;
}

IterationResult run_iteration(const DatasetBatch& batch, const EmaState& state, const RunConfig& cfg,
                              std::uint64_t seed) {
    validate(cfg);
    const PipelineConfig& pc = cfg.pipeline;
    const AnchorSet anchors = gen_anchor_grid(cfg.anchors);
    IterationResult result;
    IterationRecord& rec = result.record;
    rec.seed = seed;

    // Teacher on every unlabeled scene; predictions pooled over the batch.
    std::vector<TeacherOutput> teacher(batch.unlabeled.size());
    std::vector<Detection> pooled;
    for (std::size_t u = 0; u < batch.unlabeled.size(); ++u) {
        SimScene scene = batch.unlabeled[u];
        for (Detection& d : scene.objects) d.image = static_cast<int>(u);
        teacher[u] = simulate_teacher(scene, cfg.teacher, derive_seed(seed, kTeacherStream, u));
        for (Detection& d : teacher[u].predictions) d.image = static_cast<int>(u);
        pooled.insert(pooled.end(), teacher[u].predictions.begin(), teacher[u].predictions.end());
    }
    const PseudoLabelSet selected = select_pseudo_labels(pooled, pc.p, pc.floor, pc.small_area);
    rec.sat = selected.thresholds;

    TnlConfig tnl;
    tnl.bg_thr = pc.bg_thr;
    tnl.s_max = pc.s_max;
    tnl.max_hard = pc.max_hard == 0 ? std::numeric_limits<std::size_t>::max() : pc.max_hard;

    std::vector<LossSample> positives;
    rec.scenes.resize(batch.unlabeled.size());
    for (std::size_t u = 0; u < batch.unlabeled.size(); ++u) {
        UnlabeledSceneRecord& sr = rec.scenes[u];
        for (const Detection& d : selected.pseudo) {
            if (d.image == static_cast<int>(u)) sr.pseudo.push_back(d);
        }
        std::vector<RotatedBox> boxes;
        for (const Detection& d : sr.pseudo) boxes.push_back(d.box);

        std::mt19937_64 rng(derive_seed(seed, kLossStream, u));
        AssignmentResult assign;
        if (!boxes.empty()) {
            assign = topk_assign(boxes, anchors, pc.k);
            sr.positives = assign.positives;
            sr.min_wd = assign.min_wd;
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                const SizeClass sc = size_class(boxes[i], pc.small_area);
                const auto values = sample_losses(assign.positives[i].size(), cfg.teacher.positive_loss_mean, rng);
                for (double v : values) positives.push_back({v, sc});
                (sc == SizeClass::small ? sr.n_pos_small : sr.n_pos_large) += values.size();
            }
        }

        const NegativePool neg =
            negative_proposals(teacher[u], boxes, boxes.empty() ? nullptr : &assign, anchors, pc.negative_iou);
        sr.n_negative_proposals = neg.boxes.size();
        sr.negatives = select_negatives(neg.boxes, neg.bg, teacher[u].predictions, tnl);
        std::vector<double> normal;
        for (std::size_t idx : sr.negatives.kept_normal) normal.push_back(neg.loss[idx]);
        std::vector<HardLoss> hard;
        for (const HardNegative& h : sr.negatives.hard) hard.push_back({teacher[u].prediction_loss[h.index], h.score});
        sr.negative_loss = negative_loss(normal, hard, pc.s_max);

        rec.l_neg += sr.negative_loss;
        rec.n_neg_normal += normal.size();
        rec.n_neg_hard += hard.size();
        rec.n_pos_small += sr.n_pos_small;
        rec.n_pos_large += sr.n_pos_large;
    }

    const ReweightedLoss pos = positive_loss_reweight(positives);
    rec.l_pos = pos.total;
    if (pos.n_small > 0 && pos.n_large > 0) {
        const auto n = static_cast<double>(positives.size());
        rec.weight_small = n / (2.0 * static_cast<double>(pos.n_small));
        rec.weight_large = n / (2.0 * static_cast<double>(pos.n_large));
    }
    rec.l_unsup = mean_or_zero(rec.l_pos, positives.size()) + mean_or_zero(rec.l_neg, rec.n_neg_normal + rec.n_neg_hard);
    rec.l_sup = supervised_loss(batch.labeled, cfg, anchors, seed);
    rec.loss = combine_losses(rec.l_sup, rec.l_unsup, pc.alpha);

    // Pseudo-gradient step on the student, then the EMA teacher update.
    EmaState next = state;
    require(next.teacher.size() == next.student.size(), "EMA teacher and student differ in length");
    std::mt19937_64 grad_rng(derive_seed(seed, kStudentStream, 0));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (double& w : next.student) w -= pc.student_lr * rec.loss * unit(grad_rng);
    rec.ema_gap_before = gap(next);
    result.state = ema_update(next, pc.ema_momentum);
    rec.ema_gap_after = gap(result.state);
    return result;
}

EmaState run_pipeline(const RunConfig& config, std::size_t iterations, std::uint64_t seed,
                      const std::function<void(const IterationRecord&)>& sink) {
    const Dataset dataset = build_dataset(config, seed);
    EmaState state = init_ema_state(config.pipeline.param_count, derive_seed(seed, kEmaStream, 0));
    for (std::size_t t = 0; t < iterations; ++t) {
        const DatasetBatch batch = sample_batch(dataset, config.pipeline, derive_seed(seed, kBatchStream, t));
        IterationResult r = run_iteration(batch, state, config, derive_seed(seed, kIterationStream, t));
        r.record.iteration = t;
        state = std::move(r.state);
        if (sink) sink(r.record);
    }
    return state;
}

}  // namespace ssod

#include "ssod/sla.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "ssod/error.hpp"

namespace ssod {

namespace {

struct Ranked {
    double wd;
    std::size_t anchor;
};

bool better(const Ranked& a, const Ranked& b) {
    return a.wd < b.wd || (a.wd == b.wd && a.anchor < b.anchor);
}

// Keeps the k best entries in ascending order.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

    void offer(Ranked r) {
        if (items_.size() == k_ && !better(r, items_.back())) return;
        auto pos = std::upper_bound(items_.begin(), items_.end(), r, better);
        items_.insert(pos, r);
        if (items_.size() > k_) items_.pop_back();
    }

    const std::vector<Ranked>& items() const { return items_; }

private:
    std::size_t k_;
    std::vector<Ranked> items_;
};

AssignmentResult resolve(std::vector<std::vector<Ranked>> cands, std::size_t num_anchors, std::vector<double> min_wd) {
    AssignmentResult out;
    out.num_pseudo = cands.size();
    out.num_anchors = num_anchors;
    out.target.assign(num_anchors, -1);
    out.min_wd = std::move(min_wd);

    // Best claim per anchor: smaller WD wins, then lower pseudo index
    // (guaranteed by iterating pseudo-boxes in order with strict <).
    std::vector<double> claim_wd(num_anchors, 0.0);
    for (std::size_t i = 0; i < cands.size(); ++i) {
        for (const Ranked& r : cands[i]) {
            int& t = out.target[r.anchor];
            if (t < 0 || r.wd < claim_wd[r.anchor]) {
                t = static_cast<int>(i);
                claim_wd[r.anchor] = r.wd;
            }
        }
    }

    out.candidates.resize(cands.size());
    out.positives.resize(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        for (const Ranked& r : cands[i]) {
            out.candidates[i].push_back(r.anchor);
            if (out.target[r.anchor] == static_cast<int>(i)) out.positives[i].push_back(r.anchor);
        }
    }
    return out;
}

void check_k(std::size_t k) {
    if (k == 0) throw ConfigError("top-k assignment requires k >= 1");
}

}  // namespace

AnchorSet::AnchorSet(std::vector<RotatedBox> anchors, AnchorGridSpec grid)
    : boxes_(std::move(anchors)), grid_(std::move(grid)) {
    for (const RotatedBox& b : boxes_) validate(b);
}

std::size_t AssignmentResult::num_positive() const {
    return static_cast<std::size_t>(std::count_if(target.begin(), target.end(), [](int t) { return t >= 0; }));
}

// Row of WDs from one pseudo-box to every anchor. Axis-aligned anchors
// reuse sin(theta), which equals sin(theta - 0) bit for bit.
template <typename Sink>
void wd_row(const RotatedBox& box, const AnchorSet& anchors, Sink&& sink) {
    validate(box);
    const double s = std::sin(box.theta);
    const auto& ab = anchors.boxes();
    for (std::size_t j = 0; j < ab.size(); ++j) {
        const double sd = ab[j].theta == 0.0 ? s : std::sin(box.theta - ab[j].theta);
        sink(j, wasserstein_sq_boxes(box, ab[j], sd));
    }
}

WdMatrix wd_similarity_matrix(std::span<const RotatedBox> pseudo, const AnchorSet& anchors) {
    if (anchors.empty()) throw ConfigError("WD similarity requires a non-empty anchor set");
    WdMatrix m(pseudo.size(), anchors.size());
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        wd_row(pseudo[i], anchors, [&](std::size_t j, double wd) { m(i, j) = wd; });
    }
    return m;
}

AssignmentResult topk_assign(const WdMatrix& matrix, std::size_t k) {
    check_k(k);
    std::vector<std::vector<Ranked>> cands(matrix.rows());
    std::vector<double> min_wd(matrix.rows(), 0.0);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        std::vector<Ranked> row(matrix.cols());
        for (std::size_t j = 0; j < matrix.cols(); ++j) row[j] = {matrix(i, j), j};
        const std::size_t take = std::min(k, row.size());
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(take), row.end(), better);
        row.resize(take);
        if (!row.empty()) min_wd[i] = row.front().wd;
        cands[i] = std::move(row);
    }
    return resolve(std::move(cands), matrix.cols(), std::move(min_wd));
}

AssignmentResult topk_assign(std::span<const RotatedBox> pseudo, const AnchorSet& anchors, std::size_t k) {
    check_k(k);
    if (anchors.empty()) throw ConfigError("top-k assignment requires a non-empty anchor set");
    std::vector<std::vector<Ranked>> cands(pseudo.size());
    std::vector<double> min_wd(pseudo.size(), 0.0);
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        TopK best(k);
        wd_row(pseudo[i], anchors, [&](std::size_t j, double wd) { best.offer({wd, j}); });
        cands[i] = best.items();
        min_wd[i] = cands[i].front().wd;
    }
    return resolve(std::move(cands), anchors.size(), std::move(min_wd));
}

AssignmentResult baseline_iou_assign(std::span<const RotatedBox> pseudo, const AnchorSet& anchors, double pos_thr) {
    AssignmentResult out;
    out.num_pseudo = pseudo.size();
    out.num_anchors = anchors.size();
    out.target.assign(anchors.size(), -1);
    out.candidates.resize(pseudo.size());
    out.positives.resize(pseudo.size());
    out.max_iou.assign(pseudo.size(), 0.0);

    const auto& boxes = anchors.boxes();
    for (std::size_t j = 0; j < boxes.size(); ++j) {
        double best = 0.0;
        int best_i = -1;
        for (std::size_t i = 0; i < pseudo.size(); ++i) {
            const double iou = rotated_iou(pseudo[i], boxes[j]);
            out.max_iou[i] = std::max(out.max_iou[i], iou);
            if (iou > best) {
                best = iou;
                best_i = static_cast<int>(i);
            }
        }
        if (best_i >= 0 && best >= pos_thr) {
            out.target[j] = best_i;
            out.candidates[static_cast<std::size_t>(best_i)].push_back(j);
            out.positives[static_cast<std::size_t>(best_i)].push_back(j);
        }
    }
    return out;
}

ReweightedLoss positive_loss_reweight(std::span<const LossSample> losses) {
    ReweightedLoss out;
    out.weights.assign(losses.size(), 1.0);
    for (const LossSample& s : losses) {
        if (!(s.value >= 0.0) || !std::isfinite(s.value)) throw DomainError("loss samples must be finite and >= 0");
        if (s.size == SizeClass::small) {
            ++out.n_small;
        } else {
            ++out.n_large;
        }
    }
    const auto n_pos = static_cast<double>(losses.size());
    const bool rebalance = out.n_small > 0 && out.n_large > 0;
    const double w_small = rebalance ? n_pos / (2.0 * static_cast<double>(out.n_small)) : 1.0;
    const double w_large = rebalance ? n_pos / (2.0 * static_cast<double>(out.n_large)) : 1.0;

    double small_sum = 0.0;
    double large_sum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        if (losses[i].size == SizeClass::small) {
            out.weights[i] = w_small;
            small_sum += losses[i].value;
        } else {
            out.weights[i] = w_large;
            large_sum += losses[i].value;
        }
    }
    out.small_contribution = w_small * small_sum;
    out.large_contribution = w_large * large_sum;
    out.total = out.small_contribution + out.large_contribution;
    return out;
}

}  // namespace ssod

#include "ssod/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <map>

#include "ssod/error.hpp"
#include "ssod/io.hpp"
#include "ssod/metrics.hpp"
#include "ssod/pipeline.hpp"
#include "ssod/sat.hpp"
#include "ssod/simulator.hpp"
#include "ssod/sla.hpp"
#include "ssod/tnl.hpp"

namespace ssod::cli {

namespace {

using io::DetectionRecord;
using io::Json;

constexpr std::uint64_t kSceneStream = 31;
constexpr std::uint64_t kTeacherStream = 32;
constexpr const char* kBackgroundClass = "background";

bool is_proposal(const DetectionRecord& r) { return r.bg_score.has_value(); }

// Record indices grouped by image id, images in order of first appearance.
struct ImageGroups {
    std::vector<std::string> ids;
    std::vector<std::vector<std::size_t>> members;
};

ImageGroups group_by_image(const std::vector<DetectionRecord>& records) {
    ImageGroups g;
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = slot.emplace(records[i].image_id, g.ids.size());
        if (inserted) {
            g.ids.push_back(records[i].image_id);
            g.members.emplace_back();
        }
        g.members[it->second].push_back(i);
    }
    return g;
}

Json box_json(const RotatedBox& b) {
    return Json{{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}, {"theta", b.theta}};
}

RotatedBox box_from_json(const Json& j) {
    try {
        return RotatedBox{j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(),
                          j.at("h").get<double>(), j.at("theta").get<double>()};
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("box: ") + e.what());
    }
}

}  // namespace

void simulate(const SimulateArgs& args) {
    const RunConfig cfg = io::load_run_config(args.config);
    const io::NameTable classes = io::default_class_table(cfg.scene.num_classes);
    std::vector<DetectionRecord> out;
    for (int i = 0; i < cfg.scene.num_scenes; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const SimScene scene = gen_scene(cfg.scene, derive_seed(args.seed, kSceneStream, idx));
        for (const Detection& obj : scene.objects) {
            DetectionRecord r;
            r.image_id = io::scene_image_id(idx);
            r.box = obj.box;
            r.class_name = classes.name(obj.label);
            r.score = 1.0;
            out.push_back(std::move(r));
        }
    }
    io::write_detection_records_file(args.out, out);
}

void teacher(const TeacherArgs& args) {
    const RunConfig cfg = io::load_run_config(args.config);
    const auto scenes = io::read_detection_records_file(args.scenes);
    const ImageGroups groups = group_by_image(scenes);
    io::NameTable classes = io::default_class_table(cfg.scene.num_classes);
    io::NameTable images;

    std::vector<DetectionRecord> out;
    for (std::size_t g = 0; g < groups.ids.size(); ++g) {
        SimScene scene;
        scene.width = cfg.scene.width;
        scene.height = cfg.scene.height;
        for (std::size_t i : groups.members[g]) scene.objects.push_back(io::to_detection(scenes[i], images, classes));
        scene.num_classes = std::max<int>(cfg.scene.num_classes, static_cast<int>(classes.size()));

        const TeacherOutput t = simulate_teacher(scene, cfg.teacher, derive_seed(args.seed, kTeacherStream, g));
        for (const Detection& d : t.predictions) {
            DetectionRecord r;
            r.image_id = groups.ids[g];
            r.box = d.box;
            r.class_name = classes.name(d.label);
            r.score = d.score;
            out.push_back(std::move(r));
        }
        for (std::size_t i = 0; i < t.proposals.size(); ++i) {
            DetectionRecord r;
            r.image_id = groups.ids[g];
            r.box = t.proposals[i];
            r.class_name = kBackgroundClass;
            r.bg_score = t.proposal_bg[i];
            r.score = 1.0 - t.proposal_bg[i];
            out.push_back(std::move(r));
        }
    }
    io::write_detection_records_file(args.out, out);
}

void pseudolabel(const PseudolabelArgs& args) {
    const auto records = io::read_detection_records_file(args.preds);
    io::NameTable images;
    io::NameTable classes;
    std::vector<Detection> preds;
    for (const DetectionRecord& r : records) {
        if (!is_proposal(r)) preds.push_back(io::to_detection(r, images, classes));
    }
    const PseudoLabelSet set = select_pseudo_labels(preds, args.p, args.floor);

    std::vector<DetectionRecord> out;
    out.reserve(set.pseudo.size());
    for (const Detection& d : set.pseudo) out.push_back(io::to_record(d, images, classes));
    io::write_detection_records_file(args.out, out);

    Json report;
    report["config"] = Json{{"p", args.p}, {"floor", args.floor}, {"small_area", kSmallArea}};
    report["thresholds"] = io::to_json(set.thresholds);
    report["num_predictions"] = preds.size();
    report["num_pseudo"] = set.pseudo.size();
    io::write_json_file(args.report, report);
}

void assign(const AssignArgs& args) {
    if (args.k == 0) throw ConfigError("assign: --k must be positive");
    RunConfig cfg = io::load_run_config(args.config);
    cfg.pipeline.k = args.k;
    const auto records = io::read_detection_records_file(args.pseudo);
    const ImageGroups groups = group_by_image(records);
    const AnchorSet anchors = gen_anchor_grid(cfg.anchors);
    const double small_area = cfg.pipeline.small_area;

    Json images = Json::array();
    std::vector<LossSample> unit;
    for (std::size_t g = 0; g < groups.ids.size(); ++g) {
        std::vector<RotatedBox> boxes;
        for (std::size_t i : groups.members[g]) boxes.push_back(records[i].box);
        const AssignmentResult res =
            args.baseline_iou ? baseline_iou_assign(boxes, anchors) : topk_assign(boxes, anchors, args.k);

        Json pseudo = Json::array();
        for (std::size_t j = 0; j < boxes.size(); ++j) {
            const SizeClass size = size_class(boxes[j], small_area);
            Json positives = Json::array();
            for (std::size_t a : res.positives[j]) {
                Json entry = Json{{"anchor", a}};
                entry.update(box_json(anchors.boxes()[a]));
                positives.push_back(std::move(entry));
                unit.push_back({1.0, size});
            }
            Json p = Json{{"record", groups.members[g][j]}, {"size", to_string(size)}};
            p.update(box_json(boxes[j]));
            if (args.baseline_iou) {
                p["max_iou"] = res.max_iou[j];
            } else {
                p["min_wd"] = res.min_wd[j];
            }
            p["positives"] = std::move(positives);
            pseudo.push_back(std::move(p));
        }
        images.push_back(Json{{"image_id", groups.ids[g]}, {"num_positive", res.num_positive()}, {"pseudo", pseudo}});
    }

    const ReweightedLoss w = positive_loss_reweight(unit);
    Json out;
    Json echo = io::run_config_to_json(cfg);
    echo["method"] = args.baseline_iou ? "baseline_iou" : "topk_wd";
    out["config"] = std::move(echo);
    out["num_anchors"] = anchors.size();
    out["n_pos_small"] = w.n_small;
    out["n_pos_large"] = w.n_large;
    const bool both = w.n_small > 0 && w.n_large > 0;
    const auto n_pos = static_cast<double>(unit.size());
    out["weight_small"] = both ? n_pos / (2.0 * static_cast<double>(w.n_small)) : 1.0;
    out["weight_large"] = both ? n_pos / (2.0 * static_cast<double>(w.n_large)) : 1.0;
    out["images"] = std::move(images);
    io::write_json_file(args.out, out);
}

void negatives(const NegativesArgs& args) {
    const auto records = io::read_detection_records_file(args.preds);
    const Json assign_doc = io::read_json_file(args.assign);
    const double iou_thr = assign_doc.contains("config") && assign_doc["config"].contains("pipeline")
                               ? assign_doc["config"]["pipeline"].value("negative_iou", 0.5)
                               : 0.5;

    // Pseudo-boxes and positive anchors per image act as blockers.
    std::map<std::string, std::vector<RotatedBox>> blockers;
    if (!assign_doc.contains("images") || !assign_doc["images"].is_array()) {
        throw SchemaError(args.assign + ": images: expected an array");
    }
    for (const Json& img : assign_doc["images"]) {
        auto& b = blockers[img.at("image_id").get<std::string>()];
        for (const Json& p : img.at("pseudo")) {
            b.push_back(box_from_json(p));
            for (const Json& a : p.at("positives")) b.push_back(box_from_json(a));
        }
    }

    TnlConfig tnl;
    tnl.bg_thr = args.bg_thr;
    tnl.s_max = args.s_max;
    if (!(tnl.bg_thr >= 0.0 && tnl.bg_thr <= 1.0)) throw ConfigError("negatives: --bg-thr must lie in [0, 1]");
    if (!(tnl.s_max > 0.0 && tnl.s_max <= 1.0)) throw ConfigError("negatives: --s-max must lie in (0, 1]");

    const ImageGroups groups = group_by_image(records);
    io::NameTable images;
    io::NameTable classes;
    Json per_image = Json::array();
    std::size_t total_normal = 0;
    std::size_t total_hard = 0;
    for (std::size_t g = 0; g < groups.ids.size(); ++g) {
        const auto it = blockers.find(groups.ids[g]);
        const std::vector<RotatedBox> none;
        const std::vector<RotatedBox>& block = it == blockers.end() ? none : it->second;

        std::vector<RotatedBox> proposals;
        std::vector<std::size_t> proposal_record;
        std::vector<Detection> preds;
        std::vector<std::size_t> pred_record;
        for (std::size_t i : groups.members[g]) {
            const DetectionRecord& r = records[i];
            if (is_proposal(r)) {
                proposals.push_back(r.box);
                proposal_record.push_back(i);
            } else {
                preds.push_back(io::to_detection(r, images, classes));
                pred_record.push_back(i);
            }
        }
        std::vector<RotatedBox> neg_boxes;
        std::vector<double> neg_bg;
        std::vector<std::size_t> neg_record;
        for (std::size_t k : unblocked_proposals(proposals, block, iou_thr)) {
            neg_boxes.push_back(proposals[k]);
            neg_bg.push_back(*records[proposal_record[k]].bg_score);
            neg_record.push_back(proposal_record[k]);
        }

        const NegativeSelection sel = select_negatives(neg_boxes, neg_bg, preds, tnl);
        Json kept = Json::array();
        for (std::size_t k : sel.kept_normal) kept.push_back(neg_record[k]);
        Json hard = Json::array();
        for (const HardNegative& h : sel.hard) {
            hard.push_back(Json{{"record", pred_record[h.index]}, {"score", h.score}, {"weight", h.weight}});
        }
        total_normal += sel.kept_normal.size();
        total_hard += sel.hard.size();
        per_image.push_back(Json{{"image_id", groups.ids[g]},
                                 {"num_proposals", proposals.size()},
                                 {"num_negative_proposals", neg_boxes.size()},
                                 {"kept_normal", kept},
                                 {"hard", hard},
                                 {"dropped_duplicates", sel.dropped_duplicates}});
    }

    Json out;
    out["config"] = Json{{"bg_thr", tnl.bg_thr},
                         {"s_max", tnl.s_max},
                         {"negative_iou", iou_thr},
                         {"duplicate_iou", tnl.duplicate_iou},
                         {"assign", assign_doc.value("config", Json::object())}};
    out["n_neg_normal"] = total_normal;
    out["n_neg_hard"] = total_hard;
    out["images"] = std::move(per_image);
    io::write_json_file(args.out, out);
}

void evaluate(const EvaluateArgs& args) {
    if (!(args.iou > 0.0 && args.iou <= 1.0)) throw ConfigError("evaluate: --iou must lie in (0, 1]");
    const auto pred_records = io::read_detection_records_file(args.preds);
    const auto gt_records = io::read_detection_records_file(args.gt);
    io::NameTable images;
    io::NameTable classes;
    std::vector<Detection> gts;
    for (const DetectionRecord& r : gt_records) gts.push_back(io::to_detection(r, images, classes));
    std::vector<Detection> preds;
    for (const DetectionRecord& r : pred_records) {
        if (!is_proposal(r)) preds.push_back(io::to_detection(r, images, classes));
    }
    EvalOptions opt;
    opt.iou_thr = args.iou;
    const EvalReport report = ssod::evaluate(preds, gts, opt);

    Json out;
    out["config"] = Json{{"iou", opt.iou_thr}, {"small_area", opt.small_area}, {"count_difficult", opt.count_difficult}};
    out.update(io::to_json(report, classes));
    io::write_json_file(args.out, out);
}

void pipeline(const PipelineArgs& args) {
    const RunConfig cfg = io::load_run_config(args.config);
    const std::filesystem::path dir(args.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

    const Json echo = io::run_config_to_json(cfg);
    Json history = Json::array();
    const auto sink = [&](const IterationRecord& rec) {
        Json j;
        j["config"] = echo;
        j.update(io::to_json(rec));
        char name[32];
        std::snprintf(name, sizeof name, "iter_%04zu.json", rec.iteration);
        io::write_json_file((dir / name).string(), j);

        std::size_t n_pseudo = 0;
        for (const UnlabeledSceneRecord& s : rec.scenes) n_pseudo += s.pseudo.size();
        history.push_back(Json{{"iteration", rec.iteration},
                               {"t_small", rec.sat.t_small},
                               {"t_large", rec.sat.t_large},
                               {"n_pseudo", n_pseudo},
                               {"n_pos_small", rec.n_pos_small},
                               {"n_pos_large", rec.n_pos_large},
                               {"n_neg_normal", rec.n_neg_normal},
                               {"n_neg_hard", rec.n_neg_hard},
                               {"l_sup", rec.l_sup},
                               {"l_unsup", rec.l_unsup},
                               {"loss", rec.loss},
                               {"ema_gap", rec.ema_gap_after}});
    };
    const EmaState final_state = run_pipeline(cfg, args.iters, args.seed, sink);

    Json summary;
    summary["config"] = echo;
    summary["iterations"] = args.iters;
    summary["seed"] = args.seed;
    summary["history"] = std::move(history);
    summary["teacher"] = final_state.teacher;
    summary["student"] = final_state.student;
    io::write_json_file((dir / "summary.json").string(), summary);
}

}  // namespace ssod::cli

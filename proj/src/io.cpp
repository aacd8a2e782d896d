#include "ssod/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ssod/error.hpp"

namespace ssod::io {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

bool parse_double(std::string_view tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// --- JSON schema helpers -------------------------------------------------

double number_field(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string(key) + ": missing required field");
    if (!it->is_number()) throw SchemaError(std::string(key) + ": expected a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw SchemaError(std::string(key) + ": expected a finite number");
    return v;
}

std::string string_field(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string(key) + ": missing required field");
    if (!it->is_string()) throw SchemaError(std::string(key) + ": expected a string");
    std::string v = it->get<std::string>();
    if (v.empty()) throw SchemaError(std::string(key) + ": must not be empty");
    return v;
}

double unit_interval(const Json& j, const char* key) {
    const double v = number_field(j, key);
    if (v < 0.0 || v > 1.0) {
        std::ostringstream os;
        os << key << ": expected a value in [0, 1], got " << v;
        throw SchemaError(os.str());
    }
    return v;
}

// Reads the known keys of one config object and rejects the rest.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config: " + path_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        const std::string where = "config: " + path_ + "." + key;
        if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) throw ConfigError(where + ": expected a number");
            out = it->template get<double>();
        } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::size_t>) {
            if (!it->is_number_integer()) throw ConfigError(where + ": expected an integer");
            if constexpr (std::is_same_v<T, std::size_t>) {
                if (it->template get<long long>() < 0) throw ConfigError(where + ": expected a non-negative integer");
            }
            out = it->template get<T>();
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!it->is_array()) throw ConfigError(where + ": expected an array of numbers");
            out.clear();
            for (const auto& v : *it) {
                if (!v.is_number()) throw ConfigError(where + ": expected an array of numbers");
                out.push_back(v.template get<double>());
            }
        } else if constexpr (std::is_same_v<T, BetaParams>) {
            Section beta(*it, path_ + "." + key);
            beta.get("alpha", out.alpha);
            beta.get("beta", out.beta);
            beta.finish();
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError("config: " + path_ + "." + key + ": unknown key");
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Json beta_json(const BetaParams& b) { return Json{{"alpha", b.alpha}, {"beta", b.beta}}; }

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------

DotaParseResult parse_dota(std::string_view text) {
    DotaParseResult result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto tokens = split_ws(line);
        if (tokens.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (starts_with(tokens[0], "imagesource:") || starts_with(tokens[0], "gsd:")) continue;

        if (tokens.size() != 10) {
            result.errors.push_back({line_no, "expected 10 tokens (8 coordinates, category, difficult), got " +
                                                  std::to_string(tokens.size())});
            continue;
        }
        DotaRecord rec;
        rec.line = line_no;
        bool ok = true;
        for (std::size_t i = 0; i < 4 && ok; ++i) {
            ok = parse_double(tokens[2 * i], rec.quad[i].x) && parse_double(tokens[2 * i + 1], rec.quad[i].y);
        }
        if (!ok) {
            result.errors.push_back({line_no, "non-numeric coordinate"});
            continue;
        }
        rec.category = std::string(tokens[8]);
        if (tokens[9] != "0" && tokens[9] != "1") {
            result.errors.push_back({line_no, "difficult flag must be 0 or 1"});
            continue;
        }
        rec.difficult = tokens[9] == "1";
        try {
            rec.box = quad_to_box(rec.quad);
        } catch (const Error& e) {
            result.errors.push_back({line_no, e.what()});
            continue;
        }
        result.records.push_back(std::move(rec));
        if (end == text.size()) break;
    }
    return result;
}

// ---------------------------------------------------------------------------

DetectionRecord record_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("record: expected a JSON object");
    static const std::set<std::string> known{"image_id", "cx",    "cy",       "w",         "h",
                                             "theta",    "class", "score",    "bg_score",  "difficult"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw SchemaError(key + ": unknown field");
    }
    DetectionRecord r;
    r.image_id = string_field(j, "image_id");
    r.box.cx = number_field(j, "cx");
    r.box.cy = number_field(j, "cy");
    r.box.w = number_field(j, "w");
    r.box.h = number_field(j, "h");
    r.box.theta = number_field(j, "theta");
    if (r.box.w < kMinExtent) throw SchemaError("w: extent must be >= 1e-6");
    if (r.box.h < kMinExtent) throw SchemaError("h: extent must be >= 1e-6");
    r.class_name = string_field(j, "class");
    r.score = unit_interval(j, "score");
    if (j.contains("bg_score")) r.bg_score = unit_interval(j, "bg_score");
    if (j.contains("difficult")) {
        if (!j["difficult"].is_boolean()) throw SchemaError("difficult: expected a boolean");
        r.difficult = j["difficult"].get<bool>();
    }
    return r;
}

Json record_to_json(const DetectionRecord& r) {
    Json j;
    j["image_id"] = r.image_id;
    j["cx"] = r.box.cx;
    j["cy"] = r.box.cy;
    j["w"] = r.box.w;
    j["h"] = r.box.h;
    j["theta"] = r.box.theta;
    j["class"] = r.class_name;
    j["score"] = r.score;
    if (r.bg_score) j["bg_score"] = *r.bg_score;
    if (r.difficult) j["difficult"] = *r.difficult;
    return j;
}

std::vector<DetectionRecord> read_detection_records(std::istream& in) {
    std::vector<DetectionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(Json::parse(line)));
        } catch (const Json::parse_error& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<DetectionRecord> read_detection_records_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return read_detection_records(in);
    } catch (const SchemaError& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

void write_detection_records(std::ostream& out, std::span<const DetectionRecord> records) {
    for (const DetectionRecord& r : records) out << record_to_json(r).dump() << '\n';
}

void write_detection_records_file(const std::string& path, std::span<const DetectionRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_detection_records(out, records);
}

int NameTable::intern(const std::string& name) {
    const auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int idx = static_cast<int>(names_.size());
    names_.push_back(name);
    index_.emplace(name, idx);
    return idx;
}

std::optional<int> NameTable::find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

NameTable default_class_table(int num_classes) {
    NameTable t;
    for (int i = 0; i < num_classes; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "class-%02d", i);
        t.intern(buf);
    }
    return t;
}

std::string scene_image_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene-%04zu", index);
    return buf;
}

Detection to_detection(const DetectionRecord& r, NameTable& images, NameTable& classes) {
    Detection d;
    d.box = r.box;
    d.score = r.score;
    d.image = images.intern(r.image_id);
    d.label = classes.intern(r.class_name);
    d.difficult = r.difficult.value_or(false);
    return d;
}

DetectionRecord to_record(const Detection& d, const NameTable& images, const NameTable& classes) {
    DetectionRecord r;
    r.image_id = images.name(d.image);
    r.class_name = classes.name(d.label);
    r.box = d.box;
    r.score = d.score;
    if (d.difficult) r.difficult = true;
    return r;
}

// ---------------------------------------------------------------------------

RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    const auto sub = [&](const char* key, auto&& fill) {
        if (j.contains(key)) {
            Section s(j.at(key), key);
            fill(s);
            s.finish();
        }
    };
    PipelineConfig& p = c.pipeline;
    SceneConfig& s = c.scene;
    TeacherModel& t = c.teacher;
    AnchorGridSpec& a = c.anchors;
    for (const auto& [key, _] : j.items()) {
        if (key != "pipeline" && key != "scene" && key != "teacher" && key != "anchors") {
            throw ConfigError("config: " + key + ": unknown key");
        }
    }
    sub("pipeline", [&](Section& x) {
        x.get("alpha", p.alpha);
        x.get("p", p.p);
        x.get("k", p.k);
        x.get("bg_thr", p.bg_thr);
        x.get("s_max", p.s_max);
        x.get("floor", p.floor);
        x.get("small_area", p.small_area);
        x.get("ema_momentum", p.ema_momentum);
        x.get("labeled_per_batch", p.labeled_per_batch);
        x.get("unlabeled_per_batch", p.unlabeled_per_batch);
        x.get("labeled_pool", p.labeled_pool);
        x.get("unlabeled_pool", p.unlabeled_pool);
        x.get("negative_iou", p.negative_iou);
        x.get("max_hard", p.max_hard);
        x.get("param_count", p.param_count);
        x.get("student_lr", p.student_lr);
    });
    sub("scene", [&](Section& x) {
        x.get("num_scenes", s.num_scenes);
        x.get("width", s.width);
        x.get("height", s.height);
        x.get("min_objects", s.min_objects);
        x.get("max_objects", s.max_objects);
        x.get("small_fraction", s.small_fraction);
        x.get("small_area", s.small_area);
        x.get("small_min_area", s.small_min_area);
        x.get("large_max_area", s.large_max_area);
        x.get("min_aspect", s.min_aspect);
        x.get("max_aspect", s.max_aspect);
        x.get("num_classes", s.num_classes);
        x.get("max_pairwise_iou", s.max_pairwise_iou);
        x.get("max_retries", s.max_retries);
    });
    sub("teacher", [&](Section& x) {
        x.get("small_score", t.small_score);
        x.get("large_score", t.large_score);
        x.get("small_miss_rate", t.small_miss_rate);
        x.get("large_miss_rate", t.large_miss_rate);
        x.get("fp_rate", t.fp_rate);
        x.get("fp_score", t.fp_score);
        x.get("center_noise_px", t.center_noise_px);
        x.get("extent_noise_px", t.extent_noise_px);
        x.get("angle_noise_rad", t.angle_noise_rad);
        x.get("proposals_per_object", t.proposals_per_object);
        x.get("background_proposals", t.background_proposals);
        x.get("proposal_jitter", t.proposal_jitter);
        x.get("proposal_object_iou", t.proposal_object_iou);
        x.get("object_bg", t.object_bg);
        x.get("background_bg", t.background_bg);
        x.get("positive_loss_mean", t.positive_loss_mean);
        x.get("negative_loss_mean", t.negative_loss_mean);
        x.get("hard_loss_mean", t.hard_loss_mean);
    });
    sub("anchors", [&](Section& x) {
        x.get("width", a.width);
        x.get("height", a.height);
        x.get("strides", a.strides);
        x.get("scales", a.scales);
        x.get("ratios", a.ratios);
    });
    validate(c);
    return c;
}

Json run_config_to_json(const RunConfig& c) {
    const PipelineConfig& p = c.pipeline;
    const SceneConfig& s = c.scene;
    const TeacherModel& t = c.teacher;
    const AnchorGridSpec& a = c.anchors;
    Json j;
    j["pipeline"] = Json{{"alpha", p.alpha},
                         {"p", p.p},
                         {"k", p.k},
                         {"bg_thr", p.bg_thr},
                         {"s_max", p.s_max},
                         {"floor", p.floor},
                         {"small_area", p.small_area},
                         {"ema_momentum", p.ema_momentum},
                         {"labeled_per_batch", p.labeled_per_batch},
                         {"unlabeled_per_batch", p.unlabeled_per_batch},
                         {"labeled_pool", p.labeled_pool},
                         {"unlabeled_pool", p.unlabeled_pool},
                         {"negative_iou", p.negative_iou},
                         {"max_hard", p.max_hard},
                         {"param_count", p.param_count},
                         {"student_lr", p.student_lr}};
    j["scene"] = Json{{"num_scenes", s.num_scenes},
                      {"width", s.width},
                      {"height", s.height},
                      {"min_objects", s.min_objects},
                      {"max_objects", s.max_objects},
                      {"small_fraction", s.small_fraction},
                      {"small_area", s.small_area},
                      {"small_min_area", s.small_min_area},
                      {"large_max_area", s.large_max_area},
                      {"min_aspect", s.min_aspect},
                      {"max_aspect", s.max_aspect},
                      {"num_classes", s.num_classes},
                      {"max_pairwise_iou", s.max_pairwise_iou},
                      {"max_retries", s.max_retries}};
    j["teacher"] = Json{{"small_score", beta_json(t.small_score)},
                        {"large_score", beta_json(t.large_score)},
                        {"small_miss_rate", t.small_miss_rate},
                        {"large_miss_rate", t.large_miss_rate},
                        {"fp_rate", t.fp_rate},
                        {"fp_score", beta_json(t.fp_score)},
                        {"center_noise_px", t.center_noise_px},
                        {"extent_noise_px", t.extent_noise_px},
                        {"angle_noise_rad", t.angle_noise_rad},
                        {"proposals_per_object", t.proposals_per_object},
                        {"background_proposals", t.background_proposals},
                        {"proposal_jitter", t.proposal_jitter},
                        {"proposal_object_iou", t.proposal_object_iou},
                        {"object_bg", beta_json(t.object_bg)},
                        {"background_bg", beta_json(t.background_bg)},
                        {"positive_loss_mean", t.positive_loss_mean},
                        {"negative_loss_mean", t.negative_loss_mean},
                        {"hard_loss_mean", t.hard_loss_mean}};
    j["anchors"] = Json{{"width", a.width}, {"height", a.height}, {"strides", a.strides}, {"scales", a.scales},
                        {"ratios", a.ratios}};
    return j;
}

RunConfig load_run_config(const std::string& path) {
    std::string effective = path;
    if (effective.empty()) {
        if (const char* env = std::getenv("SSOD_CONFIG"); env != nullptr) effective = env;
    }
    if (effective.empty()) return RunConfig{};
    return run_config_from_json(read_json_file(effective));
}

// ---------------------------------------------------------------------------

Json to_json(const SatThresholds& t) {
    return Json{{"p", t.p},
                {"floor", t.floor},
                {"t_small", t.t_small},
                {"t_large", t.t_large},
                {"n_small_candidates", t.n_small_candidates},
                {"n_large_candidates", t.n_large_candidates},
                {"n_small_kept", t.n_small_kept},
                {"n_large_kept", t.n_large_kept}};
}

Json to_json(const SizeMetrics& m) {
    return Json{{"precision", optional_json(m.precision)},
                {"recall", optional_json(m.recall)},
                {"n_predictions", m.n_predictions},
                {"n_ground_truth", m.n_ground_truth}};
}

Json to_json(const EvalReport& r, const NameTable& classes) {
    Json ap = Json::object();
    for (const auto& [label, value] : r.ap) ap[classes.name(label)] = value;
    return Json{{"ap", ap},
                {"map", r.map},
                {"precision", r.precision},
                {"recall", r.recall},
                {"false_alarm", r.false_alarm},
                {"tp", r.tp},
                {"fp", r.fp},
                {"num_predictions", r.num_predictions},
                {"num_ground_truth", r.num_ground_truth},
                {"by_size", Json{{"small", to_json(r.by_size.small)}, {"large", to_json(r.by_size.large)}}}};
}

Json to_json(const IterationRecord& rec) {
    Json scenes = Json::array();
    for (const UnlabeledSceneRecord& s : rec.scenes) {
        Json pseudo = Json::array();
        for (std::size_t i = 0; i < s.pseudo.size(); ++i) {
            const Detection& d = s.pseudo[i];
            pseudo.push_back(Json{{"cx", d.box.cx},
                                  {"cy", d.box.cy},
                                  {"w", d.box.w},
                                  {"h", d.box.h},
                                  {"theta", d.box.theta},
                                  {"label", d.label},
                                  {"score", d.score},
                                  {"size", to_string(size_class(d.box))},
                                  {"positives", i < s.positives.size() ? Json(s.positives[i]) : Json::array()},
                                  {"min_wd", i < s.min_wd.size() ? Json(s.min_wd[i]) : Json(nullptr)}});
        }
        Json hard = Json::array();
        for (const HardNegative& h : s.negatives.hard) {
            hard.push_back(Json{{"index", h.index}, {"score", h.score}, {"weight", h.weight}});
        }
        scenes.push_back(Json{{"pseudo", pseudo},
                              {"n_pos_small", s.n_pos_small},
                              {"n_pos_large", s.n_pos_large},
                              {"n_negative_proposals", s.n_negative_proposals},
                              {"kept_normal", s.negatives.kept_normal},
                              {"hard", hard},
                              {"dropped_duplicates", s.negatives.dropped_duplicates},
                              {"negative_loss", s.negative_loss}});
    }
    return Json{{"iteration", rec.iteration},
                {"seed", rec.seed},
                {"sat", to_json(rec.sat)},
                {"n_pos_small", rec.n_pos_small},
                {"n_pos_large", rec.n_pos_large},
                {"weight_small", rec.weight_small},
                {"weight_large", rec.weight_large},
                {"n_neg_normal", rec.n_neg_normal},
                {"n_neg_hard", rec.n_neg_hard},
                {"l_pos", rec.l_pos},
                {"l_neg", rec.l_neg},
                {"l_sup", rec.l_sup},
                {"l_unsup", rec.l_unsup},
                {"loss", rec.loss},
                {"ema_gap_before", rec.ema_gap_before},
                {"ema_gap_after", rec.ema_gap_after},
                {"scenes", scenes}};
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw SchemaError(path + ": invalid JSON: " + e.what());
    }
}

}  // namespace ssod::io

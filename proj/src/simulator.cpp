#include "ssod/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssod/error.hpp"

namespace ssod {

namespace {

constexpr std::uint64_t kObjectStream = 1;

double log_uniform(double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

void check_beta(const BetaParams& p, const char* name) {
    require(p.alpha > 0.0 && p.beta > 0.0 && std::isfinite(p.alpha) && std::isfinite(p.beta),
            std::string(name) + ": Beta parameters must be positive");
}

bool is_rate(double r) { return r >= 0.0 && r <= 1.0; }

// Half extents of the axis-aligned hull of a rotated box.
std::pair<double, double> half_hull(double w, double h, double theta) {
    const double c = std::abs(std::cos(theta));
    const double s = std::abs(std::sin(theta));
    return {(w * c + h * s) / 2.0, (w * s + h * c) / 2.0};
}

// Shape of an object of the given size class: area log-uniform in the
// group's range, aspect uniform, angle uniform.
RotatedBox sample_shape(const SceneConfig& cfg, bool small, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> aspect(cfg.min_aspect, cfg.max_aspect);
    std::uniform_real_distribution<double> angle(-kPi / 2.0, kPi / 2.0);
    const double lo = small ? cfg.small_min_area : cfg.small_area;
    const double hi = small ? cfg.small_area : cfg.large_max_area;
    RotatedBox b;
    do {
        const double area = log_uniform(lo, hi, rng);
        const double r = aspect(rng);
        b.w = std::sqrt(area * r);
        b.h = std::sqrt(area / r);
    } while (is_small(b, cfg.small_area) != small);
    b.theta = angle(rng);
    return b;
}

}  // namespace

std::size_t SimScene::count(SizeClass s, double small_area) const {
    return static_cast<std::size_t>(std::count_if(objects.begin(), objects.end(), [&](const Detection& d) {
        return size_class(d.box, small_area) == s;
    }));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    const auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ stream) ^ index);
}

double sample_beta(const BetaParams& p, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(p.alpha, 1.0);
    std::gamma_distribution<double> gb(p.beta, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x + y > 0.0 ? x / (x + y) : p.mean();
}

std::vector<double> sample_losses(std::size_t n, double mean, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(2.0, mean / 2.0);
    std::vector<double> out(n);
    for (double& v : out) v = g(rng);
    return out;
}

void validate(const SceneConfig& c) {
    require(c.num_scenes >= 0, "scene: num_scenes must be >= 0");
    require(c.width > 0 && c.height > 0, "scene: image size must be positive");
    require(c.min_objects >= 0 && c.max_objects >= c.min_objects, "scene: object count range is invalid");
    require(is_rate(c.small_fraction), "scene: small_fraction must lie in [0, 1]");
    require(c.small_min_area > 0.0 && c.small_min_area < c.small_area && c.small_area < c.large_max_area,
            "scene: area ranges must satisfy 0 < small_min_area < small_area < large_max_area");
    require(c.min_aspect >= 1.0 && c.max_aspect >= c.min_aspect, "scene: aspect range must start at >= 1");
    require(c.num_classes >= 1, "scene: num_classes must be >= 1");
    require(c.max_pairwise_iou >= 0.0, "scene: max_pairwise_iou must be >= 0");
    require(c.max_retries >= 1, "scene: max_retries must be >= 1");
}

void validate(const TeacherModel& t) {
    check_beta(t.small_score, "teacher.small_score");
    check_beta(t.large_score, "teacher.large_score");
    check_beta(t.fp_score, "teacher.fp_score");
    check_beta(t.object_bg, "teacher.object_bg");
    check_beta(t.background_bg, "teacher.background_bg");
    require(is_rate(t.small_miss_rate) && is_rate(t.large_miss_rate) && is_rate(t.fp_rate),
            "teacher: rates must lie in [0, 1]");
    require(t.center_noise_px >= 0.0 && t.extent_noise_px >= 0.0 && t.angle_noise_rad >= 0.0,
            "teacher: noise spreads must be >= 0");
    require(t.proposals_per_object >= 0 && t.background_proposals >= 0, "teacher: proposal counts must be >= 0");
    require(t.proposal_jitter >= 0.0, "teacher: proposal_jitter must be >= 0");
    require(t.positive_loss_mean > 0.0 && t.negative_loss_mean > 0.0 && t.hard_loss_mean > 0.0,
            "teacher: loss means must be positive");
}

SimScene gen_scene(const SceneConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    std::mt19937_64 rng(derive_seed(seed, kObjectStream, 0));
    SimScene scene;
    scene.width = cfg.width;
    scene.height = cfg.height;
    scene.num_classes = cfg.num_classes;

    std::uniform_int_distribution<int> count_dist(cfg.min_objects, cfg.max_objects);
    std::bernoulli_distribution small_dist(cfg.small_fraction);
    std::uniform_int_distribution<int> class_dist(0, cfg.num_classes - 1);
    const int n = count_dist(rng);
    const bool check_overlap = cfg.max_pairwise_iou < 1.0;

    for (int i = 0; i < n; ++i) {
        const bool small = small_dist(rng);
        RotatedBox box = sample_shape(cfg, small, rng);
        const int label = class_dist(rng);
        const auto [hx, hy] = half_hull(box.w, box.h, box.theta);
        if (2.0 * hx > cfg.width || 2.0 * hy > cfg.height) {
            throw ConfigError("scene: object larger than the image; lower large_max_area or raise max_aspect bounds");
        }
        std::uniform_real_distribution<double> px(hx, cfg.width - hx);
        std::uniform_real_distribution<double> py(hy, cfg.height - hy);

        // Only the position is resampled so that the size mix stays unbiased.
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
            box.cx = px(rng);
            box.cy = py(rng);
            placed = !check_overlap || std::none_of(scene.objects.begin(), scene.objects.end(), [&](const Detection& o) {
                return rotated_iou(o.box, box) > cfg.max_pairwise_iou;
            });
        }
        if (!placed) {
            throw ConfigError("scene: could not place object " + std::to_string(i) + " after " +
                              std::to_string(cfg.max_retries) + " retries");
        }
        scene.objects.push_back({box, label, 1.0, 0, false});
    }
    return scene;
}

TeacherOutput simulate_teacher(const SimScene& scene, const TeacherModel& t, std::uint64_t seed) {
    validate(t);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    TeacherOutput out;
    const auto& objects = scene.objects;

    const auto jitter = [&](const RotatedBox& b) {
        RotatedBox j = b;
        j.cx += t.center_noise_px * unit(rng);
        j.cy += t.center_noise_px * unit(rng);
        j.w = std::max(1.0, j.w + t.extent_noise_px * unit(rng));
        j.h = std::max(1.0, j.h + t.extent_noise_px * unit(rng));
        j.theta += t.angle_noise_rad * unit(rng);
        return j;
    };

    for (std::size_t i = 0; i < objects.size(); ++i) {
        const Detection& gt = objects[i];
        const bool small = is_small(gt.box);
        const double miss = small ? t.small_miss_rate : t.large_miss_rate;
        if (uni(rng) < miss) continue;
        Detection d = gt;
        d.box = jitter(gt.box);
        d.score = sample_beta(small ? t.small_score : t.large_score, rng);
        d.difficult = false;
        out.predictions.push_back(d);
        out.prediction_source.push_back(static_cast<int>(i));
    }

    std::binomial_distribution<int> fp_count(static_cast<int>(objects.size()), t.fp_rate);
    const int n_fp = objects.empty() ? 0 : fp_count(rng);
    std::uniform_int_distribution<int> class_dist(0, std::max(0, scene.num_classes - 1));
    const auto random_box = [&](double min_area, double max_area) {
        RotatedBox b;
        const double area = std::exp(std::log(min_area) + uni(rng) * (std::log(max_area) - std::log(min_area)));
        const double r = 1.0 + 2.0 * uni(rng);
        b.w = std::sqrt(area * r);
        b.h = std::sqrt(area / r);
        b.theta = -kPi / 2.0 + kPi * uni(rng);
        b.cx = uni(rng) * scene.width;
        b.cy = uni(rng) * scene.height;
        return b;
    };
    for (int i = 0; i < n_fp; ++i) {
        Detection d;
        d.box = random_box(36.0, 10000.0);
        d.label = class_dist(rng);
        d.score = sample_beta(t.fp_score, rng);
        d.image = objects.empty() ? 0 : objects.front().image;
        out.predictions.push_back(d);
        out.prediction_source.push_back(-1);
    }
    out.prediction_loss = sample_losses(out.predictions.size(), t.hard_loss_mean, rng);

    for (const Detection& gt : objects) {
        for (int k = 0; k < t.proposals_per_object; ++k) {
            RotatedBox p = gt.box;
            const double side = std::min(p.w, p.h);
            p.cx += t.proposal_jitter * side * unit(rng);
            p.cy += t.proposal_jitter * side * unit(rng);
            p.w *= std::exp(t.proposal_jitter * unit(rng));
            p.h *= std::exp(t.proposal_jitter * unit(rng));
            out.proposals.push_back(p);
        }
    }
    for (int k = 0; k < t.background_proposals; ++k) out.proposals.push_back(random_box(64.0, 40000.0));

    for (const RotatedBox& p : out.proposals) {
        double best = 0.0;
        int source = -1;
        for (std::size_t i = 0; i < objects.size(); ++i) {
            const double iou = rotated_iou(p, objects[i].box);
            if (iou > best) {
                best = iou;
                source = static_cast<int>(i);
            }
        }
        const bool on_object = best >= t.proposal_object_iou;
        out.proposal_source.push_back(on_object ? source : -1);
        out.proposal_bg.push_back(sample_beta(on_object ? t.object_bg : t.background_bg, rng));
    }
    out.proposal_loss = sample_losses(out.proposals.size(), t.negative_loss_mean, rng);
    return out;
}

AnchorSet gen_anchor_grid(const AnchorGridSpec& spec) {
    require(spec.width > 0 && spec.height > 0, "anchors: image size must be positive");
    require(!spec.strides.empty() && !spec.scales.empty() && !spec.ratios.empty(),
            "anchors: strides, scales and ratios must be non-empty");
    for (double s : spec.strides) require(s > 0.0, "anchors: strides must be positive");
    for (double s : spec.scales) require(s > 0.0, "anchors: scales must be positive");
    for (double r : spec.ratios) require(r > 0.0, "anchors: ratios must be positive");

    std::vector<RotatedBox> anchors;
    for (double stride : spec.strides) {
        const auto nx = static_cast<int>(std::ceil(spec.width / stride));
        const auto ny = static_cast<int>(std::ceil(spec.height / stride));
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                for (double scale : spec.scales) {
                    const double base = stride * scale;
                    for (double ratio : spec.ratios) {
                        const double root = std::sqrt(ratio);
                        anchors.push_back({(x + 0.5) * stride, (y + 0.5) * stride, base / root, base * root, 0.0});
                    }
                }
            }
        }
    }
    return AnchorSet(std::move(anchors), spec);
}

}  // namespace ssod

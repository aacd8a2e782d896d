#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "ssod/detection.hpp"
#include "ssod/sla.hpp"

namespace ssod {

// None of the distribution defaults below are measured values; they are
// shaped to reproduce the qualitative picture of an aerial-image detector:
// small objects are common and their correct detections are spread over
// the whole confidence range, while large objects score high and tight.

struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;

    double mean() const { return alpha / (alpha + beta); }
};

struct SceneConfig {
    /// Number of scenes emitted by the `simulate` command.
    int num_scenes = 4;
    int width = 1024;
    int height = 1024;
    /// Object count is uniform in [min_objects, max_objects].
    int min_objects = 20;
    int max_objects = 60;
    double small_fraction = 0.66;
    double small_area = kSmallArea;
    /// Areas are log-uniform within each group's range.
    double small_min_area = 36.0;
    double large_max_area = 40000.0;
    double min_aspect = 1.0;
    double max_aspect = 3.0;
    int num_classes = 15;
    /// Placement rejects positions overlapping an existing object above this IoU.
    double max_pairwise_iou = 0.3;
    int max_retries = 100;
};

struct TeacherModel {
    BetaParams small_score{2.2, 1.8};
    BetaParams large_score{17.0, 3.0};
    double small_miss_rate = 0.3;
    double large_miss_rate = 0.05;
    /// Expected false positives per ground-truth object.
    double fp_rate = 0.3;
    BetaParams fp_score{1.5, 4.0};
    double center_noise_px = 1.0;
    double extent_noise_px = 0.5;
    double angle_noise_rad = 0.02;
    int proposals_per_object = 3;
    int background_proposals = 150;
    /// Proposal centre jitter as a fraction of the object's short side.
    double proposal_jitter = 0.1;
    /// Proposals with IoU >= proposal_object_iou against some object draw
    /// their background score from object_bg, the rest from background_bg.
    double proposal_object_iou = 0.5;
    BetaParams object_bg{2.0, 5.0};
    BetaParams background_bg{12.0, 1.5};
    /// Means of the Gamma(shape 2) loss stand-ins.
    double positive_loss_mean = 1.0;
    double negative_loss_mean = 0.2;
    double hard_loss_mean = 0.5;
};

struct SimScene {
    int width = 1024;
    int height = 1024;
    int num_classes = 1;
    std::vector<Detection> objects;

    std::size_t count(SizeClass s, double small_area = kSmallArea) const;
};

struct TeacherOutput {
    std::vector<Detection> predictions;
    /// Per prediction: index of the source object, or -1 for a false positive.
    std::vector<int> prediction_source;
    std::vector<double> prediction_loss;
    std::vector<RotatedBox> proposals;
    std::vector<double> proposal_bg;
    /// Per proposal: best-overlapping object when IoU >= proposal_object_iou, else -1.
    std::vector<int> proposal_source;
    std::vector<double> proposal_loss;
};

/// splitmix64 finaliser over (base, stream, index). Every generator seeds
/// its std::mt19937_64 through this so that scenes can be produced in any
/// order or in parallel with identical results.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

double sample_beta(const BetaParams& p, std::mt19937_64& rng);

/// n draws from Gamma(shape 2, scale mean / 2).
std::vector<double> sample_losses(std::size_t n, double mean, std::mt19937_64& rng);

/// Throws ConfigError on out-of-range fields.
void validate(const SceneConfig& config);
void validate(const TeacherModel& teacher);

/// Throws ConfigError when an object cannot be placed within max_retries.
SimScene gen_scene(const SceneConfig& config, std::uint64_t seed);

TeacherOutput simulate_teacher(const SimScene& scene, const TeacherModel& teacher, std::uint64_t seed);

/// Dense axis-aligned grid, ordered by level, row, column, scale, ratio.
/// Count = sum over strides of ceil(W/s) * ceil(H/s) * |scales| * |ratios|.
AnchorSet gen_anchor_grid(const AnchorGridSpec& spec);

}  // namespace ssod

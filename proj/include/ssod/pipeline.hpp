#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ssod/sat.hpp"
#include "ssod/simulator.hpp"
#include "ssod/sla.hpp"
#include "ssod/tnl.hpp"

namespace ssod {

/// Knobs of one semi-supervised iteration. `alpha` weights the unlabeled
/// loss (the same quantity some write as beta).
struct PipelineConfig {
    double alpha = 4.0;
    double p = kDefaultPercentile;
    std::size_t k = kDefaultTopK;
    double bg_thr = kDefaultBackgroundThreshold;
    double s_max = kDefaultHardScoreMax;
    double floor = kDefaultCandidateFloor;
    double small_area = kSmallArea;
    double ema_momentum = 0.999;
    int labeled_per_batch = 1;
    int unlabeled_per_batch = 4;
    /// Scenes generated up front and sampled from each iteration.
    int labeled_pool = 8;
    int unlabeled_pool = 32;
    /// Proposals overlapping a pseudo-box or positive anchor at least this
    /// much are not negative proposals.
    double negative_iou = 0.5;
    /// 0 means unlimited.
    std::size_t max_hard = 0;
    /// Size of the abstract parameter vectors and the step of the
    /// pseudo-gradient applied to the student each iteration.
    std::size_t param_count = 16;
    double student_lr = 1e-3;
};

struct RunConfig {
    PipelineConfig pipeline;
    SceneConfig scene;
    TeacherModel teacher;
    AnchorGridSpec anchors;
};

/// Throws ConfigError on any out-of-range value in any section.
void validate(const PipelineConfig& config);
void validate(const RunConfig& config);

/// Stand-ins for model weights.
struct EmaState {
    std::vector<double> teacher;
    std::vector<double> student;
};

struct DatasetBatch {
    std::vector<SimScene> labeled;
    std::vector<SimScene> unlabeled;
};

struct Dataset {
    std::vector<SimScene> labeled;
    std::vector<SimScene> unlabeled;
};

struct UnlabeledSceneRecord {
    std::vector<Detection> pseudo;
    /// Positive anchor indices per pseudo-box after conflict resolution.
    std::vector<std::vector<std::size_t>> positives;
    std::vector<double> min_wd;
    std::size_t n_pos_small = 0;
    std::size_t n_pos_large = 0;
    std::size_t n_negative_proposals = 0;
    NegativeSelection negatives;
    double negative_loss = 0.0;
};

struct IterationRecord {
    std::size_t iteration = 0;
    std::uint64_t seed = 0;
    SatThresholds sat;
    std::vector<UnlabeledSceneRecord> scenes;
    std::size_t n_pos_small = 0;
    std::size_t n_pos_large = 0;
    double weight_small = 1.0;
    double weight_large = 1.0;
    std::size_t n_neg_normal = 0;
    std::size_t n_neg_hard = 0;
    double l_pos = 0.0;
    double l_neg = 0.0;
    double l_sup = 0.0;
    double l_unsup = 0.0;
    double loss = 0.0;
    /// |teacher - student| before and after the EMA step (same student).
    double ema_gap_before = 0.0;
    double ema_gap_after = 0.0;
};

struct IterationResult {
    IterationRecord record;
    EmaState state;
};

/// teacher' = m teacher + (1 - m) student, elementwise. Throws ConfigError
/// on a length mismatch or m outside (0, 1).
EmaState ema_update(const EmaState& state, double momentum);

/// l_sup + alpha * l_unsup.
double combine_losses(double l_sup, double l_unsup, double alpha);

/// Student drawn from N(0, 1), teacher offset from it by N(0, 0.1) noise.
EmaState init_ema_state(std::size_t param_count, std::uint64_t seed);

Dataset build_dataset(const RunConfig& config, std::uint64_t seed);

/// Uniform draws (with replacement) from the two pools.
DatasetBatch sample_batch(const Dataset& dataset, const PipelineConfig& config, std::uint64_t seed);

/// One teacher-student iteration: teacher simulation on the unlabeled
/// scenes, size-aware thresholding over the whole batch, top-k WD assignment
/// with size-aware positive reweighting, teacher-guided negative selection
/// with weighted hard negatives, loss combination, then a student step and
/// one EMA update. Deterministic in (batch, state, config, seed).
IterationResult run_iteration(const DatasetBatch& batch, const EmaState& state, const RunConfig& config,
                              std::uint64_t seed);

/// Runs `iterations` iterations from a dataset and EMA state derived from
/// `seed`, handing each record to `sink`. Returns the final EMA state.
EmaState run_pipeline(const RunConfig& config, std::size_t iterations, std::uint64_t seed,
                      const std::function<void(const IterationRecord&)>& sink);

}  // namespace ssod

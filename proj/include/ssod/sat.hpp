#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssod/detection.hpp"

namespace ssod {

inline constexpr double kDefaultCandidateFloor = 0.5;
inline constexpr double kDefaultPercentile = 35.0;

/// Teacher predictions whose score is strictly above `floor`.
struct CandidatePool {
    std::vector<Detection> detections;
    double floor = kDefaultCandidateFloor;
};

/// Per-size-group thresholds derived for one batch, with the bookkeeping
/// needed to audit them. A group with no candidates records `floor`.
struct SatThresholds {
    double t_small = kDefaultCandidateFloor;
    double t_large = kDefaultCandidateFloor;
    double p = kDefaultPercentile;
    double floor = kDefaultCandidateFloor;
    std::size_t n_small_candidates = 0;
    std::size_t n_large_candidates = 0;
    std::size_t n_small_kept = 0;
    std::size_t n_large_kept = 0;
};

struct PseudoLabelSet {
    /// Sorted by score descending; equal scores keep input order.
    std::vector<Detection> pseudo;
    SatThresholds thresholds;
};

CandidatePool collect_candidates(std::span<const Detection> preds, double floor = kDefaultCandidateFloor);

/// Nearest-rank percentile: the element of rank ceil(p/100 * n) (1-based) in
/// ascending order, with p = 0 mapping to the minimum. Throws EmptyGroupError
/// on an empty list and ConfigError when p is outside [0, 100].
double percentile_threshold(std::span<const double> scores, double p);

/// Size-aware adaptive thresholding over one batch of teacher predictions.
/// Candidates (score > floor) are split into small and large groups, each
/// group gets its own p-th percentile threshold, and a candidate becomes a
/// pseudo-label iff its score >= its group threshold.
PseudoLabelSet select_pseudo_labels(std::span<const Detection> preds, double p = kDefaultPercentile,
                                    double floor = kDefaultCandidateFloor, double small_area = kSmallArea);

/// Single global threshold (inclusive), the conventional selection rule.
std::vector<Detection> select_fixed_threshold(std::span<const Detection> preds, double threshold);

}  // namespace ssod

#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ssod/detection.hpp"

namespace ssod {

inline constexpr double kDefaultBackgroundThreshold = 0.7;
inline constexpr double kDefaultHardScoreMax = 0.5;

struct TnlConfig {
    double bg_thr = kDefaultBackgroundThreshold;
    double s_max = kDefaultHardScoreMax;
    /// Upper bound on mined hard negatives; the lowest-score ones are kept.
    std::size_t max_hard = std::numeric_limits<std::size_t>::max();
    /// A kept negative proposal overlapping a hard prediction at least this
    /// much is dropped in favour of the hard entry.
    double duplicate_iou = 0.5;
};

struct HardNegative {
    std::size_t index = 0;  ///< into the teacher prediction list
    double score = 0.0;
    double weight = 0.0;    ///< 2 (1 - s^2)
};

struct HardLoss {
    double loss = 0.0;
    double score = 0.0;
};

struct NegativeSelection {
    std::vector<std::size_t> kept_normal;  ///< into the negative proposal list
    std::vector<HardNegative> hard;
    double bg_thr = kDefaultBackgroundThreshold;
    double s_max = kDefaultHardScoreMax;
    /// Proposals that passed the background filter but were dropped as
    /// spatial duplicates of a hard negative.
    std::size_t dropped_duplicates = 0;
};

/// Weight of a hard negative with teacher confidence s: 2 (1 - s^2).
inline double hard_negative_weight(double s) { return 2.0 * (1.0 - s * s); }

/// Indices of proposals whose IoU with every blocker is below iou_thr. The
/// blockers are the pseudo-boxes and positive anchors of the image, so what
/// remains is the pool of negative proposals.
std::vector<std::size_t> unblocked_proposals(std::span<const RotatedBox> proposals,
                                             std::span<const RotatedBox> blockers, double iou_thr = 0.5);

/// Indices whose teacher background score is strictly above bg_thr.
std::vector<std::size_t> filter_negatives(std::span<const double> bg_scores,
                                          double bg_thr = kDefaultBackgroundThreshold);

/// Teacher predictions with score strictly below s_max, weighted by
/// hard_negative_weight and sorted by weight descending (index on ties).
std::vector<HardNegative> mine_hard_negatives(std::span<const Detection> teacher_preds,
                                              double s_max = kDefaultHardScoreMax,
                                              std::size_t max_count = std::numeric_limits<std::size_t>::max());

/// sum 2 (1 - s_i^2) L_h^i + sum L_n^i. Throws DomainError on negative or
/// non-finite losses and on hard scores outside [0, s_max).
double negative_loss(std::span<const double> normal_losses, std::span<const HardLoss> hard,
                     double s_max = kDefaultHardScoreMax);

/// Both negative-learning steps on one image: background filtering of the
/// negative proposals and hard-negative mining, with hard entries winning
/// over spatially duplicated normal ones.
NegativeSelection select_negatives(std::span<const RotatedBox> negative_proposals,
                                   std::span<const double> bg_scores, std::span<const Detection> teacher_preds,
                                   const TnlConfig& config = {});

}  // namespace ssod

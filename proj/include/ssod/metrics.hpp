#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ssod/detection.hpp"

namespace ssod {

inline constexpr double kDefaultMatchIou = 0.5;

enum class MatchKind { tp, fp, ignored };

struct PredictionMatch {
    MatchKind kind = MatchKind::fp;
    int gt = -1;  ///< matched ground-truth index, -1 for false positives
};

/// Matching of one image and one class. `predictions` is aligned with the
/// input prediction order.
struct MatchResult {
    std::vector<PredictionMatch> predictions;
    std::vector<bool> gt_detected;
    std::size_t tp = 0;
    std::size_t fp = 0;
    /// Predictions absorbed by difficult ground truth: neither TP nor FP.
    std::size_t ignored = 0;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct EvalOptions {
    double iou_thr = kDefaultMatchIou;
    double small_area = kSmallArea;
    /// When false, difficult ground truth is matchable but never counted
    /// as missed, and predictions matching it are ignored.
    bool count_difficult = false;
};

struct SizeMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::size_t n_predictions = 0;
    std::size_t n_ground_truth = 0;
};

struct SizeQuality {
    SizeMetrics small;
    SizeMetrics large;
};

struct EvalReport {
    /// AP per class label; classes without ground truth are absent.
    std::map<int, double> ap;
    double map = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double false_alarm = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t num_predictions = 0;
    std::size_t num_ground_truth = 0;
    SizeQuality by_size;
};

/// Greedy matching in descending score order (input order on ties). Each
/// prediction takes the highest-IoU unmatched ground truth with IoU >= thr,
/// lower index on IoU ties. Callers pass one image and one class.
MatchResult match_detections(std::span<const Detection> preds, std::span<const Detection> gts,
                             double iou_thr = kDefaultMatchIou, bool count_difficult = false);

/// Precision/recall after each prediction of a descending-score sweep.
std::vector<PrPoint> precision_recall_points(const std::vector<bool>& tp_flags_in_score_order,
                                             std::size_t num_positives);

/// All-point interpolated AP: area under the monotone precision envelope.
double average_precision(std::span<const PrPoint> points);

/// FP / P over the non-ignored predictions; 0 for an empty set.
double false_alarm(const MatchResult& match);

/// Per-size precision (by pseudo-label size) and recall (by ground-truth
/// size) at the IoU threshold, class-aware and per image. Empty groups report
/// no value rather than 0.
SizeQuality pseudo_label_quality(std::span<const Detection> pseudo, std::span<const Detection> gts,
                                 const EvalOptions& options = {});

/// Full evaluation over detections from many images and classes, grouped by
/// (Detection::image, Detection::label).
EvalReport evaluate(std::span<const Detection> preds, std::span<const Detection> gts, const EvalOptions& options = {});

}  // namespace ssod

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssod/detection.hpp"
#include "ssod/geometry.hpp"

namespace ssod {

inline constexpr std::size_t kDefaultTopK = 2;

/// Parameters of a dense axis-aligned anchor grid. Anchor side length at a
/// level is stride * scale; ratio r = h / w at constant area.
struct AnchorGridSpec {
    int width = 1024;
    int height = 1024;
    std::vector<double> strides{8, 16, 32, 64, 128};
    std::vector<double> scales{8};
    std::vector<double> ratios{0.5, 1.0, 2.0};
};

/// Validated anchor boxes and the grid spec that produced them.
class AnchorSet {
public:
    AnchorSet() = default;
    explicit AnchorSet(std::vector<RotatedBox> anchors, AnchorGridSpec grid = {});

    const std::vector<RotatedBox>& boxes() const { return boxes_; }
    const AnchorGridSpec& grid() const { return grid_; }
    std::size_t size() const { return boxes_.size(); }
    bool empty() const { return boxes_.empty(); }

private:
    std::vector<RotatedBox> boxes_;
    AnchorGridSpec grid_;
};

/// Dense row-major matrix of squared Wasserstein distances, one row per
/// pseudo-box and one column per anchor. Lower means more similar.
class WdMatrix {
public:
    WdMatrix() = default;
    WdMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// The assigners here never produce `ignore`: anchors that are not
/// positive are negative candidates for the negative-learning stage.
enum class AnchorLabel : std::uint8_t { negative, positive, ignore };

struct AssignmentResult {
    std::size_t num_pseudo = 0;
    std::size_t num_anchors = 0;
    /// Per anchor: index of the target pseudo-box, or -1 when negative.
    std::vector<int> target;
    /// Per pseudo-box: anchors selected before conflict resolution, best first.
    std::vector<std::vector<std::size_t>> candidates;
    /// Per pseudo-box: positive anchors after conflict resolution, best first.
    std::vector<std::vector<std::size_t>> positives;
    /// Per pseudo-box minimum WD over all anchors (top-k assignment only).
    std::vector<double> min_wd;
    /// Per pseudo-box maximum IoU over all anchors (IoU baseline only).
    std::vector<double> max_iou;

    AnchorLabel label(std::size_t anchor) const {
        return target[anchor] >= 0 ? AnchorLabel::positive : AnchorLabel::negative;
    }
    std::size_t num_positive() const;
};

/// Per-positive loss value tagged with the size class of its target.
struct LossSample {
    double value = 0.0;
    SizeClass size = SizeClass::large;
};

struct ReweightedLoss {
    double total = 0.0;
    /// Aligned with the input samples.
    std::vector<double> weights;
    std::size_t n_small = 0;
    std::size_t n_large = 0;
    double small_contribution = 0.0;
    double large_contribution = 0.0;
};

WdMatrix wd_similarity_matrix(std::span<const RotatedBox> pseudo, const AnchorSet& anchors);

/// For every pseudo-box the k lowest-WD anchors (ties to the lower anchor
/// index) are candidates. An anchor claimed by several pseudo-boxes goes to
/// the one with the smaller WD (ties to the lower pseudo index); losers keep
/// their other candidates and are not backfilled. Throws ConfigError if k == 0.
AssignmentResult topk_assign(const WdMatrix& matrix, std::size_t k = kDefaultTopK);

/// Same result as topk_assign(wd_similarity_matrix(pseudo, anchors), k)
/// without materialising the matrix; keeps only the k best entries per row.
AssignmentResult topk_assign(std::span<const RotatedBox> pseudo, const AnchorSet& anchors,
                             std::size_t k = kDefaultTopK);

/// Conventional rule: an anchor is positive iff its best rotated IoU with any
/// pseudo-box is >= pos_thr; the best-matching pseudo-box (lowest index on
/// ties) becomes its target.
AssignmentResult baseline_iou_assign(std::span<const RotatedBox> pseudo, const AnchorSet& anchors,
                                     double pos_thr = 0.5);

/// Size-aware positive-loss reweighting:
///   L_pos = N_pos / (2 N_s) * sum(small) + N_pos / (2 N_l) * sum(large).
/// If either group is empty every weight is 1; an empty input gives total 0.
ReweightedLoss positive_loss_reweight(std::span<const LossSample> losses);

}  // namespace ssod

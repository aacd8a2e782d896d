#include "ssod/tnl.hpp"

#include <algorithm>
#include <cmath>

#include "ssod/error.hpp"

namespace ssod {

std::vector<std::size_t> unblocked_proposals(std::span<const RotatedBox> proposals,
                                             std::span<const RotatedBox> blockers, double iou_thr) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const bool blocked = std::any_of(blockers.begin(), blockers.end(),
                                         [&](const RotatedBox& b) { return rotated_iou(proposals[i], b) >= iou_thr; });
        if (!blocked) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> filter_negatives(std::span<const double> bg_scores, double bg_thr) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < bg_scores.size(); ++i) {
        if (bg_scores[i] > bg_thr) kept.push_back(i);
    }
    return kept;
}

std::vector<HardNegative> mine_hard_negatives(std::span<const Detection> teacher_preds, double s_max,
                                              std::size_t max_count) {
    std::vector<HardNegative> hard;
    for (std::size_t i = 0; i < teacher_preds.size(); ++i) {
        const double s = teacher_preds[i].score;
        if (s < s_max) hard.push_back({i, s, hard_negative_weight(s)});
    }
    std::stable_sort(hard.begin(), hard.end(),
                     [](const HardNegative& a, const HardNegative& b) { return a.weight > b.weight; });
    if (hard.size() > max_count) hard.resize(max_count);
    return hard;
}

double negative_loss(std::span<const double> normal_losses, std::span<const HardLoss> hard, double s_max) {
    double total = 0.0;
    for (const HardLoss& h : hard) {
        if (!(h.loss >= 0.0) || !std::isfinite(h.loss)) throw DomainError("hard negative loss must be finite and >= 0");
        if (!(h.score >= 0.0 && h.score < s_max)) throw DomainError("hard negative score outside [0, s_max)");
        total += hard_negative_weight(h.score) * h.loss;
    }
    for (double l : normal_losses) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw DomainError("normal negative loss must be finite and >= 0");
        total += l;
    }
    return total;
}

NegativeSelection select_negatives(std::span<const RotatedBox> negative_proposals, std::span<const double> bg_scores,
                                   std::span<const Detection> teacher_preds, const TnlConfig& config) {
    if (negative_proposals.size() != bg_scores.size()) {
        throw ConfigError("negative proposals and background scores differ in length");
    }
    NegativeSelection sel;
    sel.bg_thr = config.bg_thr;
    sel.s_max = config.s_max;
    sel.hard = mine_hard_negatives(teacher_preds, config.s_max, config.max_hard);

    for (std::size_t idx : filter_negatives(bg_scores, config.bg_thr)) {
        const bool duplicate = std::any_of(sel.hard.begin(), sel.hard.end(), [&](const HardNegative& h) {
            return rotated_iou(negative_proposals[idx], teacher_preds[h.index].box) >= config.duplicate_iou;
        });
        if (duplicate) {
            ++sel.dropped_duplicates;
        } else {
            sel.kept_normal.push_back(idx);
        }
    }
    return sel;
}

}  // namespace ssod

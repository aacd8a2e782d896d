#include "ssod/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>
#include <utility>

namespace ssod {

namespace {

using GroupKey = std::pair<int, int>;  // (image, label)

struct Grouped {
    std::vector<Detection> items;
    std::vector<std::size_t> source;  // index into the caller's span
};

std::map<GroupKey, Grouped> group(std::span<const Detection> dets) {
    std::map<GroupKey, Grouped> out;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        Grouped& g = out[{dets[i].image, dets[i].label}];
        g.items.push_back(dets[i]);
        g.source.push_back(i);
    }
    return out;
}

std::vector<std::size_t> score_order(std::span<const Detection> preds) {
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    return order;
}

void accumulate(SizeMetrics& m, std::size_t tp_pred, std::size_t n_pred, std::size_t hit_gt, std::size_t n_gt) {
    // Running numerators are stashed in the optionals until finalize().
    m.precision = m.precision.value_or(0.0) + static_cast<double>(tp_pred);
    m.recall = m.recall.value_or(0.0) + static_cast<double>(hit_gt);
    m.n_predictions += n_pred;
    m.n_ground_truth += n_gt;
}

void finalize(SizeMetrics& m) {
    if (m.n_predictions > 0) {
        m.precision = m.precision.value_or(0.0) / static_cast<double>(m.n_predictions);
    } else {
        m.precision.reset();
    }
    if (m.n_ground_truth > 0) {
        m.recall = m.recall.value_or(0.0) / static_cast<double>(m.n_ground_truth);
    } else {
        m.recall.reset();
    }
}

}  // namespace

MatchResult match_detections(std::span<const Detection> preds, std::span<const Detection> gts, double iou_thr,
                             bool count_difficult) {
    MatchResult r;
    r.predictions.assign(preds.size(), {});
    r.gt_detected.assign(gts.size(), false);
    for (std::size_t p : score_order(preds)) {
        double best = -1.0;
        int best_gt = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (r.gt_detected[g]) continue;
            const double iou = rotated_iou(preds[p].box, gts[g].box);
            if (iou >= iou_thr && iou > best) {
                best = iou;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt < 0) {
            r.predictions[p] = {MatchKind::fp, -1};
            ++r.fp;
            continue;
        }
        r.gt_detected[static_cast<std::size_t>(best_gt)] = true;
        if (gts[static_cast<std::size_t>(best_gt)].difficult && !count_difficult) {
            r.predictions[p] = {MatchKind::ignored, best_gt};
            ++r.ignored;
        } else {
            r.predictions[p] = {MatchKind::tp, best_gt};
            ++r.tp;
        }
    }
    return r;
}

std::vector<PrPoint> precision_recall_points(const std::vector<bool>& tp_flags, std::size_t num_positives) {
    std::vector<PrPoint> pts;
    pts.reserve(tp_flags.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < tp_flags.size(); ++i) {
        if (tp_flags[i]) ++tp;
        const double recall = num_positives > 0 ? static_cast<double>(tp) / static_cast<double>(num_positives) : 0.0;
        pts.push_back({recall, static_cast<double>(tp) / static_cast<double>(i + 1)});
    }
    return pts;
}

double average_precision(std::span<const PrPoint> points) {
    // Precision envelope from the right, then sum rectangle areas over
    // recall increments.
    std::vector<double> envelope(points.size());
    double running = 0.0;
    for (std::size_t i = points.size(); i-- > 0;) {
        running = std::max(running, points[i].precision);
        envelope[i] = running;
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        ap += (points[i].recall - prev_recall) * envelope[i];
        prev_recall = points[i].recall;
    }
    return std::clamp(ap, 0.0, 1.0);
}

double false_alarm(const MatchResult& match) {
    const std::size_t p = match.tp + match.fp;
    return p == 0 ? 0.0 : static_cast<double>(match.fp) / static_cast<double>(p);
}

SizeQuality pseudo_label_quality(std::span<const Detection> pseudo, std::span<const Detection> gts,
                                 const EvalOptions& options) {
    SizeQuality q;
    auto pred_groups = group(pseudo);
    auto gt_groups = group(gts);
    std::map<GroupKey, bool> keys;
    for (const auto& [k, _] : pred_groups) keys[k] = true;
    for (const auto& [k, _] : gt_groups) keys[k] = true;

    for (const auto& [key, _] : keys) {
        const Grouped& pg = pred_groups[key];
        const Grouped& gg = gt_groups[key];
        const MatchResult m = match_detections(pg.items, gg.items, options.iou_thr, options.count_difficult);
        for (std::size_t i = 0; i < pg.items.size(); ++i) {
            if (m.predictions[i].kind == MatchKind::ignored) continue;
            SizeMetrics& s = is_small(pg.items[i].box, options.small_area) ? q.small : q.large;
            accumulate(s, m.predictions[i].kind == MatchKind::tp ? 1 : 0, 1, 0, 0);
        }
        for (std::size_t g = 0; g < gg.items.size(); ++g) {
            if (gg.items[g].difficult && !options.count_difficult) continue;
            SizeMetrics& s = is_small(gg.items[g].box, options.small_area) ? q.small : q.large;
            accumulate(s, 0, 0, m.gt_detected[g] ? 1 : 0, 1);
        }
    }
    finalize(q.small);
    finalize(q.large);
    return q;
}

EvalReport evaluate(std::span<const Detection> preds, std::span<const Detection> gts, const EvalOptions& options) {
    EvalReport rep;
    auto pred_groups = group(preds);
    auto gt_groups = group(gts);

    // Per class: (score, image, index-in-image, is_tp) across images.
    std::map<int, std::vector<std::tuple<double, int, std::size_t, bool>>> sweeps;
    std::map<int, std::size_t> positives;
    for (const auto& [key, gg] : gt_groups) {
        for (const Detection& g : gg.items) {
            if (!g.difficult || options.count_difficult) ++positives[key.second];
        }
        sweeps[key.second];
    }
    for (auto& [key, pg] : pred_groups) {
        const Grouped& gg = gt_groups[key];
        const MatchResult m = match_detections(pg.items, gg.items, options.iou_thr, options.count_difficult);
        rep.tp += m.tp;
        rep.fp += m.fp;
        for (std::size_t i = 0; i < pg.items.size(); ++i) {
            if (m.predictions[i].kind == MatchKind::ignored) continue;
            sweeps[key.second].emplace_back(pg.items[i].score, key.first, pg.source[i],
                                            m.predictions[i].kind == MatchKind::tp);
        }
    }

    double ap_sum = 0.0;
    for (auto& [label, sweep] : sweeps) {
        const std::size_t npos = positives[label];
        if (npos == 0) continue;
        std::stable_sort(sweep.begin(), sweep.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            return std::get<2>(a) < std::get<2>(b);
        });
        std::vector<bool> flags;
        for (const auto& s : sweep) flags.push_back(std::get<3>(s));
        const auto pts = precision_recall_points(flags, npos);
        rep.ap[label] = average_precision(pts);
        ap_sum += rep.ap[label];
    }
    rep.map = rep.ap.empty() ? 0.0 : ap_sum / static_cast<double>(rep.ap.size());

    for (const auto& [label, n] : positives) rep.num_ground_truth += n;
    rep.num_predictions = rep.tp + rep.fp;
    rep.false_alarm = rep.num_predictions == 0 ? 0.0 : static_cast<double>(rep.fp) / static_cast<double>(rep.num_predictions);
    rep.precision = 1.0 - rep.false_alarm;
    rep.recall = rep.num_ground_truth == 0 ? 0.0 : static_cast<double>(rep.tp) / static_cast<double>(rep.num_ground_truth);
    rep.by_size = pseudo_label_quality(preds, gts, options);
    return rep;
}

}  // namespace ssod

#include "ssod/sat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssod/error.hpp"

namespace ssod {

namespace {

void sort_by_score_desc(std::vector<Detection>& dets) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
}

}  // namespace

CandidatePool collect_candidates(std::span<const Detection> preds, double floor) {
    CandidatePool pool;
    pool.floor = floor;
    for (const Detection& d : preds) {
        if (d.score > floor) pool.detections.push_back(d);
    }
    return pool;
}

double percentile_threshold(std::span<const double> scores, double p) {
    if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile must lie in [0, 100], got " + std::to_string(p));
    if (scores.empty()) throw EmptyGroupError("percentile of an empty score group");
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    // The small slack keeps integral products such as 40 * 5 / 100 from
    // rounding up a rank.
    auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

PseudoLabelSet select_pseudo_labels(std::span<const Detection> preds, double p, double floor, double small_area) {
    if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile must lie in [0, 100], got " + std::to_string(p));
    if (!(floor >= 0.0 && floor < 1.0)) throw ConfigError("candidate floor must lie in [0, 1)");

    const CandidatePool pool = collect_candidates(preds, floor);
    std::vector<double> small_scores;
    std::vector<double> large_scores;
    for (const Detection& d : pool.detections) {
        (is_small(d.box, small_area) ? small_scores : large_scores).push_back(d.score);
    }

    PseudoLabelSet out;
    SatThresholds& t = out.thresholds;
    t.p = p;
    t.floor = floor;
    t.n_small_candidates = small_scores.size();
    t.n_large_candidates = large_scores.size();
    t.t_small = small_scores.empty() ? floor : percentile_threshold(small_scores, p);
    t.t_large = large_scores.empty() ? floor : percentile_threshold(large_scores, p);

    for (const Detection& d : pool.detections) {
        const bool small = is_small(d.box, small_area);
        if (small && d.score >= t.t_small) {
            out.pseudo.push_back(d);
            ++t.n_small_kept;
        } else if (!small && d.score >= t.t_large) {
            out.pseudo.push_back(d);
            ++t.n_large_kept;
        }
    }
    sort_by_score_desc(out.pseudo);
    return out;
}

std::vector<Detection> select_fixed_threshold(std::span<const Detection> preds, double threshold) {
    std::vector<Detection> out;
    for (const Detection& d : preds) {
        if (d.score >= threshold) out.push_back(d);
    }
    sort_by_score_desc(out);
    return out;
}

}  // namespace ssod

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ssod/error.hpp"
#include "ssod/simulator.hpp"
#include "ssod/sla.hpp"

using namespace ssod;

namespace {

WdMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    WdMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

// Independent statement of the assignment rule: every pseudo-box nominates
// its k smallest-WD anchors (lower index first on ties); an anchor nominated
// several times goes to the nomination with the smallest WD, then the lowest
// pseudo index.
std::vector<int> brute_force(const WdMatrix& m, std::size_t k) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> noms;  // (wd, pseudo, anchor)
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::vector<std::size_t> order(m.cols());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::make_pair(m(i, a), a) < std::make_pair(m(i, b), b);
        });
        for (std::size_t j = 0; j < std::min(k, order.size()); ++j) noms.emplace_back(m(i, order[j]), i, order[j]);
    }
    std::sort(noms.begin(), noms.end());
    std::vector<int> target(m.cols(), -1);
    for (const auto& [wd, i, a] : noms) {
        if (target[a] < 0) target[a] = static_cast<int>(i);
    }
    return target;
}

std::vector<RotatedBox> random_boxes(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> pos(0.0, 256.0);
    std::uniform_real_distribution<double> ext(lo, hi);
    std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
    std::vector<RotatedBox> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({pos(rng), pos(rng), ext(rng), ext(rng), ang(rng)});
    return out;
}

AnchorSet small_grid() {
    AnchorGridSpec spec;
    spec.width = 256;
    spec.height = 256;
    spec.strides = {8, 16, 32};
    spec.scales = {4};
    spec.ratios = {0.5, 1.0, 2.0};
    return gen_anchor_grid(spec);
}

}  // namespace

TEST(WdMatrix, EntriesMatchPairwise) {
    const std::vector<RotatedBox> pseudo{{10, 10, 8, 4, 0.2}, {50, 40, 30, 10, -0.4}};
    const AnchorSet anchors({{12, 10, 8, 8, 0}, {40, 40, 32, 16, 0}, {100, 100, 64, 64, 0}});
    const WdMatrix m = wd_similarity_matrix(pseudo, anchors);
    ASSERT_EQ(m.rows(), 2u);
    ASSERT_EQ(m.cols(), 3u);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m(i, j), wasserstein_sq(pseudo[i], anchors.boxes()[j]), 1e-9);
    }
}

TEST(WdMatrix, ExactAnchorIsRowMinimum) {
    const AnchorSet anchors({{0, 0, 16, 16, 0}, {10, 0, 16, 16, 0}, {30, 0, 16, 16, 0}});
    const std::vector<RotatedBox> pseudo{{10, 0, 16, 16, 0}};
    const WdMatrix m = wd_similarity_matrix(pseudo, anchors);
    EXPECT_EQ(m(0, 1), 0.0);
    EXPECT_LT(m(0, 1), m(0, 0));
    EXPECT_LT(m(0, 1), m(0, 2));
}

TEST(WdMatrix, RecedingAnchorsIncrease) {
    std::vector<RotatedBox> line;
    for (int i = 0; i < 10; ++i) line.push_back({5.0 * i, 0, 16, 8, 0});
    const std::vector<RotatedBox> pseudo{{-3, 0, 16, 8, 0}};
    const WdMatrix m = wd_similarity_matrix(pseudo, AnchorSet(line));
    for (std::size_t j = 1; j < m.cols(); ++j) EXPECT_LT(m(0, j - 1), m(0, j));
}

TEST(WdMatrix, EmptyPseudo) {
    const WdMatrix m = wd_similarity_matrix({}, small_grid());
    EXPECT_EQ(m.rows(), 0u);
    const AssignmentResult r = topk_assign(m, 2);
    EXPECT_EQ(r.num_positive(), 0u);
}

TEST(TopK, DirectOrdering) {
    const AssignmentResult r = topk_assign(from_rows({{1, 2, 3}}), 2);
    EXPECT_EQ(r.positives[0], (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(r.label(2), AnchorLabel::negative);
}

TEST(TopK, TieGoesToLowerAnchor) {
    const AssignmentResult r = topk_assign(from_rows({{1, 2, 2, 5}}), 2);
    EXPECT_EQ(r.positives[0], (std::vector<std::size_t>{0, 1}));
    const AssignmentResult r2 = topk_assign(from_rows({{3, 2, 2, 2}}), 2);
    EXPECT_EQ(r2.positives[0], (std::vector<std::size_t>{1, 2}));
}

TEST(TopK, ConflictSmallerWdWins) {
    const AssignmentResult r = topk_assign(from_rows({{1.0, 5.0, 9.0, 9.0}, {2.0, 3.0, 9.0, 9.0}}), 2);
    EXPECT_EQ(r.target[0], 0);
    EXPECT_EQ(r.target[1], 1);
    EXPECT_EQ(r.positives[0], (std::vector<std::size_t>{0}));
    EXPECT_EQ(r.positives[1], (std::vector<std::size_t>{1}));
}

TEST(TopK, EqualWdConflictGoesToLowerPseudo) {
    const AssignmentResult r = topk_assign(from_rows({{1.0, 5.0}, {1.0, 6.0}}), 1);
    EXPECT_EQ(r.target[0], 0);
    EXPECT_TRUE(r.positives[1].empty());
}

TEST(TopK, MatchesBruteForceOnRandomMatrices) {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> dim(1, 7);
    std::uniform_int_distribution<int> val(0, 6);  // small range forces ties
    for (int t = 0; t < 2000; ++t) {
        const auto rows = static_cast<std::size_t>(dim(rng));
        const auto cols = static_cast<std::size_t>(dim(rng));
        WdMatrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) m(i, j) = val(rng);
        }
        for (std::size_t k = 1; k <= 4; ++k) {
            const AssignmentResult r = topk_assign(m, k);
            EXPECT_EQ(r.target, brute_force(m, k));
            std::size_t total = 0;
            for (std::size_t i = 0; i < rows; ++i) {
                EXPECT_LE(r.positives[i].size(), k);
                total += r.positives[i].size();
                for (std::size_t a : r.positives[i]) EXPECT_EQ(r.target[a], static_cast<int>(i));
            }
            EXPECT_EQ(total, r.num_positive());
        }
    }
}

TEST(TopK, StreamingMatchesMatrix) {
    std::mt19937_64 rng(43);
    const AnchorSet anchors = small_grid();
    for (int t = 0; t < 10; ++t) {
        const auto pseudo = random_boxes(rng, 12, 4.0, 80.0);
        for (std::size_t k : {1u, 2u, 5u}) {
            const AssignmentResult a = topk_assign(wd_similarity_matrix(pseudo, anchors), k);
            const AssignmentResult b = topk_assign(pseudo, anchors, k);
            EXPECT_EQ(a.target, b.target);
            EXPECT_EQ(a.positives, b.positives);
            EXPECT_EQ(a.candidates, b.candidates);
            EXPECT_EQ(a.min_wd, b.min_wd);
        }
    }
}

TEST(TopK, SeparatedBoxesNeverStarve) {
    std::mt19937_64 rng(47);
    const AnchorSet anchors = small_grid();
    std::uniform_real_distribution<double> ext(2.0, 120.0);
    std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
    for (int t = 0; t < 20; ++t) {
        std::vector<RotatedBox> pseudo;
        for (int gx = 0; gx < 4; ++gx) {
            for (int gy = 0; gy < 4; ++gy) pseudo.push_back({20.0 + 64 * gx, 20.0 + 64 * gy, ext(rng), ext(rng), ang(rng)});
        }
        const AssignmentResult r = topk_assign(pseudo, anchors, 2);
        for (std::size_t i = 0; i < pseudo.size(); ++i) EXPECT_GE(r.positives[i].size(), 1u) << "pseudo " << i;
    }
}

TEST(TopK, DuplicatePseudoBoxesLoseCandidates) {
    // Two identical pseudo-boxes nominate the same anchors; the lower index
    // takes all of them and the other is left without positives.
    const AnchorSet anchors = small_grid();
    const std::vector<RotatedBox> pseudo{{100, 100, 20, 10, 0.3}, {100, 100, 20, 10, 0.3}};
    const AssignmentResult r = topk_assign(pseudo, anchors, 2);
    EXPECT_EQ(r.positives[0].size(), 2u);
    EXPECT_TRUE(r.positives[1].empty());
}

TEST(TopK, InvariantUnderPowerOfTwoScaling) {
    std::mt19937_64 rng(53);
    const AnchorSet anchors = small_grid();
    const auto pseudo = random_boxes(rng, 10, 4.0, 60.0);
    const AssignmentResult base = topk_assign(pseudo, anchors, 2);
    for (double f : {0.5, 2.0, 4.0}) {
        const auto scale = [f](RotatedBox b) {
            b.cx *= f;
            b.cy *= f;
            b.w *= f;
            b.h *= f;
            return b;
        };
        std::vector<RotatedBox> sp;
        std::vector<RotatedBox> sa;
        for (const RotatedBox& b : pseudo) sp.push_back(scale(b));
        for (const RotatedBox& b : anchors.boxes()) sa.push_back(scale(b));
        const AssignmentResult s = topk_assign(sp, AnchorSet(sa), 2);
        EXPECT_EQ(s.target, base.target);
    }
}

TEST(TopK, PseudoPermutationPermutesOwners) {
    std::mt19937_64 rng(59);
    const AnchorSet anchors = small_grid();
    // Distinct boxes far apart so that no equal-WD conflicts arise.
    std::vector<RotatedBox> pseudo;
    for (int i = 0; i < 6; ++i) pseudo.push_back({20.0 + 40 * i, 30.0 + 35 * i, 10.0 + 7 * i, 6.0 + 3 * i, 0.1 * i});
    const AssignmentResult base = topk_assign(pseudo, anchors, 3);
    std::vector<std::size_t> perm(pseudo.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<RotatedBox> shuffled;
    for (std::size_t p : perm) shuffled.push_back(pseudo[p]);
    const AssignmentResult s = topk_assign(shuffled, anchors, 3);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(s.positives[i], base.positives[perm[i]]);
}

TEST(TopK, RejectsZeroK) { EXPECT_THROW(topk_assign(from_rows({{1.0}}), 0), ConfigError); }

TEST(BaselineIou, ExactAnchorPositive) {
    const AnchorSet anchors({{0, 0, 32, 32, 0}, {64, 0, 32, 32, 0}});
    const std::vector<RotatedBox> pseudo{{64, 0, 32, 32, 0}};
    const AssignmentResult r = baseline_iou_assign(pseudo, anchors);
    EXPECT_EQ(r.positives[0], (std::vector<std::size_t>{1}));
}

TEST(BaselineIou, TinyBoxStarvesLargeBoxDoesNot) {
    AnchorGridSpec spec;
    spec.width = 512;
    spec.height = 512;
    spec.strides = {32};
    spec.scales = {1};
    spec.ratios = {1.0};
    const AnchorSet anchors = gen_anchor_grid(spec);
    const std::vector<RotatedBox> pseudo{{100, 100, 8, 8, 0}};
    EXPECT_EQ(baseline_iou_assign(pseudo, anchors).num_positive(), 0u);
    const AnchorSet def = gen_anchor_grid(AnchorGridSpec{});
    const std::vector<RotatedBox> big{{512, 512, 256, 256, 0}};
    EXPECT_GT(baseline_iou_assign(big, def).num_positive(), 1u);
}

TEST(Reweight, Example) {
    std::vector<LossSample> v;
    for (int i = 0; i < 2; ++i) v.push_back({1.0, SizeClass::small});
    for (int i = 0; i < 6; ++i) v.push_back({1.0, SizeClass::large});
    const ReweightedLoss r = positive_loss_reweight(v);
    EXPECT_DOUBLE_EQ(r.total, 8.0);
    EXPECT_DOUBLE_EQ(r.weights[0], 2.0);
    EXPECT_DOUBLE_EQ(r.weights[7], 8.0 / 12.0);
    EXPECT_DOUBLE_EQ(r.small_contribution, r.large_contribution);
}

TEST(Reweight, BalancedGroupsUnweighted) {
    const std::vector<LossSample> v{{0.3, SizeClass::small}, {1.7, SizeClass::large}};
    const ReweightedLoss r = positive_loss_reweight(v);
    EXPECT_EQ(r.weights, (std::vector<double>{1.0, 1.0}));
    EXPECT_DOUBLE_EQ(r.total, 2.0);
}

TEST(Reweight, EmptyGroupFallsBack) {
    const std::vector<LossSample> v{{0.3, SizeClass::large}, {1.7, SizeClass::large}};
    const ReweightedLoss r = positive_loss_reweight(v);
    EXPECT_EQ(r.weights, (std::vector<double>{1.0, 1.0}));
    EXPECT_DOUBLE_EQ(r.total, 2.0);
    EXPECT_EQ(positive_loss_reweight({}).total, 0.0);
}

TEST(Reweight, RejectsBadLoss) {
    const std::vector<LossSample> v{{-1.0, SizeClass::large}};
    EXPECT_THROW(positive_loss_reweight(v), DomainError);
}

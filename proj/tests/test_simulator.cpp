#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <cmath>

#include "ssod/error.hpp"
#include "ssod/simulator.hpp"

using namespace ssod;

namespace {

double ks_statistic(std::vector<double> xs, const boost::math::beta_distribution<>& dist) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = boost::math::cdf(dist, xs[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

bool same(const RotatedBox& a, const RotatedBox& b) {
    return a.cx == b.cx && a.cy == b.cy && a.w == b.w && a.h == b.h && a.theta == b.theta;
}

}  // namespace

TEST(DeriveSeed, DistinctStreams) {
    EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}

TEST(Beta, KolmogorovSmirnov) {
    std::mt19937_64 rng(71);
    for (const BetaParams p : {BetaParams{2.2, 1.8}, BetaParams{17, 3}, BetaParams{1.5, 4}, BetaParams{0.5, 0.5}}) {
        std::vector<double> xs(20000);
        for (double& x : xs) x = sample_beta(p, rng);
        // Critical value at alpha = 0.001 is 1.95 / sqrt(n).
        EXPECT_LT(ks_statistic(xs, boost::math::beta_distribution<>(p.alpha, p.beta)), 1.95 / std::sqrt(20000.0));
    }
}

TEST(Losses, GammaMean) {
    std::mt19937_64 rng(73);
    const auto v = sample_losses(40000, 0.5, rng);
    double sum = 0.0;
    for (double x : v) {
        EXPECT_GT(x, 0.0);
        sum += x;
    }
    // Gamma(2, 0.25) has sd 0.354; the mean of 40000 draws has sd 0.0018.
    EXPECT_NEAR(sum / 40000.0, 0.5, 0.01);
}

TEST(Scene, Deterministic) {
    const SceneConfig c;
    const SimScene a = gen_scene(c, 5);
    const SimScene b = gen_scene(c, 5);
    ASSERT_EQ(a.objects.size(), b.objects.size());
    for (std::size_t i = 0; i < a.objects.size(); ++i) EXPECT_TRUE(same(a.objects[i].box, b.objects[i].box));
    const SimScene other = gen_scene(c, 6);
    EXPECT_FALSE(other.objects.size() == a.objects.size() && same(other.objects[0].box, a.objects[0].box));
}

TEST(Scene, SmallFractionWithinBinomialBand) {
    SceneConfig c;
    c.min_objects = 1000;
    c.max_objects = 1000;
    c.width = 4096;
    c.height = 4096;
    c.large_max_area = 10000;
    const SimScene s = gen_scene(c, 77);
    ASSERT_EQ(s.objects.size(), 1000u);
    const double sd = std::sqrt(1000 * 0.66 * 0.34);
    EXPECT_NEAR(static_cast<double>(s.count(SizeClass::small)), 660.0, 3 * sd);
}

TEST(Scene, ObjectsInsideAndSeparated) {
    const SceneConfig c;
    const SimScene s = gen_scene(c, 79);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
        const Detection& d = s.objects[i];
        EXPECT_GE(d.box.cx, 0);
        EXPECT_LE(d.box.cx, c.width);
        EXPECT_GE(d.label, 0);
        EXPECT_LT(d.label, c.num_classes);
        for (std::size_t j = 0; j < i; ++j) EXPECT_LE(rotated_iou(d.box, s.objects[j].box), c.max_pairwise_iou);
    }
}

TEST(Scene, ZeroObjects) {
    SceneConfig c;
    c.min_objects = 0;
    c.max_objects = 0;
    EXPECT_TRUE(gen_scene(c, 1).objects.empty());
}

TEST(Scene, InfeasiblePlacementThrows) {
    SceneConfig c;
    c.width = 40;
    c.height = 40;
    c.min_objects = 200;
    c.max_objects = 200;
    c.small_fraction = 0.0;
    c.max_pairwise_iou = 0.0;
    c.max_retries = 5;
    EXPECT_THROW(gen_scene(c, 1), ConfigError);
}

TEST(Scene, RejectsBadConfig) {
    SceneConfig c;
    c.min_objects = 10;
    c.max_objects = 5;
    EXPECT_THROW(validate(c), ConfigError);
    c = SceneConfig{};
    c.small_fraction = 1.5;
    EXPECT_THROW(validate(c), ConfigError);
}

TEST(Teacher, FullMissGivesOnlyFalsePositives) {
    const SimScene s = gen_scene(SceneConfig{}, 81);
    TeacherModel t;
    t.small_miss_rate = 1.0;
    t.large_miss_rate = 1.0;
    const TeacherOutput out = simulate_teacher(s, t, 3);
    for (int src : out.prediction_source) EXPECT_EQ(src, -1);
    EXPECT_EQ(out.prediction_loss.size(), out.predictions.size());
}

TEST(Teacher, ZeroNoiseOverlaysGroundTruth) {
    const SimScene s = gen_scene(SceneConfig{}, 83);
    TeacherModel t;
    t.center_noise_px = 0;
    t.extent_noise_px = 0;
    t.angle_noise_rad = 0;
    t.small_miss_rate = 0;
    t.large_miss_rate = 0;
    t.fp_rate = 0;
    const TeacherOutput out = simulate_teacher(s, t, 5);
    ASSERT_EQ(out.predictions.size(), s.objects.size());
    for (std::size_t i = 0; i < out.predictions.size(); ++i) {
        const int src = out.prediction_source[i];
        ASSERT_GE(src, 0);
        EXPECT_NEAR(rotated_iou(out.predictions[i].box, s.objects[static_cast<std::size_t>(src)].box), 1.0, 1e-9);
        EXPECT_EQ(out.predictions[i].label, s.objects[static_cast<std::size_t>(src)].label);
    }
}

TEST(Teacher, ConfidenceGap) {
    SceneConfig c;
    c.min_objects = 200;
    c.max_objects = 200;
    c.width = 2048;
    c.height = 2048;
    const SimScene s = gen_scene(c, 85);
    const TeacherOutput out = simulate_teacher(s, TeacherModel{}, 9);
    double small_sum = 0, large_sum = 0;
    std::size_t ns = 0, nl = 0;
    for (std::size_t i = 0; i < out.predictions.size(); ++i) {
        const int src = out.prediction_source[i];
        if (src < 0) continue;
        if (is_small(s.objects[static_cast<std::size_t>(src)].box)) {
            small_sum += out.predictions[i].score;
            ++ns;
        } else {
            large_sum += out.predictions[i].score;
            ++nl;
        }
    }
    ASSERT_GT(ns, 0u);
    ASSERT_GT(nl, 0u);
    EXPECT_LT(small_sum / ns + 0.2, large_sum / nl);
}

TEST(Teacher, Deterministic) {
    const SimScene s = gen_scene(SceneConfig{}, 87);
    const TeacherOutput a = simulate_teacher(s, TeacherModel{}, 1);
    const TeacherOutput b = simulate_teacher(s, TeacherModel{}, 1);
    ASSERT_EQ(a.predictions.size(), b.predictions.size());
    EXPECT_EQ(a.proposal_bg, b.proposal_bg);
    EXPECT_EQ(a.prediction_loss, b.prediction_loss);
}

TEST(AnchorGrid, TinyGrid) {
    AnchorGridSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.strides = {32};
    spec.scales = {1};
    spec.ratios = {1.0};
    const AnchorSet a = gen_anchor_grid(spec);
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a.boxes()[0].cx, 16);
    EXPECT_EQ(a.boxes()[0].cy, 16);
    EXPECT_EQ(a.boxes()[3].cx, 48);
    EXPECT_EQ(a.boxes()[3].cy, 48);
    EXPECT_EQ(a.boxes()[0].w, 32);
}

TEST(AnchorGrid, DefaultCount) {
    const AnchorGridSpec spec;
    std::size_t want = 0;
    for (double s : spec.strides) {
        const auto cells = static_cast<std::size_t>(std::ceil(spec.width / s) * std::ceil(spec.height / s));
        want += cells * spec.scales.size() * spec.ratios.size();
    }
    EXPECT_EQ(gen_anchor_grid(spec).size(), want);
    EXPECT_EQ(want, 65472u);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ssod/commands.hpp"
#include "ssod/error.hpp"
#include "ssod/io.hpp"
#include "ssod/pipeline.hpp"

using namespace ssod;

namespace {

double norm_diff(const EmaState& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.teacher.size(); ++i) acc += (s.teacher[i] - s.student[i]) * (s.teacher[i] - s.student[i]);
    return std::sqrt(acc);
}

RunConfig light_config() {
    RunConfig c;
    c.scene.min_objects = 10;
    c.scene.max_objects = 20;
    c.pipeline.labeled_pool = 2;
    c.pipeline.unlabeled_pool = 4;
    c.pipeline.unlabeled_per_batch = 2;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST(Ema, Formula) {
    const EmaState s{{0.0}, {1.0}};
    EXPECT_DOUBLE_EQ(ema_update(s, 0.9).teacher[0], 1.0 - 0.9);
    const EmaState fixed{{0.3, -2.0}, {0.3, -2.0}};
    EXPECT_EQ(ema_update(fixed, 0.99).teacher, fixed.teacher);
}

TEST(Ema, GeometricDecay) {
    EmaState s{{1.0, -2.0, 0.5}, {0.25, 0.5, -1.0}};
    const double g0 = norm_diff(s);
    for (int t = 1; t <= 200; ++t) {
        s = ema_update(s, 0.97);
        EXPECT_NEAR(norm_diff(s), std::pow(0.97, t) * g0, 1e-12);
    }
}

TEST(Ema, Errors) {
    EXPECT_THROW(ema_update({{1.0}, {1.0, 2.0}}, 0.9), ConfigError);
    EXPECT_THROW(ema_update({{1.0}, {1.0}}, 1.0), ConfigError);
    EXPECT_THROW(ema_update({{1.0}, {1.0}}, 0.0), ConfigError);
}

TEST(Combine, Arithmetic) {
    EXPECT_DOUBLE_EQ(combine_losses(1.0, 0.5, 4.0), 3.0);
    EXPECT_DOUBLE_EQ(combine_losses(1.3, 0.5, 0.0), 1.3);
    EXPECT_DOUBLE_EQ(combine_losses(0.0, 0.7, 2.5), 0.7 * 2.5);
}

TEST(Iteration, NoUnlabeledScenes) {
    RunConfig c = light_config();
    const Dataset d = build_dataset(c, 3);
    DatasetBatch b = sample_batch(d, c.pipeline, 4);
    b.unlabeled.clear();
    const IterationResult r = run_iteration(b, init_ema_state(8, 1), c, 5);
    EXPECT_EQ(r.record.l_unsup, 0.0);
    EXPECT_EQ(r.record.loss, r.record.l_sup);
    EXPECT_GT(r.record.l_sup, 0.0);
}

TEST(Iteration, Deterministic) {
    const RunConfig c = light_config();
    const Dataset d = build_dataset(c, 3);
    const DatasetBatch b = sample_batch(d, c.pipeline, 4);
    const EmaState s = init_ema_state(8, 1);
    const IterationResult x = run_iteration(b, s, c, 9);
    const IterationResult y = run_iteration(b, s, c, 9);
    EXPECT_EQ(io::to_json(x.record).dump(), io::to_json(y.record).dump());
    EXPECT_EQ(x.state.teacher, y.state.teacher);
}

TEST(Iteration, RecordIsConsistent) {
    const RunConfig c = light_config();
    const Dataset d = build_dataset(c, 13);
    const DatasetBatch b = sample_batch(d, c.pipeline, 14);
    const IterationResult r = run_iteration(b, init_ema_state(8, 2), c, 15);
    const IterationRecord& rec = r.record;
    EXPECT_DOUBLE_EQ(rec.loss, rec.l_sup + c.pipeline.alpha * rec.l_unsup);
    std::size_t pseudo = 0, small = 0, large = 0, normal = 0, hard = 0;
    for (const UnlabeledSceneRecord& s : rec.scenes) {
        pseudo += s.pseudo.size();
        small += s.n_pos_small;
        large += s.n_pos_large;
        normal += s.negatives.kept_normal.size();
        hard += s.negatives.hard.size();
        for (const HardNegative& h : s.negatives.hard) EXPECT_LT(h.score, c.pipeline.s_max);
    }
    EXPECT_EQ(pseudo, rec.sat.n_small_kept + rec.sat.n_large_kept);
    EXPECT_EQ(small, rec.n_pos_small);
    EXPECT_EQ(large, rec.n_pos_large);
    EXPECT_EQ(normal, rec.n_neg_normal);
    EXPECT_EQ(hard, rec.n_neg_hard);
    if (rec.n_pos_small > 0 && rec.n_pos_large > 0) {
        const double n = static_cast<double>(rec.n_pos_small + rec.n_pos_large);
        EXPECT_DOUBLE_EQ(rec.weight_small * rec.n_pos_small, n / 2);
        EXPECT_DOUBLE_EQ(rec.weight_large * rec.n_pos_large, n / 2);
    }
}

TEST(Pipeline, DecayWithFrozenStudent) {
    RunConfig c = light_config();
    c.pipeline.student_lr = 0.0;
    c.pipeline.ema_momentum = 0.9;
    double g0 = -1.0;
    double m_t = 1.0;
    const EmaState last = run_pipeline(c, 10, 7, [&](const IterationRecord& rec) {
        if (g0 < 0) g0 = rec.ema_gap_before;
        EXPECT_NEAR(rec.ema_gap_before, m_t * g0, 1e-12);
        m_t *= 0.9;
        EXPECT_NEAR(rec.ema_gap_after, m_t * g0, 1e-12);
    });
    EXPECT_NEAR(norm_diff(last), m_t * g0, 1e-12);
}

TEST(Pipeline, SnapshotFixture) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "ssod_snapshot_run";
    std::filesystem::remove_all(dir);
    cli::PipelineArgs args;
    args.config = SSOD_TEST_DATA "/light_config.json";
    args.iters = 1;
    args.seed = 2024;
    args.out = dir.string();
    cli::pipeline(args);
    const bool same = slurp(dir / "iter_0000.json") == slurp(SSOD_TEST_DATA "/iter_0000.snapshot.json");
    EXPECT_TRUE(same) << "iteration record differs from tests/data/iter_0000.snapshot.json";
    std::filesystem::remove_all(dir);
}

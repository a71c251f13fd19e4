#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>

#include "synthal/io.hpp"
#include "synthal/orchestrator.hpp"
#include "toy_dataset.hpp"

using namespace synthal;
using namespace synthal::al;
namespace fs = std::filesystem;

TEST(Budget, LiveTenPercent) {
    const auto s = BudgetSchedule::make(3955, 0.10, 3);
    EXPECT_EQ(s.total_budget, 394u);
    EXPECT_EQ(s.initial_random, 197u);
    EXPECT_EQ(s.per_iteration, (std::vector<std::size_t>{66, 66, 65}));
    EXPECT_EQ(s.labeled_after(0), 197u);
    EXPECT_EQ(s.labeled_after(3), 394u);
    EXPECT_TRUE(s.al_enabled);
}

TEST(Budget, FullBudgetDisablesQueries) {
    const auto s = BudgetSchedule::make(120, 1.0, 3);
    EXPECT_FALSE(s.al_enabled);
    EXPECT_EQ(s.initial_random, 120u);
    EXPECT_EQ(s.iterations(), 0u);
}

TEST(Budget, InterleavedSpreadsRandomHalf) {
    const auto s = BudgetSchedule::make(3955, 0.10, 3, config::RandomMode::interleaved);
    EXPECT_EQ(s.initial_random, 50u);
    EXPECT_EQ(s.random_per_iteration, (std::vector<std::size_t>{49, 49, 49}));
    EXPECT_EQ(s.labeled_after(3), 394u);
}

TEST(Budget, ConservationOverManySizes) {
    for (std::size_t n = 4; n < 400; n += 7) {
        for (double f : {0.05, 0.1, 0.3, 0.5, 0.99}) {
            for (int iters = 1; iters <= 5; ++iters) {
                for (auto mode : {config::RandomMode::init, config::RandomMode::interleaved}) {
                    const std::size_t nominal = static_cast<std::size_t>(std::floor(f * n + 1e-9));
                    if (nominal / 2 == 0) {
                        EXPECT_THROW(BudgetSchedule::make(n, f, iters, mode), InvalidParameter);
                        continue;
                    }
                    const auto s = BudgetSchedule::make(n, f, iters, mode);
                    std::size_t queried = 0;
                    for (auto q : s.per_iteration) queried += q;
                    ASSERT_EQ(queried, nominal / 2);
                    ASSERT_EQ(s.labeled_after(s.iterations()), s.total_budget);
                    ASSERT_LE(s.total_budget, n);
                    for (std::size_t i = 1; i < s.per_iteration.size(); ++i)
                        ASSERT_LE(s.per_iteration[i], s.per_iteration[i - 1]);
                    ASSERT_LE(s.per_iteration.front() - s.per_iteration.back(), 1u);
                }
            }
        }
    }
}

TEST(Budget, Errors) {
    EXPECT_THROW(BudgetSchedule::make(0, 0.1, 3), InvalidParameter);
    EXPECT_THROW(BudgetSchedule::make(100, 0.0, 3), InvalidParameter);
    EXPECT_THROW(BudgetSchedule::make(100, 0.1, 0), InvalidParameter);
    EXPECT_EQ(even_split(7, 3), (std::vector<std::size_t>{3, 2, 2}));
}

TEST(Pools, MasksStayHiddenUntilRevealed) {
    PoolState p({{"a", "a.png"}, {"b", "b.png"}}, {{"a", "ma.png"}, {"b", "mb.png"}});
    EXPECT_THROW(p.mask_path("a"), LabelLeak);
    p.reveal({"a"});
    EXPECT_EQ(p.mask_path("a"), fs::path("ma.png"));
    EXPECT_THROW(p.mask_path("b"), LabelLeak);
    EXPECT_THROW(p.reveal({"a"}), InvalidInput);
    EXPECT_THROW(p.reveal({"zzz"}), InvalidInput);
    EXPECT_EQ(p.mask_access_log(), (std::vector<std::string>{"a"}));
    EXPECT_EQ(p.labeled().size() + p.unlabeled().size(), 2u);
}

TEST(Pools, MissingMaskDeclarationFails) {
    EXPECT_THROW(PoolState({{"a", "a.png"}}, {}), DatasetError);
}

TEST(MockPredict, SingleMemberHasNoDisagreement) {
    Rng rng(1);
    RasterImage img(6, 6);
    for (auto& v : img.values()) v = rng.uniform01();
    const auto s = mock_predict(img, 1, 4);
    EXPECT_NO_THROW(s.validate());
    const ScoreMap b = query::bald_map(s);
    for (double v : b.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(mock_predict(img, 3, 9), mock_predict(img, 3, 9));
    EXPECT_NE(mock_predict(img, 3, 9), mock_predict(img, 3, 10));
}

TEST(MockPredict, BlackFrameIsUncertain) {
    const auto s = mock_predict(RasterImage(8, 8, 0.0), 3, 2);
    double mean = 0.0;
    for (int t = 0; t < 3; ++t)
        for (float v : s.plane(t, 1)) mean += v;
    mean /= 3 * 64;
    EXPECT_NEAR(mean, 0.5, 0.05);
    for (int t = 0; t < 3; ++t)
        for (float v : s.plane(t, 1)) EXPECT_TRUE(v > 0.1f && v < 0.9f);
}

TEST(MockPredict, GreyInstrumentScoresHigherThanRedTissue) {
    RasterImage grey(2, 2, 0.8), red(2, 2, 0.0);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) red(y, x, 0) = 0.8;
    auto mean_fg = [](const query::ProbabilityStack& s) {
        double m = 0.0;
        for (int t = 0; t < s.members(); ++t)
            for (float v : s.plane(t, 1)) m += v;
        return m / (s.members() * 4.0);
    };
    // logit 6 * (v - s): grey 4.8, saturated red -1.2.
    EXPECT_GT(mean_fg(mock_predict(grey, 64, 0)), 0.95);
    EXPECT_NEAR(mean_fg(mock_predict(red, 64, 0)), 1.0 / (1.0 + std::exp(1.2)), 0.05);
}

TEST(TrainManifest, RoundTrip) {
    const std::vector<TrainEntry> e{{TrainEntry::Role::train, "a", "/d/a.png", "/d/ma.png"},
                                    {TrainEntry::Role::predict, "b", "/d/b.png", ""}};
    const auto back = parse_train_manifest(encode_train_manifest(e));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].mask_path, "/d/ma.png");
    EXPECT_EQ(back[1].role, TrainEntry::Role::predict);
    EXPECT_EQ(encode_train_manifest(back), encode_train_manifest(e));
    EXPECT_THROW(parse_train_manifest("{\"role\":\"judge\",\"id\":\"x\",\"image\":\"y\"}\n"), FormatError);
}

class ExternalTrainer : public ::testing::Test {
protected:
    void SetUp() override { dir = toy::temp_dir("trainer"); }
    void TearDown() override { fs::remove_all(dir); }

    TrainRequest request(const std::vector<std::string>& ids) const {
        TrainRequest r;
        r.manifest = dir / "m.jsonl";
        r.output_dir = dir / "out";
        r.work_dir = dir;
        r.log_file = dir / "trainer.log";
        r.seed = 3;
        r.predict_ids = ids;
        io::write_file_atomic(r.manifest, "");
        return r;
    }

    fs::path dir;
};

TEST_F(ExternalTrainer, SubstitutesPlaceholders) {
    config::TrainerSection t;
    t.mode = config::TrainerMode::external;
    t.command = "train {manifest} {output_dir} {seed} {T}";
    t.committee_size = 4;
    TrainerAdapter a(t);
    TrainRequest r = request({});
    r.manifest = "/tmp/it's.jsonl";
    EXPECT_EQ(a.expand_command(r), "train '/tmp/it'\\''s.jsonl' '" + (dir / "out").string() + "' 3 4");
}

TEST_F(ExternalTrainer, SuccessfulCommandMustWriteStacks) {
    config::TrainerSection t;
    t.mode = config::TrainerMode::external;
    t.command = "echo hello";
    TrainerAdapter a(t);
    EXPECT_THROW(a.run(request({"x"})), TrainerError);
    EXPECT_NO_THROW(a.run(request({})));
}

TEST_F(ExternalTrainer, FailureIsRetriedOnceWithLogTail) {
    config::TrainerSection t;
    t.mode = config::TrainerMode::external;
    t.command = "echo attempt >> attempts.txt; echo broken-model >&2; exit 3";
    TrainerAdapter a(t);
    try {
        a.run(request({}));
        FAIL() << "expected TrainerError";
    } catch (const TrainerError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("exit status 3"), std::string::npos);
        EXPECT_NE(msg.find("broken-model"), std::string::npos);
    }
    EXPECT_EQ(io::read_file(dir / "attempts.txt"), "attempt\nattempt\n");
}

TEST_F(ExternalTrainer, TimeoutKillsTheCommand) {
    config::TrainerSection t;
    t.mode = config::TrainerMode::external;
    t.command = "sleep 30";
    t.timeout_s = 0.2;
    TrainerAdapter a(t);
    const auto start = std::chrono::steady_clock::now();
    try {
        a.run(request({}));
        FAIL() << "expected TrainerError";
    } catch (const TrainerError& e) {
        EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos);
    }
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}

TEST_F(ExternalTrainer, MockTrainSubcommandContract) {
    toy::write_dataset(dir / "data", {3, 0, 16, 0, 2});
    const auto layout = io::load_dataset(dir / "data");
    std::vector<TrainEntry> e;
    for (const auto& r : layout.records)
        e.push_back({TrainEntry::Role::predict, r.id, (dir / "data" / r.image_path).string(), ""});
    const auto req = request({"img000", "img001", "img002"});
    io::write_file_atomic(req.manifest, encode_train_manifest(e));
    config::TrainerSection t;
    t.committee_size = 2;
    TrainerAdapter(t).run(req);
    const auto s = io::read_probability_stack(req.output_dir / "img001.pmap");
    EXPECT_EQ(s.members(), 2);
    EXPECT_EQ(s, mock_predict(io::read_image(dir / "data/images/img001.png"), 2, mock_image_seed(3, "img001")));
}

TEST(Seed, FlagBeatsEnvironment) {
    ::setenv("SYNTHAL_SEED", "77", 1);
    EXPECT_EQ(resolve_seed(5, 1), 5u);
    EXPECT_EQ(resolve_seed(std::nullopt, 1), 77u);
    ::setenv("SYNTHAL_SEED", "-3", 1);
    EXPECT_THROW(resolve_seed(std::nullopt, 1), ConfigError);
    ::unsetenv("SYNTHAL_SEED");
    EXPECT_EQ(resolve_seed(std::nullopt, 1), 1u);
}

class ToyLoop : public ::testing::Test {
protected:
    void SetUp() override {
        dir = toy::temp_dir("loop");
        toy::write_dataset(dir / "data", {20, 2, 24, 2, 7});
        cfg = config::RunConfig::preset("live");
        cfg.dataset.root = (dir / "data").string();
        cfg.dataset.seed = 11;
        cfg.budget.fraction = 0.5;
        cfg.budget.al_iterations = 2;
        cfg.trainer.committee_size = 3;
        cfg.synthesis.trim_circle_x = cfg.synthesis.trim_circle_y = {12.0, 12.0};
        cfg.synthesis.trim_circle_r = {16.0, 17.0};
        cfg.synthesis.dilation_d = {3, 3};
        cfg.synthesis.fusion_k = {3, 5};
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path dir;
    config::RunConfig cfg;
};

TEST_F(ToyLoop, FollowsScheduleAndNeverPeeks) {
    Loop loop(cfg, dir / "run", 2);
    loop.init();
    EXPECT_EQ(loop.pools().labeled().size(), 5u);
    const auto r1 = loop.step();
    EXPECT_EQ(r1.selected.size(), 3u);
    EXPECT_EQ(loop.pools().labeled().size(), 8u);
    const auto r2 = loop.step();
    EXPECT_EQ(r2.selected.size(), 2u);
    EXPECT_TRUE(loop.done());
    EXPECT_EQ(loop.pools().labeled().size(), 10u);
    for (std::size_t i = 1; i < r1.selected.size(); ++i) EXPECT_GE(r1.selected[i - 1].score, r1.selected[i].score);

    // Every mask read must belong to an image that was labeled at the end.
    for (const auto& id : loop.pools().mask_access_log()) EXPECT_TRUE(loop.pools().is_labeled(id)) << id;
    EXPECT_EQ(loop.synthetic().size(), 2u * 10u);
    EXPECT_TRUE(fs::exists(dir / "run/iterations/iter_02/report.json"));
    EXPECT_TRUE(fs::exists(dir / "run/synthetic/manifest.jsonl"));
}

TEST_F(ToyLoop, RandomStrategyAndFullBudget) {
    cfg.query.strategy = query::Strategy::random;
    const auto s = Loop(cfg, dir / "rand", 1).run();
    ASSERT_EQ(s.reports.size(), 3u);
    for (const auto& sel : s.reports[1].selected) EXPECT_EQ(sel.score, 0.0);
    EXPECT_EQ(s.reports[2].labeled, 10u);

    cfg.budget.fraction = 1.0;
    const auto full = Loop(cfg, dir / "full", 1).run();
    EXPECT_FALSE(full.schedule.al_enabled);
    EXPECT_EQ(full.reports.size(), 1u);
    EXPECT_EQ(full.reports[0].labeled, 20u);
}

TEST_F(ToyLoop, WorkerCountDoesNotChangeOutput) {
    Loop(cfg, dir / "one", 1).run();
    Loop(cfg, dir / "four", 4).run();
    for (const auto& e : fs::recursive_directory_iterator(dir / "one")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), dir / "one");
        ASSERT_TRUE(fs::exists(dir / "four" / rel)) << rel;
        ASSERT_EQ(io::read_file(e.path()), io::read_file(dir / "four" / rel)) << rel;
    }
}

TEST_F(ToyLoop, EndoVisStyleUsesInpaintedBackgrounds) {
    cfg.synthesis = synth::SynthesisConfig::endovis();
    cfg.synthesis.trim_rect_top = cfg.synthesis.trim_rect_bottom = {1, 1};
    cfg.synthesis.trim_rect_left = cfg.synthesis.trim_rect_right = {2, 2};
    cfg.synthesis.dilation_d = {3, 3};
    cfg.synthesis.fusion_k = {3, 3};
    Loop loop(cfg, dir / "endo", 1);
    const auto summary = loop.run();
    // Two samples (multi-blend) per labeled image, minus recorded failures.
    std::size_t failures = 0;
    for (const auto& r : summary.reports) failures += r.failures.size();
    EXPECT_EQ(loop.synthetic().size() + 2 * failures, 2u * loop.pools().labeled().size());
    EXPECT_GT(loop.synthetic().size(), 0u);
    for (const auto& r : loop.synthetic()) EXPECT_EQ(r.provenance.type, synth::SynthType::type2);
}

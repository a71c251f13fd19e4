#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "oracles.hpp"
#include "synthal/query.hpp"

using namespace synthal;
using namespace synthal::query;

namespace {

ProbabilityStack pixel(std::initializer_list<std::initializer_list<float>> members) {
    const int t = static_cast<int>(members.size());
    const int c = static_cast<int>(members.begin()->size());
    ProbabilityStack s(t, c, 1, 1);
    int i = 0;
    for (const auto& m : members) {
        int j = 0;
        for (float v : m) s(i, j++, 0, 0) = v;
        ++i;
    }
    return s;
}

ScoreMap map_of(std::vector<double> v) {
    ScoreMap m(1, static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) m.values()[i] = v[i];
    return m;
}

}  // namespace

TEST(Entropy, Examples) {
    EXPECT_EQ(entropy_map(pixel({{1.0f, 0.0f}}))(0, 0), 0.0);
    for (int t = 1; t <= 5; ++t) {
        ProbabilityStack s(t, 2, 1, 1);
        for (int i = 0; i < t; ++i) s(i, 0, 0, 0) = s(i, 1, 0, 0) = 0.5f;
        EXPECT_NEAR(entropy_map(s)(0, 0), std::numbers::ln2, 1e-12);
    }
    const double h = entropy_map(pixel({{0.7f, 0.2f, 0.1f}, {0.5f, 0.3f, 0.2f}}))(0, 0);
    const double m0 = (double{0.7f} + double{0.5f}) / 2, m1 = (double{0.2f} + double{0.3f}) / 2,
                 m2 = (double{0.1f} + double{0.2f}) / 2;
    EXPECT_NEAR(h, -(m0 * std::log(m0) + m1 * std::log(m1) + m2 * std::log(m2)), 1e-12);
    EXPECT_NEAR(h, -(0.6 * std::log(0.6) + 0.25 * std::log(0.25) + 0.15 * std::log(0.15)), 1e-7);
}

TEST(Bald, Examples) {
    EXPECT_NEAR(bald_map(pixel({{1.0f, 0.0f}, {0.0f, 1.0f}}))(0, 0), std::numbers::ln2, 1e-12);
    EXPECT_EQ(bald_map(pixel({{0.5f, 0.5f}, {0.5f, 0.5f}}))(0, 0), 0.0);
    EXPECT_NEAR(entropy_map(pixel({{0.5f, 0.5f}, {0.5f, 0.5f}}))(0, 0), std::numbers::ln2, 1e-12);
}

TEST(Bald, AgreeingCommitteeScoresZero) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const int t = rng.uniform_int(1, 5), c = rng.uniform_int(2, 4);
        ProbabilityStack base = gen::stack(rng, 1, c, 4, 4);
        ProbabilityStack s(t, c, 4, 4);
        for (int m = 0; m < t; ++m)
            for (int k = 0; k < c; ++k)
                for (int y = 0; y < 4; ++y)
                    for (int x = 0; x < 4; ++x) s(m, k, y, x) = base(0, k, y, x);
        const ScoreMap b = bald_map(s);
        for (double v : b.values()) ASSERT_EQ(v, 0.0);
    }
}

TEST(Bald, BoundedByEntropyAndMatchesOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        const int t = rng.uniform_int(1, 5), c = rng.uniform_int(2, 4);
        const int h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16);
        const ProbabilityStack s = gen::stack(rng, t, c, h, w);
        const ScoreMap b = bald_map(s), e = entropy_map(s);
        const ScoreMap rb = oracle::bald(s), re = oracle::entropy(s);
        for (std::size_t i = 0; i < b.values().size(); ++i) {
            ASSERT_GE(b.values()[i], 0.0);
            ASSERT_LE(b.values()[i], e.values()[i]);
            ASSERT_NEAR(b.values()[i], rb.values()[i], 1e-9);
            ASSERT_NEAR(e.values()[i], re.values()[i], 1e-9);
        }
    }
}

TEST(Stack, ValidationRejectsBadInputs) {
    EXPECT_THROW(ProbabilityStack(0, 2, 1, 1), InvalidStack);
    EXPECT_THROW(ProbabilityStack(1, 1, 1, 1), InvalidStack);
    EXPECT_THROW(ProbabilityStack(1, 2, 1, 1, std::vector<float>(3)), InvalidStack);
    EXPECT_THROW(entropy_map(pixel({{0.7f, 0.7f}})), InvalidStack);
    EXPECT_THROW(bald_map(pixel({{1.2f, -0.2f}})), InvalidStack);
    EXPECT_NO_THROW(bald_map(pixel({{0.50002f, 0.5f}})));
}

TEST(ImageScore, Aggregators) {
    EXPECT_EQ(image_score(map_of({0.3, 0.3, 0.3})), 0.3);
    EXPECT_NEAR(image_score(map_of({0.0, 0.2, 0.4, 0.6}), Aggregator::parse("top:0.5")), 0.5, 1e-15);
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(rng.uniform_int(1, 50)));
        for (auto& x : v) x = rng.uniform01();
        const ScoreMap m = map_of(v);
        EXPECT_NEAR(image_score(m, Aggregator::parse("sum")), image_score(m) * static_cast<double>(v.size()), 1e-9);
        const double q = rng.uniform(0.01, 1.0);
        EXPECT_NEAR(image_score(m, {Aggregator::Kind::top_fraction, q}), oracle::top_fraction(v, q), 1e-12);
    }
}

TEST(ImageScore, ParseErrors) {
    EXPECT_THROW(Aggregator::parse("median"), InvalidParameter);
    EXPECT_THROW(Aggregator::parse("top:0"), InvalidParameter);
    EXPECT_THROW(Aggregator::parse("top:1.5"), InvalidParameter);
    EXPECT_THROW(Aggregator::parse("top:x"), InvalidParameter);
    EXPECT_EQ(Aggregator::parse("top:0.25").to_string(), "top:0.25");
    EXPECT_THROW(parse_strategy("margin"), InvalidParameter);
    EXPECT_EQ(parse_strategy("bald"), Strategy::bald);
}

TEST(Selection, Examples) {
    const std::vector<ImageScore> s{{"a", 0.9}, {"b", 0.1}, {"c", 0.5}};
    EXPECT_EQ(select_query_batch(s, 2), (std::vector<std::string>{"a", "c"}));
    const std::vector<ImageScore> tied{{"d", 0.3}, {"b", 0.3}, {"c", 0.3}, {"a", 0.3}};
    EXPECT_EQ(select_query_batch(tied, 2), (std::vector<std::string>{"a", "b"}));
    EXPECT_THROW(select_query_batch(s, 4), InsufficientPool);
    EXPECT_TRUE(select_query_batch(s, 0).empty());
}

TEST(Selection, MatchesFullSort) {
    Rng rng(4);
    std::vector<ImageScore> scores;
    for (int i = 0; i < 1000; ++i) {
        // Coarse values force plenty of ties.
        scores.push_back({"id" + std::to_string(rng.uniform_int(0, 99999)) + "-" + std::to_string(i),
                          std::round(rng.uniform01() * 50) / 50});
    }
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end(), [](const ImageScore& a, const ImageScore& b) {
        return a.score != b.score ? a.score > b.score : a.image_id < b.image_id;
    });
    const auto picked = select_query_batch(scores, 100);
    for (std::size_t i = 0; i < 100; ++i) ASSERT_EQ(picked[i], sorted[i].image_id);
}

TEST(Selection, PermutationAndScaleInvariant) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ImageScore> scores;
        const int n = rng.uniform_int(1, 40);
        for (int i = 0; i < n; ++i) scores.push_back({"x" + std::to_string(i), rng.uniform01()});
        const std::size_t k = static_cast<std::size_t>(rng.uniform_int(0, n));
        const auto base = select_query_batch(scores, k);
        auto shuffled = scores;
        for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
        EXPECT_EQ(select_query_batch(shuffled, k), base);
        auto scaled = scores;
        for (auto& s : scaled) s.score *= 4.0;
        EXPECT_EQ(select_query_batch(scaled, k), base);
    }
}

TEST(Selection, RandomIsSeededAndOrderFree) {
    std::vector<std::string> ids;
    for (int i = 0; i < 30; ++i) ids.push_back("i" + std::to_string(i));
    auto rev = ids;
    std::reverse(rev.begin(), rev.end());
    const auto a = select_random(ids, 10, 42);
    EXPECT_EQ(a, select_random(rev, 10, 42));
    EXPECT_NE(a, select_random(ids, 10, 43));
    std::set<std::string> unique(a.begin(), a.end());
    EXPECT_EQ(unique.size(), 10u);
    EXPECT_THROW(select_random(ids, 31, 1), InsufficientPool);
}

TEST(ScoreImage, RandomStrategyScoresZero) {
    Rng rng(6);
    const ProbabilityStack s = gen::stack(rng, 3, 2, 4, 4);
    EXPECT_EQ(score_image("a", s, Strategy::random).score, 0.0);
    EXPECT_EQ(score_image("a", s, Strategy::bald).score, image_score(bald_map(s)));
}

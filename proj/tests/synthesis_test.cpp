#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "oracles.hpp"
#include "synthal/inpaint.hpp"
#include "synthal/synthesis.hpp"

using namespace synthal;
using namespace synthal::synth;

namespace {

LabeledImage bar_sample(const std::string& id, int n, int x0, int x1) {
    LabeledImage s{id, RasterImage(n, n), BinaryMask(n, n, 0)};
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const bool inst = x >= x0 && x < x1 && y >= n / 3 && y < 2 * n / 3;
            s.mask(y, x) = inst;
            s.image(y, x, 0) = inst ? 0.8 : 0.6 + 0.002 * x;
            s.image(y, x, 1) = inst ? 0.8 : 0.25 + 0.001 * y;
            s.image(y, x, 2) = inst ? 0.78 : 0.2;
        }
    return s;
}

BackgroundImage plain_background(int n, double r, double g, double b) {
    BackgroundImage bg{"bg", RasterImage(n, n), BackgroundOrigin::real_external, {}};
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            bg.image(y, x, 0) = r;
            bg.image(y, x, 1) = g;
            bg.image(y, x, 2) = b;
        }
    return bg;
}

SynthesisConfig small_config(int n) {
    SynthesisConfig c;
    c.dilation_d = {3, 3};
    c.fusion_k = {3, 5};
    c.trim_circle_x = {n / 2.0, n / 2.0};
    c.trim_circle_y = {n / 2.0, n / 2.0};
    c.trim_circle_r = {n * 0.7, n * 0.7};
    return c;
}

}  // namespace

TEST(ColorAdjust, UniformExample) {
    const RasterImage inst(4, 4, 0.2), bg(4, 4, 0.4);
    const RasterImage out = adjust_color_brightness(inst, bg, {0.5, 1.0});
    for (double v : out.values()) EXPECT_NEAR(v, 0.6, 1e-15);
}

TEST(ColorAdjust, EqualSumsLeaveInstrumentUnchanged) {
    Rng rng(2);
    const RasterImage inst = gen::image(rng, 6, 6, 0.1, 0.5);
    // Pixel permutation: per-channel sums stay identical.
    RasterImage bg2(6, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 3; ++c) bg2(y, x, c) = inst(5 - y, 5 - x, c);
    for (double alpha : {0.0, 0.3, 1.0}) {
        const RasterImage out = adjust_color_brightness(inst, bg2, {alpha, 1.0});
        for (std::size_t i = 0; i < out.values().size(); ++i) ASSERT_NEAR(out.values()[i], inst.values()[i], 1e-12);
    }
}

TEST(ColorAdjust, TableRangesStayInUnitInterval) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const RasterImage inst = gen::image(rng, 8, 8, 0.01, 1.0);
        const RasterImage bg = gen::image(rng, 8, 8);
        const ColorAdjustParams p{rng.uniform(0.4, 1.0), rng.uniform(0.9, 1.3)};
        const RasterImage out = adjust_color_brightness(inst, bg, p);
        const RasterImage ref = oracle::adjust(inst, bg, p.alpha, p.beta);
        for (std::size_t i = 0; i < out.values().size(); ++i) {
            ASSERT_GE(out.values()[i], 0.0);
            ASSERT_LE(out.values()[i], 1.0);
            ASSERT_NEAR(out.values()[i], ref.values()[i], 1e-9);
        }
    }
}

TEST(ColorAdjust, DarkInstrumentIsDegenerate) {
    EXPECT_THROW(adjust_color_brightness(RasterImage(4, 4, 0.0), RasterImage(4, 4, 0.5), {}), DegenerateInput);
    RasterImage no_blue(4, 4, 0.5);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) no_blue(y, x, 2) = 0.0;
    EXPECT_THROW(adjust_color_brightness(no_blue, RasterImage(4, 4, 0.5), {}), DegenerateInput);
}

TEST(ColorAdjust, RejectsOutOfRangeParameters) {
    const RasterImage a(2, 2, 0.5);
    EXPECT_THROW(adjust_color_brightness(a, a, {1.5, 1.0}), InvalidParameter);
    EXPECT_THROW(adjust_color_brightness(a, a, {0.5, 0.0}), InvalidParameter);
}

TEST(Blend, Identities) {
    Rng rng(4);
    const RasterImage a = gen::image(rng, 7, 5), b = gen::image(rng, 7, 5);
    EXPECT_EQ(blend(a, b, SoftMask(7, 5, 1.0)), a);
    EXPECT_EQ(blend(a, b, SoftMask(7, 5, 0.0)), b);
}

TEST(Blend, QuarterWeight) {
    const RasterImage out = blend(RasterImage(1, 1, 1.0), RasterImage(1, 1, 0.0), SoftMask(1, 1, 0.25));
    EXPECT_EQ(out(0, 0, 0), 0.25);
}

TEST(Blend, ShapeMismatch) {
    EXPECT_THROW(blend(RasterImage(2, 2), RasterImage(2, 3), SoftMask(2, 2)), ShapeError);
    EXPECT_THROW(blend(RasterImage(2, 2), RasterImage(2, 2), SoftMask(3, 2)), ShapeError);
}

TEST(Blend, ConvexAndMatchesOracle) {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const int h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16);
        const RasterImage a = gen::image(rng, h, w), b = gen::image(rng, h, w);
        const SoftMask m = gen::soft(rng, h, w);
        const RasterImage out = blend(a, b, m);
        const RasterImage ref = oracle::blend(a, b, m);
        for (std::size_t i = 0; i < out.values().size(); ++i) {
            const double lo = std::min(a.values()[i], b.values()[i]);
            const double hi = std::max(a.values()[i], b.values()[i]);
            ASSERT_GE(out.values()[i], lo);
            ASSERT_LE(out.values()[i], hi);
            ASSERT_NEAR(out.values()[i], ref.values()[i], 1e-12);
        }
    }
}

TEST(Type1, DeterministicAndMaskFollowsGeometry) {
    const int n = 32;
    const LabeledImage s = bar_sample("a", n, 4, 14);
    const BackgroundImage bg = plain_background(n, 0.7, 0.3, 0.25);
    const SynthesisConfig cfg = small_config(n);
    const SyntheticSample x = generate_type1(s, bg, cfg, 99);
    const SyntheticSample y = generate_type1(s, bg, cfg, 99);
    EXPECT_EQ(x.image, y.image);
    EXPECT_EQ(x.mask, y.mask);
    EXPECT_EQ(x.provenance.instrument_id, "a");
    EXPECT_EQ(x.provenance.background_id, "bg");

    const auto& p = x.provenance.params;
    const auto [ti, tm] = imaging::transform(s.image, s.mask, p.transform);
    EXPECT_EQ(x.mask, imaging::trim_mask(tm, p.trim));
    for (double v : x.image.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Type1, LiveFrameSize) {
    const int n = 240;
    const LabeledImage s = bar_sample("live", n, 40, 120);
    const BackgroundImage bg = plain_background(n, 0.6, 0.3, 0.3);
    const SyntheticSample x = generate_type1(s, bg, SynthesisConfig::sinus_live(), 7);
    EXPECT_EQ(x.image.height(), n);
    EXPECT_EQ(x.mask.width(), n);
    const auto& p = x.provenance.params;
    EXPECT_GE(p.transform.resize, 0.9);
    EXPECT_LE(p.transform.resize, 1.2);
    EXPECT_EQ(p.fusion.dilation, 15);
    EXPECT_EQ(p.fusion.kernel % 2, 1);
    EXPECT_GE(p.trim.radius, 150.0);
    const auto [ti, tm] = imaging::transform(s.image, s.mask, p.transform);
    EXPECT_EQ(x.mask, imaging::trim_mask(tm, p.trim));
}

TEST(Type1, EmptyMaskIsRejected) {
    LabeledImage s = bar_sample("e", 16, 2, 6);
    s.mask = BinaryMask(16, 16, 0);
    EXPECT_THROW(generate_type1(s, plain_background(16, 0.5, 0.5, 0.5), small_config(16), 1), InvalidInput);
}

TEST(Type1, InstrumentPushedOutOfFrameFails) {
    const int n = 16;
    LabeledImage s = bar_sample("edge", n, 0, 2);
    SynthesisConfig cfg = small_config(n);
    cfg.move_w = {-0.9, -0.9};
    cfg.rotation_deg = {0.0, 0.0};
    EXPECT_THROW(generate_type1(s, plain_background(n, 0.5, 0.5, 0.5), cfg, 1), GenerationFailed);
}

TEST(Type2, NeedsInpainting) {
    const LabeledImage a = bar_sample("a", 16, 2, 6), b = bar_sample("b", 16, 8, 12);
    inpaint::InMemoryBackgroundPool pool;
    SynthesisConfig cfg = small_config(16);
    cfg.use_inpainting = false;
    EXPECT_THROW(generate_type2(a, b, pool, cfg, 1), NoBackgroundAvailable);
}

TEST(Type2, AppendsRecoveredBackgroundAndUsesDonor) {
    const int n = 32;
    const LabeledImage a = bar_sample("a", n, 2, 8), b = bar_sample("b", n, 18, 26);
    inpaint::InMemoryBackgroundPool pool;
    SynthesisConfig cfg = small_config(n);
    cfg.use_inpainting = true;
    const SyntheticSample s = generate_type2(a, b, pool, cfg, 5);
    EXPECT_EQ(pool.size(), 1u);
    EXPECT_EQ(pool.items()[0].origin, BackgroundOrigin::self_inpainted);
    EXPECT_EQ(s.provenance.instrument_id, "b");
    EXPECT_EQ(s.provenance.type, SynthType::type2);
}

TEST(Type2, SelfCompositeReconstructsOriginal) {
    const int n = 32;
    const LabeledImage a = bar_sample("a", n, 2, 8);
    inpaint::InMemoryBackgroundPool pool;
    SynthesisConfig cfg = small_config(n);
    Rng rng(9);
    const SoftMask cut = inpaint::inpainting_fusion_mask(a.mask, cfg, rng);
    const auto bg = inpaint::self_inpaint(a, cut, inpaint::SelfTransform::flip_h);
    ASSERT_TRUE(bg.has_value());

    SampledParams p;
    p.fusion = {1, imaging::BlurKind::average, 1, 0.0};
    double inst = 0.0, back = 0.0;
    for (double v : a.image.values()) inst += v;
    for (double v : bg->image.values()) back += v;
    p.color = {0.0, inst / back};
    const Composite c = composite(a, bg->image, p);
    EXPECT_EQ(c.mask, a.mask);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            if (cut(y, x) > 0.0 && !a.mask(y, x)) continue;  // blending band
            for (int ch = 0; ch < 3; ++ch) ASSERT_NEAR(c.image(y, x, ch), a.image(y, x, ch), 1e-12);
        }
}

TEST(MultiBlend, MasksIdenticalAndKindsDiffer) {
    const int n = 32;
    const LabeledImage s = bar_sample("m", n, 4, 16);
    const BackgroundImage bg = plain_background(n, 0.65, 0.3, 0.2);
    const SynthesisConfig cfg = small_config(n);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto [a, g] = multi_blend_pair(s, bg, cfg, seed);
        ASSERT_EQ(a.mask, g.mask);
        EXPECT_EQ(a.provenance.blend_kind, imaging::BlurKind::average);
        EXPECT_EQ(g.provenance.blend_kind, imaging::BlurKind::gaussian);
        EXPECT_EQ(a.provenance.params.transform.resize, g.provenance.params.transform.resize);
        EXPECT_EQ(a.provenance.params.color.alpha, g.provenance.params.color.alpha);
    }
}

TEST(MultiBlend, UnitKernelsGiveIdenticalImages) {
    const int n = 24;
    const LabeledImage s = bar_sample("u", n, 4, 12);
    SynthesisConfig cfg = small_config(n);
    cfg.dilation_d = {1, 1};
    cfg.fusion_k = {1, 1};
    const auto [a, g] = multi_blend_pair(s, plain_background(n, 0.6, 0.3, 0.3), cfg, 4);
    EXPECT_EQ(a.image, g.image);
    EXPECT_EQ(a.mask, g.mask);
}

TEST(MultiBlend, DifferencesStayNearDilatedMask) {
    const int n = 32;
    const LabeledImage s = bar_sample("d", n, 6, 14);
    const BackgroundImage bg = plain_background(n, 0.6, 0.35, 0.3);
    const SynthesisConfig cfg = small_config(n);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto [a, g] = multi_blend_pair(s, bg, cfg, seed);
        const auto [ti, tm] = imaging::transform(s.image, s.mask, a.provenance.params.transform);
        const BinaryMask dil = imaging::dilate(tm, a.provenance.params.fusion.dilation);
        const int kmax = std::max(a.provenance.params.fusion.kernel, g.provenance.params.fusion.kernel);
        const int reach = kmax + cfg.final_blur_k - 1;
        const BinaryMask support = imaging::dilate(dil, reach);
        const BinaryMask core = imaging::erode(dil, reach);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                if (support(y, x) && !core(y, x)) continue;
                for (int c = 0; c < 3; ++c) ASSERT_EQ(a.image(y, x, c), g.image(y, x, c)) << seed;
            }
    }
}

TEST(Config, PresetsValidate) {
    EXPECT_NO_THROW(SynthesisConfig::sinus_live().validate());
    EXPECT_NO_THROW(SynthesisConfig::sinus_cadaver().validate());
    const SynthesisConfig e = SynthesisConfig::endovis();
    EXPECT_NO_THROW(e.validate());
    EXPECT_EQ(e.type1_per_query, 0);
    EXPECT_EQ(e.type2_per_query, 1);
    EXPECT_EQ(e.multi_blend, 2);
    EXPECT_EQ(e.trim_shape, imaging::TrimShape::rectangle);
    EXPECT_EQ(SynthesisConfig::sinus_cadaver().fusion_k, (IntRange{5, 10}));
}

TEST(Config, RejectsBadRanges) {
    SynthesisConfig c;
    c.resize_ratio = {1.2, 0.9};
    EXPECT_THROW(c.validate(), InvalidParameter);
    c = {};
    c.multi_blend = 3;
    EXPECT_THROW(c.validate(), InvalidParameter);
    c = {};
    c.color_alpha = {0.5, 1.5};
    EXPECT_THROW(c.validate(), InvalidParameter);
}

#include "synthal/synthesis.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "synthal/inpaint.hpp"

namespace synthal {

const char* to_string(BackgroundOrigin o) noexcept {
    switch (o) {
        case BackgroundOrigin::self_inpainted: return "self_inpainted";
        case BackgroundOrigin::external_inpainted: return "external_inpainted";
        default: return "real_external";
    }
}

}  // namespace synthal

namespace synthal::synth {

namespace {

constexpr double kSumEpsilon = 1e-9;

void check_range(const Range& r, const char* name) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
        throw InvalidParameter(std::string(name) + ": range must satisfy lo <= hi");
    }
}

void check_range(const IntRange& r, const char* name) {
    if (r.lo > r.hi) throw InvalidParameter(std::string(name) + ": range must satisfy lo <= hi");
}

// Mask part of the pipeline is shared by every blend variant.
struct Geometry {
    RasterImage image;
    BinaryMask mask;
};

Geometry transform_with_retry(const LabeledImage& instrument, const SynthesisConfig& cfg, Rng& rng,
                              SampledParams& params, int& attempts) {
    const std::size_t original = count_foreground(instrument.mask);
    if (original == 0) throw InvalidInput("instrument mask of '" + instrument.id + "' is empty");
    for (attempts = 1; attempts <= kMaxGenerationAttempts; ++attempts) {
        params = sample_params(cfg, instrument.image.height(), instrument.image.width(), rng);
        auto [img, mask] = imaging::transform(instrument.image, instrument.mask, params.transform);
        if (count_foreground(mask) * 100 >= original) return {std::move(img), std::move(mask)};
    }
    attempts = kMaxGenerationAttempts;
    throw GenerationFailed("instrument of '" + instrument.id + "' left the frame after " +
                           std::to_string(kMaxGenerationAttempts) + " attempts");
}

Composite composite_from(const Geometry& geo, const RasterImage& background, const SampledParams& p) {
    Composite out;
    out.transformed_image = geo.image;
    out.transformed_mask = geo.mask;
    out.dilated_mask = imaging::dilate(geo.mask, p.fusion.dilation);
    out.fusion = imaging::fusion_mask(out.dilated_mask, p.fusion);
    out.adjusted = adjust_color_brightness(geo.image, background, p.color);
    out.fused = blend(out.adjusted, background, out.fusion);
    auto [img, mask] = imaging::trim(out.fused, geo.mask, p.trim);
    out.image = std::move(img);
    out.mask = std::move(mask);
    return out;
}

SyntheticSample make_sample(Composite&& c, Provenance prov) {
    return SyntheticSample{std::move(c.image), std::move(c.mask), std::move(prov)};
}

SyntheticSample generate_single(const LabeledImage& instrument, const BackgroundImage& background,
                                const SynthesisConfig& cfg, std::uint64_t seed, SynthType type) {
    cfg.validate();
    require_same_shape(instrument.image, background.image, "synthesis background");
    require_same_shape(instrument.image, instrument.mask, "instrument mask");
    Rng rng(seed);
    SampledParams params;
    int attempts = 0;
    const Geometry geo = transform_with_retry(instrument, cfg, rng, params, attempts);
    Provenance prov{instrument.id, background.id, type, params.fusion.blur, params, seed, attempts};
    return make_sample(composite_from(geo, background.image, params), std::move(prov));
}

}  // namespace

const char* to_string(SynthType t) noexcept { return t == SynthType::type1 ? "type1" : "type2"; }

void ColorAdjustParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidParameter("color alpha must lie in [0,1]");
    if (!(beta > 0.0)) throw InvalidParameter("brightness beta must be > 0");
}

void SynthesisConfig::validate() const {
    check_range(resize_ratio, "resize_ratio");
    if (!(resize_ratio.lo > 0.0)) throw InvalidParameter("resize_ratio must be > 0");
    check_range(move_w, "move_w");
    check_range(move_h, "move_h");
    check_range(rotation_deg, "rotation_deg");
    check_range(dilation_d, "dilation_d");
    if (dilation_d.lo < 1) throw InvalidParameter("dilation_d must be >= 1");
    check_range(fusion_k, "fusion_k");
    if (fusion_k.lo < 1) throw InvalidParameter("fusion_k must be >= 1");
    if (!(sigma_divisor > 0.0)) throw InvalidParameter("sigma_divisor must be > 0");
    check_range(color_alpha, "color_alpha");
    if (color_alpha.lo < 0.0 || color_alpha.hi > 1.0) throw InvalidParameter("color_alpha must lie in [0,1]");
    check_range(brightness_beta, "brightness_beta");
    if (!(brightness_beta.lo > 0.0)) throw InvalidParameter("brightness_beta must be > 0");
    check_range(trim_circle_x, "trim_circle_x");
    check_range(trim_circle_y, "trim_circle_y");
    check_range(trim_circle_r, "trim_circle_r");
    check_range(trim_rect_top, "trim_rect_top");
    check_range(trim_rect_bottom, "trim_rect_bottom");
    check_range(trim_rect_left, "trim_rect_left");
    check_range(trim_rect_right, "trim_rect_right");
    if (final_blur_k < 1 || final_blur_k % 2 == 0) throw InvalidParameter("final_blur_k must be odd and >= 1");
    if (!(final_blur_sigma > 0.0)) throw InvalidParameter("final_blur_sigma must be > 0");
    if (type1_per_query < 0 || type2_per_query < 0) throw InvalidParameter("synthesis counts must be >= 0");
    if (multi_blend != 1 && multi_blend != 2) throw InvalidParameter("multi_blend must be 1 or 2");
}

SynthesisConfig SynthesisConfig::sinus_live() { return SynthesisConfig{}; }

SynthesisConfig SynthesisConfig::sinus_cadaver() {
    SynthesisConfig c;
    c.fusion_k = {5, 10};
    return c;
}

SynthesisConfig SynthesisConfig::endovis() {
    SynthesisConfig c;
    c.move_w = {-0.05, 0.05};
    c.move_h = {-0.05, 0.05};
    c.trim_shape = imaging::TrimShape::rectangle;
    c.type1_per_query = 0;
    c.type2_per_query = 1;
    c.multi_blend = 2;
    c.use_external_backgrounds = false;
    c.use_inpainting = true;
    return c;
}

RasterImage adjust_color_brightness(const RasterImage& instrument, const RasterImage& background,
                                    const ColorAdjustParams& p) {
    require_same_shape(instrument, background, "adjust_color_brightness");
    p.validate();
    std::array<double, 3> inst_sum{}, bg_sum{};
    for (int y = 0; y < instrument.height(); ++y) {
        for (int x = 0; x < instrument.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                inst_sum[c] += instrument(y, x, c);
                bg_sum[c] += background(y, x, c);
            }
        }
    }
    const double inst_total = inst_sum[0] + inst_sum[1] + inst_sum[2];
    const double bg_total = bg_sum[0] + bg_sum[1] + bg_sum[2];
    if (!(inst_total > kSumEpsilon)) throw DegenerateInput("instrument image sum is ~0");
    for (int c = 0; c < 3; ++c) {
        if (!(inst_sum[c] > kSumEpsilon)) {
            throw DegenerateInput("instrument channel " + std::to_string(c) + " sum is ~0");
        }
    }

    const double brightness = p.beta * (bg_total / inst_total);
    std::array<double, 3> gain{};
    for (int c = 0; c < 3; ++c) gain[c] = p.alpha * (bg_sum[c] / inst_sum[c]);

    RasterImage out(instrument.height(), instrument.width());
    for (int y = 0; y < instrument.height(); ++y) {
        for (int x = 0; x < instrument.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = instrument(y, x, c);
                out(y, x, c) = clamp01(brightness * (gain[c] * v + (1.0 - p.alpha) * v));
            }
        }
    }
    return out;
}

RasterImage blend(const RasterImage& instrument_adj, const RasterImage& background, const SoftMask& fusion) {
    require_same_shape(instrument_adj, background, "blend");
    require_same_shape(instrument_adj, fusion, "blend");
    RasterImage out(background.height(), background.width());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const double m = fusion(y, x);
            for (int c = 0; c < 3; ++c) {
                const double a = instrument_adj(y, x, c);
                const double b = background(y, x, c);
                const double v = m * a + (1.0 - m) * b;
                // Rounding may leave the convex hull by an ulp.
                out(y, x, c) = std::clamp(v, std::min(a, b), std::max(a, b));
            }
        }
    }
    return out;
}

Composite composite(const LabeledImage& instrument, const RasterImage& background, const SampledParams& p) {
    require_same_shape(instrument.image, background, "composite");
    auto [img, mask] = imaging::transform(instrument.image, instrument.mask, p.transform);
    return composite_from(Geometry{std::move(img), std::move(mask)}, background, p);
}

SampledParams sample_params(const SynthesisConfig& cfg, int height, int width, Rng& rng) {
    SampledParams p;
    p.transform.resize = rng.uniform(cfg.resize_ratio.lo, cfg.resize_ratio.hi);
    p.transform.shift_w = rng.uniform(cfg.move_w.lo, cfg.move_w.hi);
    p.transform.shift_h = rng.uniform(cfg.move_h.lo, cfg.move_h.hi);
    p.transform.rotation_deg = rng.uniform(cfg.rotation_deg.lo, cfg.rotation_deg.hi);

    p.fusion.dilation = imaging::force_odd(rng.uniform_int(cfg.dilation_d.lo, cfg.dilation_d.hi));
    p.fusion.kernel = imaging::force_odd(rng.uniform_int(cfg.fusion_k.lo, cfg.fusion_k.hi));
    p.fusion.blur = rng.uniform01() < 0.5 ? imaging::BlurKind::average : imaging::BlurKind::gaussian;
    p.fusion.sigma = p.fusion.kernel / cfg.sigma_divisor;

    p.color.alpha = rng.uniform(cfg.color_alpha.lo, cfg.color_alpha.hi);
    p.color.beta = rng.uniform(cfg.brightness_beta.lo, cfg.brightness_beta.hi);

    p.trim.shape = cfg.trim_shape;
    p.trim.final_blur_k = cfg.final_blur_k;
    p.trim.final_blur_sigma = cfg.final_blur_sigma;
    if (cfg.trim_shape == imaging::TrimShape::circle) {
        p.trim.center_x = rng.uniform(cfg.trim_circle_x.lo, cfg.trim_circle_x.hi);
        p.trim.center_y = rng.uniform(cfg.trim_circle_y.lo, cfg.trim_circle_y.hi);
        p.trim.radius = rng.uniform(cfg.trim_circle_r.lo, cfg.trim_circle_r.hi);
    } else if (cfg.trim_shape == imaging::TrimShape::rectangle) {
        p.trim.top = rng.uniform_int(cfg.trim_rect_top.lo, cfg.trim_rect_top.hi);
        p.trim.bottom = rng.uniform_int(cfg.trim_rect_bottom.lo, cfg.trim_rect_bottom.hi);
        p.trim.left = rng.uniform_int(cfg.trim_rect_left.lo, cfg.trim_rect_left.hi);
        p.trim.right = rng.uniform_int(cfg.trim_rect_right.lo, cfg.trim_rect_right.hi);
    }
    p.trim.validate(height, width);
    return p;
}

SyntheticSample generate_type1(const LabeledImage& instrument, const BackgroundImage& background,
                               const SynthesisConfig& cfg, std::uint64_t seed) {
    return generate_single(instrument, background, cfg, seed, SynthType::type1);
}

SyntheticSample compose_type2(const BackgroundImage& original_background, const LabeledImage& donor,
                              const SynthesisConfig& cfg, std::uint64_t seed) {
    return generate_single(donor, original_background, cfg, seed, SynthType::type2);
}

SyntheticSample generate_type2(const LabeledImage& original, const LabeledImage& donor,
                               inpaint::BackgroundPool& pool, const SynthesisConfig& cfg, std::uint64_t seed) {
    if (!cfg.use_inpainting) {
        throw NoBackgroundAvailable("type-2 needs background inpainting to recover the background of '" +
                                    original.id + "'");
    }
    const BackgroundImage bg = inpaint::acquire_background(original, pool, cfg, derive_seed(seed, "background"));
    return compose_type2(bg, donor, cfg, seed);
}

std::pair<SyntheticSample, SyntheticSample> multi_blend_pair(const LabeledImage& instrument,
                                                             const BackgroundImage& background,
                                                             const SynthesisConfig& cfg, std::uint64_t seed,
                                                             SynthType type) {
    cfg.validate();
    require_same_shape(instrument.image, background.image, "synthesis background");
    require_same_shape(instrument.image, instrument.mask, "instrument mask");
    Rng rng(seed);
    SampledParams shared;
    int attempts = 0;
    const Geometry geo = transform_with_retry(instrument, cfg, rng, shared, attempts);

    SampledParams avg = shared;
    avg.fusion.blur = imaging::BlurKind::average;
    SampledParams gau = shared;
    gau.fusion.blur = imaging::BlurKind::gaussian;
    gau.fusion.kernel = imaging::force_odd(rng.uniform_int(cfg.fusion_k.lo, cfg.fusion_k.hi));
    gau.fusion.sigma = gau.fusion.kernel / cfg.sigma_divisor;

    Provenance pa{instrument.id, background.id, type, imaging::BlurKind::average, avg, seed, attempts};
    Provenance pg{instrument.id, background.id, type, imaging::BlurKind::gaussian, gau, seed, attempts};
    return {make_sample(composite_from(geo, background.image, avg), std::move(pa)),
            make_sample(composite_from(geo, background.image, gau), std::move(pg))};
}

}  // namespace synthal::synth

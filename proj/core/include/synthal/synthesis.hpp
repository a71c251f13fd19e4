#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "synthal/imaging.hpp"
#include "synthal/raster.hpp"
#include "synthal/rng.hpp"

namespace synthal {

/// A real image with its revealed instrument mask.
struct LabeledImage {
    std::string id;
    RasterImage image;
    BinaryMask mask;
};

enum class BackgroundOrigin { real_external, self_inpainted, external_inpainted };

const char* to_string(BackgroundOrigin o) noexcept;

/// Instrument-free frame usable as a compositing background.
struct BackgroundImage {
    std::string id;
    RasterImage image;
    BackgroundOrigin origin = BackgroundOrigin::real_external;
    std::vector<std::string> source_ids;
};

}  // namespace synthal

namespace synthal::inpaint {
class BackgroundPool;
}

namespace synthal::synth {

struct ColorAdjustParams {
    double alpha = 1.0;  ///< colour transfer strength, 0 <= alpha <= 1
    double beta = 1.0;   ///< brightness factor, > 0

    void validate() const;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Range&, const Range&) = default;
};

struct IntRange {
    int lo = 0;
    int hi = 0;
    friend bool operator==(const IntRange&, const IntRange&) = default;
};

/// Parameter ranges (each sampled uniformly) and per-query counts.
struct SynthesisConfig {
    Range resize_ratio{0.9, 1.2};
    Range move_w{-0.1, 0.1};
    Range move_h{-0.1, 0.1};
    Range rotation_deg{-30.0, 30.0};
    IntRange dilation_d{15, 15};
    IntRange fusion_k{10, 15};
    double sigma_divisor = 3.0;  ///< gaussian fusion sigma = k / sigma_divisor
    Range color_alpha{0.4, 1.0};
    Range brightness_beta{0.9, 1.3};

    imaging::TrimShape trim_shape = imaging::TrimShape::circle;
    Range trim_circle_x{115.0, 125.0};
    Range trim_circle_y{115.0, 125.0};
    Range trim_circle_r{150.0, 170.0};
    IntRange trim_rect_top{6, 9};
    IntRange trim_rect_bottom{6, 9};
    IntRange trim_rect_left{71, 74};
    IntRange trim_rect_right{71, 74};
    int final_blur_k = 3;
    double final_blur_sigma = 3.0;

    int type1_per_query = 2;
    int type2_per_query = 0;
    int multi_blend = 1;  ///< 1 or 2
    bool use_external_backgrounds = true;
    bool use_inpainting = false;

    void validate() const;

    /// Table 1 defaults for the three reference datasets.
    static SynthesisConfig sinus_live();
    static SynthesisConfig sinus_cadaver();
    static SynthesisConfig endovis();

    friend bool operator==(const SynthesisConfig&, const SynthesisConfig&) = default;
};

enum class SynthType { type1, type2 };

const char* to_string(SynthType t) noexcept;

/// Everything drawn for one composite.
struct SampledParams {
    imaging::TransformParams transform;
    imaging::FusionParams fusion;
    ColorAdjustParams color;
    imaging::TrimSpec trim;
};

struct Provenance {
    std::string instrument_id;
    std::string background_id;
    SynthType type = SynthType::type1;
    imaging::BlurKind blend_kind = imaging::BlurKind::average;
    SampledParams params;
    std::uint64_t seed = 0;
    int attempts = 1;
};

struct SyntheticSample {
    RasterImage image;
    BinaryMask mask;
    Provenance provenance;
};

/// Global per-channel colour transfer and brightness matching. Sums run
/// over every pixel of the respective image.
RasterImage adjust_color_brightness(const RasterImage& instrument, const RasterImage& background,
                                    const ColorAdjustParams& p);

/// I_F = M_F * I_Ic + (1 - M_F) * I_B per channel.
RasterImage blend(const RasterImage& instrument_adj, const RasterImage& background, const SoftMask& fusion);

/// Intermediate products of one composite, exposed for inspection.
struct Composite {
    RasterImage transformed_image;  ///< I_Ir
    BinaryMask transformed_mask;    ///< M_Ir
    BinaryMask dilated_mask;        ///< M_Id
    SoftMask fusion;                ///< M_F
    RasterImage adjusted;           ///< I_Ic
    RasterImage fused;              ///< I_F (before trim / final blur)
    RasterImage image;              ///< I_Syn
    BinaryMask mask;                ///< M_Syn
};

/// Runs transform -> dilate -> fusion mask -> colour adjust -> blend -> trim
/// with fixed parameters.
Composite composite(const LabeledImage& instrument, const RasterImage& background, const SampledParams& p);

/// Draws parameters from `cfg` for a frame of the given size.
SampledParams sample_params(const SynthesisConfig& cfg, int height, int width, Rng& rng);

/// Instrument of `instrument` pasted onto `background`.
SyntheticSample generate_type1(const LabeledImage& instrument, const BackgroundImage& background,
                               const SynthesisConfig& cfg, std::uint64_t seed);

/// Donor instrument pasted onto the recovered (inpainted) background of the
/// original sample.
SyntheticSample compose_type2(const BackgroundImage& original_background, const LabeledImage& donor,
                              const SynthesisConfig& cfg, std::uint64_t seed);

/// Type-2 end to end: recovers the original sample's background (self or
/// external inpainting, appending it to `pool`) then composites the donor.
/// Requires background inpainting to be enabled in `cfg`.
SyntheticSample generate_type2(const LabeledImage& original, const LabeledImage& donor,
                               inpaint::BackgroundPool& pool, const SynthesisConfig& cfg, std::uint64_t seed);

/// Two composites sharing geometry, colour and trim; the first uses
/// average fusion, the second gaussian fusion, each with its own k.
std::pair<SyntheticSample, SyntheticSample> multi_blend_pair(const LabeledImage& instrument,
                                                             const BackgroundImage& background,
                                                             const SynthesisConfig& cfg, std::uint64_t seed,
                                                             SynthType type = SynthType::type1);

/// Attempts allowed before GenerationFailed when the transformed
/// instrument keeps less than 1% of its foreground.
inline constexpr int kMaxGenerationAttempts = 10;

}  // namespace synthal::synth

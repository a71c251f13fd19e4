#include "synthal/inpaint.hpp"

#include <algorithm>

namespace synthal::inpaint {

namespace {

RasterImage fill_from(const LabeledImage& sample, const SoftMask& fusion, const RasterImage& source) {
    const RasterImage& img = sample.image;
    RasterImage out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double m = fusion(y, x);
            for (int c = 0; c < 3; ++c) {
                const double a = source(y, x, c);
                const double b = img(y, x, c);
                out(y, x, c) = std::clamp(m * a + (1.0 - m) * b, std::min(a, b), std::max(a, b));
            }
        }
    }
    return out;
}

void check_transform(SelfTransform t, int height, int width) {
    if (requires_square(t) && height != width) {
        throw InvalidParameter(std::string(to_string(t)) + " needs a square frame");
    }
}

}  // namespace

const char* to_string(SelfTransform t) noexcept {
    switch (t) {
        case SelfTransform::flip_h: return "flip_h";
        case SelfTransform::flip_v: return "flip_v";
        case SelfTransform::rot90: return "rot90";
        case SelfTransform::rot180: return "rot180";
        default: return "rot270";
    }
}

template <typename G>
G apply(const G& src, SelfTransform t) {
    const int h = src.height();
    const int w = src.width();
    check_transform(t, h, w);
    G out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int sy = y, sx = x;
            switch (t) {
                case SelfTransform::flip_h: sx = w - 1 - x; break;
                case SelfTransform::flip_v: sy = h - 1 - y; break;
                case SelfTransform::rot90: sy = x; sx = w - 1 - y; break;
                case SelfTransform::rot180: sy = h - 1 - y; sx = w - 1 - x; break;
                case SelfTransform::rot270: sy = h - 1 - x; sx = y; break;
            }
            for (int c = 0; c < G::kChannels; ++c) out(y, x, c) = src(sy, sx, c);
        }
    }
    return out;
}

template RasterImage apply(const RasterImage&, SelfTransform);
template BinaryMask apply(const BinaryMask&, SelfTransform);
template SoftMask apply(const SoftMask&, SelfTransform);

bool fusion_masks_overlap(const SoftMask& fusion, SelfTransform t) {
    const SoftMask moved = apply(fusion, t);
    const auto a = fusion.values();
    const auto b = moved.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > 0.0 && b[i] > 0.0) return true;
    }
    return false;
}

std::optional<BackgroundImage> self_inpaint(const LabeledImage& sample, const SoftMask& fusion, SelfTransform t) {
    require_same_shape(sample.image, fusion, "self_inpaint");
    check_transform(t, sample.image.height(), sample.image.width());
    if (fusion_masks_overlap(fusion, t)) return std::nullopt;
    BackgroundImage bg;
    bg.id = background_id_for(sample.id);
    bg.image = fill_from(sample, fusion, apply(sample.image, t));
    bg.origin = BackgroundOrigin::self_inpainted;
    bg.source_ids = {sample.id, to_string(t)};
    return bg;
}

BackgroundImage external_inpaint(const LabeledImage& sample, const SoftMask& fusion, const BackgroundImage& donor) {
    require_same_shape(sample.image, fusion, "external_inpaint");
    require_same_shape(sample.image, donor.image, "external_inpaint donor");
    BackgroundImage bg;
    bg.id = background_id_for(sample.id);
    bg.image = fill_from(sample, fusion, donor.image);
    bg.origin = BackgroundOrigin::external_inpainted;
    bg.source_ids = {sample.id, donor.id};
    return bg;
}

SoftMask inpainting_fusion_mask(const BinaryMask& mask, const synth::SynthesisConfig& cfg, Rng& rng) {
    imaging::FusionParams f;
    f.dilation = imaging::force_odd(rng.uniform_int(cfg.dilation_d.lo, cfg.dilation_d.hi));
    f.kernel = imaging::force_odd(rng.uniform_int(cfg.fusion_k.lo, cfg.fusion_k.hi));
    f.blur = imaging::BlurKind::average;
    return imaging::fusion_mask(imaging::dilate(mask, f.dilation), f);
}

BackgroundImage acquire_background(const LabeledImage& sample, BackgroundPool& pool,
                                   const synth::SynthesisConfig& cfg, std::uint64_t seed) {
    require_same_shape(sample.image, sample.mask, "acquire_background");
    Rng rng(seed);
    const SoftMask fusion = inpainting_fusion_mask(sample.mask, cfg, rng);
    const bool square = sample.image.height() == sample.image.width();
    for (SelfTransform t : kSelfTransformOrder) {
        if (requires_square(t) && !square) continue;
        if (auto bg = self_inpaint(sample, fusion, t)) {
            pool.append(*bg);
            return std::move(*bg);
        }
    }
    if (pool.empty()) {
        throw NoBackgroundAvailable("every self transform overlaps for '" + sample.id + "' and the pool is empty");
    }
    const BackgroundImage donor = pool.load(rng.index(pool.size()));
    BackgroundImage bg = external_inpaint(sample, fusion, donor);
    pool.append(bg);
    return bg;
}

std::string background_id_for(const std::string& image_id) { return "inpaint-" + image_id; }

}  // namespace synthal::inpaint

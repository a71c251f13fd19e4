#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthal/synthesis.hpp"

/// Instrument-free backgrounds from labeled frames.
namespace synthal::inpaint {

enum class SelfTransform { flip_h, flip_v, rot90, rot180, rot270 };

const char* to_string(SelfTransform t) noexcept;

/// Trial order used by acquire_background.
inline constexpr SelfTransform kSelfTransformOrder[] = {SelfTransform::flip_h, SelfTransform::flip_v,
                                                        SelfTransform::rot90, SelfTransform::rot180,
                                                        SelfTransform::rot270};

inline bool requires_square(SelfTransform t) noexcept {
    return t == SelfTransform::rot90 || t == SelfTransform::rot270;
}

/// Flip or rotate a grid. rot90 turns content 90 degrees counter-clockwise;
/// the quarter turns need a square frame.
template <typename G>
G apply(const G& src, SelfTransform t);

/// Ordered, append-only source of backgrounds.
class BackgroundPool {
public:
    virtual ~BackgroundPool() = default;
    virtual std::size_t size() const = 0;
    virtual BackgroundImage load(std::size_t index) const = 0;
    virtual void append(BackgroundImage bg) = 0;
    bool empty() const { return size() == 0; }
};

class InMemoryBackgroundPool final : public BackgroundPool {
public:
    InMemoryBackgroundPool() = default;
    explicit InMemoryBackgroundPool(std::vector<BackgroundImage> items) : items_(std::move(items)) {}

    std::size_t size() const override { return items_.size(); }
    BackgroundImage load(std::size_t index) const override { return items_.at(index); }
    void append(BackgroundImage bg) override { items_.push_back(std::move(bg)); }
    const std::vector<BackgroundImage>& items() const noexcept { return items_; }

private:
    std::vector<BackgroundImage> items_;
};

/// True when some pixel is positive in both the fusion mask and its transformed copy.
bool fusion_masks_overlap(const SoftMask& fusion, SelfTransform t);

/// Fill the instrument region from a flipped / rotated copy of the frame.
/// Returns nullopt when the fusion mask overlaps its transformed copy.
std::optional<BackgroundImage> self_inpaint(const LabeledImage& sample, const SoftMask& fusion, SelfTransform t);

/// Fill the instrument region from a donor background.
BackgroundImage external_inpaint(const LabeledImage& sample, const SoftMask& fusion, const BackgroundImage& donor);

/// Fusion mask used to cut the instrument out of `sample`.
SoftMask inpainting_fusion_mask(const BinaryMask& mask, const synth::SynthesisConfig& cfg, Rng& rng);

/// Tries every feasible self transform in kSelfTransformOrder, then falls
/// back to a seeded random donor from the pool. The new background is
/// appended to the pool.
BackgroundImage acquire_background(const LabeledImage& sample, BackgroundPool& pool,
                                   const synth::SynthesisConfig& cfg, std::uint64_t seed);

/// Id given to the background recovered from a labeled image.
std::string background_id_for(const std::string& image_id);

}  // namespace synthal::inpaint

#pragma once

#include <utility>

#include "synthal/raster.hpp"

/// Pixel primitives shared by synthesis and inpainting.
namespace synthal::imaging {

/// Geometric map applied to an instrument image: resize about the frame
/// centre, translate, then rotate about the frame centre.
struct TransformParams {
    double resize = 1.0;        ///< new size / original size, > 0
    double shift_w = 0.0;       ///< horizontal shift as a fraction of the width
    double shift_h = 0.0;       ///< vertical shift as a fraction of the height
    double rotation_deg = 0.0;  ///< counter-clockwise on screen

    void validate() const;
    bool is_identity() const noexcept {
        return resize == 1.0 && shift_w == 0.0 && shift_h == 0.0 && rotation_deg == 0.0;
    }
};

enum class BlurKind { average, gaussian };

const char* to_string(BlurKind k) noexcept;

struct FusionParams {
    int dilation = 1;  ///< d, odd
    BlurKind blur = BlurKind::average;
    int kernel = 1;      ///< k, odd
    double sigma = 0.0;  ///< gaussian only; <= 0 means kernel / 3

    void validate() const;
    double effective_sigma() const noexcept { return sigma > 0.0 ? sigma : kernel / 3.0; }
};

enum class TrimShape { none, circle, rectangle };

const char* to_string(TrimShape s) noexcept;

/// Endoscope field-of-view trim plus the final weak Gaussian blur.
struct TrimSpec {
    TrimShape shape = TrimShape::none;
    // circle
    double center_x = 0.0;
    double center_y = 0.0;
    double radius = 1.0;
    // rectangle margins in pixels
    int top = 0;
    int bottom = 0;
    int left = 0;
    int right = 0;
    // final blur, image only
    int final_blur_k = 1;
    double final_blur_sigma = 1.0;

    void validate(int height, int width) const;
};

/// Even kernel sizes are bumped to the next odd value.
constexpr int force_odd(int k) noexcept { return k % 2 == 0 ? k + 1 : k; }

/// Pixel offset of a fractional shift, rounded to whole pixels.
int shift_pixels(double fraction, int extent) noexcept;

std::pair<RasterImage, BinaryMask> transform(const RasterImage& image, const BinaryMask& mask,
                                             const TransformParams& p);

/// Union of translates of `mask` over a d x d square (d odd).
BinaryMask dilate(const BinaryMask& mask, int d);

/// Erosion by a d x d square; pixels outside the frame count as background.
BinaryMask erode(const BinaryMask& mask, int d);

/// k x k normalised blur weights (row-major, k*k entries in a SoftMask).
SoftMask blur_kernel(BlurKind kind, int k, double sigma);

/// M_F: blurred dilated mask in [0,1]. Exactly 1 where the k x k
/// neighbourhood lies inside the mask, exactly 0 where it is disjoint.
/// Borders replicate edge values.
SoftMask fusion_mask(const BinaryMask& dilated, const FusionParams& f);

/// Separable Gaussian blur with replicated borders; k odd.
RasterImage gaussian_blur(const RasterImage& image, int k, double sigma);

/// 1 where a pixel survives the trim, 0 where it is cut.
BinaryMask trim_keep_region(int height, int width, const TrimSpec& t);

/// Zero pixels outside the field of view in image and mask, blur the
/// image with the final kernel, then re-zero the cut region.
std::pair<RasterImage, BinaryMask> trim(const RasterImage& image, const BinaryMask& mask,
                                        const TrimSpec& t);

/// Mask path of trim alone (no blur involved).
BinaryMask trim_mask(const BinaryMask& mask, const TrimSpec& t);

}  // namespace synthal::imaging

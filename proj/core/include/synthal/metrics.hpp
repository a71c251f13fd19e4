#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "synthal/raster.hpp"

/// Segmentation evaluation: Dice, IoU and IoU restricted to a band
/// around the ground-truth boundary.
namespace synthal::metrics {

inline constexpr int kDefaultBandWidth = 20;

/// Pixel counts every metric is derived from.
struct OverlapCounts {
    std::size_t intersection = 0;  ///< |S ∩ G|
    std::size_t predicted = 0;     ///< |S|
    std::size_t truth = 0;         ///< |G|
    std::size_t union_ = 0;        ///< |S ∪ G|
};

/// Counts restricted to `region` when it is given.
OverlapCounts count_overlap(const BinaryMask& s, const BinaryMask& g, const BinaryMask* region = nullptr);

/// 2|S∩G| / (|S|+|G|); 1 when both masks are empty.
double dsc(const BinaryMask& s, const BinaryMask& g);

/// |S∩G| / |S∪G|; 1 when both masks are empty.
double iou(const BinaryMask& s, const BinaryMask& g);

/// Band of total `width` pixels straddling the boundary of `g`: width/2
/// outside (dilation) and width/2 inside (erosion). `width` even, >= 2.
BinaryMask boundary_band(const BinaryMask& g, int width);

/// IoU of S and G inside boundary_band(g, width); 1 when that is empty.
double iou_nb(const BinaryMask& s, const BinaryMask& g, int width = kDefaultBandWidth);

struct ImageMetrics {
    std::string id;
    double dsc = 0.0;
    double iou = 0.0;
    double iou_nb = 0.0;
};

struct EvalResult {
    std::vector<ImageMetrics> per_image;  ///< sorted by id
    double mean_dsc = 0.0;
    double mean_iou = 0.0;
    double mean_iou_nb = 0.0;
};

struct MaskPair {
    std::string id;
    BinaryMask prediction;
    BinaryMask truth;
};

ImageMetrics evaluate_image(const MaskPair& pair, int band_width = kDefaultBandWidth);

/// Per-image metrics and their unweighted means, reduced in id order.
EvalResult evaluate(std::vector<MaskPair> pairs, int band_width = kDefaultBandWidth);

}  // namespace synthal::metrics

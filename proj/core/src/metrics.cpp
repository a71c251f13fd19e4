#include "synthal/metrics.hpp"

#include <algorithm>

#include "synthal/imaging.hpp"

namespace synthal::metrics {

namespace {

double ratio_or_one(std::size_t num, std::size_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

OverlapCounts count_overlap(const BinaryMask& s, const BinaryMask& g, const BinaryMask* region) {
    require_same_shape(s, g, "metrics");
    if (region) require_same_shape(s, *region, "metrics region");
    const auto sv = s.values();
    const auto gv = g.values();
    OverlapCounts n;
    for (std::size_t i = 0; i < sv.size(); ++i) {
        if (region && !region->values()[i]) continue;
        const bool a = sv[i] != 0;
        const bool b = gv[i] != 0;
        n.intersection += a && b;
        n.predicted += a;
        n.truth += b;
        n.union_ += a || b;
    }
    return n;
}

double dsc(const BinaryMask& s, const BinaryMask& g) {
    const auto n = count_overlap(s, g);
    return ratio_or_one(2 * n.intersection, n.predicted + n.truth);
}

double iou(const BinaryMask& s, const BinaryMask& g) {
    const auto n = count_overlap(s, g);
    return ratio_or_one(n.intersection, n.union_);
}

BinaryMask boundary_band(const BinaryMask& g, int width) {
    if (width < 2 || width % 2 != 0) {
        throw InvalidParameter("band width must be even and >= 2, got " + std::to_string(width));
    }
    const int kernel = width + 1;  // radius width/2 on each side
    const BinaryMask outer = imaging::dilate(g, kernel);
    const BinaryMask inner = imaging::erode(g, kernel);
    BinaryMask band(g.height(), g.width(), 0);
    auto b = band.values();
    const auto o = outer.values();
    const auto in = inner.values();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = (o[i] && !in[i]) ? 1 : 0;
    return band;
}

double iou_nb(const BinaryMask& s, const BinaryMask& g, int width) {
    require_same_shape(s, g, "iou_nb");
    const BinaryMask band = boundary_band(g, width);
    const auto n = count_overlap(s, g, &band);
    return ratio_or_one(n.intersection, n.union_);
}

ImageMetrics evaluate_image(const MaskPair& pair, int band_width) {
    return {pair.id, dsc(pair.prediction, pair.truth), iou(pair.prediction, pair.truth),
            iou_nb(pair.prediction, pair.truth, band_width)};
}

EvalResult evaluate(std::vector<MaskPair> pairs, int band_width) {
    std::sort(pairs.begin(), pairs.end(), [](const MaskPair& a, const MaskPair& b) { return a.id < b.id; });
    EvalResult r;
    for (const auto& p : pairs) r.per_image.push_back(evaluate_image(p, band_width));
    if (r.per_image.empty()) return r;
    for (const auto& m : r.per_image) {
        r.mean_dsc += m.dsc;
        r.mean_iou += m.iou;
        r.mean_iou_nb += m.iou_nb;
    }
    const auto n = static_cast<double>(r.per_image.size());
    r.mean_dsc /= n;
    r.mean_iou /= n;
    r.mean_iou_nb /= n;
    return r;
}

}  // namespace synthal::metrics

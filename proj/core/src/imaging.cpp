#include "synthal/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace synthal::imaging {

namespace {

constexpr double kMaskThreshold = 0.5;

// Bilinear sample of channel c at real coordinates; taps outside the
// frame read as 0.
template <typename G>
double sample_bilinear(const G& src, double fx, double fy, int c) {
    const double x0f = std::floor(fx);
    const double y0f = std::floor(fy);
    const int x0 = static_cast<int>(x0f);
    const int y0 = static_cast<int>(y0f);
    const double ax = fx - x0f;
    const double ay = fy - y0f;
    const int h = src.height();
    const int w = src.width();
    if (x0 < -1 || y0 < -1 || x0 >= w || y0 >= h) return 0.0;
    auto tap = [&](int y, int x) -> double {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
        return static_cast<double>(src(y, x, c));
    };
    const double top = (1.0 - ax) * tap(y0, x0) + ax * tap(y0, x0 + 1);
    const double bottom = (1.0 - ax) * tap(y0 + 1, x0) + ax * tap(y0 + 1, x0 + 1);
    return (1.0 - ay) * top + ay * bottom;
}

// Summed-area table of a binary mask, (h+1) x (w+1).
class CountTable {
public:
    explicit CountTable(const BinaryMask& m) : w_(m.width() + 1), sums_((m.height() + 1) * w_, 0) {
        for (int y = 0; y < m.height(); ++y) {
            int row = 0;
            for (int x = 0; x < m.width(); ++x) {
                row += m(y, x) != 0;
                at(y + 1, x + 1) = at(y, x + 1) + row;
            }
        }
    }
    // Inclusive rectangle [y0,y1] x [x0,x1].
    int count(int y0, int x0, int y1, int x1) const {
        return at(y1 + 1, x1 + 1) - at(y0, x1 + 1) - at(y1 + 1, x0) + at(y0, x0);
    }

private:
    int& at(int y, int x) { return sums_[static_cast<std::size_t>(y) * w_ + x]; }
    int at(int y, int x) const { return sums_[static_cast<std::size_t>(y) * w_ + x]; }
    int w_;
    std::vector<int> sums_;
};

void require_odd_positive(int k, const char* what) {
    if (k < 1 || k % 2 == 0) {
        throw InvalidParameter(std::string(what) + " must be odd and >= 1, got " + std::to_string(k));
    }
}

std::vector<double> gaussian_1d(int k, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(k));
    const int r = k / 2;
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
        g[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (auto& v : g) v /= sum;
    return g;
}

}  // namespace

const char* to_string(BlurKind k) noexcept { return k == BlurKind::average ? "average" : "gaussian"; }

const char* to_string(TrimShape s) noexcept {
    switch (s) {
        case TrimShape::circle: return "circle";
        case TrimShape::rectangle: return "rectangle";
        default: return "none";
    }
}

void TransformParams::validate() const {
    if (!(resize > 0.0) || !std::isfinite(resize)) {
        throw InvalidParameter("resize ratio must be > 0, got " + std::to_string(resize));
    }
    if (!std::isfinite(shift_w) || !std::isfinite(shift_h) || !std::isfinite(rotation_deg)) {
        throw InvalidParameter("transform parameters must be finite");
    }
}

void FusionParams::validate() const {
    require_odd_positive(dilation, "dilation kernel d");
    require_odd_positive(kernel, "fusion kernel k");
    if (blur == BlurKind::gaussian && !(effective_sigma() > 0.0)) {
        throw InvalidParameter("gaussian sigma must be > 0");
    }
}

void TrimSpec::validate(int height, int width) const {
    require_odd_positive(final_blur_k, "final blur kernel");
    if (!(final_blur_sigma > 0.0)) throw InvalidParameter("final blur sigma must be > 0");
    switch (shape) {
        case TrimShape::none: break;
        case TrimShape::circle:
            if (!(radius > 0.0)) throw InvalidParameter("trim radius must be > 0");
            break;
        case TrimShape::rectangle:
            if (top < 0 || bottom < 0 || left < 0 || right < 0) {
                throw InvalidParameter("trim margins must be >= 0");
            }
            if (left + right >= width || top + bottom >= height) {
                throw InvalidParameter("trim margins leave no visible area");
            }
            break;
    }
}

int shift_pixels(double fraction, int extent) noexcept {
    return static_cast<int>(std::lround(fraction * extent));
}

std::pair<RasterImage, BinaryMask> transform(const RasterImage& image, const BinaryMask& mask,
                                             const TransformParams& p) {
    require_same_shape(image, mask, "transform");
    p.validate();
    if (p.is_identity()) return {image, mask};

    const int h = image.height();
    const int w = image.width();
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double rad = p.rotation_deg * std::numbers::pi / 180.0;
    const double cos_t = std::cos(rad);
    const double sin_t = std::sin(rad);
    const double sx = shift_pixels(p.shift_w, w);
    const double sy = shift_pixels(p.shift_h, h);
    const double inv_c = 1.0 / p.resize;

    RasterImage out_img(h, w, 0.0);
    BinaryMask out_mask(h, w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Invert rotate, translate, resize in turn.
            const double dx = x - cx;
            const double dy = y - cy;
            double u = cx + cos_t * dx - sin_t * dy;
            double v = cy + sin_t * dx + cos_t * dy;
            u -= sx;
            v -= sy;
            u = cx + (u - cx) * inv_c;
            v = cy + (v - cy) * inv_c;
            for (int c = 0; c < 3; ++c) out_img(y, x, c) = clamp01(sample_bilinear(image, u, v, c));
            out_mask(y, x) = sample_bilinear(mask, u, v, 0) >= kMaskThreshold ? 1 : 0;
        }
    }
    return {std::move(out_img), std::move(out_mask)};
}

BinaryMask dilate(const BinaryMask& mask, int d) {
    require_odd_positive(d, "dilation kernel d");
    if (d == 1) return mask;
    const int h = mask.height();
    const int w = mask.width();
    const int r = d / 2;
    const CountTable table(mask);
    BinaryMask out(h, w, 0);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r);
        const int y1 = std::min(h - 1, y + r);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - r);
            const int x1 = std::min(w - 1, x + r);
            out(y, x) = table.count(y0, x0, y1, x1) > 0 ? 1 : 0;
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int d) {
    require_odd_positive(d, "erosion kernel d");
    if (d == 1) return mask;
    const int h = mask.height();
    const int w = mask.width();
    const int r = d / 2;
    const CountTable table(mask);
    BinaryMask out(h, w, 0);
    for (int y = r; y < h - r; ++y) {
        for (int x = r; x < w - r; ++x) {
            out(y, x) = table.count(y - r, x - r, y + r, x + r) == d * d ? 1 : 0;
        }
    }
    return out;
}

SoftMask blur_kernel(BlurKind kind, int k, double sigma) {
    require_odd_positive(k, "blur kernel k");
    SoftMask kernel(k, k, 0.0);
    if (kind == BlurKind::average) {
        const double v = 1.0 / (static_cast<double>(k) * k);
        for (auto& e : kernel.values()) e = v;
        return kernel;
    }
    if (!(sigma > 0.0)) throw InvalidParameter("gaussian sigma must be > 0");
    const auto g = gaussian_1d(k, sigma);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            kernel(i, j) = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
            sum += kernel(i, j);
        }
    }
    for (auto& e : kernel.values()) e /= sum;
    return kernel;
}

SoftMask fusion_mask(const BinaryMask& dilated, const FusionParams& f) {
    f.validate();
    const int h = dilated.height();
    const int w = dilated.width();
    const int k = f.kernel;
    const int r = k / 2;
    SoftMask out(h, w, 0.0);
    if (k == 1) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out(y, x) = dilated(y, x) ? 1.0 : 0.0;
        return out;
    }

    const SoftMask kernel = blur_kernel(f.blur, k, f.effective_sigma());
    double kernel_sum = 0.0;
    for (double v : kernel.values()) kernel_sum += v;

    const CountTable table(dilated);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r);
        const int y1 = std::min(h - 1, y + r);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - r);
            const int x1 = std::min(w - 1, x + r);
            // With replicated borders the neighbourhood only holds values
            // from the clamped window, so saturation is decided there.
            const int n = table.count(y0, x0, y1, x1);
            if (n == 0) continue;
            if (n == (y1 - y0 + 1) * (x1 - x0 + 1)) {
                out(y, x) = 1.0;
                continue;
            }
            if (f.blur == BlurKind::average) {
                int hits = 0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    for (int dx = -r; dx <= r; ++dx) {
                        hits += dilated(yy, std::clamp(x + dx, 0, w - 1)) != 0;
                    }
                }
                out(y, x) = static_cast<double>(hits) / (static_cast<double>(k) * k);
            } else {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    for (int dx = -r; dx <= r; ++dx) {
                        if (dilated(yy, std::clamp(x + dx, 0, w - 1))) acc += kernel(dy + r, dx + r);
                    }
                }
                out(y, x) = clamp01(acc / kernel_sum);
            }
        }
    }
    return out;
}

RasterImage gaussian_blur(const RasterImage& image, int k, double sigma) {
    require_odd_positive(k, "blur kernel k");
    if (k == 1) return image;
    if (!(sigma > 0.0)) throw InvalidParameter("gaussian sigma must be > 0");
    const auto g = gaussian_1d(k, sigma);
    const int r = k / 2;
    const int h = image.height();
    const int w = image.width();

    RasterImage rows(h, w, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    acc += g[static_cast<std::size_t>(i + r)] * image(y, std::clamp(x + i, 0, w - 1), c);
                }
                rows(y, x, c) = acc;
            }
        }
    }
    RasterImage out(h, w, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    acc += g[static_cast<std::size_t>(i + r)] * rows(std::clamp(y + i, 0, h - 1), x, c);
                }
                out(y, x, c) = clamp01(acc);
            }
        }
    }
    return out;
}

BinaryMask trim_keep_region(int height, int width, const TrimSpec& t) {
    t.validate(height, width);
    BinaryMask keep(height, width, 1);
    if (t.shape == TrimShape::circle) {
        const double r2 = t.radius * t.radius;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double dx = x - t.center_x;
                const double dy = y - t.center_y;
                keep(y, x) = dx * dx + dy * dy <= r2 ? 1 : 0;
            }
        }
    } else if (t.shape == TrimShape::rectangle) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const bool inside = y >= t.top && y < height - t.bottom && x >= t.left && x < width - t.right;
                keep(y, x) = inside ? 1 : 0;
            }
        }
    }
    return keep;
}

BinaryMask trim_mask(const BinaryMask& mask, const TrimSpec& t) {
    const BinaryMask keep = trim_keep_region(mask.height(), mask.width(), t);
    BinaryMask out = mask;
    auto o = out.values();
    auto kv = keep.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<std::uint8_t>(o[i] & kv[i]);
    return out;
}

std::pair<RasterImage, BinaryMask> trim(const RasterImage& image, const BinaryMask& mask,
                                        const TrimSpec& t) {
    require_same_shape(image, mask, "trim");
    const BinaryMask keep = trim_keep_region(image.height(), image.width(), t);
    RasterImage cut = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!keep(y, x)) {
                for (int c = 0; c < 3; ++c) cut(y, x, c) = 0.0;
            }
        }
    }
    RasterImage blurred = gaussian_blur(cut, t.final_blur_k, t.final_blur_sigma);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!keep(y, x)) {
                for (int c = 0; c < 3; ++c) blurred(y, x, c) = 0.0;
            }
        }
    }
    return {std::move(blurred), trim_mask(mask, t)};
}

}  // namespace synthal::imaging

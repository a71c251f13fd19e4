#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "synthal/raster.hpp"

/// Acquisition scoring over committee probability maps.
namespace synthal::query {

/// T committee members x C classes x H x W softmax maps, stored
/// member-major, then class-major, then row-major.
class ProbabilityStack {
public:
    ProbabilityStack() = default;
    ProbabilityStack(int members, int classes, int height, int width);
    ProbabilityStack(int members, int classes, int height, int width, std::vector<float> data);

    int members() const noexcept { return members_; }
    int classes() const noexcept { return classes_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }

    float operator()(int t, int c, int y, int x) const noexcept { return data_[index(t, c, y, x)]; }
    float& operator()(int t, int c, int y, int x) noexcept { return data_[index(t, c, y, x)]; }

    /// Plane of one (member, class) pair, pixel_count() values.
    std::span<const float> plane(int t, int c) const noexcept {
        return std::span<const float>(data_).subspan(index(t, c, 0, 0), pixel_count());
    }
    std::span<const float> values() const noexcept { return data_; }

    /// Throws InvalidStack unless T >= 1, C >= 2, p in [0,1] and every
    /// (member, pixel) row sums to 1 within kSumTolerance.
    void validate() const;

    friend bool operator==(const ProbabilityStack&, const ProbabilityStack&) = default;

    static constexpr double kSumTolerance = 1e-4;

private:
    std::size_t index(int t, int c, int y, int x) const noexcept {
        return ((static_cast<std::size_t>(t) * classes_ + c) * height_ + y) * width_ + x;
    }

    int members_ = 0;
    int classes_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

enum class Strategy { entropy, bald, random };

const char* to_string(Strategy s) noexcept;
Strategy parse_strategy(const std::string& s);

/// Predictive entropy of the committee mean, nats, 0 ln 0 = 0.
ScoreMap entropy_map(const ProbabilityStack& stack);

/// BALD mutual information per pixel, nats, clamped to [0, entropy].
ScoreMap bald_map(const ProbabilityStack& stack);

struct Aggregator {
    enum class Kind { mean, sum, top_fraction } kind = Kind::mean;
    double fraction = 1.0;  ///< used by top_fraction, in (0,1]

    static Aggregator parse(const std::string& s);  ///< "mean", "sum", "top:<q>"
    std::string to_string() const;
};

/// Pixel map reduced to one image score.
double image_score(const ScoreMap& map, const Aggregator& agg = {});

struct ImageScore {
    std::string image_id;
    double score = 0.0;
    Strategy strategy = Strategy::bald;
};

/// Score of one image under `strategy` (random scores are 0).
ImageScore score_image(const std::string& id, const ProbabilityStack& stack, Strategy strategy,
                       const Aggregator& agg = {});

/// The n highest scores, ties broken by ascending id, in descending score order.
std::vector<std::string> select_query_batch(std::span<const ImageScore> scores, std::size_t n);

/// Same ordering as select_query_batch but keeps the scores.
std::vector<ImageScore> rank_query_batch(std::span<const ImageScore> scores, std::size_t n);

/// Uniform draw of n ids without replacement (ids sorted before drawing).
std::vector<std::string> select_random(std::vector<std::string> ids, std::size_t n, std::uint64_t seed);

}  // namespace synthal::query

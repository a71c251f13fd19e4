#include "synthal/query.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "synthal/rng.hpp"

namespace synthal::query {

namespace {

void check_dims(int members, int classes, int height, int width) {
    if (members < 1 || classes < 2 || height < 1 || width < 1) {
        throw InvalidStack("stack needs T >= 1, C >= 2, H,W >= 1");
    }
}

// Committee mean per (class, pixel), accumulated in double.
std::vector<double> committee_mean(const ProbabilityStack& s) {
    const std::size_t n = s.pixel_count();
    std::vector<double> mean(static_cast<std::size_t>(s.classes()) * n, 0.0);
    for (int t = 0; t < s.members(); ++t) {
        for (int c = 0; c < s.classes(); ++c) {
            const auto plane = s.plane(t, c);
            double* dst = mean.data() + static_cast<std::size_t>(c) * n;
            for (std::size_t i = 0; i < n; ++i) dst[i] += plane[i];
        }
    }
    if (s.members() > 1) {
        for (auto& v : mean) v /= s.members();
    }
    return mean;
}

ScoreMap entropy_from_mean(const ProbabilityStack& s, const std::vector<double>& mean) {
    const std::size_t n = s.pixel_count();
    ScoreMap h(s.height(), s.width(), 0.0);
    auto out = h.values();
    for (int c = 0; c < s.classes(); ++c) {
        const double* m = mean.data() + static_cast<std::size_t>(c) * n;
        for (std::size_t i = 0; i < n; ++i) {
            if (m[i] > 0.0) out[i] -= m[i] * std::log(m[i]);
        }
    }
    return h;
}

}  // namespace

ProbabilityStack::ProbabilityStack(int members, int classes, int height, int width)
    : members_(members), classes_(classes), height_(height), width_(width) {
    check_dims(members, classes, height, width);
    data_.assign(static_cast<std::size_t>(members) * classes * height * width, 0.0f);
}

ProbabilityStack::ProbabilityStack(int members, int classes, int height, int width, std::vector<float> data)
    : members_(members), classes_(classes), height_(height), width_(width), data_(std::move(data)) {
    check_dims(members, classes, height, width);
    if (data_.size() != static_cast<std::size_t>(members) * classes * height * width) {
        throw InvalidStack("payload size does not match T*C*H*W");
    }
}

void ProbabilityStack::validate() const {
    check_dims(members_, classes_, height_, width_);
    for (float v : data_) {
        if (!(v >= 0.0f && v <= 1.0f)) throw InvalidStack("probability outside [0,1]");
    }
    const std::size_t n = pixel_count();
    std::vector<double> sums(n);
    for (int t = 0; t < members_; ++t) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (int c = 0; c < classes_; ++c) {
            const auto p = plane(t, c);
            for (std::size_t i = 0; i < n; ++i) sums[i] += p[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(sums[i] - 1.0) > kSumTolerance) {
                throw InvalidStack("member " + std::to_string(t) + " pixel " + std::to_string(i) +
                                   " sums to " + std::to_string(sums[i]));
            }
        }
    }
}

const char* to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::entropy: return "entropy";
        case Strategy::random: return "random";
        default: return "bald";
    }
}

Strategy parse_strategy(const std::string& s) {
    if (s == "bald") return Strategy::bald;
    if (s == "entropy") return Strategy::entropy;
    if (s == "random") return Strategy::random;
    throw InvalidParameter("unknown strategy '" + s + "'");
}

ScoreMap entropy_map(const ProbabilityStack& stack) {
    stack.validate();
    return entropy_from_mean(stack, committee_mean(stack));
}

ScoreMap bald_map(const ProbabilityStack& stack) {
    stack.validate();
    const std::size_t n = stack.pixel_count();
    const auto mean = committee_mean(stack);
    ScoreMap entropy = entropy_from_mean(stack, mean);

    // Mean KL divergence of each member from the committee mean; equal to
    // H(mean) - mean_t H(member t) and exactly 0 when members agree.
    std::vector<double> log_mean(mean.size(), 0.0);
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (mean[i] > 0.0) log_mean[i] = std::log(mean[i]);
    }
    ScoreMap bald(stack.height(), stack.width(), 0.0);
    auto acc = bald.values();
    for (int t = 0; t < stack.members(); ++t) {
        for (int c = 0; c < stack.classes(); ++c) {
            const auto p = stack.plane(t, c);
            const double* lm = log_mean.data() + static_cast<std::size_t>(c) * n;
            for (std::size_t i = 0; i < n; ++i) {
                if (p[i] > 0.0f) {
                    const double pv = p[i];
                    acc[i] += pv * (std::log(pv) - lm[i]);
                }
            }
        }
    }
    const auto h = entropy.values();
    for (std::size_t i = 0; i < n; ++i) {
        double v = acc[i];
        if (stack.members() > 1) v /= stack.members();
        acc[i] = std::clamp(v, 0.0, h[i]);
    }
    return bald;
}

Aggregator Aggregator::parse(const std::string& s) {
    if (s == "mean") return {Kind::mean, 1.0};
    if (s == "sum") return {Kind::sum, 1.0};
    if (s.rfind("top:", 0) == 0) {
        double q = 0.0;
        const char* first = s.data() + 4;
        const char* last = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(first, last, q);
        if (ec != std::errc{} || ptr != last || !(q > 0.0 && q <= 1.0)) {
            throw InvalidParameter("top fraction must lie in (0,1]: '" + s + "'");
        }
        return {Kind::top_fraction, q};
    }
    throw InvalidParameter("unknown aggregator '" + s + "'");
}

std::string Aggregator::to_string() const {
    switch (kind) {
        case Kind::sum: return "sum";
        case Kind::top_fraction: {
            char buf[64];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, fraction);
            return "top:" + std::string(buf, ptr);
        }
        default: return "mean";
    }
}

double image_score(const ScoreMap& map, const Aggregator& agg) {
    const auto v = map.values();
    if (v.empty()) throw InvalidInput("empty score map");
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidInput("score map holds non-finite values");
    }
    switch (agg.kind) {
        case Aggregator::Kind::sum: return std::accumulate(v.begin(), v.end(), 0.0);
        case Aggregator::Kind::top_fraction: {
            if (!(agg.fraction > 0.0 && agg.fraction <= 1.0)) throw InvalidParameter("top fraction must lie in (0,1]");
            const auto count = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(agg.fraction * static_cast<double>(v.size()))));
            std::vector<double> sorted(v.begin(), v.end());
            std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(count), sorted.end(),
                              std::greater<>());
            return std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(count), 0.0) /
                   static_cast<double>(count);
        }
        default: return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }
}

ImageScore score_image(const std::string& id, const ProbabilityStack& stack, Strategy strategy,
                       const Aggregator& agg) {
    switch (strategy) {
        case Strategy::entropy: return {id, image_score(entropy_map(stack), agg), strategy};
        case Strategy::bald: return {id, image_score(bald_map(stack), agg), strategy};
        default: return {id, 0.0, strategy};
    }
}

std::vector<ImageScore> rank_query_batch(std::span<const ImageScore> scores, std::size_t n) {
    if (n > scores.size()) {
        throw InsufficientPool("asked for " + std::to_string(n) + " of " + std::to_string(scores.size()) + " images");
    }
    std::vector<ImageScore> ranked(scores.begin(), scores.end());
    auto better = [](const ImageScore& a, const ImageScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.image_id < b.image_id;
    };
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(), better);
    ranked.resize(n);
    return ranked;
}

std::vector<std::string> select_query_batch(std::span<const ImageScore> scores, std::size_t n) {
    std::vector<std::string> ids;
    for (auto& s : rank_query_batch(scores, n)) ids.push_back(std::move(s.image_id));
    return ids;
}

std::vector<std::string> select_random(std::vector<std::string> ids, std::size_t n, std::uint64_t seed) {
    if (n > ids.size()) {
        throw InsufficientPool("asked for " + std::to_string(n) + " of " + std::to_string(ids.size()) + " images");
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(seed);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.index(ids.size() - i);
        std::swap(ids[i], ids[j]);
    }
    ids.resize(n);
    return ids;
}

}  // namespace synthal::query

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "synthal/query.hpp"
#include "synthal/synthesis.hpp"

/// Run configuration: an INI-style text file.
///
///     # comment
///     [synthesis]
///     resize_ratio = [0.9, 1.2]
///     type1_per_query = 2
///
/// Ranges are written `[lo, hi]`; a single value means lo = hi. Unknown
/// sections or keys, duplicates and malformed values raise ConfigError.
namespace synthal::config {

/// When the random half of the budget is drawn.
enum class RandomMode {
    init,        ///< all random picks before the first query
    interleaved  ///< random half split over init + every iteration
};

enum class TrainerMode { mock, external };

const char* to_string(RandomMode m) noexcept;
const char* to_string(TrainerMode m) noexcept;

struct DatasetSection {
    std::string root;
    std::string run_dir = "run";
    std::uint64_t seed = 0;

    friend bool operator==(const DatasetSection&, const DatasetSection&) = default;
};

struct BudgetSection {
    double fraction = 0.10;  ///< share of the training split that gets labels
    int al_iterations = 3;
    RandomMode random_mode = RandomMode::init;

    friend bool operator==(const BudgetSection&, const BudgetSection&) = default;
};

struct QuerySection {
    query::Strategy strategy = query::Strategy::bald;
    std::string aggregator = "mean";

    friend bool operator==(const QuerySection&, const QuerySection&) = default;
};

struct TrainerSection {
    TrainerMode mode = TrainerMode::mock;
    /// Shell command; {manifest}, {output_dir}, {seed} and {T} are substituted.
    std::string command;
    int committee_size = 5;
    double timeout_s = 3600.0;

    friend bool operator==(const TrainerSection&, const TrainerSection&) = default;
};

struct RunConfig {
    DatasetSection dataset;
    BudgetSection budget;
    synth::SynthesisConfig synthesis;
    QuerySection query;
    TrainerSection trainer;

    /// Throws ConfigError on any out-of-range value.
    void validate() const;

    /// "live", "cadaver" or "endovis".
    static RunConfig preset(std::string_view name);

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_run_config(std::string_view text);

/// Canonical form: every key, fixed order, shortest round-trip numbers.
std::string serialize(const RunConfig& cfg);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace synthal::config

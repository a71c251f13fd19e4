#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthal/config.hpp"
#include "synthal/inpaint.hpp"
#include "synthal/io.hpp"
#include "synthal/query.hpp"
#include "synthal/synthesis.hpp"

/// Pool bookkeeping and the active-learning loop.
namespace synthal::al {

namespace fs = std::filesystem;

// ------------------------------------------------------------ budget

struct BudgetSchedule {
    std::size_t training_size = 0;
    std::size_t total_budget = 0;
    std::size_t initial_random = 0;
    std::vector<std::size_t> per_iteration;         ///< ids picked by the query strategy
    std::vector<std::size_t> random_per_iteration;  ///< extra random picks (interleaved mode only)
    bool al_enabled = true;

    /// Half of floor(fraction * N) (rounded down) is drawn at random, the
    /// same count is queried over `iterations`, remainders going to the
    /// earliest iterations. A 100% budget labels everything up front.
    static BudgetSchedule make(std::size_t training_size, double fraction, int iterations,
                               config::RandomMode mode = config::RandomMode::init);

    std::size_t iterations() const noexcept { return per_iteration.size(); }
    /// Labeled count once iteration i (1-based; 0 = after init) is done.
    std::size_t labeled_after(std::size_t i) const;
};

/// n split into `parts` counts differing by at most one, larger first.
std::vector<std::size_t> even_split(std::size_t n, std::size_t parts);

// ------------------------------------------------------------ pools

/// Labeled / unlabeled bookkeeping. Masks of unlabeled images stay hidden:
/// asking for one throws LabelLeak. Every mask read is logged so tests can
/// audit what the loop looked at.
class PoolState {
public:
    PoolState() = default;
    /// `hidden` maps every training id to its mask path; all start unlabeled.
    PoolState(std::map<std::string, fs::path> images, std::map<std::string, fs::path> hidden);

    const std::set<std::string>& unlabeled() const noexcept { return unlabeled_; }
    const std::set<std::string>& labeled() const noexcept { return labeled_; }
    std::size_t size() const noexcept { return images_.size(); }

    bool is_labeled(const std::string& id) const { return labeled_.count(id) != 0; }

    /// Moves ids to the labeled pool. Throws InvalidInput for an id that is
    /// not currently unlabeled.
    void reveal(const std::vector<std::string>& ids);

    const fs::path& image_path(const std::string& id) const;

    /// Mask of a labeled image; LabelLeak for anything else.
    const fs::path& mask_path(const std::string& id) const;

    /// Image plus revealed mask.
    LabeledImage load_labeled(const std::string& id) const;

    std::vector<std::string> mask_access_log() const;

private:
    std::map<std::string, fs::path> images_;
    std::map<std::string, fs::path> hidden_;
    std::set<std::string> unlabeled_;
    std::set<std::string> labeled_;
    std::unique_ptr<std::mutex> log_mutex_ = std::make_unique<std::mutex>();
    mutable std::vector<std::string> access_log_;
};

/// Backgrounds kept on disk; appended items are written as PNG.
class DiskBackgroundPool final : public inpaint::BackgroundPool {
public:
    struct Entry {
        std::string id;
        fs::path path;
        BackgroundOrigin origin = BackgroundOrigin::real_external;
        std::vector<std::string> source_ids;
    };

    /// New items go to `directory/<id>.png`.
    explicit DiskBackgroundPool(fs::path directory) : directory_(std::move(directory)) {}

    void add_existing(Entry e) { entries_.push_back(std::move(e)); }

    std::size_t size() const override { return entries_.size(); }
    BackgroundImage load(std::size_t index) const override;
    void append(BackgroundImage bg) override;
    const std::vector<Entry>& entries() const noexcept { return entries_; }

private:
    fs::path directory_;
    std::vector<Entry> entries_;
};

// ------------------------------------------------------------ trainer

/// Foreground heuristic: logit = 6 (v - s) + N(0, 0.5^2) per member and
/// pixel, v = max channel, s = HSV saturation. Class 0 is background,
/// class 1 instrument.
query::ProbabilityStack mock_predict(const RasterImage& image, int members, std::uint64_t seed);

/// Seed mock_predict uses for `id` under a run-supplied seed.
std::uint64_t mock_image_seed(std::uint64_t seed, const std::string& id);

struct TrainRequest {
    fs::path manifest;    ///< training manifest (jsonl)
    fs::path output_dir;  ///< receives <id>.pmap per image to predict
    fs::path work_dir;    ///< working directory of the command
    fs::path log_file;
    std::uint64_t seed = 0;
    std::vector<std::string> predict_ids;
};

/// Trains on a manifest and writes one probability stack per image to
/// predict. External mode runs a shell command with a timeout and one
/// retry; mock mode runs mock_predict in process.
class TrainerAdapter {
public:
    TrainerAdapter(config::TrainerSection settings, unsigned workers = 0);

    void run(const TrainRequest& request) const;

    /// Command with {manifest}, {output_dir}, {seed} and {T} substituted
    /// (paths shell-quoted).
    std::string expand_command(const TrainRequest& request) const;

    const config::TrainerSection& settings() const noexcept { return settings_; }

private:
    void run_external(const TrainRequest& request) const;

    config::TrainerSection settings_;
    unsigned workers_;
};

/// Mock training: predicts every "predict" line of a training manifest,
/// resolving relative image paths against `base_dir`. Used by both the
/// in-process adapter and the mock-train subcommand.
void mock_train(const fs::path& manifest, const fs::path& base_dir, const fs::path& output_dir, std::uint64_t seed,
                int members, unsigned workers = 0);

// ------------------------------------------------------------ manifests

struct TrainEntry {
    enum class Role { train, predict } role = Role::train;
    std::string id;
    std::string image_path;
    std::string mask_path;  ///< empty for predict entries
};

/// One JSON object per line: {"role":"train"|"predict","id","image","mask"}.
/// Relative paths resolve against the run directory, which is also the
/// trainer command's working directory.
std::string encode_train_manifest(const std::vector<TrainEntry>& entries);
std::vector<TrainEntry> parse_train_manifest(std::string_view text);

// ------------------------------------------------------------ synthesis

struct SyntheticRecord {
    std::string id;
    std::string image_path;  ///< relative to the run directory
    std::string mask_path;
    int iteration = 0;
    synth::Provenance provenance;
};

std::string synthetic_record_json(const SyntheticRecord& r);

struct SynthesisFailure {
    std::string image_id;
    std::string error;
};

/// Outcome of generating samples for a batch of images.
struct SynthesisBatch {
    std::vector<SyntheticRecord> records;
    std::vector<SynthesisFailure> failures;
    std::vector<std::string> new_backgrounds;
};

/// Everything needed to synthesise for one set of newly labeled images.
struct SynthesisJob {
    const PoolState* pools = nullptr;
    DiskBackgroundPool* backgrounds = nullptr;
    const synth::SynthesisConfig* config = nullptr;
    fs::path run_dir;
    std::uint64_t seed = 0;
    int iteration = 0;
    unsigned workers = 0;
};

/// Inpaints backgrounds from `ids` (when enabled) then writes Type-1 and
/// Type-2 samples to run_dir/synthetic. Per-image failures are collected,
/// never thrown. Output is independent of the worker count.
SynthesisBatch synthesize_for(const SynthesisJob& job, const std::vector<std::string>& ids);

// ------------------------------------------------------------ loop

struct IterationReport {
    int iteration = 0;
    std::string strategy;
    std::vector<query::ImageScore> selected;
    std::vector<std::string> random_selected;
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
    std::size_t synthetic_added = 0;
    std::size_t synthetic_total = 0;
    std::size_t backgrounds = 0;
    std::vector<SynthesisFailure> failures;
};

std::string report_json(const IterationReport& r);

struct RunSummary {
    BudgetSchedule schedule;
    std::vector<IterationReport> reports;  ///< [0] covers initialisation
    std::size_t synthetic_total = 0;
    fs::path run_dir;
};

/// One active-learning run. Construct, then call init() and step() until
/// done(), or run() for all of it.
class Loop {
public:
    Loop(config::RunConfig cfg, fs::path run_dir, unsigned workers = 0);

    void init();
    bool done() const noexcept { return next_iteration_ > schedule_.iterations(); }
    IterationReport step();
    RunSummary run();

    const PoolState& pools() const noexcept { return pools_; }
    const BudgetSchedule& schedule() const noexcept { return schedule_; }
    const std::vector<SyntheticRecord>& synthetic() const noexcept { return synthetic_; }

private:
    void add_synthesis(const std::vector<std::string>& ids, int iteration, IterationReport& report);
    void write_snapshot(int iteration, const IterationReport& report);
    std::vector<TrainEntry> training_entries() const;
    fs::path iteration_dir(int iteration) const;

    config::RunConfig cfg_;
    fs::path run_dir_;
    unsigned workers_;
    io::DatasetLayout layout_;
    PoolState pools_;
    DiskBackgroundPool backgrounds_;
    BudgetSchedule schedule_;
    TrainerAdapter trainer_;
    std::vector<SyntheticRecord> synthetic_;
    std::vector<IterationReport> reports_;
    std::size_t next_iteration_ = 1;
    bool initialised_ = false;
};

/// Master seed: explicit value if given, else SYNTHAL_SEED, else `fallback`.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback);

}  // namespace synthal::al

#include "synthal/orchestrator.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "synthal/parallel.hpp"
#include "synthal/rng.hpp"

namespace synthal::al {

namespace {

using json = nlohmann::json;

std::string two_digits(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02zu", i);
    return buf;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

std::string tail_lines(const fs::path& file, std::size_t lines) {
    std::string text;
    try {
        text = io::read_file(file);
    } catch (const Error&) {
        return {};
    }
    std::size_t pos = text.size();
    for (std::size_t n = 0; n <= lines && pos > 0; ++n) {
        pos = text.rfind('\n', pos - 1);
        if (pos == std::string::npos) return text;
    }
    return text.substr(pos + 1);
}

json params_json(const synth::SampledParams& p) {
    const auto& t = p.transform;
    const auto& f = p.fusion;
    const auto& tr = p.trim;
    json trim = {{"shape", imaging::to_string(tr.shape)},
                 {"final_blur_k", tr.final_blur_k},
                 {"final_blur_sigma", tr.final_blur_sigma}};
    if (tr.shape == imaging::TrimShape::circle) {
        trim["center_x"] = tr.center_x;
        trim["center_y"] = tr.center_y;
        trim["radius"] = tr.radius;
    } else if (tr.shape == imaging::TrimShape::rectangle) {
        trim["top"] = tr.top;
        trim["bottom"] = tr.bottom;
        trim["left"] = tr.left;
        trim["right"] = tr.right;
    }
    return {{"resize", t.resize},
            {"shift_w", t.shift_w},
            {"shift_h", t.shift_h},
            {"rotation_deg", t.rotation_deg},
            {"dilation", f.dilation},
            {"kernel", f.kernel},
            {"sigma", f.effective_sigma()},
            {"alpha", p.color.alpha},
            {"beta", p.color.beta},
            {"trim", trim}};
}

std::string seed_string(std::uint64_t s) { return std::to_string(s); }

}  // namespace

// ------------------------------------------------------------ budget

std::vector<std::size_t> even_split(std::size_t n, std::size_t parts) {
    if (parts == 0) {
        if (n != 0) throw InvalidParameter("cannot split a positive count into zero parts");
        return {};
    }
    std::vector<std::size_t> out(parts, n / parts);
    for (std::size_t i = 0; i < n % parts; ++i) ++out[i];
    return out;
}

BudgetSchedule BudgetSchedule::make(std::size_t training_size, double fraction, int iterations,
                                    config::RandomMode mode) {
    if (training_size == 0) throw InvalidParameter("training set is empty");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidParameter("budget fraction must lie in (0,1]");
    BudgetSchedule s;
    s.training_size = training_size;
    const auto nominal = std::min<std::size_t>(
        training_size, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(training_size) + 1e-9)));
    if (nominal >= training_size) {
        s.total_budget = training_size;
        s.initial_random = training_size;
        s.al_enabled = false;
        return s;
    }
    if (iterations < 1) throw InvalidParameter("al_iterations must be >= 1 below a 100% budget");
    const std::size_t half = nominal / 2;
    if (half == 0) throw InvalidParameter("budget of " + std::to_string(nominal) + " image(s) is too small to split");
    s.total_budget = 2 * half;
    s.per_iteration = even_split(half, static_cast<std::size_t>(iterations));
    if (mode == config::RandomMode::init) {
        s.initial_random = half;
        s.random_per_iteration.assign(s.per_iteration.size(), 0);
    } else {
        auto slots = even_split(half, static_cast<std::size_t>(iterations) + 1);
        s.initial_random = slots.front();
        s.random_per_iteration.assign(slots.begin() + 1, slots.end());
    }
    return s;
}

std::size_t BudgetSchedule::labeled_after(std::size_t i) const {
    if (i > iterations()) throw InvalidParameter("iteration index out of range");
    std::size_t n = initial_random;
    for (std::size_t j = 0; j < i; ++j) n += per_iteration[j] + random_per_iteration[j];
    return n;
}

// ------------------------------------------------------------ pools

PoolState::PoolState(std::map<std::string, fs::path> images, std::map<std::string, fs::path> hidden)
    : images_(std::move(images)), hidden_(std::move(hidden)) {
    for (const auto& [id, path] : images_) {
        if (!hidden_.count(id)) throw DatasetError("no mask declared for training image '" + id + "'");
        unlabeled_.insert(id);
    }
}

void PoolState::reveal(const std::vector<std::string>& ids) {
    for (const auto& id : ids) {
        if (!unlabeled_.count(id)) throw InvalidInput("'" + id + "' is not in the unlabeled pool");
    }
    for (const auto& id : ids) {
        unlabeled_.erase(id);
        labeled_.insert(id);
    }
}

const fs::path& PoolState::image_path(const std::string& id) const {
    const auto it = images_.find(id);
    if (it == images_.end()) throw InvalidInput("unknown image id '" + id + "'");
    return it->second;
}

const fs::path& PoolState::mask_path(const std::string& id) const {
    if (!labeled_.count(id)) throw LabelLeak("mask of '" + id + "' requested before it was labeled");
    {
        std::lock_guard lock(*log_mutex_);
        access_log_.push_back(id);
    }
    return hidden_.at(id);
}

LabeledImage PoolState::load_labeled(const std::string& id) const {
    const fs::path& mask = mask_path(id);
    return {id, io::read_image(image_path(id)), io::read_mask(mask)};
}

std::vector<std::string> PoolState::mask_access_log() const {
    std::lock_guard lock(*log_mutex_);
    return access_log_;
}

BackgroundImage DiskBackgroundPool::load(std::size_t index) const {
    const Entry& e = entries_.at(index);
    return {e.id, io::read_image(e.path), e.origin, e.source_ids};
}

void DiskBackgroundPool::append(BackgroundImage bg) {
    const fs::path path = directory_ / (bg.id + ".png");
    io::write_image(path, bg.image);
    entries_.push_back({bg.id, path, bg.origin, bg.source_ids});
}

// ------------------------------------------------------------ trainer

std::uint64_t mock_image_seed(std::uint64_t seed, const std::string& id) { return derive_seed(seed, id, 0); }

query::ProbabilityStack mock_predict(const RasterImage& image, int members, std::uint64_t seed) {
    if (members < 1) throw InvalidParameter("committee size must be >= 1");
    const int h = image.height();
    const int w = image.width();
    std::vector<double> base(image.pixel_count());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r = image(y, x, 0), g = image(y, x, 1), b = image(y, x, 2);
            const double v = std::max({r, g, b});
            const double lo = std::min({r, g, b});
            const double s = v > 0.0 ? (v - lo) / v : 0.0;
            base[static_cast<std::size_t>(y) * w + x] = 6.0 * (v - s);
        }
    }
    query::ProbabilityStack stack(members, 2, h, w);
    Rng rng(seed);
    for (int t = 0; t < members; ++t) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double logit = base[static_cast<std::size_t>(y) * w + x] + 0.5 * rng.normal();
                const auto fg = static_cast<float>(1.0 / (1.0 + std::exp(-logit)));
                stack(t, 1, y, x) = fg;
                stack(t, 0, y, x) = 1.0f - fg;
            }
        }
    }
    return stack;
}

std::string encode_train_manifest(const std::vector<TrainEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        json j = {{"role", e.role == TrainEntry::Role::train ? "train" : "predict"}, {"id", e.id}, {"image", e.image_path}};
        if (e.role == TrainEntry::Role::train) j["mask"] = e.mask_path;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<TrainEntry> parse_train_manifest(std::string_view text) {
    std::vector<TrainEntry> out;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            const json j = json::parse(line);
            TrainEntry e;
            const auto role = j.at("role").get<std::string>();
            if (role == "train") {
                e.role = TrainEntry::Role::train;
                e.mask_path = j.at("mask").get<std::string>();
            } else if (role == "predict") {
                e.role = TrainEntry::Role::predict;
            } else {
                throw FormatError("unknown role '" + role + "'");
            }
            e.id = j.at("id").get<std::string>();
            e.image_path = j.at("image").get<std::string>();
            out.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw FormatError("training manifest line " + std::to_string(lineno) + ": " + ex.what());
        } catch (const FormatError& ex) {
            throw FormatError("training manifest line " + std::to_string(lineno) + ": " + ex.detail());
        }
    }
    return out;
}

void mock_train(const fs::path& manifest, const fs::path& base_dir, const fs::path& output_dir, std::uint64_t seed,
                int members, unsigned workers) {
    std::vector<TrainEntry> predict;
    for (auto& e : parse_train_manifest(io::read_file(manifest))) {
        if (e.role == TrainEntry::Role::predict) predict.push_back(std::move(e));
    }
    fs::create_directories(output_dir);
    parallel_for(
        predict.size(),
        [&](std::size_t i) {
            const TrainEntry& e = predict[i];
            const fs::path image = fs::path(e.image_path).is_absolute() ? fs::path(e.image_path) : base_dir / e.image_path;
            io::write_probability_stack(output_dir / (e.id + ".pmap"),
                                        mock_predict(io::read_image(image), members, mock_image_seed(seed, e.id)));
        },
        workers);
}

TrainerAdapter::TrainerAdapter(config::TrainerSection settings, unsigned workers)
    : settings_(std::move(settings)), workers_(workers) {
    if (settings_.committee_size < 1) throw InvalidParameter("committee_size must be >= 1");
    if (settings_.mode == config::TrainerMode::external &&
        settings_.command.find_first_not_of(" \t") == std::string::npos) {
        throw InvalidParameter("external trainer mode needs a command");
    }
}

std::string TrainerAdapter::expand_command(const TrainRequest& request) const {
    std::string cmd = settings_.command;
    replace_all(cmd, "{manifest}", shell_quote(request.manifest.string()));
    replace_all(cmd, "{output_dir}", shell_quote(request.output_dir.string()));
    replace_all(cmd, "{seed}", seed_string(request.seed));
    replace_all(cmd, "{T}", std::to_string(settings_.committee_size));
    return cmd;
}

void TrainerAdapter::run(const TrainRequest& request) const {
    fs::create_directories(request.output_dir);
    if (settings_.mode == config::TrainerMode::mock) {
        mock_train(request.manifest, request.work_dir, request.output_dir, request.seed, settings_.committee_size,
                   workers_);
    } else {
        run_external(request);
    }
    std::vector<std::string> missing;
    for (const auto& id : request.predict_ids) {
        if (!fs::exists(request.output_dir / (id + ".pmap"))) missing.push_back(id);
    }
    if (!missing.empty()) {
        throw TrainerError("trainer produced no stack for " + std::to_string(missing.size()) + " image(s), first '" +
                           missing.front() + "'");
    }
}

void TrainerAdapter::run_external(const TrainRequest& request) const {
    const std::string cmd = expand_command(request);
    if (request.log_file.has_parent_path()) fs::create_directories(request.log_file.parent_path());
    std::string diagnostics;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        {
            std::FILE* log = std::fopen(request.log_file.c_str(), "a");
            if (log) {
                std::fprintf(log, "## attempt %d: %s\n", attempt, cmd.c_str());
                std::fclose(log);
            }
        }
        const pid_t pid = fork();
        if (pid < 0) throw TrainerError("fork failed");
        if (pid == 0) {
            setpgid(0, 0);
            if (!request.work_dir.empty() && chdir(request.work_dir.c_str()) != 0) _exit(126);
            const int fd = open(request.log_file.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
            if (fd >= 0) {
                dup2(fd, STDOUT_FILENO);
                dup2(fd, STDERR_FILENO);
                close(fd);
            }
            execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(settings_.timeout_s);
        int status = 0;
        bool timed_out = false;
        for (;;) {
            const pid_t r = waitpid(pid, &status, WNOHANG);
            if (r == pid) break;
            if (r < 0) throw TrainerError("waitpid failed");
            if (std::chrono::steady_clock::now() >= deadline) {
                kill(-pid, SIGKILL);
                kill(pid, SIGKILL);
                waitpid(pid, &status, 0);
                timed_out = true;
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        if (!timed_out && WIFEXITED(status) && WEXITSTATUS(status) == 0) return;
        diagnostics += "attempt " + std::to_string(attempt) + ": ";
        if (timed_out) {
            diagnostics += "timed out after " + std::to_string(settings_.timeout_s) + " s";
        } else if (WIFEXITED(status)) {
            diagnostics += "exit status " + std::to_string(WEXITSTATUS(status));
        } else {
            diagnostics += "killed by signal " + std::to_string(WTERMSIG(status));
        }
        diagnostics += "; ";
    }
    throw TrainerError("command failed twice (" + diagnostics + "log tail:\n" + tail_lines(request.log_file, 20) + ")");
}

// ------------------------------------------------------------ synthesis

std::string synthetic_record_json(const SyntheticRecord& r) {
    const auto& p = r.provenance;
    json j = {{"id", r.id},
              {"image", r.image_path},
              {"mask", r.mask_path},
              {"iteration", r.iteration},
              {"type", synth::to_string(p.type)},
              {"instrument_id", p.instrument_id},
              {"background_id", p.background_id},
              {"blend", imaging::to_string(p.blend_kind)},
              {"seed", seed_string(p.seed)},
              {"attempts", p.attempts},
              {"params", params_json(p.params)}};
    return j.dump();
}

namespace {

struct Generated {
    std::string name;
    synth::SyntheticSample sample;
};

struct ImageOutcome {
    std::vector<SyntheticRecord> records;
    std::vector<SynthesisFailure> failures;
};

std::string sample_name(const std::string& id, const char* type, int j, int member, bool multi) {
    std::string name = "syn-" + id + "-" + type + "-" + std::to_string(j);
    if (multi) name += member == 0 ? "-avg" : "-gauss";
    return name;
}

}  // namespace

SynthesisBatch synthesize_for(const SynthesisJob& job, const std::vector<std::string>& input_ids) {
    if (!job.pools || !job.backgrounds || !job.config) throw InvalidParameter("incomplete synthesis job");
    const auto& cfg = *job.config;
    cfg.validate();
    std::vector<std::string> ids = input_ids;
    std::sort(ids.begin(), ids.end());

    SynthesisBatch batch;
    std::map<std::string, BackgroundImage> recovered;
    if (cfg.use_inpainting) {
        // Sequential: each new background may serve as the donor for the next.
        for (const auto& id : ids) {
            try {
                const LabeledImage sample = job.pools->load_labeled(id);
                BackgroundImage bg = inpaint::acquire_background(sample, *job.backgrounds, cfg,
                                                                 derive_seed(job.seed, "inpaint:" + id));
                batch.new_backgrounds.push_back(bg.id);
                recovered.emplace(id, std::move(bg));
            } catch (const Error& e) {
                batch.failures.push_back({id, e.what()});
            }
        }
    }

    const std::vector<std::string> labeled(job.pools->labeled().begin(), job.pools->labeled().end());
    const std::size_t pool_size = job.backgrounds->size();
    const bool multi = cfg.multi_blend == 2;

    std::vector<ImageOutcome> outcomes(ids.size());
    parallel_for(
        ids.size(),
        [&](std::size_t i) {
            const std::string& id = ids[i];
            ImageOutcome& out = outcomes[i];
            Rng pick(derive_seed(job.seed, "pick:" + id));

            std::vector<Generated> made;
            auto keep = [&](const char* type, int j, synth::SyntheticSample s, int member) {
                made.push_back({sample_name(id, type, j, member, multi), std::move(s)});
            };
            auto attempt = [&](auto&& fn) {
                try {
                    fn();
                } catch (const Error& e) {
                    out.failures.push_back({id, e.what()});
                }
            };

            std::optional<LabeledImage> sample;
            attempt([&] { sample = job.pools->load_labeled(id); });
            if (!sample) return;

            for (int j = 0; j < cfg.type1_per_query; ++j) {
                const std::size_t bg_index = pool_size ? pick.index(pool_size) : 0;
                const std::uint64_t seed = derive_seed(job.seed, "type1:" + id, static_cast<std::uint64_t>(j));
                attempt([&] {
                    if (pool_size == 0) throw NoBackgroundAvailable("background pool is empty");
                    const BackgroundImage bg = job.backgrounds->load(bg_index);
                    if (multi) {
                        auto [a, b] = synth::multi_blend_pair(*sample, bg, cfg, seed, synth::SynthType::type1);
                        keep("t1", j, std::move(a), 0);
                        keep("t1", j, std::move(b), 1);
                    } else {
                        keep("t1", j, synth::generate_type1(*sample, bg, cfg, seed), 0);
                    }
                });
            }

            std::vector<std::string> donors;
            for (const auto& other : labeled) {
                if (other != id) donors.push_back(other);
            }
            if (donors.empty()) donors.push_back(id);
            for (int j = 0; j < cfg.type2_per_query; ++j) {
                const std::string& donor_id = donors[pick.index(donors.size())];
                const std::uint64_t seed = derive_seed(job.seed, "type2:" + id, static_cast<std::uint64_t>(j));
                attempt([&] {
                    const auto it = recovered.find(id);
                    if (it == recovered.end()) {
                        throw NoBackgroundAvailable("no recovered background for '" + id + "'");
                    }
                    const LabeledImage donor = job.pools->load_labeled(donor_id);
                    if (multi) {
                        auto [a, b] = synth::multi_blend_pair(donor, it->second, cfg, seed, synth::SynthType::type2);
                        keep("t2", j, std::move(a), 0);
                        keep("t2", j, std::move(b), 1);
                    } else {
                        keep("t2", j, synth::compose_type2(it->second, donor, cfg, seed), 0);
                    }
                });
            }

            for (auto& g : made) {
                SyntheticRecord r;
                r.id = g.name;
                r.image_path = "synthetic/" + g.name + ".png";
                r.mask_path = "synthetic/" + g.name + "_mask.png";
                r.iteration = job.iteration;
                r.provenance = std::move(g.sample.provenance);
                io::write_image(job.run_dir / r.image_path, g.sample.image);
                io::write_mask(job.run_dir / r.mask_path, g.sample.mask);
                out.records.push_back(std::move(r));
            }
        },
        job.workers);

    for (auto& o : outcomes) {
        for (auto& r : o.records) batch.records.push_back(std::move(r));
        for (auto& f : o.failures) batch.failures.push_back(std::move(f));
    }
    return batch;
}

// ------------------------------------------------------------ loop

std::string report_json(const IterationReport& r) {
    json selected = json::array();
    for (const auto& s : r.selected) selected.push_back({{"id", s.image_id}, {"score", s.score}});
    json failures = json::array();
    for (const auto& f : r.failures) failures.push_back({{"id", f.image_id}, {"error", f.error}});
    json j = {{"iteration", r.iteration},
              {"strategy", r.strategy},
              {"selected", selected},
              {"random_selected", r.random_selected},
              {"labeled", r.labeled},
              {"unlabeled", r.unlabeled},
              {"synthetic_added", r.synthetic_added},
              {"synthetic_total", r.synthetic_total},
              {"backgrounds", r.backgrounds},
              {"failures", failures}};
    return j.dump(2) + "\n";
}

Loop::Loop(config::RunConfig cfg, fs::path run_dir, unsigned workers)
    : cfg_(std::move(cfg)),
      run_dir_(fs::absolute(run_dir).lexically_normal()),
      workers_(workers),
      backgrounds_(run_dir_ / "backgrounds"),
      trainer_(cfg_.trainer, workers) {
    cfg_.validate();
}

fs::path Loop::iteration_dir(int iteration) const {
    return run_dir_ / "iterations" / ("iter_" + two_digits(static_cast<std::size_t>(iteration)));
}

void Loop::init() {
    if (initialised_) throw InvalidInput("loop already initialised");
    if (cfg_.dataset.root.empty()) throw ConfigError("dataset root is not set");
    layout_ = io::load_dataset(cfg_.dataset.root);
    const fs::path root = fs::absolute(layout_.root).lexically_normal();

    std::map<std::string, fs::path> images, masks;
    for (const auto* r : layout_.split(io::Split::train)) {
        images.emplace(r->id, root / r->image_path);
        masks.emplace(r->id, root / r->mask_path);
    }
    if (images.empty()) throw DatasetError("dataset has no training images");
    pools_ = PoolState(std::move(images), std::move(masks));
    schedule_ = BudgetSchedule::make(pools_.size(), cfg_.budget.fraction, cfg_.budget.al_iterations,
                                     cfg_.budget.random_mode);

    if (cfg_.synthesis.use_external_backgrounds) {
        for (const auto& rel : layout_.backgrounds) {
            backgrounds_.add_existing(
                {"bg-" + fs::path(rel).stem().string(), root / rel, BackgroundOrigin::real_external, {rel}});
        }
    }

    fs::create_directories(run_dir_);
    io::write_file_atomic(run_dir_ / "config.cfg", config::serialize(cfg_));
    {
        json j = {{"training_size", schedule_.training_size},
                  {"total_budget", schedule_.total_budget},
                  {"initial_random", schedule_.initial_random},
                  {"per_iteration", schedule_.per_iteration},
                  {"random_per_iteration", schedule_.random_per_iteration},
                  {"al_enabled", schedule_.al_enabled}};
        io::write_file_atomic(run_dir_ / "schedule.json", j.dump(2) + "\n");
    }

    const std::vector<std::string> unlabeled(pools_.unlabeled().begin(), pools_.unlabeled().end());
    auto picked = query::select_random(unlabeled, schedule_.initial_random, derive_seed(cfg_.dataset.seed, "init"));
    std::sort(picked.begin(), picked.end());
    pools_.reveal(picked);

    IterationReport report;
    report.iteration = 0;
    report.strategy = "random";
    report.random_selected = picked;
    add_synthesis(picked, 0, report);
    write_snapshot(0, report);
    reports_.push_back(report);
    initialised_ = true;
    next_iteration_ = schedule_.al_enabled ? 1 : schedule_.iterations() + 1;
}

std::vector<TrainEntry> Loop::training_entries() const {
    std::vector<TrainEntry> entries;
    for (const auto& id : pools_.labeled()) {
        entries.push_back({TrainEntry::Role::train, id, pools_.image_path(id).string(), pools_.mask_path(id).string()});
    }
    for (const auto& r : synthetic_) {
        entries.push_back({TrainEntry::Role::train, r.id, r.image_path, r.mask_path});
    }
    return entries;
}

IterationReport Loop::step() {
    if (!initialised_) throw InvalidInput("call init() first");
    if (done()) throw InvalidInput("labeling budget already used up");
    const std::size_t i = next_iteration_;
    const std::uint64_t iter_seed = derive_seed(cfg_.dataset.seed, "iteration", i);
    const fs::path dir = iteration_dir(static_cast<int>(i));
    fs::create_directories(dir);

    const std::vector<std::string> unlabeled(pools_.unlabeled().begin(), pools_.unlabeled().end());
    const std::size_t n = schedule_.per_iteration[i - 1];

    // (1) train on labeled + synthetic, predict every unlabeled image.
    auto entries = training_entries();
    for (const auto& id : unlabeled) {
        entries.push_back({TrainEntry::Role::predict, id, pools_.image_path(id).string(), {}});
    }
    TrainRequest req;
    req.manifest = dir / "train_manifest.jsonl";
    req.output_dir = dir / "predictions";
    req.work_dir = run_dir_;
    req.log_file = dir / "trainer.log";
    req.seed = iter_seed;
    req.predict_ids = unlabeled;
    io::write_file_atomic(req.manifest, encode_train_manifest(entries));
    trainer_.run(req);

    // (2)-(3) score and select.
    IterationReport report;
    report.iteration = static_cast<int>(i);
    report.strategy = query::to_string(cfg_.query.strategy);
    std::vector<std::string> chosen;
    if (cfg_.query.strategy == query::Strategy::random) {
        chosen = query::select_random(unlabeled, n, derive_seed(iter_seed, "random"));
        for (const auto& id : chosen) report.selected.push_back({id, 0.0, query::Strategy::random});
    } else {
        const auto agg = query::Aggregator::parse(cfg_.query.aggregator);
        std::vector<query::ImageScore> scores(unlabeled.size());
        parallel_for(
            unlabeled.size(),
            [&](std::size_t k) {
                const auto stack = io::read_probability_stack(req.output_dir / (unlabeled[k] + ".pmap"));
                scores[k] = query::score_image(unlabeled[k], stack, cfg_.query.strategy, agg);
            },
            workers_);
        report.selected = query::rank_query_batch(scores, n);
        for (const auto& s : report.selected) chosen.push_back(s.image_id);
    }

    // (4) reveal.
    pools_.reveal(chosen);
    if (const std::size_t extra = schedule_.random_per_iteration[i - 1]; extra > 0) {
        const std::vector<std::string> rest(pools_.unlabeled().begin(), pools_.unlabeled().end());
        report.random_selected = query::select_random(rest, extra, derive_seed(iter_seed, "interleaved"));
        std::sort(report.random_selected.begin(), report.random_selected.end());
        pools_.reveal(report.random_selected);
        chosen.insert(chosen.end(), report.random_selected.begin(), report.random_selected.end());
    }

    // (5)-(6) backgrounds and synthetic samples.
    add_synthesis(chosen, static_cast<int>(i), report);

    // (7) report.
    write_snapshot(static_cast<int>(i), report);
    reports_.push_back(report);
    ++next_iteration_;
    return report;
}

void Loop::add_synthesis(const std::vector<std::string>& ids, int iteration, IterationReport& report) {
    SynthesisJob job;
    job.pools = &pools_;
    job.backgrounds = &backgrounds_;
    job.config = &cfg_.synthesis;
    job.run_dir = run_dir_;
    job.seed = derive_seed(cfg_.dataset.seed, "synthesis", static_cast<std::uint64_t>(iteration));
    job.iteration = iteration;
    job.workers = workers_;
    SynthesisBatch batch = synthesize_for(job, ids);
    report.synthetic_added = batch.records.size();
    report.failures = std::move(batch.failures);
    for (auto& r : batch.records) synthetic_.push_back(std::move(r));
    report.synthetic_total = synthetic_.size();
    report.backgrounds = backgrounds_.size();
    report.labeled = pools_.labeled().size();
    report.unlabeled = pools_.unlabeled().size();
}

void Loop::write_snapshot(int iteration, const IterationReport& report) {
    const fs::path dir = iteration_dir(iteration);
    io::write_file_atomic(dir / "report.json", report_json(report));

    json pools = {{"iteration", iteration},
                  {"labeled", std::vector<std::string>(pools_.labeled().begin(), pools_.labeled().end())},
                  {"unlabeled", std::vector<std::string>(pools_.unlabeled().begin(), pools_.unlabeled().end())},
                  {"synthetic", synthetic_.size()},
                  {"backgrounds", backgrounds_.size()}};
    io::write_file_atomic(dir / "pools.json", pools.dump(2) + "\n");

    std::string synthetic;
    for (const auto& r : synthetic_) synthetic += synthetic_record_json(r) + "\n";
    io::write_file_atomic(run_dir_ / "synthetic" / "manifest.jsonl", synthetic);

    std::string bgs;
    for (const auto& e : backgrounds_.entries()) {
        const bool inside = e.path.lexically_relative(run_dir_).native().rfind("..", 0) != 0;
        json j = {{"id", e.id},
                  {"path", inside ? e.path.lexically_relative(run_dir_).string() : e.path.string()},
                  {"origin", to_string(e.origin)},
                  {"sources", e.source_ids}};
        bgs += j.dump() + "\n";
    }
    io::write_file_atomic(run_dir_ / "backgrounds" / "manifest.jsonl", bgs);
}

RunSummary Loop::run() {
    if (!initialised_) init();
    while (!done()) step();
    io::write_file_atomic(run_dir_ / "train_manifest.jsonl", encode_train_manifest(training_entries()));
    RunSummary s;
    s.schedule = schedule_;
    s.reports = reports_;
    s.synthetic_total = synthetic_.size();
    s.run_dir = run_dir_;
    return s;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("SYNTHAL_SEED"); env && *env) {
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (errno != 0 || *end != '\0' || env[0] == '-') {
            throw ConfigError("SYNTHAL_SEED must be an unsigned integer, got '" + std::string(env) + "'");
        }
        return v;
    }
    return fallback;
}

}  // namespace synthal::al

#include "synthal/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "synthal/config.hpp"
#include "synthal/io.hpp"
#include "synthal/metrics.hpp"
#include "synthal/orchestrator.hpp"
#include "synthal/query.hpp"

namespace synthal {

namespace {

namespace fs = std::filesystem;

struct ConfigFlags {
    std::string config_path;
    std::string preset = "live";
    std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App& cmd, ConfigFlags& f) {
    cmd.add_option("--config", f.config_path, "Run configuration file")->check(CLI::ExistingFile);
    cmd.add_option("--preset", f.preset, "Built-in parameters when no --config is given")
        ->check(CLI::IsMember({"live", "cadaver", "endovis"}));
    cmd.add_option("--seed", f.seed, "Master seed (overrides SYNTHAL_SEED)");
}

config::RunConfig resolve_config(const ConfigFlags& f) {
    config::RunConfig cfg = f.config_path.empty() ? config::RunConfig::preset(f.preset)
                                                   : config::load_run_config(f.config_path);
    cfg.dataset.seed = al::resolve_seed(f.seed, cfg.dataset.seed);
    return cfg;
}

std::string fixed(double v, int digits = 6) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

/// Every training image of `layout`, already labeled.
al::PoolState all_labeled(const io::DatasetLayout& layout) {
    const fs::path root = fs::absolute(layout.root).lexically_normal();
    std::map<std::string, fs::path> images, masks;
    std::vector<std::string> ids;
    for (const auto* r : layout.split(io::Split::train)) {
        images.emplace(r->id, root / r->image_path);
        masks.emplace(r->id, root / r->mask_path);
        ids.push_back(r->id);
    }
    if (ids.empty()) throw DatasetError("dataset has no training images");
    al::PoolState pools(std::move(images), std::move(masks));
    pools.reveal(ids);
    return pools;
}

al::DiskBackgroundPool external_backgrounds(const io::DatasetLayout& layout, const fs::path& out_dir, bool enabled) {
    al::DiskBackgroundPool pool(out_dir / "backgrounds");
    if (!enabled) return pool;
    const fs::path root = fs::absolute(layout.root).lexically_normal();
    for (const auto& rel : layout.backgrounds) {
        pool.add_existing({"bg-" + fs::path(rel).stem().string(), root / rel, BackgroundOrigin::real_external, {rel}});
    }
    return pool;
}

void write_batch_outputs(const fs::path& out_dir, const al::SynthesisBatch& batch, const al::DiskBackgroundPool& pool,
                         std::ostream& err) {
    std::string manifest;
    for (const auto& r : batch.records) manifest += al::synthetic_record_json(r) + "\n";
    io::write_file_atomic(out_dir / "synthetic" / "manifest.jsonl", manifest);
    std::string bgs;
    for (const auto& e : pool.entries()) {
        bgs += e.id + "\t" + e.path.string() + "\t" + to_string(e.origin) + "\n";
    }
    io::write_file_atomic(out_dir / "backgrounds" / "pool.tsv", bgs);
    for (const auto& f : batch.failures) err << "skipped " << f.image_id << ": " << f.error << "\n";
}

std::vector<std::string> train_ids(const io::DatasetLayout& layout, const std::vector<std::string>& only) {
    std::vector<std::string> ids;
    for (const auto* r : layout.split(io::Split::train)) ids.push_back(r->id);
    if (only.empty()) return ids;
    for (const auto& id : only) {
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
            throw DatasetError("'" + id + "' is not a training image");
        }
    }
    return only;
}

}  // namespace

int cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Synthetic-data active learning for instrument segmentation", "synthal"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    unsigned workers = 0;
    app.add_option("--workers", workers, "Worker threads (0 = all cores)");

    // validate
    auto* validate = app.add_subcommand("validate", "Lint a dataset directory");
    std::string data_root;
    validate->add_option("--data", data_root, "Dataset root")->required();

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic samples for labeled images");
    ConfigFlags synth_flags;
    std::string synth_out;
    std::vector<std::string> synth_ids;
    synth_cmd->add_option("--data", data_root, "Dataset root")->required();
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--id", synth_ids, "Restrict to these training ids (repeatable)");
    add_config_flags(*synth_cmd, synth_flags);

    // inpaint
    auto* inpaint_cmd = app.add_subcommand("inpaint", "Build a background pool by inpainting labeled images");
    ConfigFlags inpaint_flags;
    std::string inpaint_out;
    std::vector<std::string> inpaint_ids;
    inpaint_cmd->add_option("--data", data_root, "Dataset root")->required();
    inpaint_cmd->add_option("--out", inpaint_out, "Output directory")->required();
    inpaint_cmd->add_option("--id", inpaint_ids, "Restrict to these training ids (repeatable)");
    add_config_flags(*inpaint_cmd, inpaint_flags);

    // query
    auto* query_cmd = app.add_subcommand("query", "Score probability stacks and list the top n images");
    std::string stacks_dir, strategy = "bald", aggregator = "mean", query_out;
    std::size_t query_n = 0;
    std::optional<std::uint64_t> query_seed;
    query_cmd->add_option("--stacks", stacks_dir, "Directory of <id>.pmap files")->required()->check(CLI::ExistingDirectory);
    query_cmd->add_option("--n", query_n, "Number of ids to select")->required();
    query_cmd->add_option("--strategy", strategy, "bald, entropy or random")
        ->check(CLI::IsMember({"bald", "entropy", "random"}));
    query_cmd->add_option("--aggregator", aggregator, "mean, sum or top:<q>");
    query_cmd->add_option("--seed", query_seed, "Seed for the random strategy (overrides SYNTHAL_SEED)");
    query_cmd->add_option("--out", query_out, "Also write the list to this file");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "Evaluate predicted masks against ground truth");
    std::string pred_dir, gt_dir, report_path;
    int band = metrics::kDefaultBandWidth;
    metrics_cmd->add_option("--pred", pred_dir, "Predicted mask directory")->required()->check(CLI::ExistingDirectory);
    metrics_cmd->add_option("--gt", gt_dir, "Ground-truth mask directory")->required()->check(CLI::ExistingDirectory);
    metrics_cmd->add_option("--band", band, "Boundary band width in pixels (even)");
    metrics_cmd->add_option("--report", report_path, "Per-image CSV report (default <pred>.metrics.csv)");

    // loop
    auto* loop_cmd = app.add_subcommand("loop", "Run the full active-learning loop");
    ConfigFlags loop_flags;
    std::string run_dir, loop_strategy;
    std::optional<double> loop_budget;
    std::optional<int> loop_iterations;
    add_config_flags(*loop_cmd, loop_flags);
    loop_cmd->add_option("--data", data_root, "Dataset root (overrides the config)");
    loop_cmd->add_option("--run-dir", run_dir, "Run directory (overrides the config)");
    loop_cmd->add_option("--budget", loop_budget, "Labeled fraction of the training split, (0,1]");
    loop_cmd->add_option("--iterations", loop_iterations, "Active-learning iterations");
    loop_cmd->add_option("--strategy", loop_strategy, "bald, entropy or random")
        ->check(CLI::IsMember({"bald", "entropy", "random"}));

    // mock-train
    auto* mock_cmd = app.add_subcommand("mock-train", "Trainer stand-in writing heuristic probability stacks");
    std::string mock_manifest, mock_output, mock_base;
    std::uint64_t mock_seed = 0;
    int mock_members = 5;
    mock_cmd->add_option("--manifest", mock_manifest, "Training manifest")->required()->check(CLI::ExistingFile);
    mock_cmd->add_option("--output-dir", mock_output, "Directory for <id>.pmap files")->required();
    mock_cmd->add_option("--seed", mock_seed, "Seed supplied by the loop")->required();
    mock_cmd->add_option("--T", mock_members, "Committee size")->check(CLI::PositiveNumber);
    mock_cmd->add_option("--base", mock_base, "Directory relative paths resolve against (default: cwd)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*validate) {
            const auto problems = io::validate_dataset(data_root);
            if (problems.empty()) {
                const auto layout = io::load_dataset(data_root);
                out << "ok: " << layout.split(io::Split::train).size() << " train, "
                    << layout.split(io::Split::test).size() << " test, " << layout.backgrounds.size()
                    << " backgrounds, " << layout.height << "x" << layout.width << "\n";
                return kExitOk;
            }
            for (const auto& p : problems) err << p << "\n";
            err << problems.size() << " problem(s)\n";
            return kExitData;
        }

        if (*synth_cmd || *inpaint_cmd) {
            const bool inpaint_only = inpaint_cmd->parsed();
            const auto cfg = resolve_config(inpaint_only ? inpaint_flags : synth_flags);
            const fs::path out_dir = inpaint_only ? inpaint_out : synth_out;
            const auto layout = io::load_dataset(data_root);
            const auto pools = all_labeled(layout);
            synth::SynthesisConfig scfg = cfg.synthesis;
            if (inpaint_only) {
                scfg.use_inpainting = true;
                scfg.type1_per_query = 0;
                scfg.type2_per_query = 0;
            }
            auto pool = external_backgrounds(layout, out_dir, scfg.use_external_backgrounds);
            al::SynthesisJob job;
            job.pools = &pools;
            job.backgrounds = &pool;
            job.config = &scfg;
            job.run_dir = out_dir;
            job.seed = cfg.dataset.seed;
            job.workers = workers;
            const auto batch = al::synthesize_for(job, train_ids(layout, inpaint_only ? inpaint_ids : synth_ids));
            write_batch_outputs(out_dir, batch, pool, err);
            out << batch.records.size() << " synthetic sample(s), " << batch.new_backgrounds.size()
                << " new background(s), " << batch.failures.size() << " skipped\n";
            return kExitOk;
        }

        if (*query_cmd) {
            const auto strat = query::parse_strategy(strategy);
            const auto agg = query::Aggregator::parse(aggregator);
            std::vector<std::string> ids;
            for (const auto& e : fs::directory_iterator(stacks_dir)) {
                if (e.is_regular_file() && e.path().extension() == ".pmap") ids.push_back(e.path().stem().string());
            }
            std::sort(ids.begin(), ids.end());
            std::vector<query::ImageScore> ranked;
            if (strat == query::Strategy::random) {
                for (auto& id : query::select_random(ids, query_n, al::resolve_seed(query_seed, 0))) {
                    ranked.push_back({std::move(id), 0.0, strat});
                }
            } else {
                std::vector<query::ImageScore> scores;
                for (const auto& id : ids) {
                    const auto stack = io::read_probability_stack(fs::path(stacks_dir) / (id + ".pmap"));
                    scores.push_back(query::score_image(id, stack, strat, agg));
                }
                ranked = query::rank_query_batch(scores, query_n);
            }
            std::string text;
            for (const auto& s : ranked) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.9g", s.score);
                text += s.image_id + "\t" + buf + "\n";
            }
            out << text;
            if (!query_out.empty()) io::write_file_atomic(query_out, text);
            return kExitOk;
        }

        if (*metrics_cmd) {
            std::vector<metrics::MaskPair> pairs;
            const auto names = io::list_png(pred_dir);
            if (names.empty()) throw DatasetError("no PNG masks in '" + pred_dir + "'");
            for (const auto& name : names) {
                const fs::path gt = fs::path(gt_dir) / name;
                if (!fs::exists(gt)) throw DatasetError("no ground truth for '" + name + "'");
                pairs.push_back({fs::path(name).stem().string(), io::read_mask(fs::path(pred_dir) / name),
                                 io::read_mask(gt)});
            }
            for (const auto& name : io::list_png(gt_dir)) {
                if (!fs::exists(fs::path(pred_dir) / name)) throw DatasetError("no prediction for '" + name + "'");
            }
            const auto result = metrics::evaluate(std::move(pairs), band);
            std::string csv = "id,dsc,iou,iou_nb\n";
            for (const auto& m : result.per_image) {
                csv += m.id + "," + fixed(m.dsc, 9) + "," + fixed(m.iou, 9) + "," + fixed(m.iou_nb, 9) + "\n";
            }
            csv += "mean," + fixed(result.mean_dsc, 9) + "," + fixed(result.mean_iou, 9) + "," +
                   fixed(result.mean_iou_nb, 9) + "\n";
            const fs::path report = report_path.empty()
                                        ? fs::path(fs::path(pred_dir).lexically_normal().string() + ".metrics.csv")
                                        : fs::path(report_path);
            io::write_file_atomic(report, csv);
            out << "mDSC " << fixed(100.0 * result.mean_dsc, 2) << "\n"
                << "mIoU " << fixed(100.0 * result.mean_iou, 2) << "\n"
                << "mIoU_NB " << fixed(100.0 * result.mean_iou_nb, 2) << "\n";
            return kExitOk;
        }

        if (*loop_cmd) {
            auto cfg = resolve_config(loop_flags);
            if (!data_root.empty()) cfg.dataset.root = data_root;
            if (!run_dir.empty()) cfg.dataset.run_dir = run_dir;
            if (loop_budget) cfg.budget.fraction = *loop_budget;
            if (loop_iterations) cfg.budget.al_iterations = *loop_iterations;
            if (!loop_strategy.empty()) cfg.query.strategy = query::parse_strategy(loop_strategy);
            cfg.validate();
            al::Loop loop(cfg, cfg.dataset.run_dir, workers);
            const auto summary = loop.run();
            const auto& s = summary.schedule;
            out << "budget " << s.total_budget << " of " << s.training_size << ": " << s.initial_random
                << " random at init";
            for (std::size_t i = 0; i < s.iterations(); ++i) {
                out << (i == 0 ? ", queries " : "/") << s.per_iteration[i];
            }
            out << "\n";
            for (const auto& r : summary.reports) {
                out << "iteration " << r.iteration << ": labeled " << r.labeled << ", unlabeled " << r.unlabeled
                    << ", synthetic +" << r.synthetic_added << " (" << r.synthetic_total << "), skipped "
                    << r.failures.size() << "\n";
            }
            out << "run directory " << summary.run_dir.string() << "\n";
            return kExitOk;
        }

        if (*mock_cmd) {
            const fs::path base = mock_base.empty() ? fs::current_path() : fs::path(mock_base);
            al::mock_train(mock_manifest, base, mock_output, mock_seed, mock_members, workers);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace synthal

#include "rde/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "rde/config.hpp"
#include "rde/errors.hpp"
#include "rde/tabular.hpp"

namespace rde::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kUsage =
    "usage: rde_cli <command> [options]\n"
    "\n"
    "commands:\n"
    "  run <config>            train one configuration, write metrics + summary\n"
    "  sweep <config>          run the cartesian product of the config's axes\n"
    "  oracle <config>         dump the exact Q* table for a tabularizable env\n"
    "  aggregate <csv dir>     recompute IQM/collapse stats from stored CSVs\n"
    "  emit-plot-data <csv dir> long-format CSV for external plotting\n"
    "\n"
    "options:\n"
    "  --out <dir>     output directory (default ./out)\n"
    "  --seed <n>      override the config seed\n"
    "  --workers <n>   parallel runs for sweep (default 1)\n"
    "  --window <n>    collapse window in eval points for aggregate (default 10)\n"
    "  --quiet         suppress progress lines\n";

struct Options {
    std::string command;
    std::string target;
    std::string out_dir = "./out";
    std::optional<std::uint64_t> seed;
    int workers = 1;
    int window = 10;
    bool quiet = false;
};

Options parse_options(const std::vector<std::string>& args) {
    if (args.empty()) throw ConfigError("missing command");
    Options opt;
    opt.command = args[0];
    std::size_t i = 1;
    if (i < args.size() && args[i].rfind("--", 0) != 0) opt.target = args[i++];
    for (; i < args.size(); ++i) {
        const std::string& a = args[i];
        auto need_value = [&]() -> const std::string& {
            if (i + 1 >= args.size()) throw ConfigError("option " + a + " needs a value");
            return args[++i];
        };
        if (a == "--out") opt.out_dir = need_value();
        else if (a == "--seed") opt.seed = std::stoull(need_value());
        else if (a == "--workers") opt.workers = std::stoi(need_value());
        else if (a == "--window") opt.window = std::stoi(need_value());
        else if (a == "--quiet") opt.quiet = true;
        else throw ConfigError("unknown option '" + a + "'");
    }
    return opt;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

std::string default_run_name(const ExperimentConfig& cfg) {
    std::string env;
    switch (cfg.env.kind) {
        case EnvKind::Chain: env = "chain"; break;
        case EnvKind::FourRooms: env = "fourrooms"; break;
        case EnvKind::HazardGrid: env = "hazardgrid"; break;
    }
    return algorithm_name(cfg.algorithm) + "_" + env + "_seed" + std::to_string(cfg.seed);
}

json config_json(const ExperimentConfig& cfg) {
    // Echo through the flat serialization so JSON and .cfg always agree.
    json j;
    std::istringstream in(serialize_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        key.erase(key.find_last_not_of(' ') + 1);
        value.erase(0, value.find_first_not_of(' '));
        j[key] = value;
    }
    return j;
}

void write_run_outputs(const fs::path& dir, const ExperimentConfig& cfg, const MetricsLog& log) {
    ensure_dir(dir);
    if (!cfg.env.ascii_map.empty()) write_text(dir / "layout.txt", cfg.env.ascii_map);
    write_text(dir / "resolved.cfg", serialize_config(cfg));
    write_metrics_csv(log, (dir / "metrics.csv").string());

    json summary;
    summary["config"] = config_json(cfg);
    summary["final_return"] = log.final_return();
    summary["cumulative_training_cost"] = log.cumulative_training_cost;
    summary["updates_per_agent"] = log.updates_per_agent;
    summary["total_env_steps"] = log.total_env_steps;
    summary["diverged"] = log.diverged;
    if (log.diverged) {
        summary["diverged_step"] = log.diverged_step;
        summary["divergence_note"] = log.divergence_note;
    }
    if (!log.resets.empty()) {
        const CollapseStats stats =
            collapse_metric(log.eval_curve(), log.reset_steps(), cfg.collapse_window);
        summary["collapse_max"] = stats.max_drop;
        summary["collapse_mean"] = stats.mean_drop;
        summary["collapse_skipped"] = stats.skipped;
    }
    summary["wall_clock_seconds"] = log.wall_seconds;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
}

int cmd_run(const Options& opt) {
    if (opt.target.empty()) throw ConfigError("run: missing <config> argument");
    ResolvedExperiment resolved = resolve_config(ConfigFile::parse_file(opt.target));
    ExperimentConfig& cfg = resolved.config;
    if (opt.seed) cfg.seed = *opt.seed;

    const std::string name = cfg.run_name.empty() ? default_run_name(cfg) : cfg.run_name;
    const fs::path dir = fs::path(opt.out_dir) / name;

    if (!opt.quiet)
        std::cout << "run " << name << ": " << algorithm_name(cfg.algorithm) << ", seed " << cfg.seed
                  << ", " << cfg.total_env_steps << " env steps\n";
    const MetricsLog log = run_experiment(cfg);
    write_run_outputs(dir, cfg, log);
    if (!opt.quiet) {
        for (const EvalPoint& p : log.evals)
            std::cout << "  step " << p.env_step << "  return " << p.return_mean << "  cost "
                      << p.cost_mean << "\n";
        std::cout << "wrote " << (dir / "metrics.csv").string() << "\n";
    }
    if (log.diverged) {
        std::cerr << "training diverged at step " << log.diverged_step << ": "
                  << log.divergence_note << "\n";
        return 2;
    }
    return 0;
}

int cmd_sweep(const Options& opt) {
    if (opt.target.empty()) throw ConfigError("sweep: missing <config> argument");
    ResolvedExperiment resolved = resolve_config(ConfigFile::parse_file(opt.target));
    if (opt.seed) {
        resolved.config.seed = *opt.seed;
        if (resolved.axes.seeds.size() == 1) resolved.axes.seeds = {*opt.seed};
    }

    const std::string name =
        resolved.config.run_name.empty() ? "sweep" : resolved.config.run_name;
    const fs::path dir = fs::path(opt.out_dir) / name;
    ensure_dir(dir);
    if (!resolved.config.env.ascii_map.empty())
        write_text(dir / "layout.txt", resolved.config.env.ascii_map);
    write_text(dir / "resolved.cfg", serialize_config(resolved.config, &resolved.axes));

    RunSink sink = [&](std::size_t cell, std::uint64_t seed, const MetricsLog& log) {
        const fs::path run_dir = dir / ("cell_" + std::to_string(cell)) /
                                 ("seed_" + std::to_string(seed));
        ensure_dir(run_dir);
        write_metrics_csv(log, (run_dir / "metrics.csv").string());
        if (!opt.quiet)
            std::cout << "  cell " << cell << " seed " << seed << "  final return "
                      << log.final_return() << (log.diverged ? "  [diverged]" : "") << "\n";
    };

    const SweepReport report = sweep(resolved.config, resolved.axes, opt.workers, sink);

    json cells = json::array();
    std::ostringstream csv;
    csv << "cell,algorithm,replay_ratio,beta,ensemble_size,seeds,iqm_final_return,"
           "mean_cumulative_cost,collapse_max,collapse_mean,failed_runs\n";
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const SweepCell& cell = report.cells[i];
        json jcell;
        jcell["cell"] = i;
        jcell["config"] = config_json(cell.config);
        jcell["seeds"] = cell.seeds;
        jcell["iqm_final_return"] = cell.iqm_final_return;
        jcell["mean_cumulative_cost"] = cell.mean_cumulative_cost;
        jcell["collapse_max"] = cell.collapse_max;
        jcell["collapse_mean"] = cell.collapse_mean;
        jcell["failed_runs"] = cell.failed_runs;
        jcell["wall_clock_seconds"] = cell.wall_seconds;
        jcell["final_returns"] = cell.final_returns;
        cells.push_back(jcell);
        write_text(dir / ("cell_" + std::to_string(i)) / "summary.json", jcell.dump(2) + "\n");

        csv << i << "," << algorithm_name(cell.config.algorithm) << ","
            << cell.config.replay_ratio << "," << cell.config.beta << ","
            << cell.config.ensemble_size << "," << cell.seeds.size() << ","
            << cell.iqm_final_return << "," << cell.mean_cumulative_cost << ","
            << cell.collapse_max << "," << cell.collapse_mean << "," << cell.failed_runs << "\n";
    }
    json top;
    top["cells"] = cells;
    write_text(dir / "sweep.json", top.dump(2) + "\n");
    write_text(dir / "sweep.csv", csv.str());
    if (!opt.quiet) std::cout << "wrote " << (dir / "sweep.json").string() << "\n";
    int failed = 0;
    for (const SweepCell& cell : report.cells) failed += cell.failed_runs;
    return failed > 0 ? 2 : 0;
}

int cmd_oracle(const Options& opt) {
    if (opt.target.empty()) throw ConfigError("oracle: missing <config> argument");
    ResolvedExperiment resolved = resolve_config(ConfigFile::parse_file(opt.target));
    const ExperimentConfig& cfg = resolved.config;
    TabularMdp mdp;
    try {
        mdp = to_tabular(cfg.env);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const std::vector<double> q = value_iteration(mdp, cfg.discount, 1e-9);

    ensure_dir(opt.out_dir);
    std::ostringstream csv;
    csv << "state,action,q\n";
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.12g", q[static_cast<std::size_t>(s) * mdp.n_actions + a]);
            csv << s << "," << a << "," << buf << "\n";
            if (!opt.quiet) std::cout << s << " " << a << " " << buf << "\n";
        }
    }
    write_text(fs::path(opt.out_dir) / "oracle_q.csv", csv.str());
    return 0;
}

std::vector<fs::path> find_metrics_csvs(const std::string& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(dir, ec);
         it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_regular_file() && it->path().filename() == "metrics.csv")
            files.push_back(it->path());
    }
    if (ec) throw IoError("cannot scan '" + dir + "': " + ec.message());
    std::sort(files.begin(), files.end());
    return files;
}

int cmd_aggregate(const Options& opt) {
    if (opt.target.empty()) throw ConfigError("aggregate: missing <csv dir> argument");
    const std::vector<fs::path> files = find_metrics_csvs(opt.target);
    if (files.empty()) throw IoError("no metrics.csv files under '" + opt.target + "'");

    json runs = json::array();
    std::vector<double> finals;
    for (const fs::path& file : files) {
        const ParsedRun run = read_metrics_csv(file.string());
        json jrun;
        jrun["file"] = file.string();
        if (!run.eval_curve.empty()) {
            jrun["final_return"] = run.eval_curve.back().second;
            finals.push_back(run.eval_curve.back().second);
        }
        if (!run.reset_steps.empty() && !run.eval_curve.empty()) {
            const CollapseStats stats = collapse_metric(run.eval_curve, run.reset_steps, opt.window);
            jrun["collapse_max"] = stats.max_drop;
            jrun["collapse_mean"] = stats.mean_drop;
        }
        runs.push_back(jrun);
        if (!opt.quiet)
            std::cout << file.string() << "  final return "
                      << (run.eval_curve.empty() ? 0.0 : run.eval_curve.back().second) << "\n";
    }
    json top;
    top["runs"] = runs;
    if (!finals.empty()) top["iqm_final_return"] = iqm(finals);
    ensure_dir(opt.out_dir);
    write_text(fs::path(opt.out_dir) / "aggregate.json", top.dump(2) + "\n");
    if (!opt.quiet && !finals.empty())
        std::cout << "IQM of final returns over " << finals.size() << " runs: " << iqm(finals)
                  << "\n";
    return 0;
}

int cmd_emit_plot_data(const Options& opt) {
    if (opt.target.empty()) throw ConfigError("emit-plot-data: missing <csv dir> argument");
    const std::vector<fs::path> files = find_metrics_csvs(opt.target);
    if (files.empty()) throw IoError("no metrics.csv files under '" + opt.target + "'");

    std::ostringstream out;
    out << "run,env_step,series,value\n";
    for (const fs::path& file : files) {
        const ParsedRun run = read_metrics_csv(file.string());
        const std::string name = file.parent_path().string();
        for (const auto& [step, value] : run.eval_curve)
            out << name << "," << step << ",eval_return_mean," << value << "\n";
        for (const auto& [step, value] : run.cost_curve)
            out << name << "," << step << ",eval_cost_mean," << value << "\n";
        for (long step : run.reset_steps) out << name << "," << step << ",reset,1\n";
    }
    ensure_dir(opt.out_dir);
    write_text(fs::path(opt.out_dir) / "plot_data.csv", out.str());
    if (!opt.quiet)
        std::cout << "wrote " << (fs::path(opt.out_dir) / "plot_data.csv").string() << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    try {
        const Options opt = parse_options(args);
        if (opt.command == "run") return cmd_run(opt);
        if (opt.command == "sweep") return cmd_sweep(opt);
        if (opt.command == "oracle") return cmd_oracle(opt);
        if (opt.command == "aggregate") return cmd_aggregate(opt);
        if (opt.command == "emit-plot-data") return cmd_emit_plot_data(opt);
        if (opt.command == "--help" || opt.command == "help") {
            std::cout << kUsage;
            return 0;
        }
        throw ConfigError("unknown command '" + opt.command + "'");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n" << kUsage;
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace rde::cli

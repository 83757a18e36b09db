#include "rde/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rde/errors.hpp"

namespace rde {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "run_name", "env", "chain_length", "grid_size", "max_steps", "discount", "layout_seed",
        "randomize_goal", "map_file", "algorithm", "ensemble_size", "replay_ratio",
        "base_reset_interval", "reset_depth", "beta", "kappa", "alpha_risk", "cost_budget",
        "learning_rate", "batch_size", "buffer_capacity", "epsilon_start", "epsilon_end",
        "epsilon_decay_steps", "total_env_steps", "eval_every", "eval_episodes", "seed",
        "hidden_dims", "tau", "target_update_period", "temperature_mode", "shared_minibatch",
        "lambda_step", "actor_l2", "collapse_window", "seeds", "rr_values", "beta_values",
        "n_values", "algorithms"};
    return keys;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string dir = ".";
    const std::size_t slash = path.find_last_of('/');
    if (slash != std::string::npos) dir = path.substr(0, slash);
    return parse_string(buffer.str(), dir);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& base_dir) {
    ConfigFile file;
    file.base_dir_ = base_dir;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (file.entries_.count(key))
            throw ConfigError("duplicate config key '" + key + "'");
        Entry entry;
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']')
                throw ConfigError("config key '" + key + "': unterminated list");
            entry.is_list = true;
            std::string inner = value.substr(1, value.size() - 2);
            std::stringstream items(inner);
            std::string item;
            while (std::getline(items, item, ',')) {
                item = trim(item);
                if (!item.empty()) entry.items.push_back(item);
            }
        } else {
            entry.scalar = value;
        }
        file.entries_.emplace(key, std::move(entry));
    }
    return file;
}

bool ConfigFile::has(const std::string& key) const { return entries_.count(key) > 0; }

const ConfigFile::Entry& ConfigFile::entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

std::string ConfigFile::str(const std::string& key) const {
    const Entry& e = entry(key);
    if (e.is_list) throw ConfigError("config key '" + key + "': expected a scalar, found a list");
    return e.scalar;
}

double ConfigFile::number(const std::string& key) const {
    const std::string v = str(key);
    try {
        std::size_t used = 0;
        const double parsed = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

long ConfigFile::integer(const std::string& key) const {
    const double v = number(key);
    const long rounded = static_cast<long>(std::llround(v));
    if (std::abs(v - static_cast<double>(rounded)) > 1e-9)
        throw ConfigError("config key '" + key + "': expected an integer");
    return rounded;
}

bool ConfigFile::boolean(const std::string& key) const {
    const std::string v = str(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config key '" + key + "': expected true or false");
}

std::vector<std::string> ConfigFile::list(const std::string& key) const {
    const Entry& e = entry(key);
    if (!e.is_list) throw ConfigError("config key '" + key + "': expected a list like [a, b, c]");
    return e.items;
}

std::vector<double> ConfigFile::number_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : list(key)) {
        try {
            std::size_t used = 0;
            const double parsed = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(parsed);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': '" + item + "' is not a number");
        }
    }
    return out;
}

std::vector<std::string> ConfigFile::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

namespace {

EnvKind env_kind_from_name(const std::string& name) {
    if (name == "chain") return EnvKind::Chain;
    if (name == "fourrooms") return EnvKind::FourRooms;
    if (name == "hazardgrid") return EnvKind::HazardGrid;
    throw ConfigError("unknown env '" + name + "' (expected chain, fourrooms or hazardgrid)");
}

std::string env_name(EnvKind kind) {
    switch (kind) {
        case EnvKind::Chain: return "chain";
        case EnvKind::FourRooms: return "fourrooms";
        case EnvKind::HazardGrid: return "hazardgrid";
    }
    return "chain";
}

}  // namespace

ResolvedExperiment resolve_config(const ConfigFile& file) {
    for (const std::string& key : file.keys()) {
        if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

    ResolvedExperiment resolved;
    ExperimentConfig& cfg = resolved.config;

    if (file.has("run_name")) cfg.run_name = file.str("run_name");
    if (file.has("env")) cfg.env.kind = env_kind_from_name(file.str("env"));
    if (file.has("chain_length")) cfg.env.chain_length = static_cast<int>(file.integer("chain_length"));
    if (file.has("grid_size")) cfg.env.grid_size = static_cast<int>(file.integer("grid_size"));
    if (file.has("max_steps")) cfg.env.max_steps = static_cast<int>(file.integer("max_steps"));
    if (file.has("discount")) cfg.discount = file.number("discount");
    cfg.env.discount = cfg.discount;
    if (file.has("layout_seed"))
        cfg.env.layout_seed = static_cast<std::uint64_t>(file.integer("layout_seed"));
    if (file.has("randomize_goal")) cfg.env.randomize_goal = file.boolean("randomize_goal");
    if (file.has("map_file")) {
        std::string path = file.str("map_file");
        if (!path.empty() && path.front() != '/') path = file.base_dir() + "/" + path;
        std::ifstream map_in(path);
        if (!map_in) throw ConfigError("config key 'map_file': cannot open '" + path + "'");
        std::stringstream buf;
        buf << map_in.rdbuf();
        cfg.env.ascii_map = buf.str();
    }

    if (file.has("algorithm")) cfg.algorithm = algorithm_from_name(file.str("algorithm"));
    if (file.has("ensemble_size")) cfg.ensemble_size = static_cast<int>(file.integer("ensemble_size"));
    if (file.has("replay_ratio")) cfg.replay_ratio = file.number("replay_ratio");
    if (file.has("base_reset_interval")) cfg.base_reset_interval = file.integer("base_reset_interval");
    if (file.has("reset_depth")) {
        const std::string v = file.str("reset_depth");
        if (v == "all") {
            cfg.reset_depth = -1;
        } else {
            cfg.reset_depth = static_cast<int>(file.integer("reset_depth"));
            if (cfg.reset_depth < 0) throw ConfigError("config key 'reset_depth': negative depth");
        }
    }
    if (file.has("beta")) cfg.beta = file.number("beta");
    if (file.has("kappa")) cfg.kappa = file.number("kappa");
    if (file.has("alpha_risk")) cfg.alpha_risk = file.number("alpha_risk");
    if (file.has("cost_budget")) {
        cfg.cost_budget = file.number("cost_budget");
    } else {
        // Episode budget 25 assumes ~1000-step episodes; scale it down for
        // shorter ones.
        cfg.cost_budget = cfg.env.max_steps < 1000 ? 25.0 * cfg.env.max_steps / 1000.0 : 25.0;
    }
    if (file.has("learning_rate")) cfg.learning_rate = file.number("learning_rate");
    if (file.has("batch_size")) cfg.batch_size = static_cast<int>(file.integer("batch_size"));
    if (file.has("buffer_capacity")) cfg.buffer_capacity = file.integer("buffer_capacity");
    if (file.has("epsilon_start")) cfg.epsilon.start = file.number("epsilon_start");
    if (file.has("epsilon_end")) cfg.epsilon.end = file.number("epsilon_end");
    if (file.has("epsilon_decay_steps")) cfg.epsilon.decay_steps = file.integer("epsilon_decay_steps");
    if (file.has("total_env_steps")) cfg.total_env_steps = file.integer("total_env_steps");
    if (file.has("eval_every")) cfg.eval_every = file.integer("eval_every");
    if (file.has("eval_episodes")) cfg.eval_episodes = static_cast<int>(file.integer("eval_episodes"));
    if (file.has("seed")) cfg.seed = static_cast<std::uint64_t>(file.integer("seed"));
    if (file.has("hidden_dims")) {
        cfg.hidden_dims.clear();
        for (double v : file.number_list("hidden_dims")) cfg.hidden_dims.push_back(static_cast<int>(v));
        if (cfg.hidden_dims.empty()) throw ConfigError("config key 'hidden_dims': empty list");
    }
    if (file.has("tau")) cfg.tau = file.number("tau");
    if (file.has("target_update_period")) cfg.target_update_period = file.integer("target_update_period");
    if (file.has("temperature_mode")) {
        const std::string v = file.str("temperature_mode");
        if (v == "normalized_logits") cfg.temperature_mode = TemperatureMode::NormalizedLogits;
        else if (v == "as_printed") cfg.temperature_mode = TemperatureMode::AsPrinted;
        else throw ConfigError("config key 'temperature_mode': expected normalized_logits or as_printed");
    }
    if (file.has("shared_minibatch")) cfg.shared_minibatch = file.boolean("shared_minibatch");
    if (file.has("lambda_step")) cfg.lambda_step = file.number("lambda_step");
    if (file.has("actor_l2")) cfg.actor_l2 = file.number("actor_l2");
    if (file.has("collapse_window")) cfg.collapse_window = static_cast<int>(file.integer("collapse_window"));

    if (file.has("seeds")) {
        resolved.axes.seeds.clear();
        for (double v : file.number_list("seeds"))
            resolved.axes.seeds.push_back(static_cast<std::uint64_t>(v));
        if (resolved.axes.seeds.empty()) throw ConfigError("config key 'seeds': empty list");
        resolved.has_sweep_axes = true;
    } else {
        resolved.axes.seeds = {cfg.seed};
    }
    if (file.has("rr_values")) {
        resolved.axes.rr_values = file.number_list("rr_values");
        resolved.has_sweep_axes = true;
    }
    if (file.has("beta_values")) {
        resolved.axes.beta_values = file.number_list("beta_values");
        resolved.has_sweep_axes = true;
    }
    if (file.has("n_values")) {
        for (double v : file.number_list("n_values"))
            resolved.axes.n_values.push_back(static_cast<int>(v));
        resolved.has_sweep_axes = true;
    }
    if (file.has("algorithms")) {
        for (const std::string& name : file.list("algorithms"))
            resolved.axes.algorithms.push_back(algorithm_from_name(name));
        resolved.has_sweep_axes = true;
    }

    validate_config(cfg);
    return resolved;
}

std::string serialize_config(const ExperimentConfig& cfg, const SweepAxes* axes,
                             const std::string& map_file_name) {
    std::ostringstream out;
    out << "# fully resolved configuration (defaults materialized)\n";
    if (!cfg.run_name.empty()) out << "run_name = " << cfg.run_name << "\n";
    out << "env = " << env_name(cfg.env.kind) << "\n";
    out << "chain_length = " << cfg.env.chain_length << "\n";
    out << "grid_size = " << cfg.env.grid_size << "\n";
    out << "max_steps = " << cfg.env.max_steps << "\n";
    out << "discount = " << format_real(cfg.discount) << "\n";
    out << "layout_seed = " << cfg.env.layout_seed << "\n";
    out << "randomize_goal = " << (cfg.env.randomize_goal ? "true" : "false") << "\n";
    if (!cfg.env.ascii_map.empty()) out << "map_file = " << map_file_name << "\n";
    out << "algorithm = " << algorithm_name(cfg.algorithm) << "\n";
    out << "ensemble_size = " << cfg.ensemble_size << "\n";
    out << "replay_ratio = " << format_real(cfg.replay_ratio) << "\n";
    out << "base_reset_interval = " << cfg.base_reset_interval << "\n";
    if (cfg.reset_depth < 0) out << "reset_depth = all\n";
    else out << "reset_depth = " << cfg.reset_depth << "\n";
    out << "beta = " << format_real(cfg.beta) << "\n";
    out << "kappa = " << format_real(cfg.kappa) << "\n";
    out << "alpha_risk = " << format_real(cfg.alpha_risk) << "\n";
    out << "cost_budget = " << format_real(cfg.cost_budget) << "\n";
    out << "learning_rate = " << format_real(cfg.learning_rate) << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "buffer_capacity = " << cfg.buffer_capacity << "\n";
    out << "epsilon_start = " << format_real(cfg.epsilon.start) << "\n";
    out << "epsilon_end = " << format_real(cfg.epsilon.end) << "\n";
    out << "epsilon_decay_steps = " << cfg.epsilon.decay_steps << "\n";
    out << "total_env_steps = " << cfg.total_env_steps << "\n";
    out << "eval_every = " << cfg.eval_every << "\n";
    out << "eval_episodes = " << cfg.eval_episodes << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "hidden_dims = [";
    for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
        if (i) out << ", ";
        out << cfg.hidden_dims[i];
    }
    out << "]\n";
    out << "tau = " << format_real(cfg.tau) << "\n";
    out << "target_update_period = " << cfg.target_update_period << "\n";
    out << "temperature_mode = "
        << (cfg.temperature_mode == TemperatureMode::AsPrinted ? "as_printed" : "normalized_logits")
        << "\n";
    out << "shared_minibatch = " << (cfg.shared_minibatch ? "true" : "false") << "\n";
    out << "lambda_step = " << format_real(cfg.lambda_step) << "\n";
    out << "actor_l2 = " << format_real(cfg.actor_l2) << "\n";
    out << "collapse_window = " << cfg.collapse_window << "\n";

    if (axes != nullptr) {
        auto write_list = [&out](const std::string& key, const auto& values, auto&& fmt) {
            if (values.empty()) return;
            out << key << " = [";
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (i) out << ", ";
                out << fmt(values[i]);
            }
            out << "]\n";
        };
        write_list("seeds", axes->seeds, [](std::uint64_t v) { return std::to_string(v); });
        write_list("rr_values", axes->rr_values, [](double v) { return format_real(v); });
        write_list("beta_values", axes->beta_values, [](double v) { return format_real(v); });
        write_list("n_values", axes->n_values, [](int v) { return std::to_string(v); });
        write_list("algorithms", axes->algorithms, [](Algorithm a) { return algorithm_name(a); });
    }
    return out.str();
}

}  // namespace rde

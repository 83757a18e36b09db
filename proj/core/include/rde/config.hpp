#pragma once

#include <map>
#include <string>
#include <vector>

#include "rde/harness.hpp"

namespace rde {

// Flat key-value document: one `key = value` per line, `#` comments,
// lists as `[a, b, c]`. Unknown keys are a hard error at resolution.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& base_dir = ".");

    bool has(const std::string& key) const;
    const std::string& base_dir() const { return base_dir_; }

    std::string str(const std::string& key) const;
    double number(const std::string& key) const;
    long integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;
    std::vector<double> number_list(const std::string& key) const;

    std::vector<std::string> keys() const;

private:
    struct Entry {
        std::string scalar;
        std::vector<std::string> items;
        bool is_list = false;
    };
    const Entry& entry(const std::string& key) const;

    std::map<std::string, Entry> entries_;
    std::string base_dir_ = ".";
};

struct ResolvedExperiment {
    ExperimentConfig config;
    SweepAxes axes;
    bool has_sweep_axes = false;
};

// Applies defaults, validates every key against the known-key registry
// (unknown keys raise ConfigError naming the key) and loads map_file
// relative to the config's directory.
ResolvedExperiment resolve_config(const ConfigFile& file);

// Emits every field with defaults materialized, in the same grammar.
// Re-parsing the output yields an identical configuration. A non-empty
// ascii_map is referenced as `map_file = <map_file_name>`.
std::string serialize_config(const ExperimentConfig& cfg, const SweepAxes* axes = nullptr,
                             const std::string& map_file_name = "layout.txt");

}  // namespace rde

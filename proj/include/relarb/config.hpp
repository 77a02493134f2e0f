#pragma once

#include "relarb/ensemble.hpp"
#include "relarb/market_sim.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace relarb {

enum class ReportFormat { Json, CsvSummary };

struct RunConfig {
    ModelSpec model;
    EnsembleOptions ensemble;
    StrategyConfig strategy;
    std::size_t covariance_window = 20;
    std::string report_path;  // empty: standard output
    ReportFormat report_format = ReportFormat::Json;
    std::string plot_dir;     // empty: no plot data
};

/// Flat `key = value` document. Lines starting with '#' are comments; vectors
/// are comma separated and matrix rows are separated by ';'.
class ConfigDocument {
public:
    static ConfigDocument parse(std::string_view text);

    /// Applies one `key=value` assignment, replacing any earlier value.
    void set(std::string_view assignment);
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

enum class ConfigMode {
    Simulation,  // model.kind, model.n and T are required
    Backtest,    // the model comes from data; model keys are optional
};

/// Every key accepted by build_config.
const std::vector<std::string>& config_keys();

/// Validated RunConfig with defaults applied. Unknown keys, type mismatches and
/// constraint violations raise ConfigError naming the key.
RunConfig build_config(const ConfigDocument& doc, ConfigMode mode = ConfigMode::Simulation);

RunConfig parse_config(std::string_view text, ConfigMode mode = ConfigMode::Simulation);

ReportFormat parse_report_format(std::string_view name);

}  // namespace relarb

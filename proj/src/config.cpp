#include "relarb/config.hpp"

#include "relarb/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

namespace relarb {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
}

double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) fail(key, "expected a number, got '" + text + "'");
    return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        fail(key, "expected a nonnegative integer, got '" + text + "'");
    return v;
}

Eigen::VectorXd to_vector(const std::string& key, const std::string& text) {
    const auto parts = split(text, ',');
    Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_double(key, parts[i]);
    return v;
}

Eigen::MatrixXd to_matrix(const std::string& key, const std::string& text) {
    const auto rows = split(text, ';');
    std::vector<Eigen::VectorXd> parsed;
    for (const auto& r : rows) parsed.push_back(to_vector(key, r));
    const auto cols = parsed.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(parsed.size()), cols);
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (parsed[i].size() != cols) fail(key, "ragged matrix rows");
        m.row(static_cast<Eigen::Index>(i)) = parsed[i].transpose();
    }
    return m;
}

class Reader {
public:
    explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

    std::optional<std::string> text(const std::string& key) const {
        auto it = doc_.values().find(key);
        if (it == doc_.values().end()) return std::nullopt;
        return it->second;
    }
    std::optional<double> number(const std::string& key) const {
        auto t = text(key);
        if (!t) return std::nullopt;
        return to_double(key, *t);
    }
    std::optional<std::uint64_t> integer(const std::string& key) const {
        auto t = text(key);
        if (!t) return std::nullopt;
        return to_unsigned(key, *t);
    }
    std::string required(const std::string& key) const {
        auto t = text(key);
        if (!t) fail(key, "required key is missing");
        return *t;
    }

private:
    const ConfigDocument& doc_;
};

void require_positive(const std::string& key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be positive");
}

ModelKind parse_kind(const std::string& name) {
    if (name == "vsm" || name == "volatility_stabilized") return ModelKind::VolatilityStabilized;
    if (name == "constant" || name == "constant_coefficient") return ModelKind::ConstantCoefficient;
    if (name == "custom") fail("model.kind", "custom models need a coefficient function and are only available from code");
    fail("model.kind", "unknown model kind '" + name + "' (expected vsm or constant)");
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::string_view text) {
    ConfigDocument doc;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        const std::string line =
            trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        ++line_no;
        if (!line.empty() && line.front() != '#') {
            if (line.find('=') == std::string::npos)
                throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
            doc.set(line);
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return doc;
}

void ConfigDocument::set(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    std::string key = trim(assignment.substr(0, eq));
    std::string value = trim(assignment.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key in '" + std::string(assignment) + "'");
    if (value.empty()) throw ConfigError(key + ": empty value");
    values_[std::move(key)] = std::move(value);
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "model.kind", "model.n", "model.d", "model.alpha", "model.gamma", "model.xi", "model.initial_caps",
        "model.weight_floor", "model.max_halvings", "T", "dt", "n_paths", "pilot_paths", "master_seed", "threads",
        "epsilon", "epsilon_safety", "delta", "c_offset", "tol_as", "tolerance_master", "level_tol", "margin",
        "margin_pos", "diversity_delta", "nondiverse_floor", "covariance_window", "output.report", "output.format",
        "output.plot_dir",
    };
    return keys;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "csv-summary") return ReportFormat::CsvSummary;
    fail("output.format", "expected json or csv-summary, got '" + std::string(name) + "'");
}

RunConfig build_config(const ConfigDocument& doc, ConfigMode mode) {
    const auto& keys = config_keys();
    for (const auto& [key, value] : doc.values()) {
        if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
        std::string best;
        std::size_t best_distance = 4;
        for (const auto& candidate : keys) {
            const std::size_t dist = edit_distance(key, candidate);
            if (dist < best_distance) {
                best_distance = dist;
                best = candidate;
            }
        }
        std::string msg = "unknown key";
        if (!best.empty()) msg += " (did you mean '" + best + "'?)";
        fail(key, msg);
    }

    const Reader in(doc);
    RunConfig cfg;

    // Horizon and grid.
    if (mode == ConfigMode::Simulation) {
        cfg.ensemble.T = to_double("T", in.required("T"));
    } else {
        cfg.ensemble.T = in.number("T").value_or(1.0);
    }
    require_positive("T", cfg.ensemble.T);
    cfg.ensemble.dt = in.number("dt").value_or(1e-3);
    require_positive("dt", cfg.ensemble.dt);
    if (!(cfg.ensemble.dt < cfg.ensemble.T)) fail("dt", "must be smaller than T");
    cfg.ensemble.n_paths = in.integer("n_paths").value_or(1000);
    if (cfg.ensemble.n_paths < 1) fail("n_paths", "must be at least 1");
    cfg.ensemble.pilot_paths = in.integer("pilot_paths").value_or(200);
    if (cfg.ensemble.pilot_paths < 1) fail("pilot_paths", "must be at least 1");
    cfg.ensemble.master_seed = in.integer("master_seed").value_or(42);
    cfg.ensemble.threads = static_cast<unsigned>(in.integer("threads").value_or(1));
    if (cfg.ensemble.threads < 1) fail("threads", "must be at least 1");

    // Model.
    const bool need_model = mode == ConfigMode::Simulation;
    if (need_model || in.text("model.kind")) {
        ModelSpec& m = cfg.model;
        m.kind = parse_kind(in.required("model.kind"));
        m.n = to_unsigned("model.n", in.required("model.n"));
        if (m.n < 2) fail("model.n", "must be at least 2");
        m.d = in.integer("model.d").value_or(m.n);
        if (m.d < m.n) fail("model.d", "must be at least model.n");
        const auto n = static_cast<Eigen::Index>(m.n);
        const auto d = static_cast<Eigen::Index>(m.d);
        m.initial_caps = in.text("model.initial_caps") ? to_vector("model.initial_caps", *in.text("model.initial_caps"))
                                                       : Eigen::VectorXd::Ones(n);
        if (m.initial_caps.size() != n) fail("model.initial_caps", "must have model.n entries");
        if (!m.initial_caps.allFinite() || (m.initial_caps.array() <= 0.0).any())
            fail("model.initial_caps", "must be strictly positive");
        if (m.kind == ModelKind::VolatilityStabilized) {
            m.alpha = in.number("model.alpha").value_or(0.0);
            if (!(m.alpha >= 0.0)) fail("model.alpha", "must be nonnegative");
            m.weight_floor = in.number("model.weight_floor").value_or(1e-20);
            if (!(m.weight_floor > 0.0 && m.weight_floor < 1.0 / static_cast<double>(m.n)))
                fail("model.weight_floor", "must lie in (0, 1/n)");
            m.max_halvings = static_cast<int>(in.integer("model.max_halvings").value_or(64));
            if (m.max_halvings > 200) fail("model.max_halvings", "must be at most 200");
            for (const char* key : {"model.gamma", "model.xi"})
                if (in.text(key)) fail(key, "not used by the vsm model");
        } else {
            m.gamma = in.text("model.gamma") ? to_vector("model.gamma", *in.text("model.gamma"))
                                             : Eigen::VectorXd::Zero(n);
            if (m.gamma.size() != n) fail("model.gamma", "must have model.n entries");
            m.xi = in.text("model.xi") ? to_matrix("model.xi", *in.text("model.xi")) : Eigen::MatrixXd::Identity(n, d);
            if (m.xi.rows() != n || m.xi.cols() != d) fail("model.xi", "must be model.n x model.d");
            for (const char* key : {"model.alpha", "model.weight_floor", "model.max_halvings"})
                if (in.text(key)) fail(key, "only used by the vsm model");
        }
        m.validate();
    } else {
        for (const char* key : {"model.n", "model.d", "model.alpha", "model.gamma", "model.xi",
                                "model.initial_caps", "model.weight_floor", "model.max_halvings"})
            if (in.text(key)) fail(key, "requires model.kind");
    }

    // Strategy.
    StrategyConfig& s = cfg.strategy;
    if (auto eps = in.text("epsilon"); eps && *eps != "measured") {
        s.epsilon = to_double("epsilon", *eps);
        require_positive("epsilon", *s.epsilon);
    }
    s.epsilon_safety = in.number("epsilon_safety").value_or(0.9);
    if (!(s.epsilon_safety > 0.0 && s.epsilon_safety <= 1.0)) fail("epsilon_safety", "must lie in (0, 1]");
    if (auto delta = in.text("delta"); delta && *delta != "auto") {
        s.delta = to_double("delta", *delta);
        require_positive("delta", *s.delta);
    }
    if ((s.c_offset = in.number("c_offset")) && !(*s.c_offset >= 0.0)) fail("c_offset", "must be nonnegative");
    if ((s.tol_as = in.number("tol_as"))) require_positive("tol_as", *s.tol_as);
    if ((s.tolerance_master = in.number("tolerance_master"))) require_positive("tolerance_master", *s.tolerance_master);
    s.level_tol = in.number("level_tol").value_or(kLevelTolerance);
    require_positive("level_tol", s.level_tol);
    s.margin = in.number("margin").value_or(0.01);
    if (!(s.margin > 0.0 && s.margin < 1.0)) fail("margin", "must lie in (0, 1)");
    if ((s.margin_pos = in.number("margin_pos"))) require_positive("margin_pos", *s.margin_pos);
    s.diversity_delta = in.number("diversity_delta").value_or(0.01);
    if (!(s.diversity_delta > 0.0 && s.diversity_delta < 1.0)) fail("diversity_delta", "must lie in (0, 1)");

    s.nondiverse_floor = in.number("nondiverse_floor").value_or(1e-3);
    if (!(s.nondiverse_floor >= 0.0)) fail("nondiverse_floor", "must be nonnegative");

    cfg.covariance_window = in.integer("covariance_window").value_or(20);
    if (cfg.covariance_window < 1) fail("covariance_window", "must be at least 1");

    cfg.report_path = in.text("output.report").value_or("");
    cfg.report_format = parse_report_format(in.text("output.format").value_or("json"));
    cfg.plot_dir = in.text("output.plot_dir").value_or("");
    return cfg;
}

RunConfig parse_config(std::string_view text, ConfigMode mode) {
    return build_config(ConfigDocument::parse(text), mode);
}

}  // namespace relarb

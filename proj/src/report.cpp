#include "relarb/report.hpp"

#include "relarb/csv_io.hpp"
#include "relarb/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <vector>

namespace relarb {

namespace {

// Field table shared by every format: name, writer and reader.
struct Field {
    const char* name;
    std::function<std::string(const ArbitrageReport&, bool json)> write;
    std::function<void(ArbitrageReport&, const nlohmann::json&)> read;
};

std::string number(double v, bool json) {
    if (!std::isfinite(v)) return json ? "null" : "";
    return format_number(v);
}

std::string quoted(const std::string& s, bool json) { return json ? nlohmann::json(s).dump() : s; }

template <class T>
Field real(const char* name, T ArbitrageReport::*member) {
    return {name, [member](const ArbitrageReport& r, bool json) { return number(r.*member, json); },
            [member](ArbitrageReport& r, const nlohmann::json& v) { r.*member = v.get<double>(); }};
}

Field optional_real(const char* name, std::optional<double> ArbitrageReport::*member) {
    return {name,
            [member](const ArbitrageReport& r, bool json) {
                return (r.*member) ? number(*(r.*member), json) : std::string(json ? "null" : "");
            },
            [member](ArbitrageReport& r, const nlohmann::json& v) {
                if (v.is_null())
                    r.*member = std::nullopt;
                else
                    r.*member = v.get<double>();
            }};
}

template <class T>
Field integral(const char* name, T ArbitrageReport::*member) {
    return {name, [member](const ArbitrageReport& r, bool) { return std::to_string(r.*member); },
            [member](ArbitrageReport& r, const nlohmann::json& v) { r.*member = v.get<T>(); }};
}

Field boolean(const char* name, bool ArbitrageReport::*member) {
    return {name, [member](const ArbitrageReport& r, bool) { return std::string(r.*member ? "true" : "false"); },
            [member](ArbitrageReport& r, const nlohmann::json& v) { r.*member = v.get<bool>(); }};
}

Field text(const char* name, std::string ArbitrageReport::*member) {
    return {name, [member](const ArbitrageReport& r, bool json) { return quoted(r.*member, json); },
            [member](ArbitrageReport& r, const nlohmann::json& v) { r.*member = v.get<std::string>(); }};
}

const std::vector<Field>& fields() {
    using R = ArbitrageReport;
    static const std::vector<Field> table = {
        integral("n_paths", &R::n_paths),
        integral("pilot_paths", &R::pilot_paths),
        real("frac_nonnegative", &R::frac_nonnegative),
        real("frac_strict", &R::frac_strict),
        real("frac_triggered", &R::frac_triggered),
        optional_real("frac_strict_given_triggered", &R::frac_strict_given_triggered),
        real("mean_rel", &R::mean_rel),
        real("min_rel", &R::min_rel),
        real("max_rel", &R::max_rel),
        boolean("arbitrage", &R::arbitrage),
        boolean("strong", &R::strong),
        real("A", &R::A),
        real("A_estimated", &R::A_estimated),
        boolean("nondiverse_zero_floor", &R::nondiverse_zero_floor),
        real("delta", &R::delta),
        text("delta_branch", &R::delta_branch),
        real("epsilon", &R::epsilon),
        text("epsilon_source", &R::epsilon_source),
        real("gamma_star_min", &R::gamma_star_min),
        boolean("epsilon_hypothesis", &R::epsilon_hypothesis),
        boolean("condition_zero", &R::condition_zero),
        real("floor_first_half", &R::floor_first_half),
        real("floor_second_half", &R::floor_second_half),
        boolean("pilot_diversity", &R::pilot_diversity),
        boolean("diversity", &R::diversity),
        real("diversity_delta", &R::diversity_delta),
        real("max_weight_first_half", &R::max_weight_first_half),
        integral("residual_count", &R::residual_count),
        optional_real("residual_mean", &R::residual_mean),
        optional_real("residual_max", &R::residual_max),
        boolean("residual_within_tolerance", &R::residual_within_tolerance),
        real("tol_as", &R::tol_as),
        real("tolerance_master", &R::tolerance_master),
        real("level_tol", &R::level_tol),
        real("c_offset", &R::c_offset),
        real("dt", &R::dt),
        real("T", &R::T),
        integral("seed", &R::seed),
        integral("covariance_window", &R::covariance_window),
    };
    return table;
}

ArbitrageReport from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw DataError("report: expected a JSON object");
    if (!doc.contains("schema") || doc.at("schema") != kReportSchema)
        throw DataError("report: unsupported or missing schema version");
    ArbitrageReport r;
    for (const auto& f : fields()) {
        if (!doc.contains(f.name)) throw DataError(std::string("report: missing field ") + f.name);
        try {
            f.read(r, doc.at(f.name));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("report: bad field ") + f.name + ": " + e.what());
        }
    }
    return r;
}

}  // namespace

std::string report_to_json(const ArbitrageReport& report) {
    std::ostringstream out;
    out << "{\n  \"schema\": " << kReportSchema;
    for (const auto& f : fields()) out << ",\n  \"" << f.name << "\": " << f.write(report, true);
    out << "\n}\n";
    return out.str();
}

std::string report_to_csv_summary(const ArbitrageReport& report) {
    std::ostringstream header, row;
    header << "schema";
    row << kReportSchema;
    for (const auto& f : fields()) {
        header << ',' << f.name;
        row << ',' << f.write(report, false);
    }
    return header.str() + "\n" + row.str() + "\n";
}

void emit_report(const ArbitrageReport& report, ReportFormat format, std::ostream& out) {
    out << (format == ReportFormat::Json ? report_to_json(report) : report_to_csv_summary(report));
    if (!out) throw Error("failed to write report");
}

void emit_report(const ArbitrageReport& report, ReportFormat format, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    emit_report(report, format, out);
}

ArbitrageReport parse_report_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("report: ") + e.what());
    }
    return from_json(doc);
}

ArbitrageReport parse_report_csv_summary(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string header_line, row_line;
    if (!std::getline(in, header_line) || !std::getline(in, row_line))
        throw DataError("csv summary: expected a header row and a data row");
    auto split = [](const std::string& line) {
        std::vector<std::string> parts;
        std::string part;
        std::istringstream s(line);
        while (std::getline(s, part, ',')) parts.push_back(part);
        if (!line.empty() && line.back() == ',') parts.emplace_back();
        return parts;
    };
    const auto names = split(header_line);
    const auto values = split(row_line);
    if (names.size() != values.size()) throw DataError("csv summary: header and row differ in length");
    // Rebuild a JSON document from the cells, then reuse the JSON reader.
    nlohmann::json doc = nlohmann::json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::string& v = values[i];
        if (v.empty())
            doc[names[i]] = nullptr;
        else if (v == "true" || v == "false")
            doc[names[i]] = v == "true";
        else if (names[i] == "delta_branch" || names[i] == "epsilon_source")
            doc[names[i]] = v;
        else
            doc[names[i]] = nlohmann::json::parse(v);
    }
    return from_json(doc);
}

PlotKind parse_plot_kind(std::string_view name) {
    if (name == "entropy_curves") return PlotKind::EntropyCurves;
    if (name == "rel_wealth") return PlotKind::RelWealth;
    if (name == "floor_curve") return PlotKind::FloorCurve;
    throw ConfigError("plot kind: unknown kind '" + std::string(name) + "'");
}

void emit_plot_data(std::span<const PathRecord> records, PlotKind kind, std::ostream& out) {
    if (records.empty()) throw std::invalid_argument("plot data needs at least one path record");
    for (const auto& rec : records) {
        if (rec.times.empty()) throw std::invalid_argument("path records carry no trajectories");
    }
    out << "path_id,time,value\n";
    if (kind == PlotKind::FloorCurve) {
        std::vector<EntropyTrajectory> trajs;
        trajs.reserve(records.size());
        for (const auto& rec : records) trajs.push_back({rec.times, rec.entropy});
        const FloorCurve curve = entropy_floor_curve(trajs);
        for (std::size_t k = 0; k < curve.times.size(); ++k)
            out << "ensemble," << format_number(curve.times[k]) << ',' << format_number(curve.values[k]) << '\n';
        return;
    }
    for (const auto& rec : records) {
        const auto& values = kind == PlotKind::EntropyCurves ? rec.entropy : rec.rel;
        for (std::size_t k = 0; k < rec.times.size(); ++k)
            out << rec.path_id << ',' << format_number(rec.times[k]) << ',' << format_number(values[k]) << '\n';
    }
}

}  // namespace relarb

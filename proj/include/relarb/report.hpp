#pragma once

#include "relarb/config.hpp"
#include "relarb/ensemble.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

namespace relarb {

inline constexpr int kReportSchema = 1;

/// JSON object with `schema` first and the remaining fields in a fixed order.
/// Numbers carry 17 significant digits; unset optionals are null.
std::string report_to_json(const ArbitrageReport& report);

/// One header row and one data row; unset optionals are empty cells.
std::string report_to_csv_summary(const ArbitrageReport& report);

void emit_report(const ArbitrageReport& report, ReportFormat format, std::ostream& out);
void emit_report(const ArbitrageReport& report, ReportFormat format, const std::filesystem::path& file);

ArbitrageReport parse_report_json(std::string_view text);
ArbitrageReport parse_report_csv_summary(std::string_view text);

enum class PlotKind { EntropyCurves, RelWealth, FloorCurve };

/// "entropy_curves", "rel_wealth" or "floor_curve"; anything else is a ConfigError.
PlotKind parse_plot_kind(std::string_view name);

/// Long-format `path_id,time,value` rows. The floor curve is the pointwise
/// minimum of the records' entropy trajectories, labelled `ensemble`.
void emit_plot_data(std::span<const PathRecord> records, PlotKind kind, std::ostream& out);

}  // namespace relarb

#pragma once

#include "relarb/market_sim.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace relarb {

/// Formats with 17 significant digits, which round-trips every double.
std::string format_number(double v);

/// `time,X1,...,Xn`, one row per grid point.
void write_caps_csv(std::ostream& out, const MarketPath& path);

/// `time,sigma_1_1,sigma_1_2,...,sigma_n_n`, one row per step (left endpoint time).
void write_sigma_csv(std::ostream& out, const MarketPath& path);

/// Companion covariance file for a caps file: `<stem>.sigma.csv` next to it.
std::filesystem::path companion_path(const std::filesystem::path& caps_file);

/// Writes the caps file and its companion covariance file.
void export_path(const MarketPath& path, const std::filesystem::path& caps_file);

/// Realized quadratic covariation of log-caps over a trailing window of
/// `window` steps, per unit time. Steps before the first full window use the
/// first `window` increments.
std::vector<Eigen::MatrixXd> rolling_realized_covariance(const std::vector<double>& times,
                                                         const Eigen::MatrixXd& dlogX, std::size_t window);

/// Reads a caps CSV and estimates covariances with rolling_realized_covariance.
/// Times are shifted so the first row is t = 0.
MarketPath ingest_caps_csv(std::istream& caps, std::size_t window = 20);

/// Reads a caps CSV with covariances from a companion file (exact round trip).
MarketPath ingest_caps_csv(std::istream& caps, std::istream& sigma);

struct IngestOptions {
    std::size_t covariance_window = 20;
    std::optional<std::filesystem::path> sigma_file;
};

MarketPath ingest_caps_csv(const std::filesystem::path& caps_file, const IngestOptions& options = {});

}  // namespace relarb

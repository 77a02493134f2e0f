#include "relarb/csv_io.hpp"

#include "relarb/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace relarb {

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        const auto a = field.find_first_not_of(" \t\r");
        const auto b = field.find_last_not_of(" \t\r");
        fields.push_back(a == std::string::npos ? std::string{} : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

Table read_table(std::istream& in, const std::string& what) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_fields(line);
        if (t.header.empty()) {
            if (fields.empty() || fields.front() != "time")
                throw DataError(what + ": header must start with 'time'");
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw DataError(what + ": ragged row at line " + std::to_string(line_no) + " (" +
                            std::to_string(fields.size()) + " fields, expected " + std::to_string(t.header.size()) +
                            ")");
        }
        std::vector<double> row(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const auto& f = fields[i];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
            if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
                throw DataError(what + ": bad number '" + f + "' at line " + std::to_string(line_no));
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw DataError(what + ": empty file");
    return t;
}

MarketPath path_from_caps(const Table& t) {
    const std::size_t n = t.header.size() - 1;
    if (n < 2) throw DataError("caps file needs at least two stock columns");
    if (t.rows.size() < 2) throw DataError("caps file needs at least two rows");
    MarketPath path;
    const double t0 = t.rows.front()[0];
    path.times.reserve(t.rows.size());
    path.caps.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& row = t.rows[k];
        if (k > 0 && !(row[0] > t.rows[k - 1][0]))
            throw DataError("non-monotone time at row " + std::to_string(k + 1));
        path.times.push_back(row[0] - t0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(row[i + 1] > 0.0) || !std::isfinite(row[i + 1]))
                throw DataError("non-positive capitalization at row " + std::to_string(k + 1) + ", column " +
                                t.header[i + 1]);
            path.caps(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = row[i + 1];
        }
    }
    return path;
}

void compute_dlogx(MarketPath& path) {
    const auto m = path.caps.rows() - 1;
    path.dlogX.resize(m, path.caps.cols());
    for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index i = 0; i < path.caps.cols(); ++i)
            path.dlogX(k, i) = std::log(path.caps(k + 1, i)) - std::log(path.caps(k, i));
}

}  // namespace

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_caps_csv(std::ostream& out, const MarketPath& path) {
    out << "time";
    for (std::size_t i = 0; i < path.n(); ++i) out << ",X" << (i + 1);
    out << '\n';
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        out << format_number(path.times[k]);
        for (Eigen::Index i = 0; i < path.caps.cols(); ++i)
            out << ',' << format_number(path.caps(static_cast<Eigen::Index>(k), i));
        out << '\n';
    }
}

void write_sigma_csv(std::ostream& out, const MarketPath& path) {
    const std::size_t n = path.n();
    out << "time";
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out << ",sigma_" << (i + 1) << '_' << (j + 1);
    out << '\n';
    for (std::size_t k = 0; k < path.sigma.size(); ++k) {
        out << format_number(path.times[k]);
        const auto& s = path.sigma[k];
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            for (Eigen::Index j = 0; j < s.cols(); ++j) out << ',' << format_number(s(i, j));
        out << '\n';
    }
}

std::filesystem::path companion_path(const std::filesystem::path& caps_file) {
    std::filesystem::path p = caps_file;
    p.replace_extension(".sigma.csv");
    return p;
}

void export_path(const MarketPath& path, const std::filesystem::path& caps_file) {
    std::ofstream caps(caps_file);
    if (!caps) throw Error("cannot write " + caps_file.string());
    write_caps_csv(caps, path);
    const auto sigma_file = companion_path(caps_file);
    std::ofstream sigma(sigma_file);
    if (!sigma) throw Error("cannot write " + sigma_file.string());
    write_sigma_csv(sigma, path);
    if (!caps || !sigma) throw Error("write failed for " + caps_file.string());
}

std::vector<Eigen::MatrixXd> rolling_realized_covariance(const std::vector<double>& times,
                                                         const Eigen::MatrixXd& dlogX, std::size_t window) {
    const auto m = static_cast<std::size_t>(dlogX.rows());
    if (window == 0) throw std::invalid_argument("covariance window must be positive");
    if (m < window) throw DataError("insufficient rows for covariance window");
    std::vector<Eigen::MatrixXd> out;
    out.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t begin = k >= window ? k - window : 0;
        const auto block = dlogX.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(window));
        const double elapsed = times[begin + window] - times[begin];
        out.push_back(block.transpose() * block / elapsed);
    }
    return out;
}

MarketPath ingest_caps_csv(std::istream& caps, std::size_t window) {
    MarketPath path = path_from_caps(read_table(caps, "caps file"));
    compute_dlogx(path);
    path.sigma = rolling_realized_covariance(path.times, path.dlogX, window);
    path.finalize();
    return path;
}

MarketPath ingest_caps_csv(std::istream& caps, std::istream& sigma) {
    MarketPath path = path_from_caps(read_table(caps, "caps file"));
    const Table s = read_table(sigma, "covariance file");
    const std::size_t n = path.n();
    if (s.header.size() != n * n + 1) throw DataError("covariance file must have n*n value columns");
    if (s.rows.size() != path.steps()) throw DataError("covariance file must have one row per step");
    const double t0 = path.times.empty() ? 0.0 : s.rows.front()[0];
    path.sigma.reserve(s.rows.size());
    for (std::size_t k = 0; k < s.rows.size(); ++k) {
        if (s.rows[k][0] - t0 != path.times[k])
            throw DataError("covariance file time mismatch at row " + std::to_string(k + 1));
        Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.rows[k][1 + i * n + j];
        path.sigma.push_back(std::move(m));
    }
    path.finalize();
    return path;
}

MarketPath ingest_caps_csv(const std::filesystem::path& caps_file, const IngestOptions& options) {
    std::ifstream caps(caps_file);
    if (!caps) throw DataError("cannot open " + caps_file.string());
    if (options.sigma_file) {
        std::ifstream sigma(*options.sigma_file);
        if (!sigma) throw DataError("cannot open " + options.sigma_file->string());
        return ingest_caps_csv(caps, sigma);
    }
    return ingest_caps_csv(caps, options.covariance_window);
}

}  // namespace relarb

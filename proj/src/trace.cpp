#include "loopchan/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

constexpr double kUniformRelTol = 1e-6;
constexpr double kCsvJitter = 0.01;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view s, std::size_t line) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw DataError("line " + std::to_string(line) + ": cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

TimeGrid TimeGrid::spanning(double t_start, double t_end, std::size_t n) {
    if (n < 2 || !(t_end > t_start)) throw ParameterError("grid needs n >= 2 and t_end > t_start");
    return {t_start, (t_end - t_start) / static_cast<double>(n - 1), n};
}

void TimeGrid::validate() const {
    if (!(std::isfinite(dt) && dt > 0.0)) throw ParameterError("grid step must be positive");
    if (n < 2) throw ParameterError("grid needs at least two samples");
    if (!std::isfinite(t_start)) throw ParameterError("grid start must be finite");
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = at(i);
    return out;
}

Trace Trace::on_grid(const TimeGrid& grid, std::vector<double> values, std::string unit_label) {
    grid.validate();
    if (values.size() != grid.n) throw DataError("value count does not match grid");
    return {grid.times(), std::move(values), std::move(unit_label)};
}

void Trace::validate() const {
    if (t.size() < 2) throw DataError("trace needs at least two samples");
    if (t.size() != y.size()) throw DataError("trace time and value lengths differ");
    const double step = t[1] - t[0];
    if (!(step > 0.0)) throw DataError("trace time grid must be strictly increasing");
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - step) > kUniformRelTol * step + 1e-12 * std::abs(t[i])) {
            throw DataError("trace time grid is not uniform");
        }
    }
}

std::vector<double> interpolate_linear(std::span<const double> t, std::span<const double> y,
                                       const TimeGrid& grid) {
    if (t.size() != y.size() || t.empty()) throw DataError("interpolation needs matching, non-empty samples");
    std::vector<double> out(grid.n);
    std::size_t j = 0;
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double ti = grid.at(i);
        if (ti <= t.front()) {
            out[i] = y.front();
            continue;
        }
        if (ti >= t.back()) {
            out[i] = y.back();
            continue;
        }
        while (j + 1 < t.size() && t[j + 1] < ti) ++j;
        const double w = (ti - t[j]) / (t[j + 1] - t[j]);
        out[i] = (1.0 - w) * y[j] + w * y[j + 1];
    }
    return out;
}

Trace read_trace_csv(std::istream& in, std::string unit_label) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError("empty trace CSV");
    ++line_no;
    if (trim(line) != "t_s,value") throw DataError("trace CSV header must be 't_s,value'");

    std::vector<double> t;
    std::vector<double> y;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
            throw DataError("line " + std::to_string(line_no) + ": expected two columns");
        }
        t.push_back(parse_double(row.substr(0, comma), line_no));
        y.push_back(parse_double(row.substr(comma + 1), line_no));
    }
    if (t.size() < 2) throw DataError("trace CSV needs at least two samples");
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) throw DataError("trace CSV times must be strictly increasing");
    }

    const TimeGrid grid = TimeGrid::spanning(t.front(), t.back(), t.size());
    bool uniform = true;
    for (std::size_t i = 1; i < t.size() && uniform; ++i) {
        uniform = std::abs((t[i] - t[i - 1]) - grid.dt) <= kCsvJitter * grid.dt;
    }
    if (uniform) return Trace::on_grid(grid, std::move(y), std::move(unit_label));
    return Trace::on_grid(grid, interpolate_linear(t, y, grid), std::move(unit_label));
}

Trace read_trace_csv(const std::filesystem::path& path, std::string unit_label) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace file " + path.string());
    return read_trace_csv(in, std::move(unit_label));
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw Error("number formatting failed");
    return {buf, ptr};
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
    out << "t_s,value\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << format_double(trace.t[i]) << ',' << format_double(trace.y[i]) << '\n';
    }
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace file " + path.string());
    write_trace_csv(out, trace);
}

}  // namespace loopchan

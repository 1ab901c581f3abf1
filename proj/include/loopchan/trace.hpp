#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace loopchan {

/// Uniform time grid t_i = t_start + i dt, i = 0..n-1.
struct TimeGrid {
    double t_start = 0.0;
    double dt = 0.0;
    std::size_t n = 0;

    /// Grid with n samples covering [t_start, t_end] inclusive.
    static TimeGrid spanning(double t_start, double t_end, std::size_t n);

    double at(std::size_t i) const { return t_start + static_cast<double>(i) * dt; }
    double t_end() const { return at(n - 1); }

    /// Throws ParameterError unless dt > 0 and n >= 2.
    void validate() const;

    std::vector<double> times() const;
};

/// Uniformly sampled time series.
struct Trace {
    std::vector<double> t;
    std::vector<double> y;
    std::string unit_label;

    static Trace on_grid(const TimeGrid& grid, std::vector<double> values, std::string unit_label = {});

    std::size_t size() const { return y.size(); }
    double dt() const { return t[1] - t[0]; }
    TimeGrid grid() const { return {t.front(), dt(), t.size()}; }

    /// Throws DataError unless >= 2 samples, equal lengths, and a constant positive step.
    void validate() const;
};

/// Linear interpolation of (t, y) samples onto a grid; clamps outside the sample range.
std::vector<double> interpolate_linear(std::span<const double> t, std::span<const double> y,
                                       const TimeGrid& grid);

/**
 * Reads the `t_s,value` CSV format. Grids whose step jitters by at most 1%
 * are snapped to the mean step; anything rougher is resampled onto a
 * uniform grid of the same length by linear interpolation.
 */
Trace read_trace_csv(std::istream& in, std::string unit_label = {});
Trace read_trace_csv(const std::filesystem::path& path, std::string unit_label = {});

void write_trace_csv(std::ostream& out, const Trace& trace);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);

/// Shortest round-trip decimal form; used by every writer so output is byte-stable.
std::string format_double(double value);

}  // namespace loopchan

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "loopchan/trace.hpp"

namespace loopchan {

/// Default moving-average window [samples] for measured-data derivatives.
inline constexpr std::size_t kDefaultSmoothWindow = 5;

/**
 * Centered moving average with half-width window/2. Near the ends the
 * window shrinks symmetrically so the filter never shifts phase.
 */
std::vector<double> moving_average(std::span<const double> y, std::size_t window);

/**
 * Smoothed central-difference derivative. The result lives on the input
 * grid without its two endpoints. Throws DataError when the trace has
 * fewer than 2 * smooth_window samples.
 */
Trace differentiate(const Trace& meas, std::size_t smooth_window = kDefaultSmoothWindow);

/// Robust noise level of a sampled signal: 1.4826 MAD of first differences / sqrt(2).
double noise_floor_mad(std::span<const double> y);

}  // namespace loopchan

#pragma once

/**
 * @file estimation.hpp
 * @brief Least-squares estimation of channel parameters from an ROI intensity trace.
 *
 * The fit matches the time derivative of the forward model to the
 * smoothed derivative of the measurement. Both sides go through the same
 * moving-average + central-difference operator, so the smoothing bias
 * cancels and a noiseless synthetic trace is reproduced exactly at the
 * true parameters.
 *
 * The optimizer works in the coordinates
 *   z = [ln d_eff, v_eff, ln l_eff, d_rx / l_eff, ln scale]
 * inside a box. Each local solve is a Levenberg-Marquardt iteration with
 * Marquardt diagonal scaling and forward-difference Jacobians; bounds are
 * enforced by projection with an active set for variables pinned at a
 * bound. Starts come from a seeded Latin hypercube over the first four
 * coordinates; the start scale is the linear least-squares optimum.
 */

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loopchan/channel.hpp"
#include "loopchan/derivative.hpp"
#include "loopchan/injection.hpp"
#include "loopchan/response.hpp"
#include "loopchan/trace.hpp"

namespace loopchan {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

struct FitBounds {
    Interval d_eff{1e-10, 1e-4};  ///< [m^2/s]
    Interval v_eff{1e-6, 1e-2};   ///< [m/s]
    Interval l_eff{1e-3, 1.0};    ///< [m]
    Interval fraction{0.0, 1.0};  ///< d_rx / l_eff, upper end exclusive
    Interval scale{1e-30, 1e30};

    void validate() const;
};

/// A point in parameter space: the channel plus the intensity scale.
struct FitParams {
    ChannelParams channel;
    double scale = 1.0;
};

struct FitProblem {
    Trace measured;
    InjectionProfile injection;
    FitBounds bounds;
    std::optional<FitParams> init;  ///< used as start 0 when present
    std::size_t n_starts = 16;
    std::uint64_t seed = 1;
    std::size_t smooth_window = kDefaultSmoothWindow;
    std::size_t max_iter = 200;

    void validate() const;
};

enum class BoundStatus { interior, at_lower, at_upper };

inline constexpr std::array<const char*, 5> kFitParameterNames{"d_eff", "v_eff", "l_eff", "d_rx", "scale"};

struct StartDiagnostics {
    std::size_t index = 0;
    bool converged = false;
    std::size_t n_iter = 0;
    double residual_rms = 0.0;
    std::string message;
    std::vector<double> cost_history;  ///< objective after every accepted step, starting value first
};

struct FitResult {
    ChannelParams channel;
    double scale = 1.0;
    double residual_rms = 0.0;  ///< RMS of the derivative residual
    std::size_t n_iter = 0;
    bool converged = false;
    std::size_t start_index = 0;
    std::array<BoundStatus, 5> bounds_status{};  ///< order of kFitParameterNames; d_rx reports its fraction
    std::vector<StartDiagnostics> starts;

    ForwardModel model(const InjectionProfile& injection) const { return {channel, injection, scale}; }
};

/**
 * Best of prob.n_starts local solves. Throws DataError when the measured
 * derivative has no sample above 3x its noise floor or the trace stops
 * before t0 + 2 tw, ConvergenceError (with per-start diagnostics) when no
 * start converges.
 */
FitResult fit_channel(const FitProblem& prob);

/// Derivative-residual RMS of given parameters against a problem; the fit objective in RMS form.
double derivative_residual_rms(const FitProblem& prob, const FitParams& params);

struct ResidualSummary {
    double rms = 0.0;
    double max_abs = 0.0;
    double t_of_max = 0.0;
};

struct ResidualReport {
    Trace derivative;  ///< model - measurement on the derivative target
    Trace intensity;   ///< model - measurement on the intensity itself
    ResidualSummary derivative_summary;
    ResidualSummary intensity_summary;
};

ResidualReport residual_report(const FitResult& res, const FitProblem& prob);

const char* to_string(BoundStatus s);

}  // namespace loopchan

#pragma once

#include "loopchan/channel.hpp"
#include "loopchan/injection.hpp"
#include "loopchan/trace.hpp"

namespace loopchan {

/// Received intensity model: scale * (channel response at d_rx convolved with the injection rate).
struct ForwardModel {
    ChannelParams channel;
    InjectionProfile injection;
    double scale = 1.0;  ///< intensity per density [intensity units * m]

    void validate() const;

    friend bool operator==(const ForwardModel&, const ForwardModel&) = default;
};

/// Whether predict checks that the grid resolves the injection and the first peak.
enum class GridCheck { strict, relaxed };

/**
 * @brief Received intensity on a uniform grid.
 *
 * Causal convolution by the midpoint rule: the channel kernel is sampled
 * at tau_j = (j + 1/2) dt, which never touches the t = 0 singularity.
 * Under GridCheck::strict the grid must satisfy dt <= tw / 20 and, for
 * v_eff > 0, dt <= t_max(0) / 20; otherwise ParameterError.
 */
Trace predict(const ForwardModel& m, const TimeGrid& grid, GridCheck check = GridCheck::strict);

/// d/dt of predict, from the analytic derivative of the raised cosine.
Trace predict_derivative(const ForwardModel& m, const TimeGrid& grid, GridCheck check = GridCheck::strict);

}  // namespace loopchan

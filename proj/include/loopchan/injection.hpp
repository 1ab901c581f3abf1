#pragma once

#include <cstddef>

#include "loopchan/derivative.hpp"
#include "loopchan/trace.hpp"

namespace loopchan {

/// Raised-cosine release: zero outside [t0, t0 + tw], total release `amplitude`.
struct InjectionProfile {
    double t0 = 0.0;         ///< injection delay [s]
    double tw = 1.0;         ///< injection duration [s]
    double amplitude = 1.0;  ///< total released quantity [intensity units]

    /// Throws ParameterError unless tw > 0, t0 >= 0, amplitude > 0.
    void validate() const;
    double t_end() const { return t0 + tw; }

    friend bool operator==(const InjectionProfile&, const InjectionProfile&) = default;
};

/// Fraction of the peak release rate used to locate onset and offset.
inline constexpr double kOnsetThreshold = 0.05;

/// Release rate (amplitude / tw) (1 - cos(2 pi (t - t0) / tw)) on the support, 0 elsewhere.
double raised_cosine(const InjectionProfile& p, double t);

/// Time derivative of raised_cosine; continuous everywhere.
double raised_cosine_derivative(const InjectionProfile& p, double t);

/// Released quantity up to time t.
double cumulative_intensity(const InjectionProfile& p, double t);

Trace cumulative_intensity(const InjectionProfile& p, const TimeGrid& grid);

/**
 * @brief Recover (t0, tw, amplitude) from a mean-intensity trace.
 *
 * The release rate is the smoothed central-difference derivative of the
 * trace. Onset and offset are where that rate crosses kOnsetThreshold of
 * its peak, walking outwards from the peak and interpolating between
 * samples. The two crossings of a raised cosine sit a known fraction of tw
 * inside its support, and that offset is removed. The amplitude starts as
 * the mean of the final 10% of samples. These estimates then seed a
 * least-squares fit of cumulative_intensity to the raw trace, which
 * removes the smoothing bias of the derivative.
 *
 * Throws DataError for traces shorter than 2 * smooth_window and
 * FitQualityError when no release or no plateau is found.
 */
InjectionProfile extract_injection(const Trace& meas, std::size_t smooth_window = kDefaultSmoothWindow);

}  // namespace loopchan

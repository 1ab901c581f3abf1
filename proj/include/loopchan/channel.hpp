#pragma once

/**
 * @file channel.hpp
 * @brief Closed-form solutions of 1D drift-diffusion on a closed loop.
 *
 * A molecule released at x = 0, t = 0 on a loop of circumference l_eff,
 * advected at v_eff and dispersed with d_eff, has the density
 *
 *     p(x,t) = 1/(sigma sqrt(2 pi)) sum_k exp(-(x - mu + k l_eff)^2 / (2 sigma^2)),
 *
 * sigma^2 = 2 d_eff t, mu = v_eff t. This is the wrapped normal distribution
 * expressed per unit length along the loop. The k = 0 term alone is the
 * open-tube (infinite length) Gaussian.
 *
 * All densities are 1D [1/m]. Diffusion coefficients are in m^2/s.
 */

#include <cstddef>
#include <vector>

namespace loopchan {

/// Effective 1D parameters of a closed-loop channel plus the receiver position.
struct ChannelParams {
    double d_eff = 0.0;  ///< effective diffusion coefficient [m^2/s]
    double v_eff = 0.0;  ///< effective flow velocity [m/s]
    double l_eff = 0.0;  ///< loop circumference [m]
    double d_rx = 0.0;   ///< receiver position downstream of the release point [m]

    /// Throws ParameterError unless d_eff > 0, v_eff >= 0, l_eff > 0 and 0 <= d_rx < l_eff.
    void validate() const;

    friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

/// Physical pipe parameters that feed the Taylor-Aris mapping.
struct PhysicalChannel {
    double d_molecular = 0.0;  ///< molecular diffusion coefficient [m^2/s]
    double r0 = 0.0;           ///< pipe radius [m]
    double v_mean = 0.0;       ///< cross-section mean velocity [m/s]

    void validate() const;

    friend bool operator==(const PhysicalChannel&, const PhysicalChannel&) = default;
};

struct SpaceTimePoint {
    double x = 0.0;  ///< position along the loop [m]
    double t = 0.0;  ///< time since release [s]
};

struct PeakTime {
    int k = 0;         ///< loop cycle index
    double t_max = 0;  ///< time of the cycle-k peak [s]
};

/// Default truncation tolerance for the wrapped sum.
inline constexpr double kDefaultWrapTolerance = 1e-12;

/// Open-tube Gaussian density at (x, t). Throws DomainError for t <= 0.
double gaussian_response(const ChannelParams& p, double x, double t);

/**
 * @brief Wrapped normal density on the loop at (x, t).
 *
 * The image sum keeps every term within max(z sigma, l_eff) of the
 * observation point, z = max(8, sqrt(2 ln(1/tol))). Once the angular
 * spread exceeds 2 pi the equivalent Fourier series of the same function
 * is summed instead; it needs only a handful of terms there.
 *
 * Throws DomainError for t <= 0 or x outside [0, l_eff), ParameterError for tol <= 0.
 */
double wrapped_response(const ChannelParams& p, double x, double t,
                        double tol = kDefaultWrapTolerance);

/// Overload taking a SpaceTimePoint.
inline double wrapped_response(const ChannelParams& p, SpaceTimePoint at,
                               double tol = kDefaultWrapTolerance) {
    return wrapped_response(p, at.x, at.t, tol);
}

/// Taylor-Aris effective diffusion d + r0^2 v^2 / (48 d) for laminar pipe flow.
double taylor_aris(const PhysicalChannel& pc);

/**
 * Peak arrival times at the receiver for cycles k = 0..k_max.
 * Requires v_eff > 0; throws ParameterError otherwise.
 */
std::vector<PeakTime> peak_times(const ChannelParams& p, int k_max);

/// Uniform long-time limit 1/l_eff.
double equilibrium_density(const ChannelParams& p);

/// Number of image terms the wrapped sum uses at (x, t); exposed for tests.
std::size_t wrapped_term_count(const ChannelParams& p, double x, double t,
                               double tol = kDefaultWrapTolerance);

}  // namespace loopchan

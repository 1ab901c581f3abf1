#include "loopchan/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInvSqrtTwoPi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
}

// Number of standard deviations beyond which an image's Gaussian tail is dropped.
double tail_sigmas(double tol) {
    const double z = tol < 1.0 ? std::sqrt(2.0 * std::log(1.0 / tol)) : 0.0;
    return std::max(8.0, z);
}

// Image-sum window, measured from the observation point.
struct ImageRange {
    long k_lo;
    long k_hi;
};

ImageRange image_range(double offset, double sigma, double l_eff, double tol) {
    const double radius = std::max(tail_sigmas(tol) * sigma, l_eff);
    return {static_cast<long>(std::ceil((-radius - offset) / l_eff)),
            static_cast<long>(std::floor((radius - offset) / l_eff))};
}

long fourier_terms(double sbar, double tol) {
    return std::max(1L, static_cast<long>(std::ceil(std::sqrt(2.0 * std::log(1e3 / tol)) / sbar)));
}

void check_wrapped_args(const ChannelParams& p, double x, double t, double tol) {
    p.validate();
    if (!(tol > 0.0)) throw ParameterError("truncation tolerance must be positive");
    if (!(t > 0.0)) throw DomainError("density is a Dirac impulse at t <= 0");
    if (!(x >= 0.0 && x < p.l_eff)) throw DomainError("x must lie in [0, l_eff)");
}

}  // namespace

void ChannelParams::validate() const {
    require(std::isfinite(d_eff) && d_eff > 0.0, "d_eff must be positive");
    require(std::isfinite(v_eff) && v_eff >= 0.0, "v_eff must be non-negative (reflect coordinates for reverse flow)");
    require(std::isfinite(l_eff) && l_eff > 0.0, "l_eff must be positive");
    require(std::isfinite(d_rx) && d_rx >= 0.0 && d_rx < l_eff, "d_rx must lie in [0, l_eff)");
}

void PhysicalChannel::validate() const {
    require(std::isfinite(d_molecular) && d_molecular > 0.0, "d_molecular must be positive");
    require(std::isfinite(r0) && r0 > 0.0, "r0 must be positive");
    require(std::isfinite(v_mean) && v_mean >= 0.0, "v_mean must be non-negative");
}

double gaussian_response(const ChannelParams& p, double x, double t) {
    if (!(t > 0.0)) throw DomainError("density is a Dirac impulse at t <= 0");
    require(std::isfinite(p.d_eff) && p.d_eff > 0.0, "d_eff must be positive");
    const double sigma = std::sqrt(2.0 * p.d_eff * t);
    const double u = (x - p.v_eff * t) / sigma;
    return kInvSqrtTwoPi / sigma * std::exp(-0.5 * u * u);
}

double wrapped_response(const ChannelParams& p, double x, double t, double tol) {
    check_wrapped_args(p, x, t, tol);
    const double sigma = std::sqrt(2.0 * p.d_eff * t);
    const double offset = std::remainder(x - p.v_eff * t, p.l_eff);

    if (sigma <= p.l_eff) {
        const auto [k_lo, k_hi] = image_range(offset, sigma, p.l_eff, tol);
        double sum = 0.0;
        for (long k = k_lo; k <= k_hi; ++k) {
            const double u = (offset + static_cast<double>(k) * p.l_eff) / sigma;
            sum += std::exp(-0.5 * u * u);
        }
        return kInvSqrtTwoPi / sigma * sum;
    }

    // sigma_bar = lambda sigma > 2 pi: dual (Fourier) form of the same sum.
    const double sbar = kTwoPi * sigma / p.l_eff;
    const double phase = kTwoPi * offset / p.l_eff;
    const long n_terms = fourier_terms(sbar, tol);
    double sum = 0.0;
    for (long n = n_terms; n >= 1; --n) {
        const double nd = static_cast<double>(n);
        sum += std::exp(-0.5 * nd * nd * sbar * sbar) * std::cos(nd * phase);
    }
    return (1.0 + 2.0 * sum) / p.l_eff;
}

std::size_t wrapped_term_count(const ChannelParams& p, double x, double t, double tol) {
    check_wrapped_args(p, x, t, tol);
    const double sigma = std::sqrt(2.0 * p.d_eff * t);
    if (sigma <= p.l_eff) {
        const double offset = std::remainder(x - p.v_eff * t, p.l_eff);
        const auto [k_lo, k_hi] = image_range(offset, sigma, p.l_eff, tol);
        return static_cast<std::size_t>(k_hi - k_lo + 1);
    }
    return static_cast<std::size_t>(fourier_terms(kTwoPi * sigma / p.l_eff, tol) + 1);
}

double taylor_aris(const PhysicalChannel& pc) {
    pc.validate();
    const double d = pc.d_molecular;
    return d + (pc.r0 * pc.r0 * pc.v_mean * pc.v_mean) / (48.0 * d);
}

std::vector<PeakTime> peak_times(const ChannelParams& p, int k_max) {
    p.validate();
    if (!(p.v_eff > 0.0)) throw ParameterError("peak times need v_eff > 0");
    if (k_max < 0) throw ParameterError("k_max must be non-negative");

    std::vector<PeakTime> out;
    out.reserve(static_cast<std::size_t>(k_max) + 1);
    for (int k = 0; k <= k_max; ++k) {
        const double dist = p.d_rx + k * p.l_eff;
        const double a = p.v_eff * dist / p.d_eff;
        // (D/v^2)(sqrt(1 + a^2) - 1) rewritten without the cancellation.
        out.push_back({k, dist * dist / (p.d_eff * (1.0 + std::sqrt(1.0 + a * a)))});
    }
    return out;
}

double equilibrium_density(const ChannelParams& p) {
    p.validate();
    return 1.0 / p.l_eff;
}

}  // namespace loopchan

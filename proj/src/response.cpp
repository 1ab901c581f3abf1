#include "loopchan/response.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

constexpr double kResolutionFactor = 20.0;

void check_grid(const ForwardModel& m, const TimeGrid& grid) {
    const double slack = 1.0 + 1e-9;
    if (grid.dt > m.injection.tw / kResolutionFactor * slack) {
        throw ParameterError("grid too coarse: dt must be <= tw / 20");
    }
    if (m.channel.v_eff > 0.0) {
        const double first_peak = peak_times(m.channel, 0).front().t_max;
        if (grid.dt > first_peak / kResolutionFactor * slack) {
            throw ParameterError("grid too coarse: dt must be <= t_max(0) / 20");
        }
    }
}

// scale * dt * sum_j p(tau_j) g(t_i - tau_j) with tau_j = (j + 1/2) dt over the
// support of g, plus the partial panel between the last full lattice point and t_i.
template <class Rate>
Trace convolve(const ForwardModel& m, const TimeGrid& grid, GridCheck check, Rate rate) {
    m.validate();
    grid.validate();
    if (check == GridCheck::strict) check_grid(m, grid);

    const ChannelParams& ch = m.channel;
    const InjectionProfile& inj = m.injection;
    const double dt = grid.dt;

    // t_i - tau_j = t_start + (m - 1/2) dt with m = i - j; g_m is nonzero only on the injection support.
    const auto m_lo = static_cast<long>(std::floor((inj.t0 - grid.t_start) / dt + 0.5));
    const auto m_hi = static_cast<long>(std::ceil((inj.t_end() - grid.t_start) / dt + 0.5));
    std::vector<double> g(static_cast<std::size_t>(m_hi - m_lo + 1));
    for (long k = m_lo; k <= m_hi; ++k) {
        g[static_cast<std::size_t>(k - m_lo)] = rate(inj, grid.t_start + (static_cast<double>(k) - 0.5) * dt);
    }

    std::vector<double> kernel;
    auto kernel_at = [&](std::size_t j) {
        while (kernel.size() <= j) {
            const double tau = (static_cast<double>(kernel.size()) + 0.5) * dt;
            kernel.push_back(wrapped_response(ch, ch.d_rx, tau));
        }
        return kernel[j];
    };

    std::vector<double> y(grid.n, 0.0);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double ti = grid.at(i);
        if (ti <= 0.0) continue;
        const auto full = static_cast<long>(std::floor(ti / dt * (1.0 + 1e-12)));
        // j ranges over full panels [j dt, (j+1) dt] inside [0, t_i] with g_{i-j} nonzero.
        const long ii = static_cast<long>(i);
        const long j_lo = std::max(0L, ii - m_hi);
        const long j_hi = std::min(full - 1, ii - m_lo);
        double acc = 0.0;
        for (long j = j_lo; j <= j_hi; ++j) {
            acc += kernel_at(static_cast<std::size_t>(j)) * g[static_cast<std::size_t>(ii - j - m_lo)];
        }
        acc *= dt;

        const double rest = ti - static_cast<double>(full) * dt;
        if (rest > 1e-12 * dt) {
            const double r = rate(inj, 0.5 * rest);
            if (r != 0.0) acc += rest * r * wrapped_response(ch, ch.d_rx, static_cast<double>(full) * dt + 0.5 * rest);
        }
        y[i] = m.scale * acc;
    }
    return Trace::on_grid(grid, std::move(y));
}

}  // namespace

void ForwardModel::validate() const {
    channel.validate();
    injection.validate();
    if (!(std::isfinite(scale) && scale > 0.0)) throw ParameterError("scale must be positive");
}

Trace predict(const ForwardModel& m, const TimeGrid& grid, GridCheck check) {
    return convolve(m, grid, check, [](const InjectionProfile& p, double t) { return raised_cosine(p, t); });
}

Trace predict_derivative(const ForwardModel& m, const TimeGrid& grid, GridCheck check) {
    return convolve(m, grid, check,
                    [](const InjectionProfile& p, double t) { return raised_cosine_derivative(p, t); });
}

}  // namespace loopchan

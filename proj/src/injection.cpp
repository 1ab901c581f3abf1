#include "loopchan/injection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Least-squares slope of y against t over [first, last).
double ols_slope(const Trace& tr, std::size_t first, std::size_t last) {
    const double n = static_cast<double>(last - first);
    double mt = 0.0;
    double my = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        mt += tr.t[i];
        my += tr.y[i];
    }
    mt /= n;
    my /= n;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        num += (tr.t[i] - mt) * (tr.y[i] - my);
        den += (tr.t[i] - mt) * (tr.t[i] - mt);
    }
    return den > 0.0 ? num / den : 0.0;
}

double crossing(double t_below, double f_below, double t_above, double f_above, double level) {
    return t_below + (level - f_below) / (f_above - f_below) * (t_above - t_below);
}

double sum_sq(const Trace& meas, const InjectionProfile& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < meas.size(); ++i) {
        const double r = cumulative_intensity(p, meas.t[i]) - meas.y[i];
        s += r * r;
    }
    return s;
}

// Levenberg-Marquardt on (t0, tw, amplitude) against the raw cumulative trace.
InjectionProfile refine(const Trace& meas, InjectionProfile p) {
    double damping = 1e-3;
    double cost = sum_sq(meas, p);
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < meas.size(); ++i) {
            const double s = (meas.t[i] - p.t0) / p.tw;
            Eigen::Vector3d g;
            if (s <= 0.0) {
                g << 0.0, 0.0, 0.0;
            } else if (s >= 1.0) {
                g << 0.0, 0.0, 1.0;
            } else {
                const double rate = 1.0 - std::cos(kTwoPi * s);
                g << -p.amplitude * rate / p.tw, -p.amplitude * rate * s / p.tw, s - std::sin(kTwoPi * s) / kTwoPi;
            }
            jtj += g * g.transpose();
            jtr += g * (cumulative_intensity(p, meas.t[i]) - meas.y[i]);
        }
        bool accepted = false;
        while (damping < 1e12) {
            Eigen::Matrix3d a = jtj;
            a.diagonal() += damping * jtj.diagonal();
            const Eigen::Vector3d step = a.ldlt().solve(-jtr);
            InjectionProfile trial{std::max(0.0, p.t0 + step[0]), p.tw + step[1], p.amplitude + step[2]};
            if (trial.tw > 0.0 && trial.amplitude > 0.0 && std::isfinite(trial.t0)) {
                const double c = sum_sq(meas, trial);
                if (c < cost) {
                    const bool tiny = cost - c <= 1e-14 * cost;
                    p = trial;
                    cost = c;
                    damping = std::max(damping / 3.0, 1e-12);
                    accepted = !tiny;
                    break;
                }
            }
            damping *= 4.0;
        }
        if (!accepted) break;
    }
    return p;
}

}  // namespace

void InjectionProfile::validate() const {
    if (!(std::isfinite(tw) && tw > 0.0)) throw ParameterError("injection duration tw must be positive");
    if (!(std::isfinite(t0) && t0 >= 0.0)) throw ParameterError("injection delay t0 must be non-negative");
    if (!(std::isfinite(amplitude) && amplitude > 0.0)) throw ParameterError("injection amplitude must be positive");
}

double raised_cosine(const InjectionProfile& p, double t) {
    if (t < p.t0 || t > p.t_end()) return 0.0;
    return p.amplitude / p.tw * (1.0 - std::cos(kTwoPi * (t - p.t0) / p.tw));
}

double raised_cosine_derivative(const InjectionProfile& p, double t) {
    if (t < p.t0 || t > p.t_end()) return 0.0;
    const double omega = kTwoPi / p.tw;
    return p.amplitude / p.tw * omega * std::sin(omega * (t - p.t0));
}

double cumulative_intensity(const InjectionProfile& p, double t) {
    if (t <= p.t0) return 0.0;
    if (t >= p.t_end()) return p.amplitude;
    const double s = (t - p.t0) / p.tw;
    return p.amplitude * (s - std::sin(kTwoPi * s) / kTwoPi);
}

Trace cumulative_intensity(const InjectionProfile& p, const TimeGrid& grid) {
    p.validate();
    grid.validate();
    std::vector<double> y(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) y[i] = cumulative_intensity(p, grid.at(i));
    return Trace::on_grid(grid, std::move(y));
}

InjectionProfile extract_injection(const Trace& meas, std::size_t smooth_window) {
    meas.validate();
    if (smooth_window == 0) throw ParameterError("smoothing window must be at least one sample");
    if (meas.size() < 2 * smooth_window) {
        throw DataError("mean-intensity trace too short: " + std::to_string(meas.size()) + " samples");
    }

    const Trace rate = differentiate(meas, smooth_window);
    const auto peak_it = std::max_element(rate.y.begin(), rate.y.end());
    const double peak = *peak_it;
    if (!(peak > 0.0)) throw FitQualityError("no injection: the intensity never rises");

    const std::size_t n = meas.size();
    const std::size_t tail = std::max<std::size_t>(2, n / 10);
    if (ols_slope(meas, n - tail, n) > kOnsetThreshold * peak) {
        throw FitQualityError("no plateau: intensity still rising at the end of the trace");
    }

    const double level = kOnsetThreshold * peak;
    const std::size_t ip = static_cast<std::size_t>(peak_it - rate.y.begin());

    std::size_t lo = ip;
    while (lo > 0 && rate.y[lo - 1] > level) --lo;
    const double t_on = lo > 0 ? crossing(rate.t[lo - 1], rate.y[lo - 1], rate.t[lo], rate.y[lo], level)
                               : rate.t.front();

    std::size_t hi = ip;
    while (hi + 1 < rate.size() && rate.y[hi + 1] > level) ++hi;
    const double t_off = hi + 1 < rate.size()
                             ? crossing(rate.t[hi + 1], rate.y[hi + 1], rate.t[hi], rate.y[hi], level)
                             : rate.t.back();

    // A raised cosine reaches `level` a fraction c of tw after onset and before offset.
    const double c = std::acos(1.0 - 2.0 * kOnsetThreshold) / kTwoPi;
    InjectionProfile out;
    out.tw = (t_off - t_on) / (1.0 - 2.0 * c);
    out.t0 = std::max(0.0, t_on - c * out.tw);

    double plateau = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) plateau += meas.y[i];
    out.amplitude = plateau / static_cast<double>(tail);

    if (!(out.tw > 0.0)) throw FitQualityError("degenerate injection: zero duration");
    if (!(out.amplitude > 0.0)) throw FitQualityError("degenerate injection: non-positive plateau");
    return refine(meas, out);
}

}  // namespace loopchan

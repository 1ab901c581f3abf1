#include "loopchan/derivative.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> moving_average(std::span<const double> y, std::size_t window) {
    if (window == 0) throw ParameterError("smoothing window must be at least one sample");
    const std::size_t n = y.size();
    const std::size_t half = window / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        double sum = 0.0;
        for (std::size_t j = i - h; j <= i + h; ++j) sum += y[j];
        out[i] = sum / static_cast<double>(2 * h + 1);
    }
    return out;
}

Trace differentiate(const Trace& meas, std::size_t smooth_window) {
    meas.validate();
    if (smooth_window == 0) throw ParameterError("smoothing window must be at least one sample");
    const std::size_t n = meas.size();
    if (n < 2 * smooth_window || n < 3) {
        throw DataError("trace too short to differentiate: " + std::to_string(n) + " samples, need " +
                        std::to_string(std::max<std::size_t>(2 * smooth_window, 3)));
    }
    const std::vector<double> s = moving_average(meas.y, smooth_window);
    const double dt = meas.dt();

    Trace out;
    out.unit_label = meas.unit_label.empty() ? std::string{} : meas.unit_label + "/s";
    out.t.assign(meas.t.begin() + 1, meas.t.end() - 1);
    out.y.resize(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) out.y[i - 1] = (s[i + 1] - s[i - 1]) / (2.0 * dt);
    return out;
}

double noise_floor_mad(std::span<const double> y) {
    if (y.size() < 3) return 0.0;
    std::vector<double> diff(y.size() - 1);
    for (std::size_t i = 0; i + 1 < y.size(); ++i) diff[i] = y[i + 1] - y[i];
    const double m = median(diff);
    for (double& d : diff) d = std::abs(d - m);
    return 1.4826 * median(std::move(diff)) / std::sqrt(2.0);
}

}  // namespace loopchan

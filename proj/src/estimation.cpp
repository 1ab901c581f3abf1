#include "loopchan/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

constexpr std::size_t kDim = 5;
constexpr std::size_t kChannelDim = 4;
constexpr double kFractionCeiling = 1.0 - 1e-9;
constexpr double kJacobianRelStep = 1e-6;
constexpr double kCostRelTol = 1e-12;
constexpr double kStepRelTol = 1e-10;
constexpr double kMaxDamping = 1e16;

using Vec = Eigen::Matrix<double, kDim, 1>;

struct Box {
    Vec lo;
    Vec hi;

    explicit Box(const FitBounds& b) {
        lo << std::log(b.d_eff.lo), b.v_eff.lo, std::log(b.l_eff.lo), b.fraction.lo, std::log(b.scale.lo);
        hi << std::log(b.d_eff.hi), b.v_eff.hi, std::log(b.l_eff.hi), std::min(b.fraction.hi, kFractionCeiling),
            std::log(b.scale.hi);
    }

    Vec clamp(Vec z) const { return z.cwiseMax(lo).cwiseMin(hi); }
};

Vec to_coords(const FitParams& p) {
    Vec z;
    z << std::log(p.channel.d_eff), p.channel.v_eff, std::log(p.channel.l_eff), p.channel.d_rx / p.channel.l_eff,
        std::log(p.scale);
    return z;
}

ChannelParams channel_from(const Vec& z) {
    ChannelParams c;
    c.d_eff = std::exp(z[0]);
    c.v_eff = z[1];
    c.l_eff = std::exp(z[2]);
    c.d_rx = z[3] * c.l_eff;
    if (c.d_rx >= c.l_eff) c.d_rx = std::nextafter(c.l_eff, 0.0);
    return c;
}

// Holds the data-side derivative and evaluates the unit-scale model derivative.
class Objective {
public:
    explicit Objective(const FitProblem& prob)
        : prob_(prob),
          target_(differentiate(prob.measured, prob.smooth_window)),
          grid_(prob.measured.grid()),
          target_vec_(Eigen::Map<const Eigen::VectorXd>(target_.y.data(), static_cast<Eigen::Index>(target_.y.size()))) {}

    const Eigen::VectorXd& target() const { return target_vec_; }
    const Trace& target_trace() const { return target_; }

    /// Model derivative at unit scale, on the target grid.
    Eigen::VectorXd unit_model(const ChannelParams& c) const {
        const Trace intensity = predict({c, prob_.injection, 1.0}, grid_, GridCheck::relaxed);
        const Trace d = differentiate(intensity, prob_.smooth_window);
        return Eigen::Map<const Eigen::VectorXd>(d.y.data(), static_cast<Eigen::Index>(d.y.size()));
    }

    /// Least-squares scale for a unit-scale model.
    double best_scale(const Eigen::VectorXd& m) const {
        const double mm = m.squaredNorm();
        return mm > 0.0 ? m.dot(target_vec_) / mm : 0.0;
    }

private:
    const FitProblem& prob_;
    Trace target_;
    TimeGrid grid_;
    Eigen::VectorXd target_vec_;
};

struct Evaluation {
    Eigen::VectorXd unit;      // unit-scale model
    Eigen::VectorXd residual;  // scale * unit - target
    double cost = 0.0;         // 0.5 |residual|^2
    bool finite = false;
};

Evaluation evaluate(const Objective& obj, const Vec& z) {
    Evaluation e;
    e.unit = obj.unit_model(channel_from(z));
    e.residual = std::exp(z[4]) * e.unit - obj.target();
    e.cost = 0.5 * e.residual.squaredNorm();
    e.finite = std::isfinite(e.cost);
    return e;
}

struct LocalSolve {
    Vec z;
    double cost = std::numeric_limits<double>::infinity();
    StartDiagnostics diag;
};

LocalSolve levenberg_marquardt(const Objective& obj, const Box& box, Vec z, std::size_t max_iter,
                               std::size_t index) {
    LocalSolve out;
    out.diag.index = index;
    z = box.clamp(z);
    Evaluation cur = evaluate(obj, z);
    if (!cur.finite) {
        out.diag.message = "non-finite objective at start";
        out.z = z;
        return out;
    }
    out.diag.cost_history.push_back(cur.cost);
    const double target_energy = 0.5 * obj.target().squaredNorm();
    const auto m = cur.residual.size();
    double damping = 1e-3;

    Eigen::Matrix<double, Eigen::Dynamic, kDim> jac(m, static_cast<Eigen::Index>(kDim));
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        if (cur.cost <= 1e-28 * target_energy) {
            out.diag.converged = true;
            out.diag.message = "exact fit";
            break;
        }

        const double scale = std::exp(z[4]);
        for (std::size_t j = 0; j < kChannelDim; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double span = box.hi[jj] - box.lo[jj];
            double h = kJacobianRelStep * std::max(std::abs(z[jj]), 1e-3 * span);
            if (z[jj] + h > box.hi[jj]) h = -h;
            Vec zh = z;
            zh[jj] += h;
            const Eigen::VectorXd unit_h = obj.unit_model(channel_from(zh));
            jac.col(jj) = scale * (unit_h - cur.unit) / h;
        }
        jac.col(kDim - 1) = scale * cur.unit;  // d residual / d ln(scale), exact

        const Vec grad = jac.transpose() * cur.residual;
        const Eigen::Matrix<double, kDim, kDim> normal = jac.transpose() * jac;

        std::array<bool, kDim> free{};
        std::vector<Eigen::Index> idx;
        for (std::size_t j = 0; j < kDim; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const bool pinned_lo = z[jj] <= box.lo[jj] && grad[jj] > 0.0;
            const bool pinned_hi = z[jj] >= box.hi[jj] && grad[jj] < 0.0;
            free[j] = !(pinned_lo || pinned_hi);
            if (free[j]) idx.push_back(jj);
        }
        if (idx.empty()) {
            out.diag.converged = true;
            out.diag.message = "all parameters pinned at bounds";
            break;
        }

        const auto nf = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd a(nf, nf);
        Eigen::VectorXd b(nf);
        for (Eigen::Index r = 0; r < nf; ++r) {
            b[r] = -grad[idx[static_cast<std::size_t>(r)]];
            for (Eigen::Index c = 0; c < nf; ++c) {
                a(r, c) = normal(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
            }
        }
        const double diag_floor = 1e-12 * std::max(a.diagonal().maxCoeff(), std::numeric_limits<double>::min());

        bool accepted = false;
        bool stalled = false;
        while (damping <= kMaxDamping) {
            Eigen::MatrixXd damped = a;
            for (Eigen::Index r = 0; r < nf; ++r) damped(r, r) += damping * std::max(a(r, r), diag_floor);
            const Eigen::VectorXd step_f = damped.ldlt().solve(b);
            Vec step = Vec::Zero();
            for (Eigen::Index r = 0; r < nf; ++r) step[idx[static_cast<std::size_t>(r)]] = step_f[r];

            const Vec z_new = box.clamp(z + step);
            const double moved = (z_new - z).cwiseAbs().maxCoeff();
            if (!(moved > kStepRelTol * (z.cwiseAbs().maxCoeff() + kStepRelTol))) {
                stalled = true;
                break;
            }
            Evaluation trial = evaluate(obj, z_new);
            if (trial.finite && trial.cost < cur.cost) {
                const double decrease = cur.cost - trial.cost;
                z = z_new;
                cur = std::move(trial);
                out.diag.cost_history.push_back(cur.cost);
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                if (decrease <= kCostRelTol * cur.cost) stalled = true;
                break;
            }
            damping *= 4.0;
        }
        if (stalled || !accepted) {
            out.diag.converged = true;
            out.diag.message = accepted ? "relative decrease below tolerance" : "no decrease possible";
            ++iter;
            break;
        }
    }
    if (!out.diag.converged) out.diag.message = "iteration limit reached";

    out.z = z;
    out.cost = cur.cost;
    out.diag.n_iter = iter;
    out.diag.residual_rms = std::sqrt(2.0 * cur.cost / static_cast<double>(m));
    return out;
}

// n points of a Latin hypercube over the first four box coordinates.
std::vector<Vec> latin_hypercube(const Box& box, std::size_t n, std::uint64_t seed) {
    boost::random::mt19937_64 rng(seed);
    boost::random::uniform_01<double> unif;
    std::vector<Vec> pts(n, Vec::Zero());
    std::vector<std::size_t> perm(n);
    for (std::size_t d = 0; d < kChannelDim; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(perm[i - 1], perm[pick(rng)]);
        }
        const auto dd = static_cast<Eigen::Index>(d);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(perm[i]) + unif(rng)) / static_cast<double>(n);
            pts[i][dd] = box.lo[dd] + u * (box.hi[dd] - box.lo[dd]);
        }
    }
    return pts;
}

// The smoothed derivative is correlated sample to sample, so its own
// first differences underestimate the noise. Take the floor from the raw
// trace and push it through the operator's weights instead.
void check_signal(const Trace& target, const FitProblem& prob) {
    double peak = 0.0;
    for (double v : target.y) peak = std::max(peak, std::abs(v));
    const std::size_t w = prob.smooth_window;
    const std::size_t n = 2 * w + 3;
    Trace unit = Trace::on_grid({0.0, prob.measured.dt(), n}, std::vector<double>(n, 0.0));
    unit.y[n / 2] = 1.0;
    double gain2 = 0.0;
    for (double v : differentiate(unit, w).y) gain2 += v * v;
    const double noise = noise_floor_mad(prob.measured.y) * std::sqrt(gain2);
    if (!(peak > 0.0) || peak <= 3.0 * noise) {
        throw DataError("measured derivative shows no signal above 3x its noise floor");
    }
}

BoundStatus status_of(double z, double lo, double hi) {
    const double tol = 1e-9 * (hi - lo);
    if (z <= lo + tol) return BoundStatus::at_lower;
    if (z >= hi - tol) return BoundStatus::at_upper;
    return BoundStatus::interior;
}

ResidualSummary summarize(const Trace& r) {
    ResidualSummary s;
    double sq = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        sq += r.y[i] * r.y[i];
        if (std::abs(r.y[i]) > s.max_abs) {
            s.max_abs = std::abs(r.y[i]);
            s.t_of_max = r.t[i];
        }
    }
    s.rms = std::sqrt(sq / static_cast<double>(r.size()));
    return s;
}

}  // namespace

void FitBounds::validate() const {
    auto check = [](const Interval& iv, const char* name, bool positive) {
        if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi)) {
            throw ParameterError(std::string("bounds for ") + name + " need lo < hi");
        }
        if (positive && !(iv.lo > 0.0)) throw ParameterError(std::string("bounds for ") + name + " must be positive");
    };
    check(d_eff, "d_eff", true);
    check(v_eff, "v_eff", true);
    check(l_eff, "l_eff", true);
    check(fraction, "fraction", false);
    check(scale, "scale", true);
    if (fraction.lo < 0.0 || fraction.hi > 1.0) throw ParameterError("fraction bounds must lie in [0, 1]");
}

void FitProblem::validate() const {
    measured.validate();
    injection.validate();
    bounds.validate();
    if (n_starts == 0) throw ParameterError("n_starts must be at least 1");
    if (smooth_window == 0) throw ParameterError("smooth_window must be at least 1");
    if (max_iter == 0) throw ParameterError("max_iter must be at least 1");
    if (init) {
        init->channel.validate();
        if (!(init->scale > 0.0)) throw ParameterError("initial scale must be positive");
    }
}

FitResult fit_channel(const FitProblem& prob) {
    prob.validate();
    if (prob.measured.t.back() < prob.injection.t0 + 2.0 * prob.injection.tw) {
        throw DataError("measured trace must cover at least t0 + 2 tw");
    }
    Objective obj(prob);
    check_signal(obj.target_trace(), prob);

    const Box box(prob.bounds);
    std::vector<Vec> starts;
    std::size_t lhs_count = prob.n_starts;
    if (prob.init) {
        starts.push_back(to_coords(*prob.init));
        --lhs_count;
    }
    for (const Vec& p : latin_hypercube(box, lhs_count, prob.seed)) {
        Vec z = p;
        const Eigen::VectorXd unit = obj.unit_model(channel_from(box.clamp(z)));
        const double s = obj.best_scale(unit);
        z[4] = s > 0.0 && std::isfinite(s) ? std::log(s) : 0.0;
        starts.push_back(z);
    }

    FitResult result;
    std::optional<LocalSolve> best;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        LocalSolve solve = levenberg_marquardt(obj, box, starts[i], prob.max_iter, i);
        result.starts.push_back(solve.diag);
        if (!solve.diag.converged) continue;
        if (!best || solve.cost < best->cost) best = std::move(solve);
    }
    if (!best) {
        std::ostringstream diag;
        for (const auto& s : result.starts) {
            diag << "start " << s.index << ": " << s.message << ", " << s.n_iter << " iterations, rms "
                 << s.residual_rms << '\n';
        }
        throw ConvergenceError("no start converged", diag.str());
    }

    result.channel = channel_from(best->z);
    result.scale = std::exp(best->z[4]);
    result.residual_rms = best->diag.residual_rms;
    result.n_iter = best->diag.n_iter;
    result.converged = true;
    result.start_index = best->diag.index;
    for (std::size_t j = 0; j < kDim; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        result.bounds_status[j] = status_of(best->z[jj], box.lo[jj], box.hi[jj]);
    }
    return result;
}

double derivative_residual_rms(const FitProblem& prob, const FitParams& params) {
    Objective obj(prob);
    const Eigen::VectorXd r = params.scale * obj.unit_model(params.channel) - obj.target();
    return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

ResidualReport residual_report(const FitResult& res, const FitProblem& prob) {
    const ForwardModel model = res.model(prob.injection);
    const TimeGrid grid = prob.measured.grid();

    const Trace predicted = predict(model, grid, GridCheck::relaxed);
    const Trace model_d = differentiate(predicted, prob.smooth_window);
    const Trace meas_d = differentiate(prob.measured, prob.smooth_window);

    ResidualReport rep;
    rep.derivative = model_d;
    for (std::size_t i = 0; i < model_d.size(); ++i) rep.derivative.y[i] = model_d.y[i] - meas_d.y[i];
    rep.intensity = predicted;
    for (std::size_t i = 0; i < predicted.size(); ++i) rep.intensity.y[i] = predicted.y[i] - prob.measured.y[i];
    rep.derivative_summary = summarize(rep.derivative);
    rep.intensity_summary = summarize(rep.intensity);
    return rep;
}

const char* to_string(BoundStatus s) {
    switch (s) {
        case BoundStatus::interior: return "interior";
        case BoundStatus::at_lower: return "lower";
        case BoundStatus::at_upper: return "upper";
    }
    return "interior";
}

}  // namespace loopchan

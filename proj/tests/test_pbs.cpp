#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "loopchan/error.hpp"
#include "loopchan/pbs.hpp"
#include "loopchan/rng.hpp"

using namespace loopchan;

namespace {

// Reference xoshiro256** step written from the published algorithm.
std::uint64_t ref_next(std::uint64_t s[4]) {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

const ChannelParams kLoop{taylor_aris({5e-9, 1e-4, 5e-5}), 5e-5, 1e-3, 0.0};

double max_tv(const SimulationResult& sim, const ChannelParams& p, double t_min) {
    double worst = 0.0;
    for (const auto& f : sim.frames) {
        if (f.t < t_min) continue;
        worst = std::max(worst, total_variation(f.density, bin_averaged_wrapped(p, f.t, sim.n_bins), sim.bin_width()));
    }
    return worst;
}

}  // namespace

TEST_CASE("xoshiro256** matches the reference recurrence") {
    Xoshiro256 g(Xoshiro256::State{1, 2, 3, 4});
    std::uint64_t s[4] = {1, 2, 3, 4};
    CHECK(g() == 11520u);
    ref_next(s);
    for (int i = 0; i < 1000; ++i) CHECK(g() == ref_next(s));
}

TEST_CASE("particle streams are reproducible and distinct") {
    Xoshiro256 a(7, 0), b(7, 0), c(7, 1), d(8, 0);
    CHECK(a == b);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}

TEST_CASE("ziggurat samples are standard normal") {
    ZigguratNormal normal;
    Xoshiro256 eng(3, 0);
    const std::size_t n = 2000000;
    std::vector<double> z(n);
    for (auto& v : z) v = normal(eng);

    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : z) {
        m2 += (v - mean) * (v - mean);
        m4 += std::pow(v - mean, 4);
    }
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(m4 / (m2 * m2) == doctest::Approx(3.0).epsilon(0.01));

    std::sort(z.begin(), z.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; i += 97) {
        const double f = phi(z[i]);
        ks = std::max({ks, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
    }
    CHECK(ks < 1.63 / std::sqrt(double(n)));  // 1% KS critical value

    // tail beyond the base layer is sampled separately
    const double cut = 3.6;
    const auto tail = std::count_if(z.begin(), z.end(), [&](double v) { return std::abs(v) > cut; });
    const double expected = 2.0 * phi(-cut) * n;
    CHECK(std::abs(double(tail) - expected) < 5.0 * std::sqrt(expected));
}

TEST_CASE("wrap position") {
    CHECK(wrap_position(0.5, 1.0) == 0.5);
    CHECK(wrap_position(1.0, 1.0) == 0.0);
    CHECK(wrap_position(1.25, 1.0) == doctest::Approx(0.25));
    CHECK(wrap_position(7.25, 1.0) == doctest::Approx(0.25));
    CHECK(wrap_position(-0.25, 1.0) == doctest::Approx(0.75));
    CHECK(wrap_position(-5.25, 1.0) == doctest::Approx(0.75));
    const double tiny = wrap_position(-1e-20, 1.0);
    CHECK(tiny >= 0.0);
    CHECK(tiny < 1.0);
}

TEST_CASE("step without transport or with a full-loop drift leaves positions unchanged") {
    ParticleEnsemble e = ParticleEnsemble::released_at(10, 0.3e-3, 1e-3, 1);
    for (double& x : e.positions) x = 0.1e-3 * (&x - e.positions.data());
    const auto start = e.positions;
    auto still = step(e, {0.0, 0.0, 1e-3, 0.0}, 0.1);
    CHECK(still.positions == start);
    CHECK(still.t == doctest::Approx(0.1));

    auto wrapped = step(e, {0.0, 1e-3, 1e-3, 0.0}, 1.0);
    for (std::size_t i = 0; i < start.size(); ++i) CHECK(wrapped.positions[i] == doctest::Approx(start[i]).epsilon(1e-12));
}

TEST_CASE("displacement variance grows as 2 d t") {
    const ChannelParams p{1e-9, 2e-5, 1.0, 0.0};
    const std::size_t n = 100000;
    ParticleEnsemble e = ParticleEnsemble::released_at(n, 0.5, p.l_eff, 9);
    const double dt = 0.05;
    const int steps = 40;
    for (int s = 0; s < steps; ++s) e = step(std::move(e), p, dt);
    const double t = dt * steps;
    double mean = 0.0;
    for (double x : e.positions) mean += x - 0.5;
    mean /= n;
    double var = 0.0;
    for (double x : e.positions) var += (x - 0.5 - mean) * (x - 0.5 - mean);
    var /= n - 1;
    const double expected = 2.0 * p.d_eff * t;
    CHECK(std::abs(var - expected) <= 3.0 * expected * std::sqrt(2.0 / (n - 1)));
    CHECK(mean == doctest::Approx(p.v_eff * t).epsilon(0.01));
}

TEST_CASE("simulation conserves particles and stays on the loop") {
    SimConfig cfg;
    cfg.n_particles = 5000;
    cfg.dt = 0.05;
    cfg.t_end = 10.0;
    cfg.n_bins = 50;
    const auto sim = simulate(cfg, kLoop, 0.2e-3);
    REQUIRE(sim.frames.size() == cfg.n_steps() / cfg.frame_stride() + 1);
    CHECK(sim.frames.front().t == 0.0);
    CHECK(sim.frames.back().t == doctest::Approx(10.0));
    for (const auto& f : sim.frames) {
        double mass = 0.0;
        for (double d : f.density) mass += d * sim.bin_width();
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
    // release frame: everything in the release bin
    const auto& f0 = sim.frames.front().density;
    CHECK(f0[10] == doctest::Approx(1.0 / sim.bin_width()));
    CHECK(std::count(f0.begin(), f0.end(), 0.0) == 49);
}

TEST_CASE("frame stride") {
    SimConfig cfg;
    CHECK(cfg.n_steps() == 60000);
    CHECK(cfg.frame_stride() == 100);
    cfg.record_every = 7;
    CHECK(cfg.frame_stride() == 7);
    cfg.t_end = 0.1;
    cfg.record_every = 0;
    CHECK(cfg.frame_stride() == 1);
}

TEST_CASE("simulation is deterministic and independent of threads and kernel") {
    SimConfig cfg;
    cfg.n_particles = 1003;
    cfg.dt = 0.01;
    cfg.t_end = 2.0;
    cfg.seed = 99;
    const auto a = simulate(cfg, kLoop, 0.0);
    const auto b = simulate(cfg, kLoop, 0.0);
    cfg.threads = 3;
    const auto c = simulate(cfg, kLoop, 0.0);
    set_simd_kernel(false);
    cfg.threads = 1;
    const auto d = simulate(cfg, kLoop, 0.0);
    set_simd_kernel(true);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        CHECK(a.frames[i].density == b.frames[i].density);
        CHECK(a.frames[i].density == c.frames[i].density);
        CHECK(a.frames[i].density == d.frames[i].density);
    }
    cfg.seed = 100;
    const auto e = simulate(cfg, kLoop, 0.0);
    CHECK(e.frames.back().density != a.frames.back().density);
}

TEST_CASE("vector and scalar kernels move particles identically") {
    ParticleEnsemble e = ParticleEnsemble::released_at(77, 0.5e-3, 1e-3, 5);
    set_simd_kernel(false);
    auto scalar = e;
    for (int s = 0; s < 200; ++s) scalar = step(std::move(scalar), kLoop, 1e-3);
    set_simd_kernel(true);
    auto simd = e;
    for (int s = 0; s < 200; ++s) simd = step(std::move(simd), kLoop, 1e-3);
    CHECK(scalar.positions == simd.positions);
    CHECK(scalar.streams == simd.streams);
}

TEST_CASE("zero diffusion translates a delta") {
    SimConfig cfg;
    cfg.n_particles = 100;
    cfg.dt = 0.1;
    cfg.t_end = 30.0;
    cfg.n_bins = 100;
    cfg.record_every = 10;
    const ChannelParams p{0.0, 5e-5, 1e-3, 0.0};
    const auto sim = simulate(cfg, p, 0.5e-5);  // middle of the first bin
    for (const auto& f : sim.frames) {
        const auto occupied = std::count_if(f.density.begin(), f.density.end(), [](double d) { return d > 0.0; });
        CHECK(occupied == 1);
        const auto bin = std::max_element(f.density.begin(), f.density.end()) - f.density.begin();
        const double expect = wrap_position(0.5e-5 + p.v_eff * f.t, p.l_eff);
        CHECK(bin == static_cast<long>(expect / sim.bin_width()));
    }
}

TEST_CASE("histogram approaches the analytic density as particles grow") {
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 2.0;
    cfg.record_every = 50;
    cfg.n_particles = 10000;
    const double tv_small = max_tv(simulate(cfg, kLoop, 0.0), kLoop, 0.5);
    cfg.n_particles = 1000000;
    const double tv_large = max_tv(simulate(cfg, kLoop, 0.0), kLoop, 0.5);
    CHECK(tv_large < tv_small);
    CHECK(tv_large < 0.02);
}

TEST_CASE("halving the time step does not bias the histogram") {
    SimConfig cfg;
    cfg.n_particles = 100000;
    cfg.t_end = 4.0;
    cfg.dt = 0.02;
    cfg.record_every = 50;
    const double coarse = max_tv(simulate(cfg, kLoop, 0.0), kLoop, 0.5);
    cfg.dt = 0.01;
    cfg.record_every = 100;
    const double fine = max_tv(simulate(cfg, kLoop, 0.0), kLoop, 0.5);
    // Monte Carlo floor at N = 1e5, 100 bins is about 0.013
    CHECK(std::abs(coarse - fine) < 0.013);
    CHECK(coarse < 0.03);
    CHECK(fine < 0.03);
}

TEST_CASE("long runs are uniform within multinomial bands") {
    SimConfig cfg;
    cfg.n_particles = 100000;
    cfg.dt = 1.0;
    cfg.t_end = 200.0;
    cfg.record_every = 200;
    const auto sim = simulate(cfg, kLoop, 0.0);
    const auto& d = sim.frames.back().density;
    const double p = 1.0 / cfg.n_bins;
    const double sd = std::sqrt(cfg.n_particles * p * (1.0 - p));
    int outside3 = 0;
    for (double v : d) {
        const double count = v * sim.bin_width() * cfg.n_particles;
        const double z = std::abs(count - cfg.n_particles * p) / sd;
        CHECK(z < 5.0);
        if (z > 3.0) ++outside3;
    }
    CHECK(outside3 <= 2);
}

TEST_CASE("receiver trace") {
    SimConfig cfg;
    cfg.n_particles = 100000;
    cfg.dt = 0.01;
    cfg.t_end = 20.0;
    cfg.record_every = 10;
    const ChannelParams far{kLoop.d_eff, kLoop.v_eff, kLoop.l_eff, 0.84e-3};
    const auto sim = simulate(cfg, far, 0.0);

    SUBCASE("almost the whole loop sees the conserved mean") {
        const Trace tr = receiver_trace(sim, 0.5e-3, far.l_eff - sim.bin_width());
        for (std::size_t i = 5; i < tr.size(); ++i) CHECK(tr.y[i] == doctest::Approx(1000.0).epsilon(0.02));
    }
    SUBCASE("release point is densest early on") {
        for (std::size_t f = 1; f <= 3; ++f) {
            const double at_release = receiver_trace(sim, 0.0, 3 * sim.bin_width()).y[f];
            for (double x : {0.1e-3, 0.3e-3, 0.5e-3, 0.84e-3}) {
                CHECK(receiver_trace(sim, x, 3 * sim.bin_width()).y[f] < at_release);
            }
        }
    }
    SUBCASE("far receiver sees a pre-peak, then the main peak near 15 s") {
        const Trace tr = receiver_trace(sim, 0.84e-3, 3 * sim.bin_width());
        auto mean_over = [&](double a, double b) {
            double s = 0.0;
            int n = 0;
            for (std::size_t i = 0; i < tr.size(); ++i) {
                if (tr.t[i] >= a && tr.t[i] <= b) {
                    s += tr.y[i];
                    ++n;
                }
            }
            return s / n;
        };
        CHECK(mean_over(1.25, 2.25) > 1.2 * mean_over(4.5, 5.5));
        std::size_t arg = 0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            if (tr.t[i] >= 8.0 && (arg == 0 || tr.y[i] > tr.y[arg])) arg = i;
        }
        CHECK(tr.t[arg] == doctest::Approx(15.0).epsilon(0.1));
    }
    SUBCASE("window checks") {
        CHECK_THROWS_AS(receiver_trace(sim, 0.5e-3, far.l_eff), ParameterError);
        CHECK_THROWS_AS(receiver_trace(sim, 0.5e-3, 0.5 * sim.bin_width()), ParameterError);
    }
}

TEST_CASE("bin-averaged reference and total variation") {
    const auto ref = bin_averaged_wrapped(kLoop, 3.0, 100, 0.25e-3);
    double mass = 0.0;
    for (double d : ref) mass += d * 1e-5;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(total_variation(ref, ref, 1e-5) == 0.0);
    std::vector<double> spike(100, 0.0);
    spike[0] = 1e5;
    std::vector<double> other(100, 0.0);
    other[1] = 1e5;
    CHECK(total_variation(spike, other, 1e-5) == doctest::Approx(1.0));
    CHECK_THROWS_AS(total_variation(spike, std::vector<double>(3), 1e-5), ParameterError);
    CHECK_THROWS_AS(bin_averaged_wrapped(kLoop, 3.0, 100, 0.0, 3), ParameterError);
}

TEST_CASE("configuration and argument checks") {
    SimConfig cfg;
    cfg.n_particles = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.t_end = 1e-4;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.n_bins = 1;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.threads = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);

    CHECK_NOTHROW(validate_transport({0.0, 0.0, 1e-3, 0.0}));
    CHECK_THROWS_AS(validate_transport({-1e-9, 0.0, 1e-3, 0.0}), ParameterError);
    CHECK_THROWS_AS(simulate({}, kLoop, 1e-3), ParameterError);
    CHECK_THROWS_AS(ParticleEnsemble::released_at(0, 0.0, 1e-3, 1), ParameterError);
    auto e = ParticleEnsemble::released_at(4, 0.0, 1e-3, 1);
    CHECK_THROWS_AS(step(e, kLoop, 0.0), ParameterError);
    e.streams.pop_back();
    CHECK_THROWS_AS(step(e, kLoop, 0.1), ParameterError);
    CHECK_THROWS_AS(histogram_density(e, 1e-3, 1), ParameterError);
}

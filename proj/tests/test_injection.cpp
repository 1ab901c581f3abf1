#include "doctest.h"

#include <algorithm>
#include <cmath>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "loopchan/error.hpp"
#include "loopchan/injection.hpp"

using namespace loopchan;

TEST_CASE("raised cosine shape") {
    const InjectionProfile p{2.0, 4.0, 3.0};
    CHECK(raised_cosine(p, 2.0) == doctest::Approx(0.0));
    CHECK(raised_cosine(p, 4.0) == doctest::Approx(2.0 * 3.0 / 4.0));
    CHECK(raised_cosine(p, 1.0) == 0.0);
    CHECK(raised_cosine(p, 6.5) == 0.0);

    // trapezoid integral over the support
    const int n = 20000;
    const double h = p.tw / n;
    double s = 0.5 * (raised_cosine(p, p.t0) + raised_cosine(p, p.t_end()));
    for (int i = 1; i < n; ++i) s += raised_cosine(p, p.t0 + i * h);
    CHECK(s * h == doctest::Approx(p.amplitude).epsilon(1e-6));
}

TEST_CASE("raised cosine derivative matches finite differences") {
    const InjectionProfile p{1.0, 5.0, 2.0};
    const double h = 1e-6;
    for (double t = 0.0; t <= 7.0; t += 0.1) {
        const double fd = (raised_cosine(p, t + h) - raised_cosine(p, t - h)) / (2.0 * h);
        CHECK(raised_cosine_derivative(p, t) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
    CHECK(raised_cosine_derivative(p, p.t0) == doctest::Approx(0.0));
    CHECK(raised_cosine_derivative(p, p.t_end()) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("cumulative intensity") {
    const InjectionProfile p{2.0, 4.0, 1.5};
    CHECK(cumulative_intensity(p, 0.0) == 0.0);
    CHECK(cumulative_intensity(p, 2.0) == 0.0);
    CHECK(cumulative_intensity(p, 4.0) == doctest::Approx(0.75));
    CHECK(cumulative_intensity(p, 6.0) == doctest::Approx(1.5));
    CHECK(cumulative_intensity(p, 100.0) == 1.5);

    // its derivative is the release rate on grids with dt <= tw / 50
    const TimeGrid g{0.0, p.tw / 50.0, 400};
    const Trace c = cumulative_intensity(p, g);
    for (std::size_t i = 1; i + 1 < g.n; ++i) {
        const double fd = (c.y[i + 1] - c.y[i - 1]) / (2.0 * g.dt);
        CHECK(std::abs(fd - raised_cosine(p, g.at(i))) <= 5e-3 * 2.0 * p.amplitude / p.tw);
    }
}

TEST_CASE("injection profile validation") {
    CHECK_NOTHROW((InjectionProfile{0.0, 1.0, 1.0}).validate());
    CHECK_THROWS_AS((InjectionProfile{-1.0, 1.0, 1.0}).validate(), ParameterError);
    CHECK_THROWS_AS((InjectionProfile{0.0, 0.0, 1.0}).validate(), ParameterError);
    CHECK_THROWS_AS((InjectionProfile{0.0, 1.0, 0.0}).validate(), ParameterError);
    CHECK_THROWS_AS(cumulative_intensity(InjectionProfile{0.0, -1.0, 1.0}, TimeGrid{0.0, 0.1, 10}), ParameterError);
}

TEST_CASE("extract injection from a noiseless trace") {
    for (const InjectionProfile truth : {InjectionProfile{2.0, 4.0, 1.0}, InjectionProfile{0.7, 2.5, 40.0},
                                         InjectionProfile{5.0, 8.0, 0.02}}) {
        for (double dt : {0.05, 0.1, 0.2}) {
            const TimeGrid g{0.0, dt, static_cast<std::size_t>((truth.t_end() + 12.0) / dt)};
            const InjectionProfile est = extract_injection(cumulative_intensity(truth, g));
            CHECK(std::abs(est.t0 - truth.t0) <= dt);
            CHECK(std::abs(est.tw - truth.tw) <= dt);
            CHECK(est.amplitude == doctest::Approx(truth.amplitude).epsilon(1e-3));
        }
    }
}

TEST_CASE("extract injection with 1% noise") {
    const InjectionProfile truth{2.0, 4.0, 1.0};
    const Trace clean = cumulative_intensity(truth, TimeGrid{0.0, 0.1, 201});
    std::vector<double> e0, ew;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        boost::random::mt19937_64 rng(seed);
        boost::random::normal_distribution<double> noise(0.0, 0.01);
        Trace tr = clean;
        for (double& y : tr.y) y += noise(rng);
        const auto est = extract_injection(tr);
        e0.push_back(std::abs(est.t0 / truth.t0 - 1.0));
        ew.push_back(std::abs(est.tw / truth.tw - 1.0));
    }
    std::sort(e0.begin(), e0.end());
    std::sort(ew.begin(), ew.end());
    CHECK(e0[89] <= 0.1);
    CHECK(ew[89] <= 0.1);
}

TEST_CASE("extract injection rejects unusable traces") {
    const TimeGrid g{0.0, 0.1, 100};
    CHECK_THROWS_AS(extract_injection(Trace::on_grid(g, std::vector<double>(100, 3.0))), FitQualityError);

    std::vector<double> falling(100);
    for (std::size_t i = 0; i < falling.size(); ++i) falling[i] = -0.1 * static_cast<double>(i);
    CHECK_THROWS_AS(extract_injection(Trace::on_grid(g, falling)), FitQualityError);

    // still rising at the end: no plateau
    const Trace rising = cumulative_intensity({2.0, 20.0, 1.0}, g);
    CHECK_THROWS_AS(extract_injection(rising), FitQualityError);

    CHECK_THROWS_AS(extract_injection(Trace::on_grid({0.0, 0.1, 8}, std::vector<double>(8, 1.0))), DataError);
    CHECK_THROWS_AS(extract_injection(Trace::on_grid(g, std::vector<double>(100, 1.0)), 0), ParameterError);
}

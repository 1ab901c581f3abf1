#include "doctest.h"

#include <cmath>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "loopchan/derivative.hpp"
#include "loopchan/error.hpp"
#include "loopchan/injection.hpp"

using namespace loopchan;

TEST_CASE("moving average") {
    const std::vector<double> y{1, 2, 3, 10, 5, 6, 7};
    const auto m = moving_average(y, 3);
    CHECK(m[0] == 1.0);  // window shrinks to one sample at the ends
    CHECK(m[1] == doctest::Approx(2.0));
    CHECK(m[3] == doctest::Approx(6.0));
    CHECK(m[6] == 7.0);
    CHECK(moving_average(y, 1) == y);
    CHECK_THROWS_AS(moving_average(y, 0), ParameterError);

    // symmetric shrinking keeps a linear ramp unbiased everywhere
    std::vector<double> ramp(20);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 3.0 * static_cast<double>(i) - 1.0;
    const auto r = moving_average(ramp, 7);
    for (std::size_t i = 0; i < ramp.size(); ++i) CHECK(r[i] == doctest::Approx(ramp[i]));
}

TEST_CASE("derivative of a ramp is its slope") {
    const TimeGrid g{0.0, 0.25, 40};
    std::vector<double> y(g.n);
    for (std::size_t i = 0; i < g.n; ++i) y[i] = 2.5 * g.at(i) + 4.0;
    const Trace d = differentiate(Trace::on_grid(g, y));
    CHECK(d.size() == g.n - 2);
    CHECK(d.t.front() == doctest::Approx(g.at(1)));
    CHECK(d.t.back() == doctest::Approx(g.at(g.n - 2)));
    for (double v : d.y) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("derivative of a constant is zero") {
    const Trace d = differentiate(Trace::on_grid({0.0, 0.1, 30}, std::vector<double>(30, 7.0)));
    for (double v : d.y) CHECK(v == 0.0);
}

TEST_CASE("derivative of the cumulative release is the release rate") {
    const InjectionProfile inj{2.0, 4.0, 1.0};
    const TimeGrid g{0.0, 0.02, 501};
    const Trace d = differentiate(cumulative_intensity(inj, g), 3);
    const double peak = 2.0 * inj.amplitude / inj.tw;
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(std::abs(d.y[i] - raised_cosine(inj, d.t[i])) <= 2e-3 * peak);
    }
}

TEST_CASE("derivative units and short traces") {
    Trace tr = Trace::on_grid({0.0, 1.0, 10}, std::vector<double>(10, 1.0), "a.u.");
    CHECK(differentiate(tr, 3).unit_label == "a.u./s");
    CHECK_THROWS_AS(differentiate(tr, 6), DataError);
    CHECK_THROWS_AS(differentiate(tr, 0), ParameterError);
}

TEST_CASE("mad noise floor estimates white noise") {
    boost::random::mt19937_64 rng(5);
    boost::random::normal_distribution<double> noise(0.0, 0.3);
    std::vector<double> y(20000);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.01 * static_cast<double>(i) + noise(rng);
    CHECK(noise_floor_mad(y) == doctest::Approx(0.3).epsilon(0.03));
    CHECK(noise_floor_mad(std::vector<double>(50, 2.0)) == 0.0);
    CHECK(noise_floor_mad(std::vector<double>{1.0, 2.0}) == 0.0);
}

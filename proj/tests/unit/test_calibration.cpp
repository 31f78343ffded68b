#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <lepkit/calibration.hpp>
#include <lepkit/dynamics.hpp>
#include <lepkit/errors.hpp>

using namespace lep;
using namespace lep::expsim;

namespace {

std::vector<double> grid(double t0, double dt, int n) {
    std::vector<double> t;
    for (int k = 0; k < n; ++k) t.push_back(t0 + dt * k);
    return t;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
}

} // namespace

TEST_CASE("calibration curves") {
    const auto decay = CalibrationCurve::decay_vs_power();
    const auto deph = CalibrationCurve::dephasing_vs_vpp();
    CHECK(calibrate_rate(decay, 3.86).rate == doctest::Approx(-0.0643 * 3.86 * 3.86 + 1.30 * 3.86 + 0.244));
    CHECK(calibrate_rate(decay, 3.86).rate == doctest::Approx(4.3042).epsilon(1e-4));
    CHECK(calibrate_rate(deph, 3.5).rate == doctest::Approx(1.09325).epsilon(1e-6));
    CHECK_FALSE(calibrate_rate(deph, 3.5).clamped);

    const auto low = calibrate_rate(deph, 0.2);
    CHECK(low.rate == 0.0);
    CHECK(low.clamped);
    CHECK_FALSE(low.warning.empty());

    CHECK_THROWS_WITH_AS(calibrate_rate(decay, 11.0), doctest::Contains("range"), ConfigError);
    CHECK_THROWS_AS(calibrate_rate(deph, -0.1), ConfigError);
    CHECK_THROWS_AS(calibrate_rate(deph, NAN), ConfigError);

    SUBCASE("monotone on the declared ranges") {
        for (double x = decay.x_min; x < std::min(decay.x_max, decay.b / (2 * std::abs(decay.a))) - 0.01; x += 0.01)
            CHECK(decay.polynomial(x + 0.01) > decay.polynomial(x));
        for (double x = deph.x_min; x < deph.x_max - 0.01; x += 0.01)
            CHECK(deph.polynomial(x + 0.01) > deph.polynomial(x));
    }
}

TEST_CASE("exponential decay fit") {
    const auto t = grid(0.1, 0.1, 20);
    SUBCASE("noiseless") {
        std::vector<double> p, e(t.size(), 0.01);
        for (double x : t) p.push_back(std::exp(-x));
        const auto f = fit_exponential_decay(t, p, e);
        CHECK(std::abs(f.value - 1.0) < 1e-10);
        CHECK(f.amplitude == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("no decay") {
        const std::vector<double> p(t.size(), 1.0), e(t.size(), 0.01);
        CHECK(std::abs(fit_exponential_decay(t, p, e).value) < 1e-12);
    }
    SUBCASE("coverage with shelving shot noise") {
        int covered = 0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            const auto d = simulate_decay_data(1.0, t, 200, s);
            const auto f = fit_exponential_decay(d.times, d.estimates, d.errors);
            covered += std::abs(f.value - 1.0) <= 3 * f.stderr_value;
        }
        CHECK(covered >= 95);
    }
    SUBCASE("non-positive estimates are excluded from the seed") {
        std::vector<double> p, e(t.size(), 0.05);
        for (double x : t) p.push_back(std::exp(-3 * x));
        p[18] = 0.0;
        p[19] = 0.0;
        const auto f = fit_exponential_decay(t, p, e);
        CHECK(f.excluded_from_seed == 2);
        CHECK_FALSE(f.warnings.empty());
    }
    SUBCASE("errors") {
        const std::vector<double> t4{0.1, 0.2, 0.3, 0.4};
        CHECK_THROWS_AS(fit_exponential_decay({0.1, 0.2, 0.3}, {1, 1, 1}, {1, 1, 1}), ConfigError);
        CHECK_THROWS_AS(fit_exponential_decay(t4, {0.5, 0, 0, 0}, {0.1, 0.1, 0.1, 0.1}), ConfigError);
        CHECK_THROWS_AS(fit_exponential_decay(t4, {0.5, 1.2, 0.3, 0.2}, {0.1, 0.1, 0.1, 0.1}), ConfigError);
    }
}

TEST_CASE("dephasing rabi fit") {
    const auto t = grid(0.0, 0.25, 40);
    auto model = [&](double gphi) {
        const auto tr = dynamics::evolve_master(SystemParams(1.0, 0.0, gphi, 0.0), DensityMatrix::ground(), t);
        return dynamics::observable_series(tr, dynamics::Observable::PopE).values;
    };
    SUBCASE("noiseless self-consistency") {
        const std::vector<double> e(t.size(), 0.01);
        const auto f = fit_dephasing_rabi(t, model(0.5), e, 1.0);
        CHECK(f.value == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("pure rabi") {
        const std::vector<double> e(t.size(), 0.01);
        const auto f = fit_dephasing_rabi(t, model(0.0), e, 1.0);
        CHECK(f.value < 1e-6);
        CHECK(f.stderr_value < 0.05);
        CHECK_FALSE(f.wide_interval);
    }
    SUBCASE("intervals widen with stronger dephasing") {
        std::vector<double> weak, strong;
        for (std::uint64_t s = 0; s < 50; ++s) {
            const auto a = simulate_rabi_data(1.0, 0.2, t, 200, s);
            const auto b = simulate_rabi_data(1.0, 2.0, t, 200, 1000 + s);
            weak.push_back(fit_dephasing_rabi(a.times, a.estimates, a.errors, 1.0).stderr_value);
            strong.push_back(fit_dephasing_rabi(b.times, b.estimates, b.errors, 1.0).stderr_value);
        }
        CHECK(median(strong) > median(weak));
    }
    SUBCASE("errors") {
        const std::vector<double> e(t.size(), 0.01);
        CHECK_THROWS_AS(fit_dephasing_rabi(t, model(0.5), e, 0.0), ConfigError);
    }
}

TEST_CASE("simulated shot data") {
    const auto t = grid(0.0, 0.5, 6);
    const auto a = simulate_decay_data(1.0, t, 200, 4);
    const auto b = simulate_decay_data(1.0, t, 200, 4);
    CHECK(a.estimates == b.estimates);
    CHECK(a.estimates[0] == 1.0);
    for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(a.errors[k] >= 1.0 / 200);
        const double expect = std::sqrt(a.estimates[k] * (1 - a.estimates[k]) / 200);
        CHECK(a.errors[k] == doctest::Approx(std::max(expect, 1.0 / 200)));
    }
    CHECK_THROWS_AS(simulate_decay_data(1.0, t, 0, 1), ConfigError);
}

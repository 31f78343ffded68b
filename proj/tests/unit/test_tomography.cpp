#include <doctest.h>

#include <cmath>
#include <random>

#include <lepkit/spectral.hpp>
#include <lepkit/tomography.hpp>

#include "support/oracles.hpp"

using namespace lep;
using namespace lep::expsim;

namespace {

const double kPi = std::acos(-1.0);

double pe(const DensityMatrix& r) { return r.population_e(); }

} // namespace

TEST_CASE("rotations") {
    SUBCASE("pi pulse") {
        const auto r = apply_rotation(DensityMatrix::ground(), kPi, 0.0);
        CHECK(pe(r) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(pe(apply_rotation(DensityMatrix::ground(), kPi, 1.1)) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("x-basis bright state") {
        const Vec2 plus = Vec2(1.0, 1.0) / std::sqrt(2.0);
        CHECK(pe(apply_rotation(DensityMatrix::pure(plus), kPi / 2, kPi / 2)) ==
              doctest::Approx(1.0).epsilon(1e-15));
        const Vec2 plus_i = Vec2(cplx(1.0), cplx(0.0, 1.0)) / std::sqrt(2.0);
        CHECK(pe(apply_rotation(DensityMatrix::pure(plus_i), kPi / 2, 0.0)) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("zero angle") {
        for (double phi : {0.0, 0.4, 2.0, -3.0})
            CHECK((rotation(0.0, phi) - Mat2::Identity()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("unitary against the matrix exponential") {
        const cplx i{0.0, 1.0};
        for (double th : {0.3, 1.7})
            for (double phi : {0.0, 0.9, -2.2}) {
                const Mat2 gen = -i * (th / 2) * (std::cos(phi) * pauli::x() - std::sin(phi) * pauli::y());
                const Mat2 u = gen.exp();
                CHECK((rotation(th, phi) - u).cwiseAbs().maxCoeff() < 1e-14);
                CHECK((rotation(th, phi) * rotation(th, phi).adjoint() - Mat2::Identity()).cwiseAbs().maxCoeff() <
                      1e-15);
            }
    }
}

TEST_CASE("bright probabilities are bloch components") {
    std::mt19937_64 rng(51);
    for (int k = 0; k < 100; ++k) {
        const DensityMatrix r(oracle::random_state(rng));
        CHECK(bright_probability(r, Basis::X) == doctest::Approx(0.5 * (1 + r.expect_x())).epsilon(1e-14));
        CHECK(bright_probability(r, Basis::Y) == doctest::Approx(0.5 * (1 + r.expect_y())).epsilon(1e-14));
        CHECK(bright_probability(r, Basis::Z) == doctest::Approx(0.5 * (1 + r.expect_z())).epsilon(1e-14));
    }
}

TEST_CASE("simulated measurement") {
    for (std::size_t n : {1u, 10u, 14000u}) {
        const auto m = simulate_measurement(DensityMatrix::excited(), Basis::Z, n, 3);
        CHECK(m.p_e == 1.0);
        CHECK(m.bright == n);
    }
    const double sigma = std::sqrt(0.25 / 14000);
    CHECK(sigma == doctest::Approx(0.00423).epsilon(1e-3));
    for (Basis b : {Basis::X, Basis::Y, Basis::Z})
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto m = simulate_measurement(DensityMatrix::maximally_mixed(), b, 14000, s);
            CHECK(std::abs(m.p_e - 0.5) < 5 * sigma);
            CHECK(m.stderr_p == doctest::Approx(std::sqrt(m.p_e * (1 - m.p_e) / 14000)));
        }

    const SystemParams p(1, 0, 1, 1);
    const auto ss = spectral::steady_state(p);
    const auto a = measure_analytic(ss, Basis::Z);
    CHECK(a.p_e == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(a.shots == 0);
    CHECK(a.stderr_p == 0.0);

    const auto x1 = simulate_measurement(ss, Basis::X, 500, 8);
    const auto x2 = simulate_measurement(ss, Basis::X, 500, 8);
    CHECK(x1.bright == x2.bright);
}

TEST_CASE("shot-noise error scaling") {
    const DensityMatrix r = DensityMatrix::from_bloch(0.3, 0.1, -0.4);
    double s1 = 0.0, s4 = 0.0;
    for (std::uint64_t s = 0; s < 40; ++s) {
        s1 += simulate_measurement(r, Basis::Z, 2000, s).stderr_p;
        s4 += simulate_measurement(r, Basis::Z, 8000, 100 + s).stderr_p;
    }
    const double ratio = s1 / s4;
    CHECK(ratio > 2.0 * 0.8);
    CHECK(ratio < 2.0 * 1.2);
}

TEST_CASE("state reconstruction") {
    SUBCASE("poles and center") {
        const auto e = reconstruct_state(0.5, 0.5, 1.0);
        CHECK((e.raw - DensityMatrix::excited().matrix()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(e.raw_is_state);
        const auto m = reconstruct_state(0.5, 0.5, 0.5);
        CHECK((m.raw - DensityMatrix::maximally_mixed().matrix()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("round trip") {
        std::mt19937_64 rng(52);
        for (int k = 0; k < 100; ++k) {
            const DensityMatrix r(oracle::random_state(rng));
            const auto t = tomography(r, 0, 0);
            CHECK((t.state.raw - r.matrix()).cwiseAbs().maxCoeff() <= 1e-15);
            CHECK(t.state.raw_is_state);
        }
    }
    SUBCASE("non-physical raw result is kept and projected") {
        const auto r = reconstruct_state(1.0, 1.0, 0.5);
        CHECK_FALSE(r.raw_is_state);
        CHECK(r.raw_min_eigenvalue < 0.0);
        CHECK(r.raw(0, 1) == cplx(0.5, -0.5));
        CHECK(r.projected.min_eigenvalue() >= -1e-15);
        CHECK(std::abs(r.projected.matrix().trace() - 1.0) < 1e-15);
    }
}

TEST_CASE("tomography with shot noise") {
    const DensityMatrix r = DensityMatrix::from_bloch(0.2, -0.5, 0.3);
    int inside = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto t = tomography(r, 14000, s);
        CHECK(t.stderr_ee == doctest::Approx(t.measurements[2].stderr_p));
        CHECK(t.stderr_re_eg == doctest::Approx(t.measurements[0].stderr_p));
        inside += std::abs(t.state.raw(0, 0).real() - r.matrix()(0, 0).real()) <= 3 * t.stderr_ee;
    }
    CHECK(inside >= 190);
    const auto a = tomography(r, 14000, 9), b = tomography(r, 14000, 9);
    CHECK(a.state.raw == b.state.raw);
}

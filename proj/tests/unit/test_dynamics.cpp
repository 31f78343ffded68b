#include <doctest.h>

#include <cmath>
#include <random>

#include <lepkit/dynamics.hpp>
#include <lepkit/spectral.hpp>

#include "support/oracles.hpp"

using namespace lep;
using namespace lep::dynamics;

namespace {

Vec2 ket_g() { return Vec2(0.0, 1.0); }
Vec2 ket_e() { return Vec2(1.0, 0.0); }

double terminal_error(const SystemParams& p, double h) {
    const DensityMatrix rho0 = DensityMatrix::ground();
    IntegratorOptions o;
    o.step = h;
    const auto tr = evolve_master(p, rho0, {0.0, 2.0}, o);
    const oracle::M2 ref = oracle::evolve_exact(p.omega(), p.delta(), p.gamma(), p.alpha(), rho0.matrix(), 2.0);
    return (tr.states.back() - ref).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("jump operators") {
    const SystemParams p(1.0, 0.3, 2.0, 0.3);
    const auto j = JumpOperatorSet::build(p);
    CHECK(std::abs(j.decay(1, 0) - std::sqrt(0.6)) < 1e-15);
    CHECK(std::abs(j.dephasing(0, 0) - std::sqrt(1.4)) < 1e-15);
    Mat2 want = Mat2::Zero();
    want(0, 0) = 2.0;
    CHECK((j.loss() - want).cwiseAbs().maxCoeff() < 1e-15);
    const Mat2 anti = build_hamiltonian(p) - cplx(0, 0.5) * want;
    CHECK((j.h_eff - anti).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("closed-system rabi oscillations") {
    const auto grid = uniform_grid(0.0, 0.25, 81);
    SUBCASE("resonant") {
        const auto tr = evolve_master(SystemParams(1, 0, 0, 0.4), DensityMatrix::ground(), grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double s = std::sin(grid[k] / 2);
            CHECK(std::abs(tr.states[k](0, 0).real() - s * s) < 1e-8);
        }
    }
    SUBCASE("detuned") {
        const double d = 0.7, w = std::sqrt(d * d + 1.0);
        const auto tr = evolve_master(SystemParams(1, d, 0, 0.4), DensityMatrix::ground(), grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double s = std::sin(w * grid[k] / 2);
            CHECK(std::abs(tr.states[k](0, 0).real() - s * s / (w * w)) < 1e-8);
        }
    }
    SUBCASE("adaptive integrator") {
        IntegratorOptions o;
        o.method = Integrator::DormandPrince;
        const auto tr = evolve_master(SystemParams(1, 0, 0, 0.4), DensityMatrix::ground(), grid, o);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double s = std::sin(grid[k] / 2);
            CHECK(std::abs(tr.states[k](0, 0).real() - s * s) < 1e-8);
        }
    }
}

TEST_CASE("master path against the matrix exponential") {
    std::mt19937_64 rng(41);
    for (int k = 0; k < 20; ++k) {
        const auto q = oracle::random_point(rng);
        const SystemParams p(q.omega, q.delta, q.gamma, q.alpha);
        const oracle::M2 rho0 = oracle::random_state(rng);
        const auto grid = uniform_grid(0.0, 0.3, 11);
        const auto tr = evolve_master(p, DensityMatrix(rho0), grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const oracle::M2 want = oracle::evolve_exact(q.omega, q.delta, q.gamma, q.alpha, rho0, grid[i]);
            CHECK((tr.states[i] - want).cwiseAbs().maxCoeff() < 1e-9);
            CHECK(std::abs(tr.states[i].trace() - 1.0) < 1e-9);
            CHECK((tr.states[i] - tr.states[i].adjoint()).cwiseAbs().maxCoeff() == 0.0);
        }
        CHECK(tr.max_trace_drift < 1e-9);
    }
}

TEST_CASE("long-time limit is the steady state") {
    const SystemParams p(1, 0, 1, 1);
    const auto tr = evolve_master(p, DensityMatrix::ground(), {0.0, 50.0});
    const DensityMatrix ss = spectral::steady_state(p);
    CHECK(std::abs(tr.states.back()(0, 0).real() - ss.population_e()) < 1e-8);
    CHECK((tr.states.back() - ss.matrix()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rk4 convergence order") {
    for (const SystemParams& p : {SystemParams(1, 0.2, 1.5, 0.3), SystemParams(1, -0.5, 3.0, 0.8)}) {
        const double h = 0.1;
        const double ratio = terminal_error(p, h) / terminal_error(p, h / 2);
        CHECK(ratio >= 12.0);
        CHECK(ratio <= 20.0);
    }
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(evolve_master(SystemParams(1, 0, 1, 0), DensityMatrix::ground(), {0.0, 1.0, 0.5}), ConfigError);
    CHECK(default_step(SystemParams(1, 3, 2, 0)) == doctest::Approx(0.01 / 3));
    const auto g = uniform_grid(1.0, 0.5, 3);
    CHECK(g == std::vector<double>{1.0, 1.5, 2.0});
}

TEST_CASE("observables") {
    const Mat2 mixed = DensityMatrix::maximally_mixed().matrix();
    for (Observable o : {Observable::SigmaX, Observable::SigmaY, Observable::SigmaZ})
        CHECK(expectation(mixed, o) == 0.0);
    CHECK(expectation(DensityMatrix::excited().matrix(), Observable::PopE) == 1.0);
    CHECK(expectation(DensityMatrix::excited().matrix(), Observable::SigmaZ) == 1.0);
    CHECK(expectation(DensityMatrix::from_bloch(0.3, -0.4, 0.1).matrix(), Observable::SigmaY) ==
          doctest::Approx(-0.4));

    const SystemParams p(1, 0, 1, 1);
    const auto tr = evolve_master(p, DensityMatrix::ground(), {0.0, 60.0});
    const auto s = observable_series(tr, Observable::PopE);
    CHECK(s.values.back() == doctest::Approx(spectral::steady_state(p).population_e()).epsilon(1e-8));
    CHECK_FALSE(s.std_errors);
}

TEST_CASE("monte carlo without jumps is the schroedinger path") {
    const SystemParams p(1, 0.4, 0, 0.5);
    const auto grid = uniform_grid(0.0, 0.2, 30);
    McOptions o;
    o.n_traj = 20;
    o.seed = 1;
    const auto mc = mc_trajectories(p, ket_g(), grid, o);
    const auto me = evolve_master(p, DensityMatrix::ground(), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK((mc.states[k] - me.states[k]).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(mc.mean_jumps[0] == 0.0);
    CHECK(mc.mean_jumps[1] == 0.0);
}

TEST_CASE("monte carlo pure decay statistics") {
    McOptions o;
    o.n_traj = 10000;
    o.seed = 7;
    const std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
    const auto mc = mc_trajectories(SystemParams(0, 0, 1, 1), ket_e(), grid, o);
    const auto s = observable_series(mc, Observable::PopE);
    REQUIRE(s.std_errors);
    for (std::size_t k = 1; k < grid.size(); ++k) CHECK(std::abs(s.values[k] - std::exp(-grid[k])) <= 4 * (*s.std_errors)[k]);
}

TEST_CASE("monte carlo agrees with the master equation") {
    const SystemParams p(1, 0, 2, 0.3);
    const auto grid = uniform_grid(0.0, 0.25, 25);
    McOptions o;
    o.n_traj = 10000;
    o.seed = 11;
    const auto mc = mc_trajectories(p, ket_g(), grid, o);
    const auto me = evolve_master(p, DensityMatrix::ground(), grid);
    const auto a = observable_series(mc, Observable::PopE);
    const auto b = observable_series(me, Observable::PopE);
    int inside = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double se = std::max((*a.std_errors)[k], 1e-12);
        inside += std::abs(a.values[k] - b.values[k]) <= 4 * se;
    }
    CHECK(inside == static_cast<int>(grid.size()));
}

TEST_CASE("jump counts match the integrated jump rates") {
    const SystemParams p(1, 0.3, 1.5, 0.4);
    const double t_end = 4.0;
    McOptions o;
    o.n_traj = 10000;
    o.seed = 5;
    const auto mc = mc_trajectories(p, ket_g(), {0.0, t_end}, o);

    // trapezoid rule on a fine master path
    const auto fine = uniform_grid(0.0, 1e-3, 4001);
    const auto me = evolve_master(p, DensityMatrix::ground(), fine);
    double pe = 0.0;
    for (std::size_t k = 1; k < fine.size(); ++k)
        pe += 0.5 * (me.states[k - 1](0, 0).real() + me.states[k](0, 0).real()) * (fine[k] - fine[k - 1]);
    const double want_decay = p.gamma0() * pe;
    const double want_deph = p.gammaphi() * pe;
    CHECK(std::abs(mc.mean_jumps[0] - want_decay) <= 4 * mc.jumps_stderr[0]);
    CHECK(std::abs(mc.mean_jumps[1] - want_deph) <= 4 * mc.jumps_stderr[1]);
    CHECK(mc.jumps_stderr[0] > 0.0);
}

TEST_CASE("monte carlo standard errors scale with the trajectory count") {
    const SystemParams p(1, 0, 1, 0.6);
    const auto grid = uniform_grid(0.0, 0.5, 9);
    McOptions o;
    o.seed = 3;
    o.n_traj = 1000;
    const auto small = mc_trajectories(p, ket_g(), grid, o);
    o.n_traj = 4000;
    const auto big = mc_trajectories(p, ket_g(), grid, o);
    for (std::size_t k = 2; k < grid.size(); ++k) {
        const double r = (*small.std_errors)[0][k] / (*big.std_errors)[0][k];
        CHECK(r > 1.0);
        CHECK(r < 4.0);
    }
}

TEST_CASE("monte carlo determinism across workers") {
    const SystemParams p(1, 0.2, 1.2, 0.5);
    const auto grid = uniform_grid(0.0, 0.5, 8);
    McOptions o;
    o.n_traj = 500;
    o.seed = 99;
    o.workers = 1;
    const auto a = mc_trajectories(p, ket_g(), grid, o);
    o.workers = 4;
    const auto b = mc_trajectories(p, ket_g(), grid, o);
    const auto c = mc_trajectories(p, ket_g(), grid, o);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(a.states[k] == b.states[k]);
        CHECK(b.states[k] == c.states[k]);
    }
    CHECK(a.seed == std::optional<std::uint64_t>(99));
    o.seed = 100;
    const auto d = mc_trajectories(p, ket_g(), grid, o);
    CHECK(d.states[4] != a.states[4]);
}

TEST_CASE("settling time") {
    const SystemParams p(1, 0, 1, 1);
    const auto s = spectral::eigenvalues_closed_form(p).nonzero();
    double slowest = 1e300;
    for (auto e : s) slowest = std::min(slowest, std::abs(e.imag()));
    CHECK(settling_time(p) == doctest::Approx(10.0 / slowest));
    CHECK_THROWS(settling_time(SystemParams(1, 0, 0, 0)));
}

// dynamics.hpp: master-equation integration and quantum-jump Monte Carlo

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lepkit/lindblad.hpp"

namespace lep::dynamics {

// c1 = sqrt(gamma0) |g><e| (decay), c2 = sqrt(gammaphi) |e><e| (dephasing) and
// the no-jump drift H_eff = H - i/2 sum_k c_k^dag c_k. A dephasing jump
// leaves populations untouched and only randomizes the relative phase.
struct JumpOperatorSet {
    Mat2 decay;
    Mat2 dephasing;
    Mat2 h_eff;

    static JumpOperatorSet build(const SystemParams& p);
    // sum_k c_k^dag c_k
    Mat2 loss() const { return decay.adjoint() * decay + dephasing.adjoint() * dephasing; }
};

enum class Integrator { RK4, DormandPrince };

struct IntegratorOptions {
    Integrator method = Integrator::RK4;
    double step = 0.0;          // 0: 0.01 / max(omega, gamma, |delta|)
    double rtol = 1e-10;        // adaptive only
    double atol = 1e-12;        // adaptive only
    double min_step = 1e-12;    // adaptive only, relative to the span of the grid
    double renormalize_above = 1e-12;
    double negativity_abort = 1e-6;
};

double default_step(const SystemParams& p);

enum class Observable { PopE, SigmaX, SigmaY, SigmaZ };
inline constexpr std::array<Observable, 4> kObservables{Observable::PopE, Observable::SigmaX, Observable::SigmaY,
                                                        Observable::SigmaZ};
const char* to_string(Observable o);
double expectation(const Mat2& rho, Observable o);

struct Trajectory {
    std::vector<double> times;
    std::vector<Mat2> states; // master path, or the trajectory-averaged state
    // Monte Carlo only: standard error per observable (indexed as kObservables)
    std::optional<std::array<std::vector<double>, 4>> std_errors;

    std::string integrator;
    double step = 0.0;
    std::optional<std::uint64_t> seed;
    std::size_t n_traj = 0;
    std::size_t renormalizations = 0;
    double max_trace_drift = 0.0;
    // Monte Carlo only: mean number of jumps per channel (decay, dephasing)
    // over the whole grid and their standard errors.
    std::array<double, 2> mean_jumps{};
    std::array<double, 2> jumps_stderr{};
};

// Integrates d(vec rho)/dt = -i L vec rho onto t_grid (strictly increasing;
// the initial state is assigned to t_grid[0]).
Trajectory evolve_master(const SystemParams& p, const DensityMatrix& rho0, const std::vector<double>& t_grid,
                         const IntegratorOptions& opts = {});

struct McOptions {
    std::size_t n_traj = 1000;
    std::uint64_t seed = 0;
    unsigned workers = 0;     // 0: hardware concurrency
    std::size_t block = 64;   // trajectories per deterministic reduction block
};

// exp(-i H_eff tau) for a constant 2x2 generator.
Mat2 propagator(const Mat2& h_eff, double tau);

// Monte Carlo wave-function unraveling with exact norm-threshold jump times.
// Output is bit-identical for identical (seed, n_traj, grid) for any worker
// count.
Trajectory mc_trajectories(const SystemParams& p, const Vec2& psi0, const std::vector<double>& t_grid,
                           const McOptions& opts);

struct Series {
    std::vector<double> times;
    std::vector<double> values;
    std::optional<std::vector<double>> std_errors;
};

Series observable_series(const Trajectory& traj, Observable obs);

// Waiting time before a steady-state measurement: 10 / (slowest nonzero
// relaxation rate |Im E|) of the spectrum.
double settling_time(const SystemParams& p);

// Uniform grid t0, t0 + dt, ..., with n points.
std::vector<double> uniform_grid(double t0, double dt, std::size_t n);

} // namespace lep::dynamics

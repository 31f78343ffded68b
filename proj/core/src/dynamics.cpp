#include "lepkit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lepkit/errors.hpp"
#include "lepkit/parallel.hpp"
#include "lepkit/random.hpp"
#include "lepkit/spectral.hpp"

namespace lep::dynamics {

JumpOperatorSet JumpOperatorSet::build(const SystemParams& p) {
    JumpOperatorSet j;
    j.decay = std::sqrt(p.gamma0()) * lowering();
    j.dephasing = std::sqrt(p.gammaphi()) * projector_e();
    j.h_eff = build_hamiltonian(p) - 0.5 * I * j.loss();
    return j;
}

double default_step(const SystemParams& p) {
    const double s = p.rate_scale();
    return s > 0.0 ? 0.01 / s : 0.01;
}

const char* to_string(Observable o) {
    switch (o) {
    case Observable::PopE: return "pop_e";
    case Observable::SigmaX: return "sigma_x";
    case Observable::SigmaY: return "sigma_y";
    case Observable::SigmaZ: return "sigma_z";
    }
    return "?";
}

double expectation(const Mat2& rho, Observable o) {
    switch (o) {
    case Observable::PopE: return rho(0, 0).real();
    case Observable::SigmaX: return 2.0 * rho(0, 1).real();
    case Observable::SigmaY: return -2.0 * rho(0, 1).imag();
    case Observable::SigmaZ: return (rho(0, 0) - rho(1, 1)).real();
    }
    return 0.0;
}

std::vector<double> uniform_grid(double t0, double dt, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = t0 + dt * static_cast<double>(k);
    return t;
}

namespace {

void check_grid(const std::vector<double>& t) {
    if (t.empty()) throw ConfigError("time grid is empty");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1])) throw ConfigError("time grid must be strictly increasing");
}

// Exact Hermitian projection of a vectorized state.
void hermitize(Vec4& v) {
    const cplx eg = 0.5 * (v(1) + std::conj(v(2)));
    v(1) = eg;
    v(2) = std::conj(eg);
    v(0) = v(0).real();
    v(3) = v(3).real();
}

double min_eig(const Vec4& v) {
    const double a = v(0).real(), d = v(3).real();
    return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + std::norm(v(1)));
}

struct Stepper {
    Mat4 a; // -i L
    Vec4 rk4(const Vec4& v, double h) const {
        const Vec4 k1 = a * v;
        const Vec4 k2 = a * (v + 0.5 * h * k1);
        const Vec4 k3 = a * (v + 0.5 * h * k2);
        const Vec4 k4 = a * (v + h * k3);
        return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
};

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

} // namespace

Trajectory evolve_master(const SystemParams& p, const DensityMatrix& rho0, const std::vector<double>& t_grid,
                         const IntegratorOptions& opts) {
    check_grid(t_grid);
    const Stepper st{-I * build_liouvillian(p).matrix()};
    Trajectory tr;
    tr.times = t_grid;
    tr.states.reserve(t_grid.size());
    tr.step = opts.step > 0.0 ? opts.step : default_step(p);
    tr.integrator = opts.method == Integrator::RK4 ? "rk4" : "dopri5";

    Vec4 v = vectorize(rho0);
    tr.states.push_back(rho0.matrix());

    auto post_step = [&](Vec4& x, double t) {
        hermitize(x);
        const double trace = (x(0) + x(3)).real();
        const double drift = std::abs(trace - 1.0);
        tr.max_trace_drift = std::max(tr.max_trace_drift, drift);
        if (drift > opts.renormalize_above) {
            x /= trace;
            ++tr.renormalizations;
        }
        const double neg = min_eig(x);
        if (neg < -opts.negativity_abort) {
            std::ostringstream os;
            os << "evolve_master: state lost positivity (min eigenvalue " << neg << ") at t = " << t << " for "
               << p.describe();
            throw NumericalError(os.str());
        }
    };

    const double span = t_grid.back() - t_grid.front();
    double h_adapt = tr.step;
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        const double t0 = t_grid[k - 1];
        const double dt = t_grid[k] - t0;
        if (opts.method == Integrator::RK4) {
            const auto n = static_cast<std::size_t>(std::ceil(dt / tr.step - 1e-9));
            const double h = dt / static_cast<double>(std::max<std::size_t>(n, 1));
            for (std::size_t s = 0; s < std::max<std::size_t>(n, 1); ++s) {
                v = st.rk4(v, h);
                post_step(v, t0 + h * static_cast<double>(s + 1));
            }
        } else {
            double t = t0;
            while (t < t_grid[k]) {
                double h = std::min(h_adapt, t_grid[k] - t);
                if (h < opts.min_step * std::max(span, 1.0))
                    throw NumericalError("evolve_master: adaptive step size underflow for " + p.describe());
                const Vec4 k1 = st.a * v;
                const Vec4 k2 = st.a * (v + h * a21 * k1);
                const Vec4 k3 = st.a * (v + h * (a31 * k1 + a32 * k2));
                const Vec4 k4 = st.a * (v + h * (a41 * k1 + a42 * k2 + a43 * k3));
                const Vec4 k5 = st.a * (v + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
                const Vec4 k6 = st.a * (v + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
                const Vec4 y = v + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
                const Vec4 k7 = st.a * y;
                const Vec4 err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
                double en = 0.0;
                for (int i = 0; i < 4; ++i) {
                    const double sc = opts.atol + opts.rtol * std::max(std::abs(v(i)), std::abs(y(i)));
                    en = std::max(en, std::abs(err(i)) / sc);
                }
                const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
                if (en <= 1.0) {
                    v = y;
                    t += h;
                    if (t_grid[k] - t < 1e-14 * std::max(1.0, std::abs(t))) t = t_grid[k];
                    post_step(v, t);
                    // Do not let a grid-point clip shrink the working step.
                    if (h == h_adapt || factor < 1.0) h_adapt = h * factor;
                } else {
                    h_adapt = h * factor;
                }
            }
        }
        tr.states.push_back(unvec(v));
    }
    return tr;
}

Mat2 propagator(const Mat2& h, double tau) {
    // exp(A) for A = -i tau H: exp(m) [cosh(s) + sinh(s)/s (A - m)], with
    // m = tr(A)/2 and s^2 = m^2 - det(A).
    const Mat2 a = -I * tau * h;
    const cplx m = 0.5 * a.trace();
    const Mat2 b = a - m * Mat2::Identity();
    const cplx s2 = -b.determinant();
    const cplx s = std::sqrt(s2);
    cplx sinhc;
    if (std::abs(s) < 1e-4) {
        sinhc = 1.0 + s2 / 6.0 + s2 * s2 / 120.0;
    } else {
        sinhc = std::sinh(s) / s;
    }
    return std::exp(m) * (std::cosh(s) * Mat2::Identity() + sinhc * b);
}

namespace {

struct Accumulator {
    std::vector<std::array<double, 4>> sum;
    std::vector<std::array<double, 4>> sumsq;
    std::vector<cplx> rho_ee, rho_eg;
    std::array<double, 2> jumps{};
    std::array<double, 2> jumps_sq{};

    explicit Accumulator(std::size_t n) : sum(n), sumsq(n), rho_ee(n), rho_eg(n) {}

    void add(const Accumulator& o) {
        for (std::size_t k = 0; k < sum.size(); ++k) {
            for (int q = 0; q < 4; ++q) {
                sum[k][q] += o.sum[k][q];
                sumsq[k][q] += o.sumsq[k][q];
            }
            rho_ee[k] += o.rho_ee[k];
            rho_eg[k] += o.rho_eg[k];
        }
        for (int c = 0; c < 2; ++c) {
            jumps[c] += o.jumps[c];
            jumps_sq[c] += o.jumps_sq[c];
        }
    }
};

void record(Accumulator& acc, std::size_t k, const Vec2& psi_unnorm) {
    const Vec2 psi = psi_unnorm.normalized();
    const Mat2 rho = psi * psi.adjoint();
    for (int q = 0; q < 4; ++q) {
        const double x = expectation(rho, kObservables[q]);
        acc.sum[k][q] += x;
        acc.sumsq[k][q] += x * x;
    }
    acc.rho_ee[k] += rho(0, 0);
    acc.rho_eg[k] += rho(0, 1);
}

void run_one(const JumpOperatorSet& ops, const Vec2& psi0, const std::vector<double>& t, Rng& rng,
             Accumulator& acc) {
    Vec2 psi = psi0.normalized();
    double now = t.front();
    double threshold = rng.uniform_open();
    std::array<double, 2> jumps{};
    record(acc, 0, psi);
    for (std::size_t k = 1; k < t.size(); ++k) {
        while (true) {
            const Vec2 end = propagator(ops.h_eff, t[k] - now) * psi;
            if (end.squaredNorm() > threshold) {
                psi = end;
                now = t[k];
                break;
            }
            // Jump inside (now, t[k]]: the squared norm decreases monotonically.
            double lo = 0.0, hi = t[k] - now;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((propagator(ops.h_eff, mid) * psi).squaredNorm() > threshold)
                    lo = mid;
                else
                    hi = mid;
            }
            psi = propagator(ops.h_eff, hi) * psi;
            now += hi;
            const Vec2 jd = ops.decay * psi;
            const Vec2 jp = ops.dephasing * psi;
            const double wd = jd.squaredNorm();
            const double wp = jp.squaredNorm();
            const double u = rng.uniform_open() * (wd + wp);
            if (u < wd) {
                psi = jd.normalized();
                jumps[0] += 1.0;
            } else {
                psi = jp.normalized();
                jumps[1] += 1.0;
            }
            threshold = rng.uniform_open();
            if (now >= t[k]) break;
        }
        record(acc, k, psi);
    }
    for (int c = 0; c < 2; ++c) {
        acc.jumps[c] += jumps[c];
        acc.jumps_sq[c] += jumps[c] * jumps[c];
    }
}

} // namespace

Trajectory mc_trajectories(const SystemParams& p, const Vec2& psi0, const std::vector<double>& t_grid,
                           const McOptions& opts) {
    check_grid(t_grid);
    if (opts.n_traj < 1) throw ConfigError("mc_trajectories: n_traj must be >= 1");
    if (std::abs(psi0.norm() - 1.0) > 1e-12) throw ConfigError("mc_trajectories: psi0 must be normalized");
    const auto ops = JumpOperatorSet::build(p);
    const std::size_t n = t_grid.size();
    const std::size_t block = std::max<std::size_t>(opts.block, 1);
    const std::size_t nblocks = (opts.n_traj + block - 1) / block;

    std::vector<Accumulator> partial(nblocks, Accumulator(n));
    parallel_for(nblocks, opts.workers, [&](std::size_t b) {
        const std::size_t first = b * block;
        const std::size_t last = std::min(opts.n_traj, first + block);
        for (std::size_t i = first; i < last; ++i) {
            Rng rng(opts.seed, i);
            run_one(ops, psi0, t_grid, rng, partial[b]);
        }
    });
    Accumulator total(n);
    for (const auto& a : partial) total.add(a);

    Trajectory tr;
    tr.times = t_grid;
    tr.integrator = "mcwf";
    tr.seed = opts.seed;
    tr.n_traj = opts.n_traj;
    const double nt = static_cast<double>(opts.n_traj);
    std::array<std::vector<double>, 4> se;
    for (auto& v : se) v.resize(n);
    tr.states.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const cplx ee = total.rho_ee[k] / nt;
        const cplx eg = total.rho_eg[k] / nt;
        Mat2 rho;
        rho << ee.real(), eg, std::conj(eg), 1.0 - ee.real();
        tr.states[k] = rho;
        for (int q = 0; q < 4; ++q) {
            const double mean = total.sum[k][q] / nt;
            const double var = opts.n_traj > 1 ? std::max(0.0, (total.sumsq[k][q] - nt * mean * mean) / (nt - 1.0)) : 0.0;
            se[q][k] = std::sqrt(var / nt);
        }
    }
    tr.std_errors = std::move(se);
    for (int c = 0; c < 2; ++c) {
        const double mean = total.jumps[c] / nt;
        const double var = opts.n_traj > 1 ? std::max(0.0, (total.jumps_sq[c] - nt * mean * mean) / (nt - 1.0)) : 0.0;
        tr.mean_jumps[c] = mean;
        tr.jumps_stderr[c] = std::sqrt(var / nt);
    }
    return tr;
}

Series observable_series(const Trajectory& traj, Observable obs) {
    Series s;
    s.times = traj.times;
    s.values.reserve(traj.states.size());
    for (const auto& rho : traj.states) s.values.push_back(expectation(rho, obs));
    if (traj.std_errors) {
        const auto idx = static_cast<std::size_t>(std::find(kObservables.begin(), kObservables.end(), obs) -
                                                  kObservables.begin());
        s.std_errors = (*traj.std_errors)[idx];
    }
    return s;
}

double settling_time(const SystemParams& p) {
    const auto spec = spectral::eigenvalues_closed_form(p);
    double slowest = std::numeric_limits<double>::infinity();
    for (auto e : spec.nonzero())
        if (std::abs(e.imag()) > 1e-12 * std::max(1.0, p.rate_scale())) slowest = std::min(slowest, std::abs(e.imag()));
    if (!std::isfinite(slowest)) throw NumericalError("settling_time: no relaxing branch at " + p.describe());
    return 10.0 / slowest;
}

} // namespace lep::dynamics

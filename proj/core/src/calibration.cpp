#include "lepkit/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "lepkit/dynamics.hpp"
#include "lepkit/errors.hpp"
#include "lepkit/random.hpp"

namespace lep::expsim {

CalibrationCurve CalibrationCurve::decay_vs_power() {
    return {CurveKind::DecayVsPower, -0.0643, 1.30, 0.244, 0.0, 10.0, "uW", "rate"};
}

CalibrationCurve CalibrationCurve::dephasing_vs_vpp() {
    return {CurveKind::DephasingVsVpp, 0.0882, 0.00940, -0.0201, 0.0, 5.0, "Vpp", "rate"};
}

const char* to_string(CurveKind k) {
    return k == CurveKind::DecayVsPower ? "decay_vs_power" : "dephasing_vs_vpp";
}

CalibratedRate calibrate_rate(const CalibrationCurve& curve, double x) {
    if (!std::isfinite(x) || x < curve.x_min || x > curve.x_max) {
        std::ostringstream os;
        os << to_string(curve.kind) << ": input " << x << " " << curve.input_unit << " outside the valid range ["
           << curve.x_min << ", " << curve.x_max << "] " << curve.input_unit;
        throw ConfigError(os.str());
    }
    CalibratedRate r;
    r.rate = curve.polynomial(x);
    if (r.rate < 0.0) {
        std::ostringstream os;
        os << to_string(curve.kind) << ": quadratic is negative (" << r.rate << ") at " << x << " "
           << curve.input_unit << "; clamped to 0";
        r.rate = 0.0;
        r.clamped = true;
        r.warning = os.str();
    }
    return r;
}

namespace {

void check_series(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& e,
                  const char* who) {
    if (t.size() != y.size() || t.size() != e.size())
        throw ConfigError(std::string(who) + ": times, estimates and errors differ in length");
    if (t.size() < 4) throw ConfigError(std::string(who) + ": at least 4 time points are required");
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(t[k]) || !std::isfinite(y[k]) || y[k] < 0.0 || y[k] > 1.0)
            throw ConfigError(std::string(who) + ": estimates must lie in [0, 1]");
        if (!(e[k] > 0.0) || !std::isfinite(e[k]))
            throw ConfigError(std::string(who) + ": errors must be positive and finite");
    }
}

} // namespace

RateFit fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& y,
                              const std::vector<double>& e) {
    check_series(t, y, e, "fit_exponential_decay");
    RateFit fit;

    // Seed: weighted line through log P; sigma(log P) = sigma / P.
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (y[k] <= 0.0) {
            ++fit.excluded_from_seed;
            continue;
        }
        const double w = (y[k] / e[k]) * (y[k] / e[k]);
        const double ly = std::log(y[k]);
        sw += w;
        swx += w * t[k];
        swy += w * ly;
        swxx += w * t[k] * t[k];
        swxy += w * t[k] * ly;
        ++fit.points_used;
    }
    if (fit.points_used < 3)
        throw ConfigError("fit_exponential_decay: fewer than 3 usable (positive) estimates");
    if (fit.excluded_from_seed > 0)
        fit.warnings.push_back(std::to_string(fit.excluded_from_seed) +
                               " non-positive estimate(s) excluded from the log-linear seed");
    const double det = sw * swxx - swx * swx;
    if (!(det > 0.0)) throw ConfigError("fit_exponential_decay: time points are degenerate");
    double slope = (sw * swxy - swx * swy) / det;
    double icept = (swy - slope * swx) / sw;
    double amp = std::exp(icept);
    double rate = -slope;

    // Gauss-Newton on all points until the step stalls.
    const auto n = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd j(n, 2);
    Eigen::VectorXd r(n);
    auto residuals = [&](double a, double g) {
        double chi2 = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double ex = std::exp(-g * t[k]);
            r(k) = (y[k] - a * ex) / e[k];
            j(k, 0) = ex / e[k];
            j(k, 1) = -a * t[k] * ex / e[k];
            chi2 += r(k) * r(k);
        }
        return chi2;
    };
    double chi2 = residuals(amp, rate);
    for (fit.iterations = 0; fit.iterations < 100; ++fit.iterations) {
        const Eigen::Vector2d step = j.colPivHouseholderQr().solve(r);
        double lambda = 1.0;
        double trial = chi2;
        for (int h = 0; h < 40; ++h) {
            trial = residuals(amp + lambda * step(0), rate + lambda * step(1));
            if (trial <= chi2) break;
            lambda *= 0.5;
        }
        if (trial > chi2) {
            residuals(amp, rate);
            break;
        }
        amp += lambda * step(0);
        rate += lambda * step(1);
        const bool done = std::abs(lambda * step(1)) <= 1e-15 * std::max(1.0, std::abs(rate)) &&
                          std::abs(lambda * step(0)) <= 1e-15 * std::max(1.0, std::abs(amp));
        chi2 = trial;
        if (done) break;
    }
    chi2 = residuals(amp, rate);
    const Eigen::Matrix2d cov = (j.transpose() * j).inverse();
    fit.value = rate;
    fit.amplitude = amp;
    fit.stderr_value = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.chi2 = chi2;
    fit.points_used = t.size();
    return fit;
}

namespace {

double rabi_chi2(double g, double omega, const std::vector<double>& t, const std::vector<double>& y,
                 const std::vector<double>& e) {
    const SystemParams p(omega, 0.0, std::max(g, 0.0), 0.0);
    // Integrate from t = 0 so the first sample need not be the initial time.
    std::vector<double> grid;
    grid.reserve(t.size() + 1);
    if (t.front() > 0.0) grid.push_back(0.0);
    grid.insert(grid.end(), t.begin(), t.end());
    const auto tr = dynamics::evolve_master(p, DensityMatrix::ground(), grid);
    const std::size_t off = grid.size() - t.size();
    double chi2 = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double d = (tr.states[k + off](0, 0).real() - y[k]) / e[k];
        chi2 += d * d;
    }
    return chi2;
}

} // namespace

RateFit fit_dephasing_rabi(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& e,
                           double omega, const DephasingFitOptions& opts) {
    check_series(t, y, e, "fit_dephasing_rabi");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("fit_dephasing_rabi: omega must be positive");
    if (t.front() < 0.0) throw ConfigError("fit_dephasing_rabi: times must be non-negative");
    if (opts.scan_points < 3 || !(opts.gamma_max > 0.0)) throw ConfigError("fit_dephasing_rabi: invalid scan");
    auto f = [&](double g) { return rabi_chi2(g, omega, t, y, e); };

    const double gmax = opts.gamma_max * omega;
    const int ns = opts.scan_points;
    std::vector<double> grid(ns), val(ns);
    int best = 0;
    for (int i = 0; i < ns; ++i) {
        grid[i] = gmax * i / (ns - 1);
        val[i] = f(grid[i]);
        if (val[i] < val[best]) best = i;
    }
    double lo = grid[std::max(best - 1, 0)];
    double hi = grid[std::min(best + 1, ns - 1)];

    // Golden section on [lo, hi].
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    RateFit fit;
    while (hi - lo > opts.xtol * omega && fit.iterations < 200) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
        ++fit.iterations;
    }
    double g = 0.5 * (lo + hi);
    double fg = f(g);
    // The scan end points are candidates too (the bracket may touch gamma = 0).
    for (double edge : {grid[std::max(best - 1, 0)], grid[std::min(best + 1, ns - 1)]}) {
        const double fe = f(edge);
        if (fe < fg) {
            g = edge;
            fg = fe;
        }
    }
    if (best == ns - 1) fit.warnings.push_back("minimum at the upper edge of the scan; increase gamma_max");

    const double h = std::max(1e-4 * omega, 1e-3 * g);
    double curv;
    if (g >= h) {
        curv = (f(g + h) - 2.0 * fg + f(g - h)) / (h * h);
    } else {
        curv = (f(g + 2.0 * h) - 2.0 * f(g + h) + fg) / (h * h);
    }
    fit.value = g;
    fit.chi2 = fg;
    fit.points_used = t.size();
    fit.stderr_value = curv > 0.0 ? std::sqrt(2.0 / curv) : std::numeric_limits<double>::infinity();
    const double ref = std::max(g, 0.1 * omega);
    if (!(fit.stderr_value / ref <= opts.flat_threshold)) {
        fit.wide_interval = true;
        std::ostringstream os;
        os << "objective is flat near gamma_phi = " << g << " (stderr " << fit.stderr_value
           << "); the interval is wide";
        fit.warnings.push_back(os.str());
    }
    return fit;
}

namespace {

ShotData draw(const std::vector<double>& t, const std::vector<double>& p, std::size_t shots, std::uint64_t seed) {
    if (shots < 1) throw ConfigError("shot count must be >= 1");
    ShotData d;
    d.times = t;
    const double n = static_cast<double>(shots);
    for (std::size_t k = 0; k < t.size(); ++k) {
        Rng rng(seed, k);
        std::binomial_distribution<long long> bin(static_cast<long long>(shots), std::clamp(p[k], 0.0, 1.0));
        const double ph = static_cast<double>(bin(rng)) / n;
        d.estimates.push_back(ph);
        d.errors.push_back(std::max(std::sqrt(ph * (1.0 - ph) / n), 1.0 / n));
    }
    return d;
}

} // namespace

ShotData simulate_decay_data(double gamma0, const std::vector<double>& t, std::size_t shots, std::uint64_t seed) {
    std::vector<double> p;
    for (double x : t) p.push_back(std::exp(-gamma0 * x));
    return draw(t, p, shots, seed);
}

ShotData simulate_rabi_data(double omega, double gammaphi, const std::vector<double>& t, std::size_t shots,
                            std::uint64_t seed) {
    std::vector<double> grid;
    if (t.empty() || t.front() > 0.0) grid.push_back(0.0);
    grid.insert(grid.end(), t.begin(), t.end());
    const auto tr = dynamics::evolve_master(SystemParams(omega, 0.0, gammaphi, 0.0), DensityMatrix::ground(), grid);
    std::vector<double> p;
    for (std::size_t k = grid.size() - t.size(); k < grid.size(); ++k) p.push_back(tr.states[k](0, 0).real());
    return draw(t, p, shots, seed);
}

} // namespace lep::expsim

// calibration.hpp: instrument-to-rate curves and the two rate fitters

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lepkit/params.hpp"

namespace lep::expsim {

enum class CurveKind { DecayVsPower, DephasingVsVpp };

// rate = a x^2 + b x + c on [x_min, x_max].
struct CalibrationCurve {
    CurveKind kind = CurveKind::DecayVsPower;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
    std::string input_unit;
    std::string output_unit;

    static CalibrationCurve decay_vs_power();   // 854 nm repump power in uW
    static CalibrationCurve dephasing_vs_vpp(); // white-noise amplitude in Vpp

    double polynomial(double x) const { return (a * x + b) * x + c; }
};

const char* to_string(CurveKind k);

struct CalibratedRate {
    double rate = 0.0;
    bool clamped = false;
    std::string warning;
};

CalibratedRate calibrate_rate(const CalibrationCurve& curve, double x);

struct RateFit {
    double value = 0.0;
    double stderr_value = 0.0;
    double amplitude = 1.0;     // decay fit only
    double chi2 = 0.0;
    std::size_t points_used = 0;
    std::size_t excluded_from_seed = 0;
    int iterations = 0;
    bool wide_interval = false;
    std::vector<std::string> warnings;
};

// Weighted least squares of P(t) = A exp(-gamma0 t). Errors must be positive.
RateFit fit_exponential_decay(const std::vector<double>& times, const std::vector<double>& survival,
                              const std::vector<double>& errors);

struct DephasingFitOptions {
    double gamma_max = 10.0;      // in units of omega
    int scan_points = 81;
    double xtol = 1e-12;          // golden-section tolerance, units of omega
    double flat_threshold = 0.25; // stderr / max(estimate, 0.1 omega) above this flags a wide interval
};

// 1-D fit of gamma_phi from resonant Rabi populations starting in |g>, with
// the model generated by the dephasing-only master equation.
RateFit fit_dephasing_rabi(const std::vector<double>& times, const std::vector<double>& populations,
                           const std::vector<double>& errors, double omega, const DephasingFitOptions& opts = {});

struct ShotData {
    std::vector<double> times;
    std::vector<double> estimates;
    std::vector<double> errors; // sqrt(p(1-p)/n), floored at 1/n
};

// Binomial shelving data for pure decay from |e>.
ShotData simulate_decay_data(double gamma0, const std::vector<double>& times, std::size_t shots,
                             std::uint64_t seed);
// Binomial Rabi-population data with dephasing only, starting in |g>.
ShotData simulate_rabi_data(double omega, double gammaphi, const std::vector<double>& times, std::size_t shots,
                            std::uint64_t seed);

} // namespace lep::expsim

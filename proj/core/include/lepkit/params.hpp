// params.hpp: the physical parameter point of the driven, dissipative qubit

#pragma once

#include <string>

namespace lep {

// Tolerance ladder used across modules.
namespace tol {
inline constexpr double exact = 1e-15;       // representation-exact checks
inline constexpr double composed = 1e-12;    // composed arithmetic
inline constexpr double positivity = 1e-9;   // density-matrix PSD check
} // namespace tol

// Drive and dissipation parameters, ħ = 1, angular-frequency units.
//
// gamma is the total dissipation rate, split by alpha into decay
// (gamma0 = alpha * gamma, |e> -> |g>) and pure dephasing of |e>
// (gammaphi = (1 - alpha) * gamma). delta is the laser detuning
// omega_l - omega_0; the raw optical frequencies are never stored.
class SystemParams {
public:
    // Throws ConfigError unless omega >= 0, gamma >= 0, 0 <= alpha <= 1 and
    // all values are finite.
    SystemParams(double omega, double delta, double gamma, double alpha);

    // Dimensionless point with omega = 1.
    static SystemParams unit(double delta_over_omega, double gamma_over_omega, double alpha) {
        return {1.0, delta_over_omega, gamma_over_omega, alpha};
    }

    double omega() const noexcept { return omega_; }
    double delta() const noexcept { return delta_; }
    double gamma() const noexcept { return gamma_; }
    double alpha() const noexcept { return alpha_; }

    double gamma0() const noexcept { return alpha_ * gamma_; }
    // Complement of gamma0 so that gamma0() + gammaphi() reproduces gamma().
    double gammaphi() const noexcept { return gamma_ - gamma0(); }

    // Largest rate present; the natural scale for step sizes and tolerances.
    double rate_scale() const noexcept;

    // Ratios used throughout; throw ConfigError when omega == 0.
    double gamma_over_omega() const;
    double delta_over_omega() const;

    SystemParams with_gamma(double gamma) const { return {omega_, delta_, gamma, alpha_}; }
    SystemParams with_delta(double delta) const { return {omega_, delta, gamma_, alpha_}; }
    SystemParams with_alpha(double alpha) const { return {omega_, delta_, gamma_, alpha}; }

    std::string describe() const;

    friend bool operator==(const SystemParams&, const SystemParams&) = default;

private:
    double omega_;
    double delta_;
    double gamma_;
    double alpha_;
};

} // namespace lep

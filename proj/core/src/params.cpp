#include "lepkit/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lepkit/errors.hpp"

namespace lep {

SystemParams::SystemParams(double omega, double delta, double gamma, double alpha)
    : omega_(omega), delta_(delta), gamma_(gamma), alpha_(alpha) {
    if (!std::isfinite(omega) || !std::isfinite(delta) || !std::isfinite(gamma) || !std::isfinite(alpha))
        throw ConfigError("SystemParams: non-finite value in " + describe());
    if (omega < 0.0) throw ConfigError("SystemParams: omega must be >= 0, got " + describe());
    if (gamma < 0.0) throw ConfigError("SystemParams: gamma must be >= 0, got " + describe());
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("SystemParams: alpha must lie in [0, 1], got " + describe());
}

double SystemParams::rate_scale() const noexcept {
    return std::max({omega_, std::abs(delta_), gamma_});
}

double SystemParams::gamma_over_omega() const {
    if (omega_ == 0.0) throw ConfigError("gamma/omega undefined at omega = 0");
    return gamma_ / omega_;
}

double SystemParams::delta_over_omega() const {
    if (omega_ == 0.0) throw ConfigError("delta/omega undefined at omega = 0");
    return delta_ / omega_;
}

std::string SystemParams::describe() const {
    std::ostringstream os;
    os.precision(12);
    os << "(omega=" << omega_ << ", delta=" << delta_ << ", gamma=" << gamma_ << ", alpha=" << alpha_ << ")";
    return os.str();
}

} // namespace lep

#include "lepkit/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lepkit/errors.hpp"
#include "lepkit/random.hpp"

namespace lep::expsim {

Mat2 rotation(double theta, double phi) {
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    // n.sigma with n = (cos phi, -sin phi, 0): off-diagonal (e,g) entry e^{i phi}.
    const cplx up = std::polar(1.0, phi);
    Mat2 u;
    u << c, -I * s * up, -I * s * std::conj(up), c;
    return u;
}

DensityMatrix apply_rotation(const DensityMatrix& rho, double theta, double phi) {
    const Mat2 u = rotation(theta, phi);
    return DensityMatrix(u * rho.matrix() * u.adjoint());
}

const char* to_string(Basis b) {
    switch (b) {
    case Basis::X: return "x";
    case Basis::Y: return "y";
    case Basis::Z: return "z";
    }
    return "?";
}

double bright_probability(const DensityMatrix& rho, Basis basis) {
    switch (basis) {
    case Basis::X: return std::clamp(apply_rotation(rho, std::numbers::pi / 2, std::numbers::pi / 2).ee().real(), 0.0, 1.0);
    case Basis::Y: return std::clamp(apply_rotation(rho, std::numbers::pi / 2, 0.0).ee().real(), 0.0, 1.0);
    case Basis::Z: return std::clamp(rho.ee().real(), 0.0, 1.0);
    }
    return 0.0;
}

Measurement measure_analytic(const DensityMatrix& rho, Basis basis) {
    Measurement m;
    m.basis = basis;
    m.p_e = bright_probability(rho, basis);
    return m;
}

Measurement simulate_measurement(const DensityMatrix& rho, Basis basis, std::size_t n_shots, std::uint64_t seed) {
    if (n_shots < 1) throw ConfigError("simulate_measurement: n_shots must be >= 1");
    Measurement m;
    m.basis = basis;
    m.shots = n_shots;
    const double p = bright_probability(rho, basis);
    Rng rng(seed);
    std::binomial_distribution<long long> bin(static_cast<long long>(n_shots), p);
    m.bright = static_cast<std::size_t>(bin(rng));
    const double n = static_cast<double>(n_shots);
    m.p_e = static_cast<double>(m.bright) / n;
    m.stderr_p = std::sqrt(m.p_e * (1.0 - m.p_e) / n);
    return m;
}

Reconstruction reconstruct_state(double px, double py, double pz) {
    for (double p : {px, py, pz})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("reconstruct_state: probabilities must lie in [0, 1]");
    Reconstruction r;
    r.raw = 0.5 * pauli::identity() + (px - 0.5) * pauli::x() + (py - 0.5) * pauli::y() + (pz - 0.5) * pauli::z();
    Eigen::SelfAdjointEigenSolver<Mat2> es(r.raw, Eigen::EigenvaluesOnly);
    r.raw_min_eigenvalue = es.eigenvalues()(0);
    r.raw_is_state = r.raw_min_eigenvalue >= 0.0;
    r.projected = r.raw_is_state ? DensityMatrix(r.raw) : DensityMatrix(project_to_state(r.raw));
    return r;
}

TomographyResult tomography(const DensityMatrix& rho, std::size_t n_shots, std::uint64_t seed) {
    TomographyResult res;
    constexpr std::array<Basis, 3> bases{Basis::X, Basis::Y, Basis::Z};
    for (std::size_t i = 0; i < 3; ++i) {
        res.measurements[i] = n_shots == 0 ? measure_analytic(rho, bases[i])
                                           : simulate_measurement(rho, bases[i], n_shots, stream_seed(seed, i));
    }
    res.state = reconstruct_state(res.measurements[0].p_e, res.measurements[1].p_e, res.measurements[2].p_e);
    res.stderr_re_eg = res.measurements[0].stderr_p;
    res.stderr_im_eg = res.measurements[1].stderr_p;
    res.stderr_ee = res.measurements[2].stderr_p;
    return res;
}

} // namespace lep::expsim

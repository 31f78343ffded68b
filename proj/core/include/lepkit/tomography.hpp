// tomography.hpp: pulse rotations, shot-noise projective measurement and
// Pauli-basis state reconstruction

#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "lepkit/lindblad.hpp"

namespace lep::expsim {

// U = exp(-i theta/2 (cos(phi) sx - sin(phi) sy)), i.e. the drive
// (theta/2)(e^{i phi} |e><g| + h.c.). With this sign R(pi/2, pi/2) maps
// (|e>+|g>)/sqrt2 onto |e> and R(pi/2, 0) does the same for (|e>+i|g>)/sqrt2.
Mat2 rotation(double theta, double phi);
DensityMatrix apply_rotation(const DensityMatrix& rho, double theta, double phi);

enum class Basis { X, Y, Z };
const char* to_string(Basis b);

struct Measurement {
    Basis basis = Basis::Z;
    double p_e = 0.0;
    double stderr_p = 0.0;       // sqrt(p(1-p)/n); 0 in analytic mode
    std::size_t shots = 0;       // 0 marks the analytic (infinite-shot) mode
    std::size_t bright = 0;
};

// Probability of the bright (|e>) outcome after the basis pulse.
double bright_probability(const DensityMatrix& rho, Basis basis);
Measurement simulate_measurement(const DensityMatrix& rho, Basis basis, std::size_t n_shots, std::uint64_t seed);
Measurement measure_analytic(const DensityMatrix& rho, Basis basis);

struct Reconstruction {
    Mat2 raw;                    // I/2 + sum_i (P_i - 1/2) sigma_i, possibly not PSD
    bool raw_is_state = true;
    double raw_min_eigenvalue = 0.0;
    DensityMatrix projected = DensityMatrix::maximally_mixed(); // nearest PSD, unit trace
};

Reconstruction reconstruct_state(double px, double py, double pz);

struct TomographyResult {
    std::array<Measurement, 3> measurements; // x, y, z
    Reconstruction state;
    // stderr of rho_ee, Re rho_eg, Im rho_eg
    double stderr_ee = 0.0;
    double stderr_re_eg = 0.0;
    double stderr_im_eg = 0.0;
};

// n_shots == 0 selects the analytic mode. Each basis draws from its own
// stream of the given seed.
TomographyResult tomography(const DensityMatrix& rho, std::size_t n_shots, std::uint64_t seed);

} // namespace lep::expsim

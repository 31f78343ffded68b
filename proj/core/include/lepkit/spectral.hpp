// spectral.hpp: eigenvalues, eigenvectors and steady state of the 4x4 Liouvillian

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "lepkit/errors.hpp"
#include "lepkit/lindblad.hpp"

namespace lep::spectral {

// C(E) = E^3 + c2 E^2 + c1 E + c0, the factor left after removing the
// guaranteed zero root: det(E - L) = E * C(E).
struct CubicCoefficients {
    cplx c2;
    cplx c1;
    cplx c0;
    // |constant term of the quartic| / ||L||_F^4 (must vanish).
    double quartic_residual = 0.0;

    cplx operator()(cplx e) const { return ((e + c2) * e + c1) * e + c0; }
    cplx derivative(cplx e) const { return (3.0 * e + 2.0 * c2) * e + c1; }
};

// Quartic characteristic coefficients of det(E - M) by the Faddeev-LeVerrier
// recursion: det(E - M) = E^4 + a[3] E^3 + a[2] E^2 + a[1] E + a[0].
std::array<cplx, 4> faddeev_leverrier(const Mat4& m);

// Throws ConsistencyError if the quartic's constant term exceeds
// 1e-10 ||L||^4.
CubicCoefficients characteristic_cubic(const SystemParams& p);
CubicCoefficients characteristic_cubic(const Liouvillian4& l);

// Roots of a monic complex cubic by Cardano's formula followed by guarded
// Newton polishing. Order: as produced by the cube-root branches.
std::array<cplx, 3> cubic_roots(const CubicCoefficients& c);

// Per-eigenvalue and pairwise coalescence diagnostics.
struct Diagnostics {
    double min_pair_gap = 0.0;                  // over the nonzero branches
    std::array<double, 3> pair_gap{};           // |E0-E1|, |E0-E2|, |E1-E2|
    std::array<double, 3> pair_overlap{};       // |<v_i|v_j>| for the same pairs
    std::array<std::array<double, 2>, 4> smallest_sv{}; // two smallest sv of L - E_k
    std::array<int, 4> geometric_multiplicity{};
};

// Four eigenvalues; index 3 is the zero branch (E4 = 0), indices 0..2 the
// cubic (nonzero) branches. Vectors are present only for full solves.
struct Spectrum {
    std::array<cplx, 4> values{};
    std::optional<Mat4> vectors; // column k belongs to values[k]
    std::array<int, 4> labels{1, 2, 3, 4};
    std::optional<Diagnostics> diagnostics;

    std::array<cplx, 3> nonzero() const { return {values[0], values[1], values[2]}; }
    cplx sum() const { return values[0] + values[1] + values[2] + values[3]; }
};

// Closed form: zero root plus Cardano roots of the characteristic cubic,
// sorted by the exact-phase convention (Re ascending, then Im descending).
Spectrum eigenvalues_closed_form(const SystemParams& p);

struct EigenOptions {
    double residual_tol = 1e-9; // relative to ||L||_F
};

// General solver for any 4x4 complex matrix. Eigenvectors are unit-norm
// with the largest-magnitude component real positive. Near-defective
// eigenvalues get the smallest right singular vector of (L - E) as their
// eigenvector. The eigenvalue of smallest modulus is placed last. Throws
// NumericalError if any residual ||Lv - Ev|| exceeds residual_tol ||L||.
Spectrum eigen_full(const Mat4& l, const EigenOptions& opts = {});
inline Spectrum eigen_full(const Liouvillian4& l, const EigenOptions& opts = {}) {
    return eigen_full(l.matrix(), opts);
}

// Singular values of m in ascending order.
Eigen::Vector4d singular_values_ascending(const Mat4& m);
// Unit right singular vector for the smallest singular value.
Vec4 smallest_singular_vector(const Mat4& m);
// Number of singular values above threshold.
int numerical_rank(const Mat4& m, double threshold);

// Thrown when the null space of L is more than one-dimensional.
class DegenerateSteadyState : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Unique fixed point of the dynamics (right null vector of L), normalized to
// unit trace.
DensityMatrix steady_state(const SystemParams& p);

struct BranchCurves {
    std::vector<SystemParams> points;
    // values[k][b] is branch b+1 (E1..E3) at point k; E4 = 0 is implicit.
    std::vector<std::array<cplx, 3>> values;
    // Sweep steps whose best and second-best assignments were within
    // ambiguity_tol of each other.
    std::vector<std::size_t> ambiguous_steps;
};

// Assigns persistent labels E1..E3 along an ordered sweep. The first point
// is labeled by Re E ascending (ties: Im descending); each subsequent point by
// the permutation of its closed-form roots that minimizes the total distance
// to the previous labeled set.
BranchCurves track_branches(const std::vector<SystemParams>& sweep, double ambiguity_tol = 1e-12);

// Matches `next` to `previous` by the minimum-total-distance permutation.
// Sets `ambiguous` when the two best totals are within tol.
std::array<cplx, 3> match_branches(const std::array<cplx, 3>& previous, const std::array<cplx, 3>& next,
                                   double tol, bool* ambiguous = nullptr);

// Sort by Re ascending, ties (within tie_tol) broken by Im descending.
bool exact_phase_less(cplx a, cplx b, double tie_tol = 1e-9);
std::array<cplx, 3> exact_phase_order(std::array<cplx, 3> v, double tie_tol = 1e-9);

} // namespace lep::spectral

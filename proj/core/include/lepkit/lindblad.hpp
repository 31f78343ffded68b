// lindblad.hpp: states, Hamiltonian, Lindblad generator and its 4x4 superoperator

#pragma once

#include <complex>

#include <Eigen/Dense>

#include "lepkit/params.hpp"

namespace lep {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;

inline constexpr cplx I{0.0, 1.0};

// Pauli matrices in the (e, g) basis: |e> = (1, 0), |g> = (0, 1),
// sigma_z = |e><e| - |g><g|.
namespace pauli {
const Mat2& identity();
const Mat2& x();
const Mat2& y();
const Mat2& z();
} // namespace pauli

// Basis projectors and the lowering operator |g><e|.
namespace ket {
Vec2 e();
Vec2 g();
} // namespace ket
Mat2 projector_e();
Mat2 projector_g();
Mat2 lowering();

// Hermitian, unit-trace, positive semidefinite 2x2 state.
class DensityMatrix {
public:
    // Validates the invariants; throws ConfigError naming the violated one.
    explicit DensityMatrix(const Mat2& m, double positivity_tol = tol::positivity);

    static DensityMatrix ground();
    static DensityMatrix excited();
    static DensityMatrix maximally_mixed();
    static DensityMatrix pure(const Vec2& psi);
    // 1/2 (I + r . sigma); |r| <= 1.
    static DensityMatrix from_bloch(double x, double y, double z);

    const Mat2& matrix() const noexcept { return m_; }
    cplx ee() const { return m_(0, 0); }
    cplx eg() const { return m_(0, 1); }
    cplx ge() const { return m_(1, 0); }
    cplx gg() const { return m_(1, 1); }

    double population_e() const { return m_(0, 0).real(); }
    // tr(rho sigma_i)
    double expect_x() const;
    double expect_y() const;
    double expect_z() const;
    double min_eigenvalue() const;

private:
    Mat2 m_;
};

// Checks the density-matrix invariants without constructing; returns an empty
// string when valid, otherwise a description of the first violation.
std::string density_violation(const Mat2& m, double positivity_tol = tol::positivity);

// H = -delta |e><e| + omega/2 (|e><g| + |g><e|)
Mat2 build_hamiltonian(const SystemParams& p);

// -i[H, rho] + gamma0 D_{|g><e|}[rho] + gammaphi D_{|e><e|}[rho],
// with D_A[rho] = A rho A^dag - 1/2 {A^dag A, rho}. Accepts any 2x2 matrix.
Mat2 lindblad_rhs(const SystemParams& p, const Mat2& rho);
Mat2 dissipator(const Mat2& a, const Mat2& rho);

// Vectorized density matrix, ordering (rho_ee, rho_eg, rho_ge, rho_gg).
Vec4 vectorize(const Mat2& rho);
inline Vec4 vectorize(const DensityMatrix& rho) { return vectorize(rho.matrix()); }

enum class DevecMode {
    Strict,  // reject vectors that are not a Hermitian unit-trace PSD state
    Lenient, // project onto the nearest valid state (noisy data)
};
DensityMatrix devectorize(const Vec4& v, DevecMode mode = DevecMode::Strict,
                          double tolerance = tol::positivity);
// Plain reshaping without any checks.
Mat2 unvec(const Vec4& v);

// Nearest PSD unit-trace matrix to the Hermitian part of m: eigenvalues are
// clipped at zero and renormalized to unit sum.
Mat2 project_to_state(const Mat2& m);

// Liouvillian superoperator in the "energy" convention:
// d(vec rho)/dt = -i L vec rho, so its eigenvalues E give Lindblad rates -iE.
class Liouvillian4 {
public:
    explicit Liouvillian4(const Mat4& m) : m_(m) {}
    const Mat4& matrix() const noexcept { return m_; }
    double norm() const { return m_.norm(); }
    // -i L vec(rho)
    Vec4 apply_generator(const Vec4& v) const { return -I * (m_ * v); }

private:
    Mat4 m_;
};

Liouvillian4 build_liouvillian(const SystemParams& p);

struct AlphaDecomposition {
    Liouvillian4 dephasing; // L(alpha = 0)
    Liouvillian4 decay;     // L(alpha = 1)
    double reconstruction_error; // max |(1-a) L_phi + a L_0 - L(a)|
};

// Splits L(alpha) into its pure-dephasing and pure-decay endpoints and checks
// that the convex combination reproduces L(alpha). Throws ConsistencyError if
// the reconstruction misses by more than a few ulps of the matrix scale.
AlphaDecomposition decompose_alpha(const SystemParams& p);

// Frobenius norm of AB - BA.
double commutator_norm(const Liouvillian4& a, const Liouvillian4& b);

} // namespace lep

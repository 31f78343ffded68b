#include "lepkit/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "lepkit/errors.hpp"

namespace lep {

namespace pauli {

const Mat2& identity() {
    static const Mat2 m = Mat2::Identity();
    return m;
}

const Mat2& x() {
    static const Mat2 m = (Mat2() << 0.0, 1.0, 1.0, 0.0).finished();
    return m;
}

const Mat2& y() {
    static const Mat2 m = (Mat2() << 0.0, -I, I, 0.0).finished();
    return m;
}

const Mat2& z() {
    static const Mat2 m = (Mat2() << 1.0, 0.0, 0.0, -1.0).finished();
    return m;
}

} // namespace pauli

namespace ket {
Vec2 e() { return Vec2(1.0, 0.0); }
Vec2 g() { return Vec2(0.0, 1.0); }
} // namespace ket

Mat2 projector_e() { return ket::e() * ket::e().adjoint(); }
Mat2 projector_g() { return ket::g() * ket::g().adjoint(); }
Mat2 lowering() { return ket::g() * ket::e().adjoint(); }

std::string density_violation(const Mat2& m, double positivity_tol) {
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol::composed * std::max(1.0, m.cwiseAbs().maxCoeff())) {
        std::ostringstream os;
        os << "not Hermitian (max |rho - rho^dag| = " << herm << ")";
        return os.str();
    }
    const cplx tr = m.trace();
    if (std::abs(tr - 1.0) > positivity_tol) {
        std::ostringstream os;
        os << "trace " << tr.real() << (tr.imag() >= 0 ? "+" : "") << tr.imag() << "i differs from 1";
        return os.str();
    }
    Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -positivity_tol) {
        std::ostringstream os;
        os << "not positive semidefinite (min eigenvalue " << es.eigenvalues().minCoeff() << ")";
        return os.str();
    }
    return {};
}

DensityMatrix::DensityMatrix(const Mat2& m, double positivity_tol) : m_(m) {
    if (auto why = density_violation(m, positivity_tol); !why.empty())
        throw ConfigError("DensityMatrix: " + why);
    // Store the exactly Hermitian part.
    m_ = 0.5 * (m + m.adjoint());
}

DensityMatrix DensityMatrix::ground() { return DensityMatrix(projector_g()); }
DensityMatrix DensityMatrix::excited() { return DensityMatrix(projector_e()); }
DensityMatrix DensityMatrix::maximally_mixed() { return DensityMatrix(0.5 * Mat2::Identity()); }

DensityMatrix DensityMatrix::pure(const Vec2& psi) {
    const double n = psi.norm();
    if (n == 0.0) throw ConfigError("DensityMatrix::pure: zero vector");
    const Vec2 u = psi / n;
    return DensityMatrix(u * u.adjoint());
}

DensityMatrix DensityMatrix::from_bloch(double x, double y, double z) {
    return DensityMatrix(0.5 * (pauli::identity() + x * pauli::x() + y * pauli::y() + z * pauli::z()));
}

double DensityMatrix::expect_x() const { return (m_ * pauli::x()).trace().real(); }
double DensityMatrix::expect_y() const { return (m_ * pauli::y()).trace().real(); }
double DensityMatrix::expect_z() const { return (m_ * pauli::z()).trace().real(); }

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Mat2> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Mat2 build_hamiltonian(const SystemParams& p) {
    const double half = 0.5 * p.omega();
    Mat2 h;
    h << -p.delta(), half, half, 0.0;
    return h;
}

Mat2 dissipator(const Mat2& a, const Mat2& rho) {
    const Mat2 ada = a.adjoint() * a;
    return a * rho * a.adjoint() - 0.5 * (ada * rho + rho * ada);
}

Mat2 lindblad_rhs(const SystemParams& p, const Mat2& rho) {
    const Mat2 h = build_hamiltonian(p);
    Mat2 out = -I * (h * rho - rho * h);
    if (p.gamma0() != 0.0) out += p.gamma0() * dissipator(lowering(), rho);
    if (p.gammaphi() != 0.0) out += p.gammaphi() * dissipator(projector_e(), rho);
    return out;
}

Vec4 vectorize(const Mat2& rho) {
    return Vec4(rho(0, 0), rho(0, 1), rho(1, 0), rho(1, 1));
}

Mat2 unvec(const Vec4& v) {
    Mat2 m;
    m << v(0), v(1), v(2), v(3);
    return m;
}

Mat2 project_to_state(const Mat2& m) {
    const Mat2 h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat2> es(h);
    Eigen::Vector2d w = es.eigenvalues().cwiseMax(0.0);
    const double s = w.sum();
    if (s <= 0.0) return 0.5 * Mat2::Identity();
    w /= s;
    const Mat2& u = es.eigenvectors();
    Mat2 out = u * w.cast<cplx>().asDiagonal() * u.adjoint();
    return 0.5 * (out + out.adjoint());
}

DensityMatrix devectorize(const Vec4& v, DevecMode mode, double tolerance) {
    const Mat2 m = unvec(v);
    if (mode == DevecMode::Lenient) return DensityMatrix(project_to_state(m));

    if (std::abs(v(2) - std::conj(v(1))) > tolerance) {
        std::ostringstream os;
        os << "devectorize: rho_ge != conj(rho_eg) (mismatch " << std::abs(v(2) - std::conj(v(1))) << ")";
        throw ConfigError(os.str());
    }
    if (std::abs(v(0).imag()) > tolerance || std::abs(v(3).imag()) > tolerance) {
        throw ConfigError("devectorize: diagonal entries must be real");
    }
    if (std::abs((v(0) + v(3)).real() - 1.0) > tolerance) {
        std::ostringstream os;
        os << "devectorize: trace " << (v(0) + v(3)).real() << " differs from 1";
        throw ConfigError(os.str());
    }
    return DensityMatrix(m, tolerance);
}

Liouvillian4 build_liouvillian(const SystemParams& p) {
    const double h = 0.5 * p.omega();
    const double g0 = p.gamma0();
    const cplx coh = -I * (0.5 * p.gamma());
    const double d = p.delta();
    Mat4 m;
    // clang-format off
    m << -I * g0,  -h,       h,        0.0,
         -h,        coh - d, 0.0,      h,
          h,        0.0,     coh + d, -h,
          I * g0,   h,      -h,        0.0;
    // clang-format on
    return Liouvillian4(m);
}

AlphaDecomposition decompose_alpha(const SystemParams& p) {
    const Liouvillian4 dephasing = build_liouvillian(p.with_alpha(0.0));
    const Liouvillian4 decay = build_liouvillian(p.with_alpha(1.0));
    const Liouvillian4 full = build_liouvillian(p);
    const double a = p.alpha();
    const Mat4 recon = (1.0 - a) * dephasing.matrix() + a * decay.matrix();
    const double err = (recon - full.matrix()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, full.matrix().cwiseAbs().maxCoeff());
    if (err > 4.0 * std::numeric_limits<double>::epsilon() * scale) {
        std::ostringstream os;
        os << "decompose_alpha: reconstruction error " << err << " at " << p.describe();
        throw ConsistencyError(os.str());
    }
    return {dephasing, decay, err};
}

double commutator_norm(const Liouvillian4& a, const Liouvillian4& b) {
    return (a.matrix() * b.matrix() - b.matrix() * a.matrix()).norm();
}

} // namespace lep

#include "lepkit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lepkit/errors.hpp"

namespace lep::spectral {

std::array<cplx, 4> faddeev_leverrier(const Mat4& a) {
    // det(E - A) = E^4 + c[3] E^3 + c[2] E^2 + c[1] E + c[0]
    std::array<cplx, 4> c{};
    Mat4 m = Mat4::Identity();
    Mat4 am = a * m;
    c[3] = -am.trace();
    for (int k = 2; k <= 4; ++k) {
        m = am + c[4 - k + 1] * Mat4::Identity();
        am = a * m;
        c[4 - k] = -am.trace() / static_cast<double>(k);
    }
    return c;
}

CubicCoefficients characteristic_cubic(const Liouvillian4& l) {
    const auto a = faddeev_leverrier(l.matrix());
    const double n = l.norm();
    const double n4 = n * n * n * n;
    CubicCoefficients c{a[3], a[2], a[1], n4 > 0.0 ? std::abs(a[0]) / n4 : 0.0};
    if (c.quartic_residual > 1e-10) {
        std::ostringstream os;
        os << "characteristic_cubic: quartic constant term does not vanish (relative " << c.quartic_residual
           << "); the Liouvillian is not trace preserving";
        throw ConsistencyError(os.str());
    }
    return c;
}

CubicCoefficients characteristic_cubic(const SystemParams& p) {
    return characteristic_cubic(build_liouvillian(p));
}

namespace {

cplx principal_cbrt(cplx z) {
    if (z == cplx{}) return {};
    return std::polar(std::cbrt(std::abs(z)), std::arg(z) / 3.0);
}

cplx polish(const CubicCoefficients& c, cplx e) {
    double res = std::abs(c(e));
    for (int it = 0; it < 4 && res > 0.0; ++it) {
        const cplx d = c.derivative(e);
        if (d == cplx{}) break;
        const cplx next = e - c(e) / d;
        const double r = std::abs(c(next));
        if (!(r < res)) break;
        e = next;
        res = r;
    }
    return e;
}

} // namespace

std::array<cplx, 3> cubic_roots(const CubicCoefficients& c) {
    const cplx shift = c.c2 / 3.0;
    const cplx p = c.c1 - c.c2 * c.c2 / 3.0;
    const cplx q = 2.0 * c.c2 * c.c2 * c.c2 / 27.0 - c.c2 * c.c1 / 3.0 + c.c0;
    const cplx disc = q * q / 4.0 + p * p * p / 27.0;
    const cplx sq = std::sqrt(disc);
    const cplx w1 = -q / 2.0 + sq;
    const cplx w2 = -q / 2.0 - sq;
    const cplx u = principal_cbrt(std::abs(w1) >= std::abs(w2) ? w1 : w2);

    const cplx omega{-0.5, std::sqrt(3.0) / 2.0};
    std::array<cplx, 3> roots;
    if (u == cplx{}) {
        roots.fill(-shift);
        return roots;
    }
    const cplx v = -p / (3.0 * u);
    cplx wk{1.0, 0.0};
    for (int k = 0; k < 3; ++k) {
        roots[k] = polish(c, wk * u + std::conj(wk) * v - shift);
        wk *= omega;
    }
    return roots;
}

bool exact_phase_less(cplx a, cplx b, double tie_tol) {
    if (std::abs(a.real() - b.real()) > tie_tol) return a.real() < b.real();
    return a.imag() > b.imag();
}

std::array<cplx, 3> exact_phase_order(std::array<cplx, 3> v, double tie_tol) {
    std::sort(v.begin(), v.end(), [tie_tol](cplx a, cplx b) { return exact_phase_less(a, b, tie_tol); });
    return v;
}

Spectrum eigenvalues_closed_form(const SystemParams& p) {
    const auto roots = exact_phase_order(cubic_roots(characteristic_cubic(p)));
    Spectrum s;
    s.values = {roots[0], roots[1], roots[2], cplx{}};
    return s;
}

Eigen::Vector4d singular_values_ascending(const Mat4& m) {
    Eigen::JacobiSVD<Mat4> svd(m);
    Eigen::Vector4d s = svd.singularValues();
    std::sort(s.data(), s.data() + 4);
    return s;
}

Vec4 smallest_singular_vector(const Mat4& m) {
    Eigen::JacobiSVD<Mat4> svd(m, Eigen::ComputeFullV);
    // Eigen sorts singular values in decreasing order.
    return svd.matrixV().col(3).normalized();
}

int numerical_rank(const Mat4& m, double threshold) {
    const auto s = singular_values_ascending(m);
    return static_cast<int>((s.array() > threshold).count());
}

namespace {

Vec4 fix_phase(Vec4 v) {
    // Ties in modulus are common (rho and rho^dagger components), so take the
    // first component within a relative 1e-10 of the largest.
    const double top = v.cwiseAbs().maxCoeff();
    Eigen::Index imax = 0;
    while (std::abs(v(imax)) < top * (1.0 - 1e-10)) ++imax;
    const cplx c = v(imax);
    if (std::abs(c) > 0.0) v *= std::conj(c) / std::abs(c);
    v(imax) = cplx(v(imax).real(), 0.0);
    return v.normalized();
}

std::string describe_failure(const Mat4& l, const std::array<double, 4>& residuals) {
    std::ostringstream os;
    os.precision(17);
    os << "eigen_full: eigenpair residuals exceed tolerance\nmatrix:\n" << l << "\nresiduals:";
    for (double r : residuals) os << ' ' << r;
    return os.str();
}

constexpr std::array<std::array<int, 2>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

} // namespace

Spectrum eigen_full(const Mat4& l, const EigenOptions& opts) {
    Eigen::ComplexEigenSolver<Mat4> ces(l, true);
    if (ces.info() != Eigen::Success) {
        std::ostringstream os;
        os << "eigen_full: QR iteration did not converge for\n" << l;
        throw NumericalError(os.str());
    }
    const double norm = l.norm();
    const double scale = std::max(norm, std::numeric_limits<double>::min());
    const auto& vals = ces.eigenvalues();

    // Order: smallest modulus last, the rest by the exact-phase convention.
    std::array<int, 4> idx{0, 1, 2, 3};
    const int izero = static_cast<int>(std::min_element(idx.begin(), idx.end(), [&](int a, int b) {
                                           return std::abs(vals(a)) < std::abs(vals(b));
                                       }) - idx.begin());
    std::swap(idx[izero], idx[3]);
    std::sort(idx.begin(), idx.begin() + 3, [&](int a, int b) {
        const auto ea = vals(a), eb = vals(b);
        if (std::abs(ea.real() - eb.real()) > 1e-9 * scale) return ea.real() < eb.real();
        return ea.imag() > eb.imag();
    });

    Spectrum s;
    Mat4 vecs;
    std::array<double, 4> residuals{};
    Diagnostics d;
    for (int k = 0; k < 4; ++k) {
        const cplx e = vals(idx[k]);
        s.values[k] = e;
        const Mat4 shifted = l - e * Mat4::Identity();
        Vec4 v = ces.eigenvectors().col(idx[k]);
        if (v.norm() > 0.0) v.normalize();
        double r = (shifted * v).norm();
        // Inverse-iteration style vectors degrade near defective eigenvalues;
        // the smallest singular vector of (L - E) stays well defined there.
        const Vec4 alt = smallest_singular_vector(shifted);
        const double r_alt = (shifted * alt).norm();
        if (!(r <= r_alt) || !std::isfinite(r)) {
            v = alt;
            r = r_alt;
        }
        vecs.col(k) = fix_phase(v);
        residuals[k] = r;
        const auto sv = singular_values_ascending(shifted);
        d.smallest_sv[k] = {sv(0), sv(1)};
        d.geometric_multiplicity[k] = static_cast<int>((sv.array() <= 1e-6 * scale).count());
    }
    for (double r : residuals) {
        if (r > opts.residual_tol * scale && norm > 0.0) throw NumericalError(describe_failure(l, residuals));
    }
    d.min_pair_gap = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < kPairs.size(); ++q) {
        const auto [i, j] = kPairs[q];
        d.pair_gap[q] = std::abs(s.values[i] - s.values[j]);
        d.pair_overlap[q] = std::abs(vecs.col(i).dot(vecs.col(j)));
        d.min_pair_gap = std::min(d.min_pair_gap, d.pair_gap[q]);
    }
    s.vectors = vecs;
    s.diagnostics = d;
    return s;
}

DensityMatrix steady_state(const SystemParams& p) {
    const Liouvillian4 l = build_liouvillian(p);
    const double norm = l.norm();
    const auto sv = singular_values_ascending(l.matrix());
    if (norm == 0.0 || sv(1) <= 1e-9 * norm) {
        std::ostringstream os;
        os << "steady_state: null space of L is degenerate at " << p.describe()
           << " (second smallest singular value " << sv(1) << ")";
        throw DegenerateSteadyState(os.str());
    }
    const Vec4 v = smallest_singular_vector(l.matrix());
    Mat2 rho = unvec(v);
    const cplx tr = rho.trace();
    if (std::abs(tr) < 1e-12) throw NumericalError("steady_state: null vector has zero trace at " + p.describe());
    rho /= tr;
    rho = 0.5 * (rho + rho.adjoint());
    return DensityMatrix(rho);
}

std::array<cplx, 3> match_branches(const std::array<cplx, 3>& previous, const std::array<cplx, 3>& next,
                                   double tol, bool* ambiguous) {
    std::array<int, 3> perm{0, 1, 2};
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    std::array<int, 3> best_perm = perm;
    do {
        double total = 0.0;
        for (int b = 0; b < 3; ++b) total += std::abs(previous[b] - next[perm[b]]);
        if (total < best) {
            second = best;
            best = total;
            best_perm = perm;
        } else if (total < second) {
            second = total;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (ambiguous) *ambiguous = (second - best) <= tol;
    return {next[best_perm[0]], next[best_perm[1]], next[best_perm[2]]};
}

BranchCurves track_branches(const std::vector<SystemParams>& sweep, double ambiguity_tol) {
    BranchCurves out;
    out.points = sweep;
    out.values.reserve(sweep.size());
    for (std::size_t k = 0; k < sweep.size(); ++k) {
        const auto roots = cubic_roots(characteristic_cubic(sweep[k]));
        if (k == 0) {
            out.values.push_back(exact_phase_order(roots));
            continue;
        }
        bool amb = false;
        out.values.push_back(match_branches(out.values.back(), roots, ambiguity_tol, &amb));
        if (amb) out.ambiguous_steps.push_back(k);
    }
    return out;
}

} // namespace lep::spectral

#include "lepkit/extraction.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "lepkit/errors.hpp"
#include "lepkit/spectral.hpp"

namespace lep::expsim {

namespace {

// Decay: exp(-kappa t). Doublet: the two modes E = +-sqrt(q) - i kappa in
// one analytic family of q, oscillating for q > 0 and splitting into two
// decays at kappa -+ sqrt(-q) for q < 0, with the Jordan pair at q = 0.
enum class Term { Decay, Doublet };

struct Data {
    Eigen::VectorXd tau;             // times relative to the first sample
    std::vector<Eigen::VectorXd> y;
    std::vector<Eigen::VectorXd> w;  // 1 / sigma
    double dt = 0.0;
};

Data prepare(const std::vector<dynamics::Series>& series, const ExtractionOptions& opts) {
    if (series.empty()) throw ConfigError("extract_eigenvalues: no series given");
    if (opts.max_order < 1 || opts.max_order > 3) throw ConfigError("extract_eigenvalues: model order must be 1..3");
    const auto& t = series.front().times;
    const std::size_t n = t.size();
    if (n < static_cast<std::size_t>(std::max(4 * opts.max_order, 2 * opts.max_order + 4)))
        throw ConfigError("extract_eigenvalues: series too short for model order " + std::to_string(opts.max_order));
    Data d;
    d.dt = t[1] - t[0];
    if (!(d.dt > 0.0)) throw ConfigError("extract_eigenvalues: times must increase");
    d.tau.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(t[k] - t[0] - d.dt * static_cast<double>(k)) > 1e-9 * d.dt * static_cast<double>(n))
            throw ConfigError("extract_eigenvalues: series must be uniformly sampled");
        d.tau(static_cast<Eigen::Index>(k)) = t[k] - t[0];
    }
    double scale = 0.0;
    for (const auto& s : series) {
        if (s.times != t || s.values.size() != n)
            throw ConfigError("extract_eigenvalues: all series must share one time grid");
        for (double v : s.values) {
            if (!std::isfinite(v)) throw ConfigError("extract_eigenvalues: non-finite sample");
            scale = std::max(scale, std::abs(v));
        }
    }
    const double floor_sigma = opts.noiseless_sigma * std::max(scale, 1e-300);
    for (const auto& s : series) {
        d.y.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.values.data(), static_cast<Eigen::Index>(n)));
        Eigen::VectorXd w(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            double sig = floor_sigma;
            if (s.std_errors) {
                if (s.std_errors->size() != n) throw ConfigError("extract_eigenvalues: error vector length mismatch");
                sig = (*s.std_errors)[k];
                if (!(sig > 0.0)) throw ConfigError("extract_eigenvalues: errors must be positive");
            }
            w(static_cast<Eigen::Index>(k)) = 1.0 / sig;
        }
        d.w.push_back(std::move(w));
    }
    return d;
}

struct Pencil {
    Eigen::VectorXd sv;
    Eigen::MatrixXd v; // right singular vectors
};

Pencil hankel_svd(const Data& d) {
    const auto n = d.tau.size() - 1; // differenced length
    const Eigen::Index lp = n / 2;
    const Eigen::Index rows = n - lp;
    Eigen::MatrixXd h(rows * static_cast<Eigen::Index>(d.y.size()), lp + 1);
    for (std::size_t s = 0; s < d.y.size(); ++s) {
        const Eigen::VectorXd diff = d.y[s].tail(n) - d.y[s].head(n);
        for (Eigen::Index i = 0; i < rows; ++i) h.row(static_cast<Eigen::Index>(s) * rows + i) = diff.segment(i, lp + 1).transpose();
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeThinV);
    return {svd.singularValues(), svd.matrixV()};
}

std::vector<cplx> pencil_poles(const Pencil& p, int order, double dt) {
    const Eigen::Index m = order;
    const Eigen::Index rows = p.v.rows();
    const Eigen::MatrixXd v1 = p.v.topLeftCorner(rows - 1, m);
    const Eigen::MatrixXd v2 = p.v.block(1, 0, rows - 1, m);
    const Eigen::MatrixXd a = v1.completeOrthogonalDecomposition().pseudoInverse() * v2;
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    std::vector<cplx> out;
    for (Eigen::Index k = 0; k < m; ++k) {
        const cplx z = es.eigenvalues()(k);
        if (std::abs(z) < 1e-300) continue;
        const cplx e = I * std::log(z) / dt;
        if (std::isfinite(e.real()) && std::isfinite(e.imag())) out.push_back(e);
    }
    return out;
}

struct Structure {
    std::vector<Term> terms;
    std::vector<double> theta; // Decay: kappa; Pair: w, kappa
};

// Doublet parameters through two poles.
std::pair<double, double> doublet_of(cplx a, cplx b) {
    const cplx h = 0.5 * (a - b);
    return {(h * h).real(), std::max(-0.5 * (a.imag() + b.imag()), 1e-3)};
}

std::vector<Structure> structures(const std::vector<cplx>& poles) {
    std::vector<Structure> out;
    const std::size_t n = poles.size();
    auto rate = [](cplx e) { return std::max(-e.imag(), 1e-3); };
    if (n == 1) {
        out.push_back({{Term::Decay}, {rate(poles[0])}});
    } else if (n == 2) {
        const auto [q, k] = doublet_of(poles[0], poles[1]);
        out.push_back({{Term::Doublet}, {q, k}});
    } else if (n == 3) {
        for (std::size_t lone = 0; lone < 3; ++lone) {
            const auto [q, k] = doublet_of(poles[(lone + 1) % 3], poles[(lone + 2) % 3]);
            out.push_back({{Term::Doublet, Term::Decay}, {q, k, rate(poles[lone])}});
        }
    }
    return out;
}

int basis_size(const std::vector<Term>& terms) {
    int nb = 1;
    for (auto t : terms) nb += t == Term::Doublet ? 2 : 1;
    return nb;
}

// Basis columns and their derivatives with respect to the nonlinear
// parameters (dcol[k] holds d(column)/d(theta_k) for the columns it touches).
void basis(const std::vector<Term>& terms, const std::vector<double>& th, const Eigen::VectorXd& tau,
           Eigen::MatrixXd& b, std::vector<std::vector<std::pair<int, Eigen::VectorXd>>>* deriv) {
    const Eigen::Index n = tau.size();
    b.resize(n, basis_size(terms));
    b.col(0).setOnes();
    if (deriv) deriv->assign(th.size(), {});
    int col = 1;
    std::size_t p = 0;
    for (auto t : terms) {
        if (t == Term::Decay) {
            const double kap = th[p];
            const Eigen::VectorXd ex = (-kap * tau.array()).exp().matrix();
            b.col(col) = ex;
            if (deriv) (*deriv)[p].push_back({col, (-tau.array() * ex.array()).matrix()});
            col += 1;
            p += 1;
        } else {
            const double q = th[p], kap = th[p + 1];
            Eigen::ArrayXd ec(n), es(n), dec(n), des(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double t = tau(i);
                const double x = q * t * t;
                if (std::abs(x) < 1e-3) {
                    const double ex = std::exp(-kap * t);
                    ec(i) = ex * (1.0 - x / 2.0 + x * x / 24.0 - x * x * x / 720.0);
                    es(i) = ex * t * (1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0);
                    des(i) = ex * t * t * t * (-1.0 / 6.0 + x / 60.0 - x * x / 1680.0 + x * x * x / 90720.0);
                } else if (q > 0.0) {
                    const double u = std::sqrt(q), ex = std::exp(-kap * t);
                    ec(i) = ex * std::cos(u * t);
                    es(i) = ex * std::sin(u * t) / u;
                    des(i) = (t * ec(i) - es(i)) / (2.0 * q);
                } else {
                    const double u = std::sqrt(-q);
                    const double ep = std::exp(-(kap - u) * t), em = std::exp(-(kap + u) * t);
                    ec(i) = 0.5 * (ep + em);
                    es(i) = 0.5 * (ep - em) / u;
                    des(i) = (t * ec(i) - es(i)) / (2.0 * q);
                }
                dec(i) = -0.5 * t * es(i);
            }
            b.col(col) = ec.matrix();
            b.col(col + 1) = es.matrix();
            if (deriv) {
                (*deriv)[p].push_back({col, dec.matrix()});
                (*deriv)[p].push_back({col + 1, des.matrix()});
                (*deriv)[p + 1].push_back({col, (-tau.array() * ec).matrix()});
                (*deriv)[p + 1].push_back({col + 1, (-tau.array() * es).matrix()});
            }
            col += 2;
            p += 2;
        }
    }
}

struct Fit {
    Structure st;
    std::vector<double> theta;
    Eigen::VectorXd x;
    Eigen::MatrixXd cov;
    std::vector<double> sigma; // per nonlinear parameter
    double chi2 = 0.0;
    double bic = 0.0;
    std::size_t n_params = 0;
};

// Residuals r = w (B a - y) for all series, Jacobian over (theta, a_1, ..., a_S).
double evaluate(const Data& d, const Structure& st, const Eigen::VectorXd& x, Eigen::VectorXd& r,
                Eigen::MatrixXd* jac) {
    const int nth = static_cast<int>(st.theta.size());
    const int nb = basis_size(st.terms);
    const Eigen::Index n = d.tau.size();
    const auto ns = static_cast<Eigen::Index>(d.y.size());
    std::vector<double> th(x.data(), x.data() + nth);
    Eigen::MatrixXd b;
    std::vector<std::vector<std::pair<int, Eigen::VectorXd>>> deriv;
    basis(st.terms, th, d.tau, b, jac ? &deriv : nullptr);
    r.resize(n * ns);
    if (jac) jac->setZero(n * ns, x.size());
    for (Eigen::Index s = 0; s < ns; ++s) {
        const Eigen::VectorXd a = x.segment(nth + s * nb, nb);
        const auto& w = d.w[static_cast<std::size_t>(s)];
        r.segment(s * n, n) = w.cwiseProduct(b * a - d.y[static_cast<std::size_t>(s)]);
        if (jac) {
            for (int k = 0; k < nth; ++k)
                for (const auto& [c, dc] : deriv[static_cast<std::size_t>(k)])
                    jac->block(s * n, k, n, 1) += w.cwiseProduct(a(c) * dc);
            jac->block(s * n, nth + s * nb, n, nb) = w.asDiagonal() * b;
        }
    }
    return r.squaredNorm();
}

// Levenberg-Marquardt from x. A parameter index in `fixed` is held constant.
double levenberg_marquardt(const Data& d, const Structure& st, Eigen::VectorXd& x, int fixed, int max_iter,
                           Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    const auto nth = static_cast<Eigen::Index>(st.theta.size());
    double chi2 = evaluate(d, st, x, r, &j);
    if (!std::isfinite(chi2)) return chi2;
    double lambda = 1e-3;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd jtj = j.transpose() * j;
        Eigen::VectorXd g = j.transpose() * r;
        if (fixed >= 0) {
            jtj.row(fixed).setZero();
            jtj.col(fixed).setZero();
            jtj(fixed, fixed) = 1.0;
            g(fixed) = 0.0;
        }
        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd xn = x + step;
            Eigen::VectorXd rn;
            const double cn = evaluate(d, st, xn, rn, nullptr);
            if (std::isfinite(cn) && cn <= chi2) {
                const double rel = (chi2 - cn) / std::max(chi2, 1e-300);
                const double stepn = step.head(nth).norm() / std::max(1e-300, x.head(nth).norm());
                x = xn;
                chi2 = evaluate(d, st, x, r, &j);
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (rel < 1e-10 && stepn < 1e-8) it = max_iter;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
    return chi2;
}

std::optional<Fit> fit_structure(const Data& d, const Structure& st, int max_iter) {
    const int nth = static_cast<int>(st.theta.size());
    const int nb = basis_size(st.terms);
    const auto ns = static_cast<Eigen::Index>(d.y.size());
    Eigen::VectorXd x(nth + ns * nb);
    for (int k = 0; k < nth; ++k) x(k) = st.theta[static_cast<std::size_t>(k)];
    {
        Eigen::MatrixXd b;
        basis(st.terms, st.theta, d.tau, b, nullptr);
        for (Eigen::Index s = 0; s < ns; ++s) {
            const auto& w = d.w[static_cast<std::size_t>(s)];
            const Eigen::MatrixXd bw = w.asDiagonal() * b;
            x.segment(nth + s * nb, nb) =
                bw.completeOrthogonalDecomposition().solve(w.cwiseProduct(d.y[static_cast<std::size_t>(s)]));
        }
    }
    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    const double chi2 = levenberg_marquardt(d, st, x, -1, max_iter, r, j);
    if (!std::isfinite(chi2)) return std::nullopt;
    // Fold oscillation frequencies above Nyquist back into [0, pi/dt]; the
    // sampled model is unchanged once the sine amplitude follows.
    {
        const double period = 2.0 * std::numbers::pi / d.dt;
        Eigen::Index p = 0;
        int col = 1;
        bool moved = false;
        for (auto t : st.terms) {
            if (t == Term::Doublet) {
                if (x(p) > 0.25 * period * period) {
                    const double w = std::sqrt(x(p));
                    const double wf = w - period * std::round(w / period);
                    for (Eigen::Index s = 0; s < ns; ++s) x(nth + s * nb + col + 1) *= wf / w;
                    x(p) = wf * wf;
                    moved = true;
                }
                p += 2;
                col += 2;
            } else {
                p += 1;
                col += 1;
            }
        }
        if (moved) levenberg_marquardt(d, st, x, -1, max_iter, r, j);
        else evaluate(d, st, x, r, &j);
    }
    const double chi2_final = r.squaredNorm();
    Fit f;
    f.st = st;
    f.x = x;
    f.theta.assign(x.data(), x.data() + nth);
    f.cov = (j.transpose() * j).completeOrthogonalDecomposition().pseudoInverse();
    f.chi2 = chi2_final;
    f.n_params = static_cast<std::size_t>(x.size());
    f.bic = chi2_final + static_cast<double>(f.n_params) * std::log(static_cast<double>(r.size()));
    if (!std::isfinite(f.bic) || !f.cov.allFinite()) return std::nullopt;
    f.sigma.resize(static_cast<std::size_t>(nth));
    for (int k = 0; k < nth; ++k) f.sigma[static_cast<std::size_t>(k)] = std::sqrt(std::max(0.0, f.cov(k, k)));
    return f;
}

// Distance from the optimum along parameter k at which the profiled chi2
// rises by z^2, searched on one side.
double profile_reach(const Data& d, const Fit& f, int k, double dir, double z, int max_iter) {
    const double target = f.chi2 + z * z;
    // Each profile point starts from the previous solution.
    Eigen::VectorXd warm = f.x;
    auto profiled = [&](double delta) {
        Eigen::VectorXd x = warm;
        x(k) = f.x(k) + dir * delta;
        Eigen::VectorXd r;
        Eigen::MatrixXd j;
        const double c = levenberg_marquardt(d, f.st, x, k, max_iter, r, j);
        if (std::isfinite(c)) warm = x;
        return c;
    };
    const double s0 = f.sigma[static_cast<std::size_t>(k)];
    const double scale = std::max(std::abs(f.x(k)), 1e-3);
    double lo = 0.0;
    double hi = std::max(z * s0, 1e-6 * scale);
    int expand = 0;
    double val = profiled(hi);
    while (val < target && expand < 12) {
        lo = hi;
        hi *= 2.0;
        val = profiled(hi);
        ++expand;
    }
    if (!(val >= target)) return hi; // no crossing found: report the search limit
    for (int it = 0; it < 20 && hi - lo > 0.05 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (profiled(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

void profile_intervals(const Data& d, Fit& f, double z, int max_iter) {
    for (std::size_t k = 0; k < f.theta.size(); ++k) {
        const auto ki = static_cast<int>(k);
        const double reach =
            std::max(profile_reach(d, f, ki, 1.0, z, max_iter), profile_reach(d, f, ki, -1.0, z, max_iter));
        f.sigma[k] = std::max(f.sigma[k], reach / z);
    }
}

// Layouts with at most max_order Liouvillian modes. Two or three pure decays
// are doublets with q < 0.
std::vector<std::vector<Term>> term_layouts(int max_order) {
    std::vector<std::vector<Term>> out{{Term::Decay}};
    if (max_order >= 2) out.push_back({Term::Doublet});
    if (max_order >= 3) out.push_back({Term::Doublet, Term::Decay});
    return out;
}

// Chi2 with the amplitudes solved exactly for the given nonlinear parameters.
double projected_chi2(const Data& d, const std::vector<Term>& terms, const std::vector<double>& th) {
    Eigen::MatrixXd b;
    basis(terms, th, d.tau, b, nullptr);
    double chi2 = 0.0;
    for (std::size_t s = 0; s < d.y.size(); ++s) {
        // Normal equations are accurate enough for ranking seeds.
        const Eigen::MatrixXd bw = d.w[s].asDiagonal() * b;
        const Eigen::VectorXd yw = d.w[s].cwiseProduct(d.y[s]);
        const Eigen::MatrixXd g = bw.transpose() * bw;
        const Eigen::VectorXd h = bw.transpose() * yw;
        const Eigen::VectorXd a = g.ldlt().solve(h);
        chi2 += std::max(0.0, yw.squaredNorm() - h.dot(a));
    }
    return chi2;
}

// Best starting points of a layout on a coarse grid: rates log-spaced
// between the inverse record length and the Nyquist scale, doublet splittings
// log-spaced up to half the Nyquist frequency on both signs of q.
std::vector<Structure> grid_starts(const Data& d, const std::vector<Term>& terms, int keep) {
    const double span = d.tau(d.tau.size() - 1);
    const double nyq = std::numbers::pi / d.dt;
    constexpr int nr = 10, nw = 8;
    std::vector<double> rates(nr), qs{0.0};
    for (int i = 0; i < nr; ++i) rates[i] = (0.3 / span) * std::pow((0.5 * nyq) / (0.3 / span), i / (nr - 1.0));
    for (int i = 0; i < nw; ++i) {
        const double w = (1.0 / span) * std::pow((0.5 * nyq) / (1.0 / span), i / (nw - 1.0));
        qs.push_back(w * w);
        qs.push_back(-w * w);
    }
    std::vector<std::pair<double, std::vector<double>>> found;
    auto visit = [&](const std::vector<double>& th) {
        const double c = projected_chi2(d, terms, th);
        if (std::isfinite(c)) found.emplace_back(c, th);
    };
    if (terms.front() == Term::Decay) {
        for (double k : rates) visit({k});
    } else {
        for (double q : qs)
            for (double k : rates) {
                if (terms.size() == 1) {
                    visit({q, k});
                } else {
                    for (double k3 : rates) visit({q, k, k3});
                }
            }
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Structure> out;
    for (std::size_t i = 0; i < found.size() && static_cast<int>(i) < keep; ++i) out.push_back({terms, found[i].second});
    return out;
}

// Modes with z-sigma boxes mapped from the parameter intervals; the
// reported stderr is the larger half-width over z.
std::vector<ExtractedMode> modes_of(const Fit& f, double z) {
    std::vector<ExtractedMode> out;
    std::size_t p = 0;
    for (auto t : f.st.terms) {
        if (t == Term::Decay) {
            out.push_back({cplx(0.0, -f.theta[p]), 0.0, f.sigma[p], false});
            p += 1;
            continue;
        }
        const double q = f.theta[p], kap = f.theta[p + 1];
        const double sq = f.sigma[p], sk = f.sigma[p + 1];
        const double qlo = q - z * sq, qhi = q + z * sq;
        // Re part of the upper mode is sqrt(max(q, 0)), its Im offset is
        // sqrt(max(-q, 0)); both are monotone in q.
        auto re = [](double v) { return std::sqrt(std::max(v, 0.0)); };
        auto im = [](double v) { return std::sqrt(std::max(-v, 0.0)); };
        const double r0 = re(q), i0 = im(q);
        const double re_half = std::max(r0 - re(qlo), re(qhi) - r0);
        const double im_shift = std::max(im(qlo) - i0, i0 - im(qhi));
        const double re_sd = re_half / z;
        const double im_sd = (z * sk + im_shift) / z;
        if (q >= 0.0) {
            out.push_back({cplx(-r0, -kap), re_sd, im_sd, true});
            out.push_back({cplx(r0, -kap), re_sd, im_sd, true});
        } else {
            out.push_back({cplx(0.0, -kap + i0), re_sd, im_sd, false});
            out.push_back({cplx(0.0, -kap - i0), re_sd, im_sd, false});
        }
        p += 2;
    }
    std::sort(out.begin(), out.end(),
              [](const ExtractedMode& a, const ExtractedMode& b) { return spectral::exact_phase_less(a.e, b.e); });
    return out;
}

} // namespace

EigenvalueEstimate extract_eigenvalues(const std::vector<dynamics::Series>& series, const ExtractionOptions& opts) {
    const Data d = prepare(series, opts);
    const Pencil pen = hankel_svd(d);
    EigenvalueEstimate est;
    est.n_data = static_cast<std::size_t>(d.tau.size()) * d.y.size();
    const double s0 = pen.sv.size() > 0 ? pen.sv(0) : 0.0;
    if (!(s0 > 0.0)) throw NumericalError("extract_eigenvalues: series carry no dynamics (constant signal)");
    for (Eigen::Index k = 0; k < pen.sv.size(); ++k) est.hankel_sv.push_back(pen.sv(k) / s0);

    // Gap search over the first max_order + 1 singular values.
    const Eigen::Index lim = std::min<Eigen::Index>(opts.max_order + 1, pen.sv.size());
    for (Eigen::Index k = 1; k < lim; ++k) {
        const double ratio = pen.sv(k) > 0.0 ? pen.sv(k - 1) / pen.sv(k) : std::numeric_limits<double>::infinity();
        if (est.hankel_rank == 0 && ratio > opts.sv_gap_threshold) {
            est.hankel_rank = static_cast<int>(k);
            est.sv_gap = ratio;
        }
        if (est.hankel_rank == 0) est.sv_gap = std::max(est.sv_gap, ratio);
    }
    const int pencil_order = est.hankel_rank > 0 ? est.hankel_rank : opts.max_order;
    est.pencil_poles = pencil_poles(pen, pencil_order, d.dt);

    if (est.hankel_rank > 0) {
        double big = 0.0;
        for (auto e : est.pencil_poles) big = std::max(big, std::abs(e));
        for (std::size_t i = 0; i < est.pencil_poles.size(); ++i)
            for (std::size_t j = i + 1; j < est.pencil_poles.size(); ++j)
                if (std::abs(est.pencil_poles[i] - est.pencil_poles[j]) <= opts.coalescence_tol * big)
                    est.order_reduced = true;
        if (est.order_reduced) {
            std::ostringstream os;
            os << "order reduction: Hankel gap " << est.sv_gap << " after " << est.hankel_rank
               << " singular value(s) with coalescing poles";
            est.notes.push_back(os.str());
        }
    }

    if (!opts.polish) {
        for (auto e : est.pencil_poles) est.modes.push_back({e, 0.0, 0.0, std::abs(e.real()) > 0.0});
        std::sort(est.modes.begin(), est.modes.end(),
                  [](const ExtractedMode& a, const ExtractedMode& b) { return spectral::exact_phase_less(a.e, b.e); });
        est.model_order = static_cast<int>(est.modes.size());
        est.notes.push_back("pencil only, no confidence intervals");
        return est;
    }

    std::vector<Fit> fits;
    auto consider = [&](const Structure& st) {
        if (auto f = fit_structure(d, st, opts.max_iterations)) fits.push_back(std::move(*f));
    };
    for (int k = 1; k <= opts.max_order; ++k) {
        const auto poles = pencil_poles(pen, k, d.dt);
        for (const auto& st : structures(poles)) consider(st);
    }
    if (opts.grid_starts > 0) {
        for (const auto& terms : term_layouts(opts.max_order))
            for (const auto& st : grid_starts(d, terms, opts.grid_starts)) consider(st);
    }
    if (fits.empty()) throw NumericalError("extract_eigenvalues: no candidate model could be fitted");
    // A pure decay slower than a tenth of the inverse record length cannot be
    // told apart from the steady-state offset; such fits are dropped unless
    // nothing else is left.
    const double slowest = 0.1 / d.tau(d.tau.size() - 1);
    const double nyq = std::numbers::pi / d.dt;
    auto credible = [&](const Fit& f) {
        for (const auto& m : modes_of(f, 3.0)) {
            if (!std::isfinite(m.e.real()) || !std::isfinite(m.e.imag()) || std::abs(m.e) > nyq) return false;
            if (!m.paired && -m.e.imag() < slowest) return false;
        }
        return true;
    };
    if (std::any_of(fits.begin(), fits.end(), credible))
        std::erase_if(fits, [&](const Fit& f) { return !credible(f); });
    std::size_t ib = 0;
    for (std::size_t i = 1; i < fits.size(); ++i)
        if (fits[i].bic < fits[ib].bic) ib = i;
    Fit& best = fits[ib];
    if (opts.profile_z > 0.0) profile_intervals(d, best, opts.profile_z, opts.max_iterations);
    const double zmap = opts.profile_z > 0.0 ? opts.profile_z : 3.0;
    est.modes = modes_of(best, zmap);

    // Layouts the data cannot rule out widen the intervals so that they cover
    // their modes too: smaller layouts within the BIC margin, and the best
    // fit of each richer layout, since a weak mode dropped by the order
    // choice shifts the modes that remain.
    if (opts.ambiguity_bic > 0.0 && opts.profile_z > 0.0) {
        const double z = opts.profile_z;
        auto widen = [&](ExtractedMode& m, const ExtractedMode& a) {
            m.re_stderr = std::max(m.re_stderr, (std::abs(a.e.real() - m.e.real()) + z * a.re_stderr) / z);
            m.im_stderr = std::max(m.im_stderr, (std::abs(a.e.imag() - m.e.imag()) + z * a.im_stderr) / z);
        };
        auto modes_in = [](const std::vector<Term>& terms) {
            int m = 0;
            for (auto t : terms) m += t == Term::Decay ? 1 : 2;
            return m;
        };
        std::map<std::vector<Term>, std::size_t> richer;
        for (std::size_t i = 0; i < fits.size(); ++i) {
            const auto& terms = fits[i].st.terms;
            if (modes_in(terms) <= modes_in(best.st.terms)) continue;
            auto it = richer.find(terms);
            if (it == richer.end() || fits[i].bic < fits[it->second].bic) richer[terms] = i;
        }
        int alternatives = 0;
        for (std::size_t i = 0; i < fits.size(); ++i) {
            if (i == ib || fits[i].bic > best.bic + opts.ambiguity_bic) continue;
            if (fits[i].st.terms == best.st.terms || richer.count(fits[i].st.terms)) continue;
            ++alternatives;
            for (const auto& a : modes_of(fits[i], zmap)) {
                auto& m = *std::min_element(est.modes.begin(), est.modes.end(), [&](const auto& x, const auto& y) {
                    return std::abs(x.e - a.e) < std::abs(y.e - a.e);
                });
                widen(m, a);
            }
        }
        for (const auto& [terms, i] : richer) {
            const auto alt = modes_of(fits[i], zmap);
            // richer fits with modes outside the sampled band are not credible
            const bool inside = std::all_of(alt.begin(), alt.end(), [&](const ExtractedMode& a) {
                return a.e.imag() < 0.0 && std::abs(a.e) < nyq && std::isfinite(a.re_stderr) &&
                       std::isfinite(a.im_stderr);
            });
            if (!inside) continue;
            ++alternatives;
            // only the shift of the point estimate counts: the extra mode of a
            // richer fit is often unsupported and inflates its own intervals
            for (auto& m : est.modes) {
                const auto& a = *std::min_element(alt.begin(), alt.end(), [&](const auto& x, const auto& y) {
                    return std::abs(x.e - m.e) < std::abs(y.e - m.e);
                });
                m.re_stderr += std::abs(a.e.real() - m.e.real()) / z;
                m.im_stderr += std::abs(a.e.imag() - m.e.imag()) / z;
            }
        }
        if (alternatives > 0)
            est.notes.push_back(std::to_string(alternatives) + " competing layout(s) widened the intervals");
    }
    est.model_order = static_cast<int>(est.modes.size());
    est.chi2 = best.chi2;
    est.bic = best.bic;
    est.n_params = best.n_params;
    const double dof = static_cast<double>(est.n_data) - static_cast<double>(est.n_params);
    est.residual = dof > 0 ? std::sqrt(est.chi2 / dof) : std::sqrt(est.chi2);
    return est;
}

EigenvalueEstimate extract_eigenvalues(const dynamics::Series& series, const ExtractionOptions& opts) {
    return extract_eigenvalues(std::vector<dynamics::Series>{series}, opts);
}

} // namespace lep::expsim

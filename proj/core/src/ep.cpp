#include "lepkit/ep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "lepkit/errors.hpp"

namespace lep::ep {

using spectral::CubicCoefficients;

double Tolerances::triple_tol(double scale) const { return std::pow(gap, 2.0 / 3.0) * scale; }

const char* to_string(Order o) {
    switch (o) {
    case Order::None: return "none";
    case Order::Two: return "2";
    case Order::Three: return "3";
    case Order::Indeterminate: return "indeterminate";
    }
    return "?";
}

const char* to_string(PairKind k) { return k == PairKind::LessDamped ? "less_damped" : "more_damped"; }

const char* to_string(Phase p) {
    switch (p) {
    case Phase::Exact: return "exact";
    case Phase::Broken: return "broken";
    case Phase::AtEp: return "at_ep";
    }
    return "?";
}

namespace {

cplx discriminant_of(const CubicCoefficients& c) {
    const cplx a = c.c2, b = c.c1, d = c.c0;
    return a * a * b * b - 4.0 * b * b * b - 4.0 * a * a * a * d - 27.0 * d * d + 18.0 * a * b * d;
}

double omega_scale(const SystemParams& p) {
    return p.omega() > 0.0 ? p.omega() : std::max(p.rate_scale(), std::numeric_limits<double>::min());
}

} // namespace

cplx cubic_discriminant(const SystemParams& p) { return discriminant_of(spectral::characteristic_cubic(p)); }

double signed_discriminant(const SystemParams& p) {
    const double s = omega_scale(p);
    const double s6 = std::pow(s, 6);
    return -cubic_discriminant(p).real() / s6;
}

std::pair<double, double> depressed_invariants(const SystemParams& p) {
    const auto c = spectral::characteristic_cubic(p);
    // x = iE: x^3 + b2 x^2 + b1 x + b0 with b2 = i c2, b1 = -c1, b0 = -i c0.
    const double b2 = (I * c.c2).real();
    const double b1 = (-c.c1).real();
    const double b0 = (-I * c.c0).real();
    const double pp = b1 - b2 * b2 / 3.0;
    const double qq = 2.0 * b2 * b2 * b2 / 27.0 - b2 * b1 / 3.0 + b0;
    return {pp, qq};
}

namespace {

struct Jordan {
    Eigen::Vector4d sv;
    int rank1;
    int rank2;
};

Jordan jordan_ranks(const Mat4& l, cplx e, double threshold) {
    const Mat4 m = l - e * Mat4::Identity();
    Jordan j;
    j.sv = spectral::singular_values_ascending(m);
    j.rank1 = static_cast<int>((j.sv.array() > threshold).count());
    j.rank2 = spectral::numerical_rank(m * m, threshold);
    return j;
}

} // namespace

Classification classify_ep(const SystemParams& p, const Tolerances& tols) {
    Classification out;
    const double scale = p.rate_scale();
    if (scale == 0.0) {
        out.note = "zero generator";
        return out;
    }
    const auto coeffs = spectral::characteristic_cubic(p);
    const auto roots = spectral::cubic_roots(coeffs);
    const Liouvillian4 l = build_liouvillian(p);
    const double lnorm = l.norm();
    const double rank_thr = tols.rank * lnorm;

    out.diagnostics.discriminant_magnitude = std::abs(discriminant_of(coeffs)) / std::pow(scale, 6);

    const std::array<std::array<int, 2>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
    std::array<double, 3> gaps{};
    for (int q = 0; q < 3; ++q) gaps[q] = std::abs(roots[pairs[q][0]] - roots[pairs[q][1]]);
    const double spread = *std::max_element(gaps.begin(), gaps.end());
    const int qmin = static_cast<int>(std::min_element(gaps.begin(), gaps.end()) - gaps.begin());
    const double min_gap = gaps[qmin];

    const double t2 = tols.pair_tol(scale);
    const double t3 = tols.triple_tol(scale);

    auto fill_sv = [&](cplx e) {
        const auto j = jordan_ranks(l.matrix(), e, rank_thr);
        out.diagnostics.smallest_sv = {j.sv(0), j.sv(1)};
        out.diagnostics.largest_sv = j.sv(3);
        out.diagnostics.geometric_multiplicity = 4 - j.rank1;
        out.diagnostics.rank1 = j.rank1;
        out.diagnostics.rank2 = j.rank2;
        return j;
    };

    auto overlap_of = [&](cplx a, cplx b) {
        const Vec4 va = spectral::smallest_singular_vector(l.matrix() - a * Mat4::Identity());
        const Vec4 vb = spectral::smallest_singular_vector(l.matrix() - b * Mat4::Identity());
        return std::abs(va.dot(vb));
    };

    if (spread <= t3) {
        // All three cubic roots coalesce; E* is forced to their mean, -c2/3.
        const cplx e_star = -coeffs.c2 / 3.0;
        const auto j = fill_sv(e_star);
        out.diagnostics.spread = spread;
        out.diagnostics.max_overlap =
            std::max({overlap_of(roots[0], roots[1]), overlap_of(roots[0], roots[2]), overlap_of(roots[1], roots[2])});
        const bool single_chain = j.sv(1) > tols.sv_sep * j.sv(3) && j.rank1 == 3 && j.rank2 == 2;
        if (single_chain) {
            out.order = Order::Three;
            out.candidate = EPCandidate{p, 3, e_star, out.diagnostics};
        } else {
            out.order = Order::Indeterminate;
            out.note = "triple eigenvalue without a single length-3 Jordan chain";
        }
        return out;
    }
    if (spread <= tols.band_factor * t3) {
        out.order = Order::Indeterminate;
        out.diagnostics.spread = spread;
        out.note = "three-branch spread inside the no-decision band";
        return out;
    }
    const auto [i, j] = pairs[qmin];
    out.diagnostics.spread = min_gap;
    if (min_gap <= t2) {
        const cplx e_star = 0.5 * (roots[i] + roots[j]);
        const auto jr = fill_sv(e_star);
        const double ov = overlap_of(roots[i], roots[j]);
        out.diagnostics.max_overlap = ov;
        const bool gm1 = jr.sv(1) > tols.sv_sep * jr.sv(3);
        if (ov >= 1.0 - tols.overlap && gm1) {
            out.order = Order::Two;
            out.candidate = EPCandidate{p, 2, e_star, out.diagnostics};
        } else {
            out.order = Order::None;
            out.note = "degenerate eigenvalues with independent eigenvectors (diabolic point)";
        }
        return out;
    }
    if (min_gap <= tols.band_factor * t2) {
        out.order = Order::Indeterminate;
        out.note = "pair gap inside the no-decision band";
        return out;
    }
    return out;
}

void require_finite_locus(double alpha, double exclusion) {
    if (std::abs(alpha - 0.5) < std::max(exclusion, 1e-12)) {
        std::ostringstream os;
        os << "alpha = " << alpha
           << " lies in the excluded band around 0.5: decay and dephasing balance there and the "
              "exceptional points move to gamma/omega = infinity";
        throw ConfigError(os.str());
    }
}

namespace {

// The discriminant is rounding noise within ~1e-11 relative of an EP2, so
// its sign-change root is only a seed. Newton on f(x) = f'(x) = 0 for the
// real cubic in x = iE (omega = 1) is well conditioned away from EP3s.
double polish_double_root(double alpha, double delta, double gamma, double lo, double hi) {
    const auto seed = spectral::cubic_roots(spectral::characteristic_cubic(SystemParams::unit(delta, gamma, alpha)));
    std::array<double, 3> xs{};
    for (int k = 0; k < 3; ++k) xs[k] = -seed[k].imag();
    std::sort(xs.begin(), xs.end());
    double x = (xs[1] - xs[0] < xs[2] - xs[1]) ? 0.5 * (xs[0] + xs[1]) : 0.5 * (xs[1] + xs[2]);
    const double d2 = delta * delta;
    double g = gamma;
    for (int it = 0; it < 50; ++it) {
        const double b2 = -(1.0 + alpha) * g, b2g = -(1.0 + alpha);
        const double b1 = d2 + 1.0 + (alpha + 0.25) * g * g, b1g = 2.0 * (alpha + 0.25) * g;
        const double b0 = -(alpha * d2 * g + 0.5 * g + 0.25 * alpha * g * g * g);
        const double b0g = -(alpha * d2 + 0.5 + 0.75 * alpha * g * g);
        const double f = ((x + b2) * x + b1) * x + b0;
        const double fx = (3.0 * x + 2.0 * b2) * x + b1;
        const double fxx = 6.0 * x + 2.0 * b2;
        const double fg = (b2g * x + b1g) * x + b0g;
        const double fxg = 2.0 * b2g * x + b1g;
        const double det = fx * fxg - fg * fxx;
        if (det == 0.0 || !std::isfinite(det)) break;
        const double dx = (f * fxg - fg * fx) / det;
        const double dg = (fx * fx - f * fxx) / det;
        x -= dx;
        g -= dg;
        if (!(g >= lo && g <= hi)) return gamma;
        if (std::abs(dg) <= 4e-16 * g && std::abs(dx) <= 1e-15 * (std::abs(x) + g)) break;
    }
    return g;
}

} // namespace

EPCandidate locate_ep2(double alpha, double delta, double gamma_lo, double gamma_hi, const Tolerances& tols,
                       double omega) {
    require_finite_locus(alpha);
    if (!(gamma_lo < gamma_hi) || gamma_lo < 0.0) throw ConfigError("locate_ep2: invalid gamma bracket");
    auto f = [&](double g) { return signed_discriminant(SystemParams(omega, delta * omega, g * omega, alpha)); };
    const double flo = f(gamma_lo);
    const double fhi = f(gamma_hi);
    double root = 0.0;
    if (flo == 0.0) {
        root = gamma_lo;
    } else if (fhi == 0.0) {
        root = gamma_hi;
    } else if ((flo < 0.0) == (fhi < 0.0)) {
        std::ostringstream os;
        os << "locate_ep2: no sign change of the discriminant in gamma/omega in [" << gamma_lo << ", " << gamma_hi
           << "] at alpha = " << alpha << ", delta/omega = " << delta;
        throw NumericalError(os.str());
    } else {
        boost::uintmax_t max_iter = 400;
        const auto r = boost::math::tools::toms748_solve(f, gamma_lo, gamma_hi, flo, fhi,
                                                         boost::math::tools::eps_tolerance<double>(52), max_iter);
        root = 0.5 * (r.first + r.second);
        if ((r.second - r.first) > tols.refine * std::abs(root)) {
            throw NumericalError("locate_ep2: root bracket did not shrink to the refinement tolerance");
        }
    }
    root = polish_double_root(alpha, delta, root, gamma_lo, gamma_hi);
    const SystemParams at(omega, delta * omega, root * omega, alpha);
    const auto cls = classify_ep(at, tols);
    if (cls.order != Order::Two) {
        std::ostringstream os;
        os << "locate_ep2: discriminant root at gamma/omega = " << root << " classified as " << to_string(cls.order)
           << " (" << cls.note << ")";
        throw NumericalError(os.str());
    }
    return *cls.candidate;
}

std::optional<std::pair<double, double>> find_ep2_bracket(double alpha, double delta, double gamma_min,
                                                          double gamma_max, int samples, double omega) {
    const double ratio = std::pow(gamma_max / gamma_min, 1.0 / (samples - 1));
    double g_prev = gamma_min;
    double f_prev = signed_discriminant(SystemParams(omega, delta * omega, g_prev * omega, alpha));
    for (int k = 1; k < samples; ++k) {
        const double g = gamma_min * std::pow(ratio, k);
        const double fv = signed_discriminant(SystemParams(omega, delta * omega, g * omega, alpha));
        if ((f_prev < 0.0) != (fv < 0.0)) return std::make_pair(g_prev, g);
        g_prev = g;
        f_prev = fv;
    }
    return std::nullopt;
}

namespace {

// Scale-free residual of the triple-root conditions.
Eigen::Vector2d ep3_residual(double alpha, double omega, const Eigen::Vector2d& x) {
    const SystemParams p(omega, x(0) * omega, std::max(x(1), 0.0) * omega, alpha);
    const auto [pp, qq] = depressed_invariants(p);
    const double s = std::max(omega, std::max(x(1), 0.0) * omega);
    return {pp / (s * s), qq / (s * s * s)};
}

Eigen::Vector2d newton_ep3(double alpha, double omega, Eigen::Vector2d x, const Tolerances& tols) {
    Eigen::Vector2d f = ep3_residual(alpha, omega, x);
    for (int it = 0; it < 100; ++it) {
        Eigen::Matrix2d jac;
        for (int c = 0; c < 2; ++c) {
            const double h = 1e-6 * std::max(1.0, std::abs(x(c)));
            Eigen::Vector2d xp = x, xm = x;
            xp(c) += h;
            xm(c) -= h;
            jac.col(c) = (ep3_residual(alpha, omega, xp) - ep3_residual(alpha, omega, xm)) / (2.0 * h);
        }
        const Eigen::Vector2d step = jac.colPivHouseholderQr().solve(-f);
        if (!step.allFinite()) break;
        double lambda = 1.0;
        Eigen::Vector2d xn = x + step;
        Eigen::Vector2d fn = ep3_residual(alpha, omega, xn);
        while (fn.norm() > f.norm() && lambda > 1e-6) {
            lambda *= 0.5;
            xn = x + lambda * step;
            fn = ep3_residual(alpha, omega, xn);
        }
        const bool small_step = (xn - x).norm() <= 1e-3 * tols.refine * x.norm();
        x = xn;
        f = fn;
        if (small_step || f.norm() == 0.0) return x;
    }
    if (f.norm() > 1e-10) {
        std::ostringstream os;
        os << "locate_ep3: Newton did not converge at alpha = " << alpha << " (residual " << f.norm() << ")";
        throw NumericalError(os.str());
    }
    return x;
}

} // namespace

std::array<EPCandidate, 2> locate_ep3(double alpha, const Tolerances& tols, double omega) {
    require_finite_locus(alpha);
    // The locus scales with 1/|1 - 2 alpha| along gamma; scan a coarse grid in
    // the scaled coordinate and start Newton from the best cell.
    const double scale = 1.0 / std::abs(1.0 - 2.0 * alpha);
    std::array<EPCandidate, 2> out{EPCandidate{SystemParams(omega, 0, 0, alpha), 0, {}, {}},
                                   EPCandidate{SystemParams(omega, 0, 0, alpha), 0, {}, {}}};
    for (int branch = 0; branch < 2; ++branch) {
        const double sign = branch == 0 ? -1.0 : 1.0;
        Eigen::Vector2d best(0, 0);
        double best_r = std::numeric_limits<double>::infinity();
        for (int a = 1; a <= 20; ++a) {
            for (int b = 1; b <= 40; ++b) {
                const Eigen::Vector2d x(sign * 0.05 * a, 0.2 * b * scale);
                const double r = ep3_residual(alpha, omega, x).norm();
                if (r < best_r) {
                    best_r = r;
                    best = x;
                }
            }
        }
        const Eigen::Vector2d x = newton_ep3(alpha, omega, best, tols);
        const SystemParams at(omega, x(0) * omega, x(1) * omega, alpha);
        const auto cls = classify_ep(at, tols);
        if (cls.order != Order::Three) {
            std::ostringstream os;
            os << "locate_ep3: triple-root solution at (delta, gamma)/omega = (" << x(0) << ", " << x(1)
               << ") classified as " << to_string(cls.order) << " (" << cls.note << ")";
            throw NumericalError(os.str());
        }
        out[branch] = *cls.candidate;
    }
    return out;
}

namespace {

using Pt = std::array<double, 2>;

double dist(const Pt& a, const Pt& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

PairKind pair_kind_at(double alpha, const Pt& x) {
    const auto roots = spectral::cubic_roots(spectral::characteristic_cubic(SystemParams(1.0, x[0], x[1], alpha)));
    const std::array<std::array<int, 3>, 3> trip{{{0, 1, 2}, {0, 2, 1}, {1, 2, 0}}};
    int best = 0;
    double bg = std::numeric_limits<double>::infinity();
    for (int q = 0; q < 3; ++q) {
        const double g = std::abs(roots[trip[q][0]] - roots[trip[q][1]]);
        if (g < bg) {
            bg = g;
            best = q;
        }
    }
    const double pair_im = 0.5 * (roots[trip[best][0]] + roots[trip[best][1]]).imag();
    return pair_im > roots[trip[best][2]].imag() ? PairKind::LessDamped : PairKind::MoreDamped;
}

} // namespace

LineTrace trace_exceptional_lines(double alpha, std::pair<double, double> delta_range,
                                  std::pair<double, double> gamma_range, const LineTraceOptions& opts) {
    const int nx = opts.delta_samples;
    const int ny = opts.gamma_samples;
    if (nx < 2 || ny < 2) throw ConfigError("trace_exceptional_lines: need at least 2 samples per axis");
    if (!(delta_range.first < delta_range.second) || !(gamma_range.first < gamma_range.second) ||
        gamma_range.first < 0.0)
        throw ConfigError("trace_exceptional_lines: empty or invalid window");

    LineTrace out;
    const double dx = (delta_range.second - delta_range.first) / (nx - 1);
    const double dy = (gamma_range.second - gamma_range.first) / (ny - 1);
    auto xat = [&](int i) { return delta_range.first + dx * i; };
    auto yat = [&](int j) { return gamma_range.first + dy * j; };
    auto f = [&](double x, double y) { return signed_discriminant(SystemParams(1.0, x, y, alpha)); };

    std::vector<double> grid(static_cast<std::size_t>(nx) * ny);
    auto at = [&](int i, int j) -> double& { return grid[static_cast<std::size_t>(j) * nx + i]; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) at(i, j) = f(xat(i), yat(j));
    auto pos = [](double v) { return v >= 0.0; };

    // Edge ids: horizontal edge (i,j)-(i+1,j) -> 2*(j*nx+i), vertical (i,j)-(i,j+1) -> 2*(j*nx+i)+1.
    std::map<long, Pt> crossing;
    auto refine = [&](Pt a, Pt b, double fa) {
        for (int it = 0; it < 200; ++it) {
            const Pt m{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
            if ((m[0] == a[0] || m[0] == b[0]) && (m[1] == a[1] || m[1] == b[1])) break;
            const double fm = f(m[0], m[1]);
            if (pos(fm) == pos(fa)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        return Pt{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
    };
    auto edge = [&](int i, int j, bool vertical) -> std::optional<long> {
        const int i2 = vertical ? i : i + 1;
        const int j2 = vertical ? j + 1 : j;
        if (pos(at(i, j)) == pos(at(i2, j2))) return std::nullopt;
        const long id = 2L * (static_cast<long>(j) * nx + i) + (vertical ? 1 : 0);
        if (!crossing.count(id)) crossing[id] = refine({xat(i), yat(j)}, {xat(i2), yat(j2)}, at(i, j));
        return id;
    };

    // Marching squares: segments between crossing ids.
    std::vector<std::array<long, 2>> segments;
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            std::vector<long> ids;
            for (auto e : {edge(i, j, false), edge(i + 1, j, true), edge(i, j + 1, false), edge(i, j, true)})
                if (e) ids.push_back(*e);
            if (ids.size() == 2) {
                segments.push_back({ids[0], ids[1]});
            } else if (ids.size() == 4) {
                // Saddle: decide with the cell-centre sign.
                const bool centre = pos(f(xat(i) + 0.5 * dx, yat(j) + 0.5 * dy));
                if (centre == pos(at(i, j))) {
                    segments.push_back({ids[0], ids[1]});
                    segments.push_back({ids[2], ids[3]});
                } else {
                    segments.push_back({ids[0], ids[3]});
                    segments.push_back({ids[1], ids[2]});
                }
            }
        }
    }
    out.crossings = crossing.size();

    // Third-order EPs inside the window become the junctions.
    if (std::abs(alpha - 0.5) > 1e-12) {
        const auto ep3 = locate_ep3(alpha, opts.tols);
        for (const auto& c : ep3) {
            const double x = c.params.delta_over_omega(), y = c.params.gamma_over_omega();
            if (x >= delta_range.first && x <= delta_range.second && y >= gamma_range.first && y <= gamma_range.second)
                out.junctions.push_back(c);
        }
    }
    std::vector<Pt> jpts;
    for (const auto& c : out.junctions) jpts.push_back({c.params.delta_over_omega(), c.params.gamma_over_omega()});
    const double cell = std::hypot(dx, dy);
    const double r_ex = opts.junction_radius_cells * cell;
    auto near_junction = [&](const Pt& p) -> int {
        for (std::size_t k = 0; k < jpts.size(); ++k)
            if (dist(p, jpts[k]) <= r_ex) return static_cast<int>(k);
        return -1;
    };

    // Adjacency, skipping the neighbourhood of each junction where the cusp
    // of the zero set is not resolved by the grid.
    std::map<long, std::vector<long>> adj;
    for (const auto& s : segments) {
        if (near_junction(crossing[s[0]]) >= 0 || near_junction(crossing[s[1]]) >= 0) continue;
        adj[s[0]].push_back(s[1]);
        adj[s[1]].push_back(s[0]);
    }

    std::map<long, bool> used;
    auto walk = [&](long start) {
        std::vector<long> chain{start};
        used[start] = true;
        long cur = start;
        while (true) {
            long next = -1;
            for (long n : adj[cur])
                if (!used[n]) {
                    next = n;
                    break;
                }
            if (next < 0) break;
            used[next] = true;
            chain.push_back(next);
            cur = next;
        }
        return chain;
    };
    std::vector<std::vector<long>> chains;
    for (const auto& [id, nb] : adj)
        if (nb.size() == 1 && !used[id]) chains.push_back(walk(id));
    for (const auto& [id, nb] : adj)
        if (!used[id]) {
            auto c = walk(id);
            c.push_back(id); // closed loop
            chains.push_back(std::move(c));
        }

    auto closest_junction = [&](const Pt& p, double limit) -> int {
        int best = -1;
        double bd = limit;
        for (std::size_t k = 0; k < jpts.size(); ++k) {
            const double d = dist(p, jpts[k]);
            if (d <= bd) {
                bd = d;
                best = static_cast<int>(k);
            }
        }
        return best;
    };

    for (const auto& chain : chains) {
        if (chain.size() < 2) continue;
        ExceptionalLine line;
        line.alpha = alpha;
        for (long id : chain) line.points.push_back(crossing[id]);
        const double snap = r_ex + 2.0 * cell;
        if (int k = closest_junction(line.points.front(), snap); k >= 0) {
            line.points.insert(line.points.begin(), jpts[k]);
            line.starts_at_ep3 = true;
        }
        if (int k = closest_junction(line.points.back(), snap); k >= 0) {
            line.points.push_back(jpts[k]);
            line.ends_at_ep3 = true;
        }
        line.pair = pair_kind_at(alpha, line.points[line.points.size() / 2]);
        out.lines.push_back(std::move(line));
    }

    std::ostringstream os;
    os << out.lines.size() << " exceptional line(s), " << out.junctions.size() << " third-order junction(s), "
       << out.crossings << " grid crossings at alpha = " << alpha;
    out.summary = os.str();
    return out;
}

std::vector<TrajectoryPoint> ep_trajectory_vs_alpha(TrajectoryKind kind, const std::vector<double>& alpha_grid,
                                                    double exclusion, const Tolerances& tols) {
    std::vector<TrajectoryPoint> out;
    out.reserve(alpha_grid.size());
    for (double a : alpha_grid) {
        TrajectoryPoint tp;
        tp.alpha = a;
        try {
            require_finite_locus(a, exclusion);
            if (kind == TrajectoryKind::Ep2AtZeroDetuning) {
                const auto br = find_ep2_bracket(a, 0.0);
                if (!br) throw NumericalError("no discriminant sign change found along gamma");
                tp.eps.push_back(locate_ep2(a, 0.0, br->first, br->second, tols));
            } else {
                const auto both = locate_ep3(a, tols);
                tp.eps.assign(both.begin(), both.end());
            }
        } catch (const std::exception& e) {
            tp.error = e.what();
        }
        out.push_back(std::move(tp));
    }
    return out;
}

Phase phase_of(const SystemParams& p, double tol) {
    if (p.delta() != 0.0)
        throw ConfigError("phase_of: exact/broken phases are defined on the delta = 0 slice; use classify_ep");
    const double omega = p.omega();
    if (omega <= 0.0) throw ConfigError("phase_of: omega must be positive");
    const double mix = std::abs(1.0 - 2.0 * p.alpha());
    const double critical = mix == 0.0 ? std::numeric_limits<double>::infinity() : 4.0 * omega / mix;

    Phase ph;
    if (std::isfinite(critical) && std::abs(p.gamma() - critical) <= tol * critical)
        ph = Phase::AtEp;
    else
        ph = p.gamma() < critical ? Phase::Exact : Phase::Broken;
    if (ph == Phase::AtEp) return ph;

    // Exact phase: one branch pair with opposite, nonzero real energies.
    // Broken phase: all real energies vanish.
    const auto roots = spectral::cubic_roots(spectral::characteristic_cubic(p));
    double max_re = 0.0;
    for (auto r : roots) max_re = std::max(max_re, std::abs(r.real()));
    const double thr = 1e-7 * p.rate_scale();
    const bool split = max_re > thr;
    if ((ph == Phase::Exact) != split) {
        std::ostringstream os;
        os << "phase_of: locus formula says " << to_string(ph) << " but the spectrum has max |Re E| = " << max_re
           << " at " << p.describe();
        throw NumericalError(os.str());
    }
    return ph;
}

} // namespace lep::ep

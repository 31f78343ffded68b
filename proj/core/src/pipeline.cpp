#include "lepkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lepkit/errors.hpp"
#include "lepkit/parallel.hpp"
#include "lepkit/random.hpp"
#include "lepkit/spectral.hpp"
#include "lepkit/tomography.hpp"

namespace lep::expsim {

std::array<int, 3> figure_branch_labels(const std::array<cplx, 3>& v, double delta, double gamma, double alpha) {
    const double scale = std::max({1.0, std::abs(delta), gamma});
    const double tol = 1e-7 * scale;
    std::array<int, 3> label{0, 0, 0};

    // Mirror pair: the two values closest to E = -E*.
    double best = std::numeric_limits<double>::infinity();
    int pi = 0, pj = 1;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double d = std::abs(v[i] + std::conj(v[j]));
            if (d < best) {
                best = d;
                pi = i;
                pj = j;
            }
        }
    const int lone = 3 - pi - pj;
    const bool split = std::abs(v[pi].real()) > tol && best <= 1e-6 * scale;
    if (v[pi].real() > v[pj].real()) std::swap(pi, pj);

    if (std::abs(delta) <= 1e-12) {
        // The coherence mode -i gamma/2 stays apart at zero detuning.
        int e2 = 0;
        for (int k = 1; k < 3; ++k)
            if (std::abs(v[k] - cplx(0, -gamma / 2)) < std::abs(v[e2] - cplx(0, -gamma / 2))) e2 = k;
        int a = (e2 + 1) % 3, b = (e2 + 2) % 3;
        if (split) {
            if (v[a].real() > v[b].real()) std::swap(a, b);
        } else if (v[a].imag() < v[b].imag()) {
            std::swap(a, b);
        }
        label[a] = 1;
        label[e2] = 2;
        label[b] = 3;
        return label;
    }
    if (!split) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int x, int y) { return v[x].imag() > v[y].imag(); });
        for (int k = 0; k < 3; ++k) label[idx[k]] = k + 1;
        return label;
    }
    const double m = std::abs(1.0 - 2.0 * alpha);
    const bool past = m > 0.0 && gamma * m > std::sqrt(13.5);
    if (!past) {
        label[pi] = 1;
        label[lone] = 2;
        label[pj] = 3;
    } else if (alpha < 0.5) {
        label[pi] = 1;
        label[pj] = 2;
        label[lone] = 3;
    } else {
        label[lone] = 1;
        label[pi] = 2;
        label[pj] = 3;
    }
    return label;
}

std::uint64_t point_seed(std::uint64_t master, std::size_t index) { return stream_seed(master, index); }

std::vector<dynamics::Series> measured_series(const SystemParams& p, const PipelineConfig& cfg, std::uint64_t seed) {
    const auto grid = dynamics::uniform_grid(0.0, cfg.dt, cfg.n_times);
    const auto tr = dynamics::evolve_master(p, DensityMatrix::ground(), grid);
    const bool noisy = cfg.n_shots > 0;
    const double n = static_cast<double>(cfg.n_shots);
    std::array<dynamics::Series, 3> s;
    for (auto& x : s) {
        x.times = grid;
        if (noisy) x.std_errors.emplace();
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto tomo = tomography(DensityMatrix(tr.states[k]), cfg.n_shots, stream_seed(seed, k));
        for (std::size_t b = 0; b < 3; ++b) {
            const double pe = tomo.measurements[b].p_e;
            s[b].values.push_back(2.0 * pe - 1.0);
            // A zero-variance estimate (all shots agree) still carries 1/n resolution.
            if (noisy) s[b].std_errors->push_back(2.0 * std::sqrt(std::max(pe * (1.0 - pe), 1.0 / n) / n));
        }
    }
    if (cfg.series == SeriesChoice::SigmaZ) return {s[2]};
    return {s[0], s[1], s[2]};
}

namespace {

// Injective assignment of extracted modes to theory values minimizing the
// total distance.
std::vector<int> match(const std::vector<ExtractedMode>& modes, const std::array<cplx, 3>& theory) {
    std::vector<int> best(modes.size(), -1);
    double best_cost = std::numeric_limits<double>::infinity();
    std::array<int, 3> perm{0, 1, 2};
    do {
        double cost = 0.0;
        for (std::size_t k = 0; k < modes.size() && k < 3; ++k) cost += std::abs(modes[k].e - theory[perm[k]]);
        if (cost < best_cost) {
            best_cost = cost;
            for (std::size_t k = 0; k < modes.size() && k < 3; ++k) best[k] = perm[k];
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

PipelineResult run_figure_pipeline(const PipelineConfig& cfg) {
    if (cfg.alpha_grid.empty() || cfg.gamma_grid.empty()) throw ConfigError("run_figure_pipeline: empty grid");
    if (!(cfg.dt > 0.0) || cfg.n_times < 8) throw ConfigError("run_figure_pipeline: time grid needs dt > 0 and >= 8 points");
    for (double a : cfg.alpha_grid)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("run_figure_pipeline: alpha must lie in [0, 1]");
    for (double g : cfg.gamma_grid)
        if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("run_figure_pipeline: gamma/omega must be positive");
    if (!std::isfinite(cfg.delta)) throw ConfigError("run_figure_pipeline: delta must be finite");

    const std::size_t na = cfg.alpha_grid.size(), ng = cfg.gamma_grid.size();
    PipelineResult out;
    out.points = na * ng;

    struct Point {
        std::vector<ExperimentRow> rows;
        std::array<TheoryRow, 3> theory;
        bool flagged = false;
    };
    std::vector<Point> pts(out.points);
    parallel_for(out.points, cfg.workers, [&](std::size_t i) {
        const double alpha = cfg.alpha_grid[i / ng];
        const double gamma = cfg.gamma_grid[i % ng];
        const SystemParams p(1.0, cfg.delta, gamma, alpha);
        const auto values = spectral::eigenvalues_closed_form(p).nonzero();
        const auto labels = figure_branch_labels(values, cfg.delta, gamma, alpha);
        Point& pt = pts[i];
        for (int k = 0; k < 3; ++k) pt.theory[k] = {alpha, gamma, labels[k], values[k].real(), values[k].imag()};

        const std::uint64_t seed = point_seed(cfg.seed, i);
        try {
            const auto est = extract_eigenvalues(measured_series(p, cfg, seed), cfg.extraction);
            const auto m = match(est.modes, values);
            for (std::size_t k = 0; k < est.modes.size(); ++k) {
                const auto& md = est.modes[k];
                ExperimentRow r;
                r.alpha = alpha;
                r.gamma_over_omega = gamma;
                r.branch = m[k] >= 0 ? labels[m[k]] : 0;
                r.re_e = md.e.real();
                r.im_e = md.e.imag();
                r.re_stderr = md.re_stderr;
                r.im_stderr = md.im_stderr;
                r.model_order = est.model_order;
                r.order_reduced = est.order_reduced;
                r.residual = est.residual;
                r.seed = seed;
                if (m[k] >= 0) {
                    const cplx t = values[m[k]];
                    r.covered = std::abs(r.re_e - t.real()) <= 3.0 * r.re_stderr + 1e-9 &&
                                std::abs(r.im_e - t.imag()) <= 3.0 * r.im_stderr + 1e-9;
                }
                pt.rows.push_back(r);
            }
        } catch (const std::exception& ex) {
            ExperimentRow r;
            r.alpha = alpha;
            r.gamma_over_omega = gamma;
            r.re_e = r.im_e = r.re_stderr = r.im_stderr = std::numeric_limits<double>::quiet_NaN();
            r.seed = seed;
            r.flag = ex.what();
            pt.rows.push_back(r);
            pt.flagged = true;
        }
    });

    std::size_t covered = 0, usable = 0;
    for (auto& pt : pts) {
        auto rows = pt.rows;
        std::stable_sort(rows.begin(), rows.end(),
                         [](const ExperimentRow& a, const ExperimentRow& b) { return a.branch < b.branch; });
        for (const auto& r : rows) {
            out.experiment.push_back(r);
            if (r.flag.empty()) {
                ++usable;
                covered += r.covered ? 1 : 0;
            }
        }
        auto th = pt.theory;
        std::sort(th.begin(), th.end(), [](const TheoryRow& a, const TheoryRow& b) { return a.branch < b.branch; });
        out.theory.insert(out.theory.end(), th.begin(), th.end());
        out.flagged_points += pt.flagged ? 1 : 0;
    }
    out.coverage = usable > 0 ? static_cast<double>(covered) / static_cast<double>(usable) : 0.0;
    return out;
}

} // namespace lep::expsim

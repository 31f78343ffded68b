#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include <lepkit/calibration.hpp>
#include <lepkit/dynamics.hpp>
#include <lepkit/ep.hpp>
#include <lepkit/errors.hpp>
#include <lepkit/parallel.hpp>
#include <lepkit/pipeline.hpp>
#include <lepkit/random.hpp>
#include <lepkit/spectral.hpp>

#include "cli/config.hpp"

#ifndef LEPKIT_VERSION_STRING
#define LEPKIT_VERSION_STRING "0.0.0"
#endif

namespace lep::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
using Range = ConfigReader::Range;

Cell num(double x) { return x; }
Cell integer(std::int64_t x) { return x; }
Cell text(std::string s) { return s; }

std::string short_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Free-text cells stay on one CSV line without quoting.
std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r' || c == '"') c = c == ',' ? ';' : ' ';
    return s;
}

std::string ep_diagnostics(const ep::EPDiagnostics& d) {
    std::ostringstream os;
    os << "rank1=" << d.rank1 << ";rank2=" << d.rank2 << ";geom=" << d.geometric_multiplicity
       << ";sv1=" << short_number(d.smallest_sv[0]) << ";sv2=" << short_number(d.smallest_sv[1])
       << ";overlap=" << short_number(d.max_overlap) << ";spread=" << short_number(d.spread)
       << ";disc=" << short_number(d.discriminant_magnitude);
    return os.str();
}

const std::vector<std::string> kEpColumns{"alpha", "delta_over_omega", "gamma_over_omega", "order",
                                          "re_Estar",  "im_Estar",         "diagnostics"};

std::vector<Cell> ep_row(const ep::EPCandidate& c, std::string extra = {}) {
    std::string diag = ep_diagnostics(c.diagnostics);
    if (!extra.empty()) diag = extra + ";" + diag;
    return {num(c.params.alpha()),  num(c.params.delta_over_omega()), num(c.params.gamma_over_omega()),
            integer(c.order),       num(c.e_star.real()),             num(c.e_star.imag()),
            text(diag)};
}

std::vector<Cell> flagged_ep_row(double alpha, double delta, const std::string& error) {
    return {num(alpha), num(delta), num(kNaN), integer(0), num(kNaN), num(kNaN), text("error=" + sanitize(error))};
}

template <class Fn>
auto collect(std::size_t n, unsigned workers, Fn&& fn) {
    using R = decltype(fn(std::size_t{0}));
    std::vector<R> out(n);
    parallel_for(n, workers, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

// ---------------------------------------------------------------- spectrum

Table cmd_spectrum(ConfigReader& c, unsigned) {
    const double alpha = c.fraction("alpha", 0.0);
    const double delta = c.frequency("delta", 0.0);
    const auto gammas = c.rate_values("gamma", Range{0.0, 6.0, 61});
    c.ignore("seed");

    std::vector<SystemParams> sweep;
    sweep.reserve(gammas.size());
    for (double g : gammas) sweep.push_back(SystemParams::unit(delta, g, alpha));
    const auto curves = spectral::track_branches(sweep);

    Table t;
    t.columns = {"gamma_over_omega", "re_E1", "re_E2", "re_E3", "im_E1", "im_E2", "im_E3"};
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        const auto& v = curves.values[k];
        t.add_row({num(gammas[k]), num(v[0].real()), num(v[1].real()), num(v[2].real()), num(v[0].imag()),
                   num(v[1].imag()), num(v[2].imag())});
    }
    t.notes.push_back("alpha: " + format_number(alpha));
    t.notes.push_back("delta_over_omega: " + format_number(delta));
    t.notes.push_back("ambiguous_steps: " + std::to_string(curves.ambiguous_steps.size()));
    return t;
}

// ----------------------------------------------------------------- surface

Table cmd_surface(ConfigReader& c, unsigned workers) {
    const std::string x_axis = c.choice("x", {"delta", "alpha"}, std::string("delta"));
    std::vector<double> xs;
    double alpha = 0.0, delta = 0.0;
    if (x_axis == "delta") {
        xs = c.frequency_values("x_range", Range{-1.0, 1.0, 41});
        alpha = c.fraction("alpha", 0.0);
    } else {
        xs = c.values("x_range", Range{0.0, 1.0, 21}, 0.0, 1.0);
        delta = c.frequency("delta", 0.0);
    }
    const auto ys = c.rate_values("gamma", Range{0.0, 6.0, 61});
    const auto cap = c.integer("max_points", 1000000, 1);
    c.ignore("seed");
    const auto points = xs.size() * ys.size();
    if (points > static_cast<std::size_t>(cap)) {
        throw ConfigError("max_points: the " + std::to_string(xs.size()) + " x " + std::to_string(ys.size()) +
                          " grid has " + std::to_string(points) + " points, above the cap of " +
                          std::to_string(cap) + "; reduce x_range.n or gamma.n");
    }

    // Each column of constant x is tracked along gamma, so a delta = 0
    // column carries the same labels as the spectrum command.
    const auto columns = collect(xs.size(), workers, [&](std::size_t i) {
        std::vector<SystemParams> sweep;
        sweep.reserve(ys.size());
        for (double g : ys)
            sweep.push_back(x_axis == "delta" ? SystemParams::unit(xs[i], g, alpha)
                                              : SystemParams::unit(delta, g, xs[i]));
        return spectral::track_branches(sweep).values;
    });

    Table t;
    t.columns = {"x", "y", "branch", "re_E", "im_E"};
    t.rows.reserve(points * 3);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t k = 0; k < ys.size(); ++k)
            for (int b = 0; b < 3; ++b) {
                const cplx e = columns[i][k][static_cast<std::size_t>(b)];
                t.add_row({num(xs[i]), num(ys[k]), integer(b + 1), num(e.real()), num(e.imag())});
            }
    t.notes.push_back(std::string("x: ") + (x_axis == "delta" ? "delta_over_omega" : "alpha"));
    t.notes.push_back("y: gamma_over_omega");
    if (x_axis == "delta")
        t.notes.push_back("alpha: " + format_number(alpha));
    else
        t.notes.push_back("delta_over_omega: " + format_number(delta));
    return t;
}

// ---------------------------------------------------------------------- ep

Table cmd_ep_locate(ConfigReader& c, unsigned workers) {
    const auto order = c.integer("order", 2, 2);
    if (order > 3) throw ConfigError("order: expected 2 or 3");
    const auto alphas = c.values("alpha", Range{0.0, 0.0, 1}, 0.0, 1.0);
    c.ignore("seed");

    Table t;
    t.columns = kEpColumns;
    if (order == 2) {
        const double delta = c.frequency("delta", 0.0);
        std::optional<std::pair<double, double>> window;
        if (c.has("gamma_range")) {
            const auto g = c.rate_values("gamma_range");
            if (g.size() != 2 || !(g[1] > g[0]))
                throw ConfigError("gamma_range: expected [lo, hi] with hi > lo");
            window = std::pair{g[0], g[1]};
        }
        const auto rows = collect(alphas.size(), workers, [&](std::size_t i) {
            try {
                auto br = window ? window : ep::find_ep2_bracket(alphas[i], delta);
                if (!br) throw NumericalError("no discriminant sign change along gamma");
                return ep_row(ep::locate_ep2(alphas[i], delta, br->first, br->second));
            } catch (const std::exception& e) {
                return flagged_ep_row(alphas[i], delta, e.what());
            }
        });
        for (const auto& r : rows) t.add_row(r);
        t.notes.push_back(std::string("gamma_bracket: ") + (window ? "config" : "automatic"));
    } else {
        const auto rows = collect(alphas.size(), workers, [&](std::size_t i) {
            std::vector<std::vector<Cell>> out;
            try {
                for (const auto& cand : ep::locate_ep3(alphas[i])) out.push_back(ep_row(cand));
            } catch (const std::exception& e) {
                out.push_back(flagged_ep_row(alphas[i], kNaN, e.what()));
            }
            return out;
        });
        for (const auto& rs : rows)
            for (const auto& r : rs) t.add_row(r);
    }
    for (const auto& r : t.rows) t.flagged_rows += std::get<std::int64_t>(r[3]) == 0;
    return t;
}

Table cmd_ep_trace(ConfigReader& c, unsigned) {
    const double alpha = c.fraction("alpha", 0.0);
    const double d_lo = c.frequency("delta_min", -1.0);
    const double d_hi = c.frequency("delta_max", 1.0);
    const double g_lo = c.rate("gamma_min", 2.0);
    const double g_hi = c.rate("gamma_max", 6.0);
    ep::LineTraceOptions opts;
    opts.delta_samples = static_cast<int>(c.integer("delta_samples", 200, 2));
    opts.gamma_samples = static_cast<int>(c.integer("gamma_samples", 200, 2));
    c.ignore("seed");
    if (!(d_hi > d_lo)) throw ConfigError("delta_max: must exceed delta_min");
    if (!(g_hi > g_lo)) throw ConfigError("gamma_max: must exceed gamma_min");

    const auto trace = ep::trace_exceptional_lines(alpha, {d_lo, d_hi}, {g_lo, g_hi}, opts);

    Table t;
    t.columns = kEpColumns;
    for (std::size_t k = 0; k < trace.lines.size(); ++k) {
        const auto& line = trace.lines[k];
        for (const auto& pt : line.points) {
            const auto p = SystemParams::unit(pt[0], pt[1], alpha);
            const auto v = spectral::eigenvalues_closed_form(p).nonzero();
            // The coalescing pair is the closest pair on the line.
            std::size_t a = 0, b = 1;
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = i + 1; j < 3; ++j)
                    if (std::abs(v[i] - v[j]) < std::abs(v[a] - v[b])) a = i, b = j;
            const cplx e = 0.5 * (v[a] + v[b]);
            std::ostringstream diag;
            diag << "line=" << k << ";pair=" << ep::to_string(line.pair)
                 << ";pair_gap=" << short_number(std::abs(v[a] - v[b]));
            t.add_row({num(alpha), num(pt[0]), num(pt[1]), integer(2), num(e.real()), num(e.imag()),
                       text(diag.str())});
        }
    }
    for (const auto& j : trace.junctions) t.add_row(ep_row(j, "junction"));
    t.notes.push_back("lines: " + std::to_string(trace.lines.size()));
    t.notes.push_back("junctions: " + std::to_string(trace.junctions.size()));
    t.notes.push_back("summary: " + sanitize(trace.summary));
    return t;
}

Table cmd_ep_trajectory(ConfigReader& c, unsigned workers) {
    const std::string kind = c.choice("kind", {"ep2", "ep3"}, std::string("ep2"));
    const auto alphas = c.values("alpha", Range{0.0, 1.0, 11}, 0.0, 1.0);
    const double exclusion = c.fraction("exclusion", 0.02, 0.0, 0.5);
    c.ignore("seed");
    const auto k = kind == "ep2" ? ep::TrajectoryKind::Ep2AtZeroDetuning : ep::TrajectoryKind::Ep3;

    std::vector<double> kept, excluded;
    for (double a : alphas) (std::abs(a - 0.5) < exclusion ? excluded : kept).push_back(a);

    const auto points = collect(kept.size(), workers, [&](std::size_t i) {
        return ep::ep_trajectory_vs_alpha(k, {kept[i]}, exclusion).front();
    });

    Table t;
    t.columns = kEpColumns;
    for (const auto& tp : points) {
        if (tp.error) {
            t.add_row(flagged_ep_row(tp.alpha, kind == "ep2" ? 0.0 : kNaN, *tp.error));
            ++t.flagged_rows;
            continue;
        }
        for (const auto& e : tp.eps) t.add_row(ep_row(e));
    }
    std::string ex;
    for (double a : excluded) ex += (ex.empty() ? "" : " ") + format_number(a);
    t.notes.push_back("excluded_alpha: " + (ex.empty() ? std::string("none") : ex));
    return t;
}

// ---------------------------------------------------------------- dynamics

struct DynamicsPoint {
    SystemParams params;
    std::vector<double> grid;
};

DynamicsPoint read_dynamics_point(ConfigReader& c) {
    const double alpha = c.fraction("alpha", 0.0);
    const double delta = c.frequency("delta", 0.0);
    const double gamma = c.rate("gamma", 1.0);
    auto grid = c.time_values("t", Range{0.0, 20.0, 201});
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ConfigError("t: times must be strictly increasing");
    return {SystemParams::unit(delta, gamma, alpha), std::move(grid)};
}

Vec2 pure_state(const std::string& name) {
    const double r = 1.0 / std::numbers::sqrt2;
    if (name == "excited") return ket::e();
    if (name == "plus_x") return r * (ket::e() + ket::g());
    if (name == "plus_y") return r * (ket::e() + I * ket::g());
    return ket::g();
}

Table cmd_evolve(ConfigReader& c, unsigned) {
    const auto pt = read_dynamics_point(c);
    const std::string initial =
        c.choice("initial", {"ground", "excited", "mixed", "plus_x", "plus_y"}, std::string("ground"));
    const std::string method = c.choice("integrator", {"rk4", "dopri5"}, std::string("rk4"));
    dynamics::IntegratorOptions opts;
    opts.method = method == "rk4" ? dynamics::Integrator::RK4 : dynamics::Integrator::DormandPrince;
    opts.step = c.time("step", 0.0);
    c.ignore("seed");

    const DensityMatrix rho0 =
        initial == "mixed" ? DensityMatrix::maximally_mixed() : DensityMatrix::pure(pure_state(initial));
    const auto traj = dynamics::evolve_master(pt.params, rho0, pt.grid, opts);

    Table t;
    t.columns = {"omega_t", "p_e", "sigma_x", "sigma_y", "sigma_z"};
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const auto& rho = traj.states[k];
        std::vector<Cell> row{num(traj.times[k])};
        for (auto o : dynamics::kObservables) row.push_back(num(dynamics::expectation(rho, o)));
        t.add_row(std::move(row));
    }
    t.notes.push_back("integrator: " + traj.integrator);
    t.notes.push_back("step: " + format_number(traj.step));
    t.notes.push_back("renormalizations: " + std::to_string(traj.renormalizations));
    t.notes.push_back("max_trace_drift: " + format_number(traj.max_trace_drift));
    return t;
}

Table cmd_trajectories(ConfigReader& c, unsigned workers) {
    const auto pt = read_dynamics_point(c);
    const std::string initial =
        c.choice("initial", {"ground", "excited", "plus_x", "plus_y"}, std::string("ground"));
    dynamics::McOptions opts;
    opts.n_traj = static_cast<std::size_t>(c.integer("n_traj", 10000, 1));
    opts.seed = c.seed();
    opts.workers = workers;

    const auto traj = dynamics::mc_trajectories(pt.params, pure_state(initial), pt.grid, opts);

    Table t;
    t.columns = {"omega_t", "p_e", "p_e_stderr", "sigma_x", "sigma_x_stderr",
                 "sigma_y", "sigma_y_stderr", "sigma_z", "sigma_z_stderr"};
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<Cell> row{num(traj.times[k])};
        for (std::size_t o = 0; o < 4; ++o) {
            row.push_back(num(dynamics::expectation(traj.states[k], dynamics::kObservables[o])));
            row.push_back(num((*traj.std_errors)[o][k]));
        }
        t.add_row(std::move(row));
    }
    t.notes.push_back("n_traj: " + std::to_string(traj.n_traj));
    t.notes.push_back("mean_jumps_decay: " + format_number(traj.mean_jumps[0]) + " +- " +
                      format_number(traj.jumps_stderr[0]));
    t.notes.push_back("mean_jumps_dephasing: " + format_number(traj.mean_jumps[1]) + " +- " +
                      format_number(traj.jumps_stderr[1]));
    return t;
}

// ------------------------------------------------------------------ expsim

std::vector<Table> cmd_expsim(ConfigReader& c, unsigned workers) {
    expsim::PipelineConfig cfg;
    cfg.alpha_grid = c.values("alpha", Range{0.0, 0.0, 1}, 0.0, 1.0);
    cfg.gamma_grid = c.rate_values("gamma", Range{1.0, 6.0, 11});
    cfg.delta = c.frequency("delta", 0.0);
    cfg.n_shots = static_cast<std::size_t>(c.integer("n_shots", 14000, 0));
    cfg.dt = c.time("dt", 0.1);
    if (!(cfg.dt > 0.0)) throw ConfigError("dt: must be positive");
    cfg.n_times = static_cast<std::size_t>(c.integer("n_times", 128, 8));
    cfg.series = c.choice("series", {"bloch", "sigma_z"}, std::string("bloch")) == "bloch"
                     ? expsim::SeriesChoice::Bloch
                     : expsim::SeriesChoice::SigmaZ;
    cfg.extraction.max_order = static_cast<int>(c.integer("max_order", 3, 1));
    if (cfg.extraction.max_order > 3) throw ConfigError("max_order: at most 3 nonzero modes exist");
    cfg.seed = c.seed();
    cfg.workers = workers;

    const auto res = expsim::run_figure_pipeline(cfg);

    Table ex;
    ex.name = "experiment";
    ex.columns = {"alpha", "gamma_over_omega", "branch",        "re_E",     "im_E",    "re_stderr", "im_stderr",
                  "model_order", "order_reduced", "residual", "covered", "seed",    "flag"};
    for (const auto& r : res.experiment) {
        ex.add_row({num(r.alpha), num(r.gamma_over_omega), integer(r.branch), num(r.re_e), num(r.im_e),
                    num(r.re_stderr), num(r.im_stderr), integer(r.model_order), integer(r.order_reduced),
                    num(r.residual), integer(r.covered), text(std::to_string(r.seed)), text(sanitize(r.flag))});
        ex.flagged_rows += !r.flag.empty();
    }
    ex.notes.push_back("delta_over_omega: " + format_number(cfg.delta));
    ex.notes.push_back("points: " + std::to_string(res.points) +
                       ", flagged_points: " + std::to_string(res.flagged_points));
    ex.notes.push_back("coverage_3sigma: " + format_number(res.coverage));

    Table th;
    th.name = "theory";
    th.columns = {"alpha", "gamma_over_omega", "branch", "re_E", "im_E"};
    for (const auto& r : res.theory)
        th.add_row({num(r.alpha), num(r.gamma_over_omega), integer(r.branch), num(r.re_e), num(r.im_e)});
    th.notes.push_back("delta_over_omega: " + format_number(cfg.delta));
    return {std::move(ex), std::move(th)};
}

// --------------------------------------------------------------- calibrate

Table cmd_calibrate(ConfigReader& c, unsigned workers) {
    const std::string mode = c.choice("mode", {"curve", "fit"}, std::string("curve"));
    Table t;
    if (mode == "curve") {
        const std::string which = c.choice("curve", {"decay", "dephasing"});
        const auto inputs = c.values("inputs");
        c.ignore("seed");
        const auto curve = which == "decay" ? expsim::CalibrationCurve::decay_vs_power()
                                            : expsim::CalibrationCurve::dephasing_vs_vpp();
        t.columns = {"input", "rate", "clamped", "warning"};
        for (double x : inputs) {
            expsim::CalibratedRate r;
            try {
                r = expsim::calibrate_rate(curve, x);
            } catch (const ConfigError& e) {
                throw ConfigError(std::string("inputs: ") + e.what());
            }
            t.add_row({num(x), num(r.rate), integer(r.clamped), text(sanitize(r.warning))});
        }
        t.notes.push_back("curve: " + std::string(expsim::to_string(curve.kind)));
        t.notes.push_back("coefficients: a=" + format_number(curve.a) + " b=" + format_number(curve.b) +
                          " c=" + format_number(curve.c));
        t.notes.push_back("input_unit: " + curve.input_unit);
        t.notes.push_back("valid_range: [" + format_number(curve.x_min) + ", " + format_number(curve.x_max) + "]");
        return t;
    }

    const std::string which = c.choice("fit", {"decay", "dephasing"});
    const double rate = c.rate("rate");
    const auto grid = c.time_values("t", Range{0.0, 10.0, 21});
    const auto shots = static_cast<std::size_t>(c.integer("shots", 200, 1));
    const auto runs = static_cast<std::size_t>(c.integer("runs", 1, 1));
    const auto seed = c.seed();

    struct Out {
        std::optional<expsim::RateFit> fit;
        std::string error;
    };
    const auto fits = collect(runs, workers, [&](std::size_t i) {
        Out o;
        const auto s = stream_seed(seed, i);
        try {
            if (which == "decay") {
                const auto d = expsim::simulate_decay_data(rate, grid, shots, s);
                o.fit = expsim::fit_exponential_decay(d.times, d.estimates, d.errors);
            } else {
                const auto d = expsim::simulate_rabi_data(1.0, rate, grid, shots, s);
                o.fit = expsim::fit_dephasing_rabi(d.times, d.estimates, d.errors, 1.0);
            }
        } catch (const NumericalError& e) {
            o.error = e.what();
        }
        return o;
    });

    t.columns = {"run",  "true_rate_over_omega", "fitted_rate_over_omega", "stderr", "chi2", "points_used",
                 "wide_interval", "warnings"};
    for (std::size_t i = 0; i < runs; ++i) {
        const auto& o = fits[i];
        if (!o.fit) {
            t.add_row({integer(static_cast<std::int64_t>(i)), num(rate), num(kNaN), num(kNaN), num(kNaN),
                       integer(0), integer(0), text("error=" + sanitize(o.error))});
            ++t.flagged_rows;
            continue;
        }
        std::string w;
        for (const auto& s : o.fit->warnings) w += (w.empty() ? "" : " | ") + sanitize(s);
        t.add_row({integer(static_cast<std::int64_t>(i)), num(rate), num(o.fit->value), num(o.fit->stderr_value),
                   num(o.fit->chi2), integer(static_cast<std::int64_t>(o.fit->points_used)),
                   integer(o.fit->wide_interval), text(w)});
    }
    t.notes.push_back("fit: " + which);
    t.notes.push_back("shots_per_point: " + std::to_string(shots));
    return t;
}

using Handler = std::function<std::vector<Table>(ConfigReader&, unsigned)>;

template <class F>
Handler single(F f) {
    return [f](ConfigReader& c, unsigned w) { return std::vector<Table>{f(c, w)}; };
}

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h{
        {"spectrum", single(cmd_spectrum)},
        {"surface", single(cmd_surface)},
        {"ep locate", single(cmd_ep_locate)},
        {"ep trace", single(cmd_ep_trace)},
        {"ep trajectory", single(cmd_ep_trajectory)},
        {"evolve", single(cmd_evolve)},
        {"trajectories", single(cmd_trajectories)},
        {"expsim", cmd_expsim},
        {"calibrate", single(cmd_calibrate)},
    };
    return h;
}

} // namespace

std::size_t RunOutput::flagged_rows() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.flagged_rows;
    return n;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, _] : handlers()) v.push_back(k);
        return v;
    }();
    return names;
}

RunOutput run(const Invocation& inv) {
    const auto it = handlers().find(inv.command);
    if (it == handlers().end()) throw ConfigError("command: unknown command '" + inv.command + "'");

    ConfigReader reader(inv.config);
    RunOutput out;
    out.tables = it->second(reader, inv.workers);
    reader.finish();

    out.provenance.tool_version = LEPKIT_VERSION_STRING;
    out.provenance.command = inv.command;
    out.provenance.config = reader.effective();
    if (reader.effective().contains("seed")) out.provenance.seed = reader.effective()["seed"].get<std::uint64_t>();
    out.provenance.config_hash = fnv1a_hex(inv.command + "\n" + reader.effective().dump());
    return out;
}

std::string secondary_path(const std::string& primary, const std::string& name) {
    const std::filesystem::path p(primary);
    auto stem = p.stem().string() + "_" + name + p.extension().string();
    return (p.parent_path() / stem).string();
}

namespace {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("write to '" + path + "' failed");
}

nlohmann::json read_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    auto doc = nlohmann::json::parse(ss.str(), nullptr, false, true);
    if (doc.is_discarded()) throw ConfigError("config: '" + path + "' is not valid JSON");
    if (!doc.is_object()) throw ConfigError("config: top level of '" + path + "' must be an object");
    return doc;
}

// Runtime knobs never change results, so they are stripped from the
// echoed configuration.
struct Runtime {
    std::string out;
    std::string format = "csv";
    unsigned workers = 0;
    bool sidecar = false;
};

Runtime take_runtime(nlohmann::json& cfg) {
    Runtime r;
    if (auto it = cfg.find("out"); it != cfg.end()) {
        if (!it->is_string()) throw ConfigError("out: expected a path string");
        r.out = *it;
        cfg.erase(it);
    }
    if (auto it = cfg.find("format"); it != cfg.end()) {
        if (!it->is_string()) throw ConfigError("format: expected csv or json");
        r.format = *it;
        cfg.erase(it);
    }
    if (auto it = cfg.find("workers"); it != cfg.end()) {
        if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
            throw ConfigError("workers: expected a non-negative integer");
        r.workers = it->get<unsigned>();
        cfg.erase(it);
    }
    if (auto it = cfg.find("sidecar"); it != cfg.end()) {
        if (!it->is_boolean()) throw ConfigError("sidecar: expected true or false");
        r.sidecar = *it;
        cfg.erase(it);
    }
    return r;
}

} // namespace

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"lepkit: Liouvillian spectra, exceptional points and simulated measurements of a driven, "
                 "dissipative qubit"};
    app.set_version_flag("--version", std::string("lepkit ") + LEPKIT_VERSION_STRING);
    app.require_subcommand(1);

    std::string config_path, out_path, format;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::vector<std::string> sets;
    bool sidecar = false;
    std::string command;

    auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& full, const std::string& help) {
        auto* s = parent->add_subcommand(name, help);
        s->add_option("--config", config_path, "JSON configuration file");
        s->add_option("--out", out_path, "output file (default: stdout)");
        s->add_option("--seed", seed, "master seed (u64)");
        s->add_option("--workers", workers, "worker threads (default: available parallelism)");
        s->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        s->add_option("--set", sets, "override a config field: key=value (value parsed as JSON)");
        s->add_flag("--sidecar", sidecar, "also write <out>.config.json with the effective configuration");
        s->callback([&command, full] { command = full; });
        return s;
    };
    leaf(&app, "spectrum", "spectrum", "eigenvalues along a gamma sweep");
    leaf(&app, "surface", "surface", "eigenvalue sheets over a 2-D grid (long format)");
    auto* ep_cmd = app.add_subcommand("ep", "exceptional points");
    ep_cmd->require_subcommand(1);
    leaf(ep_cmd, "locate", "ep locate", "locate second- or third-order exceptional points");
    leaf(ep_cmd, "trace", "ep trace", "trace exceptional lines in a (delta, gamma) window");
    leaf(ep_cmd, "trajectory", "ep trajectory", "exceptional-point locus versus alpha");
    leaf(&app, "evolve", "evolve", "master-equation time evolution");
    leaf(&app, "trajectories", "trajectories", "quantum-jump Monte Carlo averages");
    leaf(&app, "expsim", "expsim", "simulated tomography and eigenvalue extraction over an (alpha, gamma) grid");
    leaf(&app, "calibrate", "calibrate", "calibration curves and simulated rate fits");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        nlohmann::json cfg = config_path.empty() ? nlohmann::json::object() : read_config_file(config_path);
        for (const auto& s : sets) {
            auto [k, v] = parse_assignment(s);
            cfg[k] = v;
        }
        if (seed) cfg["seed"] = *seed;
        Runtime rt = take_runtime(cfg);
        if (!out_path.empty()) rt.out = out_path;
        if (!format.empty()) rt.format = format;
        if (workers) rt.workers = *workers;
        rt.sidecar = rt.sidecar || sidecar;
        const Format fmt = parse_format(rt.format);
        if (rt.sidecar && rt.out.empty()) throw ConfigError("sidecar: requires --out");

        const RunOutput res = run({command, cfg, rt.workers});

        for (std::size_t i = 0; i < res.tables.size(); ++i) {
            const auto body = render(res.provenance, res.tables[i], fmt);
            if (rt.out.empty())
                out << body;
            else
                write_file(i == 0 ? rt.out : secondary_path(rt.out, res.tables[i].name), body);
        }
        if (rt.sidecar) {
            nlohmann::ordered_json side;
            side["tool"] = "lepkit " + res.provenance.tool_version;
            side["command"] = res.provenance.command;
            side["config_hash"] = res.provenance.config_hash;
            side["seed"] = res.provenance.seed ? nlohmann::ordered_json(*res.provenance.seed) : nullptr;
            side["format"] = rt.format;
            side["config"] = nlohmann::ordered_json::parse(res.provenance.config.dump());
            write_file(rt.out + ".config.json", side.dump(2) + "\n");
        }
        if (const auto n = res.flagged_rows(); n > 0) {
            err << "lepkit: " << n << " flagged row(s); see the diagnostics/flag column\n";
            return 2;
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "lepkit: config error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        err << "lepkit: I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "lepkit: numerical failure: " << e.what() << "\n";
        return 2;
    }
}

} // namespace lep::cli

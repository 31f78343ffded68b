// ep.hpp: detection, classification and location of Liouvillian exceptional points

#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lepkit/spectral.hpp"

namespace lep::ep {

// Tolerance ladder. Gaps are relative to the rate scale max(omega, |delta|, gamma).
// A perturbation that splits an EP2 by `gap` splits an EP3 by gap^(2/3), so
// the triple-coalescence test uses gap^(2/3).
struct Tolerances {
    double gap = 1e-6;
    double overlap = 1e-4;
    double sv_sep = 1e-3;
    double refine = 1e-8;     // relative tolerance of located parameters
    double rank = 1e-6;       // singular-value threshold relative to ||L||_F
    double band_factor = 10.0; // no-decision band [gap, band_factor * gap]

    double pair_tol(double scale) const { return gap * scale; }
    double triple_tol(double scale) const;
};

enum class Order { None, Two, Three, Indeterminate };
const char* to_string(Order o);

struct EPDiagnostics {
    double discriminant_magnitude = 0.0; // |disc| / scale^6
    std::array<double, 2> smallest_sv{};  // of L - E* (ascending)
    double largest_sv = 0.0;
    int geometric_multiplicity = 0;
    double max_overlap = 0.0;             // eigenvector overlap of the coalescing set
    double spread = 0.0;                  // max pairwise gap of the coalescing set
    int rank1 = -1;                       // rank(L - E*)
    int rank2 = -1;                       // rank((L - E*)^2)
};

struct EPCandidate {
    SystemParams params;
    int order = 0;
    cplx e_star;
    EPDiagnostics diagnostics;
};

struct Classification {
    Order order = Order::None;
    std::optional<EPCandidate> candidate;
    EPDiagnostics diagnostics;
    std::string note;
};

// Discriminant prod_{i<j} (E_i - E_j)^2 of the monic characteristic cubic.
cplx cubic_discriminant(const SystemParams& p);

// The cubic in x = iE has real coefficients, so -disc(E) is real. This
// returns -Re disc(E) / omega^6 (scale^6 when omega = 0): negative where a
// conjugate pair with split real energies exists, positive where all three
// energies are purely imaginary, zero on exceptional lines.
double signed_discriminant(const SystemParams& p);

// Real depressed-cubic invariants (P, Q) of the cubic in x = iE; a triple
// root requires P = Q = 0.
std::pair<double, double> depressed_invariants(const SystemParams& p);

Classification classify_ep(const SystemParams& p, const Tolerances& tols = {});

// Rejects alpha within exclusion of 0.5 (loci diverge there).
void require_finite_locus(double alpha, double exclusion = 1e-12);

// Locates the gamma of a second-order EP at fixed (alpha, delta) inside
// [gamma_lo, gamma_hi] (units of omega) by bracketed root finding on the
// signed discriminant. Throws NumericalError without a sign change.
EPCandidate locate_ep2(double alpha, double delta, double gamma_lo, double gamma_hi, const Tolerances& tols = {},
                       double omega = 1.0);

// First sign change of the signed discriminant along a geometric gamma scan.
std::optional<std::pair<double, double>> find_ep2_bracket(double alpha, double delta, double gamma_min = 1e-3,
                                                          double gamma_max = 1e4, int samples = 600,
                                                          double omega = 1.0);

// Both third-order EPs (delta < 0 first) by damped 2-D Newton on (P, Q)
// seeded from a coarse grid.
std::array<EPCandidate, 2> locate_ep3(double alpha, const Tolerances& tols = {}, double omega = 1.0);

enum class PairKind {
    LessDamped, // coalescing pair has larger Im E than the spectator branch
    MoreDamped,
};
const char* to_string(PairKind k);

struct ExceptionalLine {
    double alpha = 0.0;
    std::vector<std::array<double, 2>> points; // (delta/omega, gamma/omega)
    PairKind pair = PairKind::LessDamped;
    bool starts_at_ep3 = false;
    bool ends_at_ep3 = false;
};

struct LineTraceOptions {
    int delta_samples = 200;
    int gamma_samples = 200;
    double junction_radius_cells = 3.0;
    Tolerances tols{};
};

struct LineTrace {
    std::vector<ExceptionalLine> lines;
    std::vector<EPCandidate> junctions; // EP3s inside the window
    std::size_t crossings = 0;
    std::string summary;
};

// Grid scan for sign changes of the signed discriminant, bisection
// refinement on grid edges, marching-squares chaining into polylines, and
// snapping of line ends to the third-order EPs inside the window.
LineTrace trace_exceptional_lines(double alpha, std::pair<double, double> delta_range,
                                  std::pair<double, double> gamma_range, const LineTraceOptions& opts = {});

enum class TrajectoryKind { Ep2AtZeroDetuning, Ep3 };

struct TrajectoryPoint {
    double alpha = 0.0;
    std::vector<EPCandidate> eps; // one for EP2, two (+-delta) for EP3
    std::optional<std::string> error;
};

std::vector<TrajectoryPoint> ep_trajectory_vs_alpha(TrajectoryKind kind, const std::vector<double>& alpha_grid,
                                                    double exclusion = 0.02, const Tolerances& tols = {});

enum class Phase { Exact, Broken, AtEp };
const char* to_string(Phase p);

// Exact/broken classification on the delta = 0 slice, cross-checked against
// the degeneracy pattern of the actual spectrum.
Phase phase_of(const SystemParams& p, double tol = 1e-6);

} // namespace lep::ep

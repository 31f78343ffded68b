// pipeline.hpp: simulated measurement runs over (alpha, gamma) grids

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lepkit/extraction.hpp"

namespace lep::expsim {

enum class SeriesChoice { Bloch, SigmaZ };

struct PipelineConfig {
    std::vector<double> alpha_grid;
    std::vector<double> gamma_grid;      // gamma / omega
    double delta = 0.0;                  // delta / omega
    std::size_t n_shots = 14000;         // per basis and time point; 0 = analytic
    std::uint64_t seed = 0;
    double dt = 0.1;                     // 1 / omega
    std::size_t n_times = 128;
    SeriesChoice series = SeriesChoice::Bloch;
    unsigned workers = 0;
    ExtractionOptions extraction;
};

// Branch labels 1..3 for the nonzero eigenvalues in the convention of the
// degeneracy figures: E2 is the mode without a mirror partner before the
// third-order point (or the -i gamma/2 mode at zero detuning); past it the
// lone mode is E3 for alpha < 1/2 and E1 for alpha > 1/2. Mirror partners
// take the lower label on the negative real side.
std::array<int, 3> figure_branch_labels(const std::array<cplx, 3>& values, double delta, double gamma, double alpha);

struct TheoryRow {
    double alpha = 0.0;
    double gamma_over_omega = 0.0;
    int branch = 0;
    double re_e = 0.0;
    double im_e = 0.0;
};

struct ExperimentRow {
    double alpha = 0.0;
    double gamma_over_omega = 0.0;
    int branch = 0;                   // matched theory label, 0 when flagged
    double re_e = 0.0;
    double im_e = 0.0;
    double re_stderr = 0.0;
    double im_stderr = 0.0;
    int model_order = 0;
    bool order_reduced = false;
    double residual = 0.0;
    bool covered = false;             // theory inside the 3 sigma box
    std::uint64_t seed = 0;
    std::string flag;                 // empty unless the point failed
};

struct PipelineResult {
    std::vector<ExperimentRow> experiment;
    std::vector<TheoryRow> theory;
    std::size_t points = 0;
    std::size_t flagged_points = 0;
    double coverage = 0.0;            // covered rows / unflagged rows
};

// Seed of grid point i (alpha-major order).
std::uint64_t point_seed(std::uint64_t master, std::size_t index);

std::vector<dynamics::Series> measured_series(const SystemParams& p, const PipelineConfig& cfg, std::uint64_t seed);

PipelineResult run_figure_pipeline(const PipelineConfig& cfg);

} // namespace lep::expsim

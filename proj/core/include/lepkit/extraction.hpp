// extraction.hpp: Liouvillian eigenvalues from sampled observable series

#pragma once

#include <string>
#include <vector>

#include "lepkit/dynamics.hpp"

namespace lep::expsim {

struct ExtractionOptions {
    int max_order = 3;              // Liouvillian modes, a mirror pair counts as two
    bool polish = true;             // least-squares polish with BIC model choice
    double noiseless_sigma = 1e-9;  // weight scale (relative to max |y|) for series without errors
    double sv_gap_threshold = 1e3;
    double coalescence_tol = 1e-3;  // relative to the largest |E| among the pencil poles
    int max_iterations = 200;
    int grid_starts = 2;            // extra least-squares starts per layout from a coarse grid search
    // Standard errors are widened to (profile-likelihood reach at delta chi2 =
    // z^2) / z when the objective is not quadratic over that range; 0 keeps
    // the curvature estimate only.
    double profile_z = 3.0;
    // Other layouts whose BIC is within this margin of the chosen one widen
    // the reported intervals to cover their modes too; 0 disables.
    double ambiguity_bic = 9.0;
};

struct ExtractedMode {
    cplx e;
    double re_stderr = 0.0;
    double im_stderr = 0.0;
    bool paired = false; // member of a mirror pair (E, -E*)
};

struct EigenvalueEstimate {
    std::vector<ExtractedMode> modes; // at most 3, exact-phase order
    int model_order = 0;
    double residual = 0.0;            // sqrt(chi2 / dof) of the weighted fit
    double chi2 = 0.0;
    std::size_t n_data = 0;
    std::size_t n_params = 0;
    double bic = 0.0;
    std::vector<double> hankel_sv;    // normalized to the largest
    int hankel_rank = 0;              // position of the first gap above threshold, 0 if none
    double sv_gap = 0.0;              // s[rank-1] / s[rank] at that position, else the largest ratio seen
    std::vector<cplx> pencil_poles;   // raw pencil poles at the Hankel rank (or max order)
    bool order_reduced = false;
    std::vector<std::string> notes;
};

// Fits s_j(t) = c_j + sum_k A_jk exp(-i E_k t) jointly to one or more real
// series sharing the same uniform grid. Poles come from a matrix pencil on
// the first-differenced Hankel data; real-valued ansatz terms are either pure
// decays (E = -i kappa) or mirror pairs (E = +-w - i kappa).
EigenvalueEstimate extract_eigenvalues(const std::vector<dynamics::Series>& series,
                                       const ExtractionOptions& opts = {});
EigenvalueEstimate extract_eigenvalues(const dynamics::Series& series, const ExtractionOptions& opts = {});

} // namespace lep::expsim

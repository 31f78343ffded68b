#include <doctest.h>

#include <cmath>
#include <functional>

#include <lepkit/dynamics.hpp>
#include <lepkit/extraction.hpp>
#include <lepkit/pipeline.hpp>
#include <lepkit/spectral.hpp>

using namespace lep;
using namespace lep::expsim;

namespace {

const cplx kI{0.0, 1.0};

dynamics::Series synth(const std::function<double(double)>& f, double dt, std::size_t n) {
    dynamics::Series s;
    for (std::size_t k = 0; k < n; ++k) {
        s.times.push_back(dt * k);
        s.values.push_back(f(dt * k));
    }
    return s;
}

double nearest(const EigenvalueEstimate& est, cplx e) {
    double best = 1e300;
    for (const auto& m : est.modes) best = std::min(best, std::abs(m.e - e));
    return best;
}

dynamics::Series sigma_z_series(const SystemParams& p, double dt, std::size_t n) {
    const auto tr = dynamics::evolve_master(p, DensityMatrix::ground(), dynamics::uniform_grid(0.0, dt, n));
    return dynamics::observable_series(tr, dynamics::Observable::SigmaZ);
}

} // namespace

TEST_CASE("damped cosine") {
    const auto s = synth([](double t) { return std::exp(-0.1 * t) * std::cos(t); }, 0.1, 128);
    const auto est = extract_eigenvalues(s);
    REQUIRE(est.modes.size() == 2);
    CHECK(std::abs(est.modes[0].e - cplx(-1.0, -0.1)) < 1e-6);
    CHECK(std::abs(est.modes[1].e - cplx(1.0, -0.1)) < 1e-6);
    CHECK(est.modes[0].paired);
    CHECK_FALSE(est.order_reduced);
}

TEST_CASE("pure decays with an offset") {
    const auto s = synth([](double t) { return 0.3 + 0.5 * std::exp(-0.4 * t) - 0.2 * std::exp(-1.5 * t); }, 0.1, 100);
    const auto est = extract_eigenvalues(s);
    REQUIRE(est.modes.size() == 2);
    CHECK(nearest(est, -0.4 * kI) < 1e-6);
    CHECK(nearest(est, -1.5 * kI) < 1e-6);
}

TEST_CASE("mode count follows the amplitudes") {
    for (double amp : {0.0, 1e-12, 0.05}) {
        const auto s = synth(
            [amp](double t) { return 0.1 + std::exp(-0.1 * t) * std::cos(t) + amp * std::exp(-0.7 * t); }, 0.1, 128);
        const auto est = extract_eigenvalues(s);
        const std::size_t want = amp > 1e-8 ? 3 : 2;
        CHECK(est.modes.size() == want);
    }
}

TEST_CASE("noiseless master-equation data") {
    SUBCASE("exact phase at zero detuning") {
        const SystemParams p(1, 0, 2, 0);
        const auto est = extract_eigenvalues(sigma_z_series(p, 0.1, 128));
        const auto th = spectral::eigenvalues_closed_form(p);
        CHECK(nearest(est, th.values[0]) < 1e-3);
        CHECK(nearest(est, th.values[2]) < 1e-3);
    }
    SUBCASE("random points away from EPs") {
        for (const SystemParams& p : {SystemParams(1, 0.3, 1.0, 0.2), SystemParams(1, -0.6, 2.5, 0.9),
                                      SystemParams(1, 0.1, 5.5, 0.0), SystemParams(1, 1 / std::sqrt(8.0), 2, 0.3)}) {
            const auto est = extract_eigenvalues(sigma_z_series(p, 0.1, 128));
            const auto th = spectral::eigenvalues_closed_form(p).nonzero();
            // every extracted mode is a Liouvillian eigenvalue
            for (const auto& m : est.modes) {
                double d = 1e300;
                for (auto e : th) d = std::min(d, std::abs(m.e - e));
                CHECK(d < 1e-3);
            }
            CHECK(est.modes.size() >= 2);
        }
    }
    SUBCASE("order reduction at the EP2") {
        const auto est = extract_eigenvalues(sigma_z_series(SystemParams(1, 0, 4, 0), 0.1, 128));
        CHECK(est.order_reduced);
        CHECK(est.sv_gap > 1e3);
        CHECK(est.hankel_rank < 3);
        // the merged mode sits at the coalescence point
        CHECK(nearest(est, -kI) < 1e-2);
    }
}

TEST_CASE("invalid input") {
    const auto s = synth([](double t) { return std::exp(-t); }, 0.1, 8);
    CHECK_THROWS_AS(extract_eigenvalues(s), ConfigError);
    auto bad = synth([](double t) { return std::exp(-t); }, 0.1, 40);
    bad.times[5] += 0.03;
    CHECK_THROWS_AS(extract_eigenvalues(bad), ConfigError);
    ExtractionOptions o;
    o.max_order = 4;
    CHECK_THROWS_AS(extract_eigenvalues(synth([](double t) { return std::exp(-t); }, 0.1, 40), o), ConfigError);
}

TEST_CASE("interval coverage under tomography noise") {
    const SystemParams p(1, 0, 2, 0);
    const auto th = spectral::eigenvalues_closed_form(p);
    PipelineConfig cfg;
    cfg.n_shots = 14000;
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto est = extract_eigenvalues(measured_series(p, cfg, seed));
        bool ok = true;
        for (cplx want : {th.values[0], th.values[2]}) {
            const ExtractedMode* best = nullptr;
            for (const auto& m : est.modes)
                if (!best || std::abs(m.e - want) < std::abs(best->e - want)) best = &m;
            ok = ok && best && std::abs(best->e.real() - want.real()) <= 3 * best->re_stderr &&
                 std::abs(best->e.imag() - want.imag()) <= 3 * best->im_stderr;
        }
        covered += ok;
    }
    CHECK(covered >= 95);
}

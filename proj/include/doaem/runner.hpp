// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "em.hpp"
#include "io.hpp"
#include "mem.hpp"
#include "sage.hpp"
#include "signal_sim.hpp"

namespace doaem {

/// One solver to run on each sample set: algorithm plus the signal model it assumes.
struct SolverSpec {
    Algorithm algorithm = Algorithm::em;
    SignalModel model = SignalModel::deterministic;

    std::string label() const
    {
        return std::string(to_string(algorithm)) + (model == SignalModel::deterministic ? "-det" : "-sto");
    }

    bool operator==(const SolverSpec&) const = default;
};

inline SignalModel parse_model(const std::string& s)
{
    if (s == "deterministic" || s == "det") return SignalModel::deterministic;
    if (s == "stochastic" || s == "sto") return SignalModel::stochastic;
    throw std::invalid_argument("unknown signal model '" + s + "'");
}

inline Algorithm parse_algorithm(const std::string& s)
{
    if (s == "em") return Algorithm::em;
    if (s == "mem") return Algorithm::mem;
    if (s == "sage") return Algorithm::sage;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

/// "em", "sage-sto", "mem-deterministic", ... A bare algorithm name takes fallback as its model.
inline SolverSpec parse_solver(const std::string& s, SignalModel fallback)
{
    const auto dash = s.find('-');
    if (dash == std::string::npos) return {parse_algorithm(s), fallback};
    return {parse_algorithm(s.substr(0, dash)), parse_model(s.substr(dash + 1))};
}

struct WantedCriterion {
    double tolerance_deg = 5.0;
};

/// Every experiment parameter. Angles in degrees, powers and sigma in dB;
/// initial values are linear.
struct ExperimentConfig {
    SignalModel model = SignalModel::deterministic;  // how samples are generated
    std::vector<SolverSpec> solvers;
    ArrayGeometry geometry = ArrayGeometry::ula(10);
    double elevation_deg = 90.0;
    std::vector<double> true_azimuths_deg;
    std::vector<double> powers_db;
    double sigma_db = 0.0;
    int snapshots = 20;

    std::vector<double> init_azimuths_deg;
    cplx init_signal{1.0, 0.0};           // every entry of S^(0)
    std::vector<double> init_powers;      // P^(0); ones when empty
    double init_sigma = 1.0;              // sigma^(0)
    std::vector<double> init_source_sigmas;  // sigma_m^(0); init_sigma * alpha when empty
    std::vector<double> alpha;            // uniform when empty

    double epsilon_deg = 1e-3;
    int max_iterations = 2000;
    LineSearchParams search;

    int realizations = 1;
    std::uint64_t master_seed = 1;
    WantedCriterion wanted;
    int threads = 0;  // 0: one per hardware thread

    std::size_t sources() const { return true_azimuths_deg.size(); }

    std::vector<double> alpha_or_default() const
    {
        return alpha.empty() ? NoiseSplit::uniform(sources()).alpha : alpha;
    }

    std::vector<double> init_powers_or_default() const
    {
        return init_powers.empty() ? std::vector<double>(sources(), 1.0) : init_powers;
    }

    std::vector<double> init_source_sigmas_or_default() const
    {
        if (!init_source_sigmas.empty()) return init_source_sigmas;
        std::vector<double> out = alpha_or_default();
        for (double& v : out) v *= init_sigma;
        return out;
    }

    std::vector<SolverSpec> solvers_or_default() const
    {
        if (!solvers.empty()) return solvers;
        return {{Algorithm::em, model}, {Algorithm::mem, model}, {Algorithm::sage, model}};
    }

    void validate() const
    {
        geometry.validate();
        const std::size_t m = sources();
        if (m < 1) throw std::invalid_argument("config: at least one true azimuth is required");
        if (powers_db.size() != m) throw std::invalid_argument("config: one power per source is required");
        if (init_azimuths_deg.size() != m) throw std::invalid_argument("config: one initial azimuth per source is required");
        for (double a : init_azimuths_deg)
            if (!(a > 0.0 && a < 180.0)) throw std::invalid_argument("config: initial azimuths must lie in (0, 180) degrees");
        if (!(elevation_deg >= 0.0 && elevation_deg <= 180.0))
            throw std::invalid_argument("config: elevation must lie in [0, 180] degrees");
        if (snapshots < 1) throw std::invalid_argument("config: snapshots must be at least 1");
        if (!std::isfinite(sigma_db)) throw std::invalid_argument("config: sigma_db must be finite");
        if (!(init_sigma > 0.0)) throw std::invalid_argument("config: init_sigma must be positive");
        if (!init_powers.empty() && init_powers.size() != m) throw std::invalid_argument("config: init_powers size");
        for (double p : init_powers_or_default())
            if (!(p >= 0.0)) throw std::invalid_argument("config: init_powers must be nonnegative");
        if (!init_source_sigmas.empty() && init_source_sigmas.size() != m)
            throw std::invalid_argument("config: init_source_sigmas size");
        for (double s : init_source_sigmas_or_default())
            if (!(s > 0.0)) throw std::invalid_argument("config: init_source_sigmas must be positive");
        NoiseSplit{alpha_or_default()}.validate(m);
        StoppingRule{epsilon_deg, max_iterations}.validate();
        search.validate();
        if (realizations < 1) throw std::invalid_argument("config: realizations must be at least 1");
        if (!(wanted.tolerance_deg > 0.0)) throw std::invalid_argument("config: wanted tolerance must be positive");
        if (threads < 0) throw std::invalid_argument("config: threads must be nonnegative");
    }

    std::vector<Direction> directions(const std::vector<double>& azimuths_deg) const
    {
        std::vector<Direction> out;
        for (double a : azimuths_deg) out.push_back(Direction{deg2rad(elevation_deg), deg2rad(a)});
        return out;
    }
};

// ---------------------------------------------------------------- config JSON

inline json config_to_json(const ExperimentConfig& c)
{
    json solvers = json::array();
    for (const auto& s : c.solvers_or_default()) solvers.push_back(s.label());
    return {
        {"model", to_string(c.model)},
        {"solvers", solvers},
        {"geometry", geometry_to_json(c.geometry)},
        {"elevation_deg", c.elevation_deg},
        {"true_azimuths_deg", c.true_azimuths_deg},
        {"powers_db", c.powers_db},
        {"sigma_db", c.sigma_db},
        {"snapshots", c.snapshots},
        {"init_azimuths_deg", c.init_azimuths_deg},
        {"init_signal", {c.init_signal.real(), c.init_signal.imag()}},
        {"init_powers", c.init_powers_or_default()},
        {"init_sigma", c.init_sigma},
        {"init_source_sigmas", c.init_source_sigmas_or_default()},
        {"alpha", c.alpha_or_default()},
        {"epsilon_deg", c.epsilon_deg},
        {"max_iterations", c.max_iterations},
        {"line_search",
         {{"rho", c.search.rho},
          {"eta", c.search.eta},
          {"gamma", c.search.gamma},
          {"tol", c.search.tol},
          {"max_gradient_steps", c.search.max_gradient_steps},
          {"max_backtracks", c.search.max_backtracks}}},
        {"realizations", c.realizations},
        {"master_seed", c.master_seed},
        {"wanted_tolerance_deg", c.wanted.tolerance_deg},
    };
}

/// Applies the keys present in j on top of base. Unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {})
{
    static const std::vector<std::string> known = {
        "model", "solvers", "algorithm", "geometry", "sensors", "elevation_deg", "true_azimuths_deg", "powers_db",
        "sigma_db", "snapshots", "init_azimuths_deg", "init_signal", "init_powers", "init_sigma",
        "init_source_sigmas", "alpha", "epsilon_deg", "max_iterations", "line_search", "realizations",
        "master_seed", "wanted_tolerance_deg", "threads"};
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
    try {
        ExperimentConfig c = std::move(base);
        if (j.contains("model")) c.model = parse_model(j["model"].get<std::string>());
        if (j.contains("algorithm")) c.solvers = {parse_solver(j["algorithm"].get<std::string>(), c.model)};
        if (j.contains("solvers")) {
            c.solvers.clear();
            for (const auto& s : j["solvers"]) c.solvers.push_back(parse_solver(s.get<std::string>(), c.model));
        }
        if (j.contains("geometry")) c.geometry = geometry_from_json(j["geometry"]);
        if (j.contains("sensors")) c.geometry = ArrayGeometry::ula(j["sensors"].get<int>());
        if (j.contains("elevation_deg")) c.elevation_deg = j["elevation_deg"].get<double>();
        if (j.contains("true_azimuths_deg")) c.true_azimuths_deg = j["true_azimuths_deg"].get<std::vector<double>>();
        if (j.contains("powers_db")) c.powers_db = j["powers_db"].get<std::vector<double>>();
        if (j.contains("sigma_db")) c.sigma_db = j["sigma_db"].get<double>();
        if (j.contains("snapshots")) c.snapshots = j["snapshots"].get<int>();
        if (j.contains("init_azimuths_deg")) c.init_azimuths_deg = j["init_azimuths_deg"].get<std::vector<double>>();
        if (j.contains("init_signal")) {
            const auto& s = j["init_signal"];
            c.init_signal = s.is_array() ? cplx{s.at(0).get<double>(), s.at(1).get<double>()} : cplx{s.get<double>(), 0.0};
        }
        if (j.contains("init_powers")) c.init_powers = j["init_powers"].get<std::vector<double>>();
        if (j.contains("init_sigma")) c.init_sigma = j["init_sigma"].get<double>();
        if (j.contains("init_source_sigmas")) c.init_source_sigmas = j["init_source_sigmas"].get<std::vector<double>>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<std::vector<double>>();
        if (j.contains("epsilon_deg")) c.epsilon_deg = j["epsilon_deg"].get<double>();
        if (j.contains("max_iterations")) c.max_iterations = j["max_iterations"].get<int>();
        if (j.contains("line_search")) {
            const auto& ls = j["line_search"];
            if (ls.contains("rho")) c.search.rho = ls["rho"].get<double>();
            if (ls.contains("eta")) c.search.eta = ls["eta"].get<double>();
            if (ls.contains("gamma")) c.search.gamma = ls["gamma"].get<double>();
            if (ls.contains("tol")) c.search.tol = ls["tol"].get<double>();
            if (ls.contains("max_gradient_steps")) c.search.max_gradient_steps = ls["max_gradient_steps"].get<int>();
            if (ls.contains("max_backtracks")) c.search.max_backtracks = ls["max_backtracks"].get<int>();
        }
        if (j.contains("realizations")) c.realizations = j["realizations"].get<int>();
        if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
        if (j.contains("wanted_tolerance_deg")) c.wanted.tolerance_deg = j["wanted_tolerance_deg"].get<double>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
        return c;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

// ---------------------------------------------------------------- samples

/// Sample set of one realization, drawn from stream `realization` of the
/// master seed. Deterministic-model waveforms are themselves drawn as
/// CN(0, P_m), so both models consume the stream identically.
inline SnapshotMatrix draw_samples(const ExperimentConfig& c, std::uint64_t realization)
{
    RngStream rng(c.master_seed, realization);
    std::vector<double> powers;
    for (double p : c.powers_db) powers.push_back(db2lin(p));
    const auto dirs = c.directions(c.true_azimuths_deg);
    const double sigma = db2lin(c.sigma_db);
    if (c.model == SignalModel::deterministic) {
        const DeterministicSignals S = draw_signals(powers, c.snapshots, rng);
        return gen_deterministic(c.geometry, dirs, S, sigma, rng);
    }
    return gen_stochastic(c.geometry, dirs, powers, sigma, c.snapshots, rng);
}

// ---------------------------------------------------------------- classification

/// True iff some assignment of estimates to sources puts every azimuth
/// within the tolerance.
inline bool classify_wanted(const std::vector<double>& estimates_deg, const std::vector<double>& truth_deg,
                            const WantedCriterion& criterion)
{
    if (estimates_deg.size() != truth_deg.size()) throw std::invalid_argument("classify_wanted: size mismatch");
    if (!(criterion.tolerance_deg > 0.0)) throw std::invalid_argument("classify_wanted: tolerance must be positive");
    std::vector<std::size_t> perm(truth_deg.size());
    std::iota(perm.begin(), perm.end(), 0);
    do {
        bool ok = true;
        for (std::size_t m = 0; m < perm.size() && ok; ++m)
            ok = std::abs(estimates_deg[perm[m]] - truth_deg[m]) <= criterion.tolerance_deg;
        if (ok) return true;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return false;
}

// ---------------------------------------------------------------- single run

struct RealizationResult {
    SolverSpec spec;
    std::vector<double> azimuths_deg;
    int iterations = 0;
    std::vector<double> loglik_trace;
    std::vector<std::vector<double>> azimuth_trace_deg;
    bool wanted = false;
    bool capped = false;
    bool aborted = false;
    std::string diagnostic;
    int positivity_violations = 0;
    std::uint64_t samples_checksum = 0;  // checksum of the samples this solver consumed
};

/// Runs one configured solver on one sample set until the stopping rule fires.
inline RealizationResult run_solver(const ExperimentConfig& c, const SolverSpec& spec, const SnapshotMatrix& Y,
                                    const TraceObserver& observer = {})
{
    const std::size_t M = c.sources();
    if (Y.rows() != c.geometry.size()) throw std::invalid_argument("run_solver: samples do not match the geometry");
    if (Y.cols() < 1) throw std::invalid_argument("run_solver: no snapshots");
    const StoppingRule rule{c.epsilon_deg, c.max_iterations};
    const auto dirs0 = c.directions(c.init_azimuths_deg);
    const DeterministicSignals S0 = DeterministicSignals::Constant(static_cast<Eigen::Index>(M), Y.cols(), c.init_signal);
    const NoiseSplit alpha{c.alpha_or_default()};
    const std::vector<double> P0 = c.init_powers_or_default();

    RealizationResult out;
    out.spec = spec;
    out.samples_checksum = checksum(Y);
    SolveResult r;
    if (spec.model == SignalModel::deterministic) {
        switch (spec.algorithm) {
        case Algorithm::em:
            r = solve_em_det(Y, c.geometry, EmDetState{dirs0, S0, c.init_sigma, 0}, alpha, c.search, rule, observer);
            break;
        case Algorithm::mem:
            r = solve_mem_det(Y, c.geometry, MemDetState{dirs0, S0, {c.init_source_sigmas_or_default()}, 0}, c.search,
                              rule, observer);
            break;
        case Algorithm::sage:
            r = solve_sage_det(Y, c.geometry, SageDetState{dirs0, S0, c.init_sigma, {}}, c.search, rule, observer);
            break;
        }
    } else {
        const CMatrix Ry = sample_covariance(Y);
        switch (spec.algorithm) {
        case Algorithm::em:
            r = solve_em_sto(Ry, Y.cols(), c.geometry, EmStoState{dirs0, P0, c.init_sigma, 0}, alpha, c.search, rule,
                             observer);
            break;
        case Algorithm::mem:
            r = solve_mem_sto(Ry, Y.cols(), c.geometry, MemStoState{dirs0, P0, {c.init_source_sigmas_or_default()}, 0},
                              c.search, rule, observer);
            break;
        case Algorithm::sage:
            r = solve_sage_sto(Ry, Y.cols(), c.geometry, SageStoState{dirs0, P0, c.init_sigma, {}, {}, false}, c.search,
                               rule, observer);
            break;
        }
    }
    out.azimuths_deg = azimuths_deg(r.dirs);
    out.iterations = r.iterations;
    out.loglik_trace = std::move(r.loglik_trace);
    out.azimuth_trace_deg = std::move(r.azimuth_trace_deg);
    out.capped = r.capped;
    out.aborted = r.aborted;
    out.diagnostic = std::move(r.diagnostic);
    out.positivity_violations = r.positivity_violations;
    out.wanted = !out.aborted && classify_wanted(out.azimuths_deg, c.true_azimuths_deg, c.wanted);
    return out;
}

// ---------------------------------------------------------------- Monte Carlo

struct RealizationOutcome {
    int index = 0;
    std::uint64_t samples_checksum = 0;
    std::vector<RealizationResult> runs;  // one per solver, in configuration order
};

struct SolverSummary {
    SolverSpec spec;
    int wanted = 0;
    int capped = 0;
    int aborted = 0;
    int positivity_violations = 0;
    int counted = 0;               // runs entering the iteration statistics
    double mean_iterations = 0.0;  // over runs that neither capped nor aborted
};

struct MonteCarloResult {
    std::vector<RealizationOutcome> realizations;
    std::vector<SolverSummary> summary;

    bool all_aborted() const
    {
        for (const auto& r : realizations)
            for (const auto& run : r.runs)
                if (!run.aborted) return false;
        return !realizations.empty();
    }

    const SolverSummary& for_solver(const SolverSpec& s) const
    {
        for (const auto& x : summary)
            if (x.spec == s) return x;
        throw std::out_of_range("no summary for solver " + s.label());
    }
};

inline RealizationOutcome run_realization(const ExperimentConfig& c, int index)
{
    const SnapshotMatrix Y = draw_samples(c, static_cast<std::uint64_t>(index));
    RealizationOutcome out;
    out.index = index;
    out.samples_checksum = checksum(Y);
    for (const auto& spec : c.solvers_or_default()) out.runs.push_back(run_solver(c, spec, Y));
    return out;
}

inline std::vector<SolverSummary> summarize(const std::vector<SolverSpec>& specs,
                                            const std::vector<RealizationOutcome>& outcomes)
{
    std::vector<SolverSummary> out;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        SolverSummary sum;
        sum.spec = specs[s];
        double acc = 0.0;
        for (const auto& o : outcomes) {
            const auto& run = o.runs[s];
            sum.wanted += run.wanted ? 1 : 0;
            sum.capped += run.capped ? 1 : 0;
            sum.aborted += run.aborted ? 1 : 0;
            sum.positivity_violations += run.positivity_violations;
            if (!run.capped && !run.aborted) {
                acc += run.iterations;
                ++sum.counted;
            }
        }
        sum.mean_iterations = sum.counted ? acc / sum.counted : std::numeric_limits<double>::quiet_NaN();
        out.push_back(sum);
    }
    return out;
}

/// Runs every configured solver on the same sample set for each realization.
/// Realizations are spread over worker threads; results are keyed by index,
/// so the outcome does not depend on scheduling.
inline MonteCarloResult monte_carlo(const ExperimentConfig& c)
{
    c.validate();
    const int n = c.realizations;
    std::vector<RealizationOutcome> outcomes(static_cast<std::size_t>(n));
    unsigned workers = c.threads > 0 ? static_cast<unsigned>(c.threads) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (int i = next++; i < n && !failed; i = next++) {
            try {
                outcomes[static_cast<std::size_t>(i)] = run_realization(c, i);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    MonteCarloResult result;
    result.summary = summarize(c.solvers_or_default(), outcomes);
    result.realizations = std::move(outcomes);
    return result;
}

} // namespace doaem

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

// doaem: simulate array snapshots, run the EM/MEM/SAGE direction solvers,
// Monte Carlo batches and figure recipes.
//
// Exit codes: 0 success, 1 configuration error, 2 every realization aborted.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <doaem/doaem.hpp>

namespace {

using namespace doaem;

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_aborted = 2;

// Flags mirroring ExperimentConfig. Only flags given on the command line are
// turned into overrides; everything else comes from --config or the defaults.
struct ConfigFlags {
    std::string config_file;
    std::string model;
    std::vector<std::string> solvers;
    int sensors = 0;
    std::string geometry_file;
    double elevation_deg = 0;
    std::vector<double> azimuths, powers_db, init_azimuths, init_powers, init_source_sigmas, alpha;
    std::vector<double> init_signal;
    double sigma_db = 0, init_sigma = 0, epsilon = 0, rho = 0, eta = 0, gamma = 0, tol = 0, wanted_tol = 0;
    int snapshots = 0, max_iterations = 0, max_gradient_steps = 0, max_backtracks = 0, realizations = 0, threads = 0;
    std::uint64_t seed = 0;

    std::vector<std::pair<std::string, CLI::Option*>> given;

    template <class T>
    CLI::Option* add(CLI::App& app, const std::string& flag, const std::string& key, T& target,
                     const std::string& help)
    {
        CLI::Option* opt = app.add_option(flag, target, help);
        given.emplace_back(key, opt);
        return opt;
    }

    void attach(CLI::App& app)
    {
        app.add_option("-c,--config", config_file, "JSON configuration file; flags override its values")
            ->check(CLI::ExistingFile);
        add(app, "--model", "model", model, "sample model: deterministic|stochastic");
        add(app, "--solver", "solvers", solvers, "solver(s) to run, e.g. em, sage-sto, mem-det (repeatable)");
        add(app, "--sensors", "sensors", sensors, "ULA size with half-wavelength spacing");
        add(app, "--geometry", "geometry", geometry_file, "JSON file with wavelength and sensor positions");
        add(app, "--elevation", "elevation_deg", elevation_deg, "elevation of every source (deg)");
        add(app, "--azimuths", "true_azimuths_deg", azimuths, "true source azimuths (deg)");
        add(app, "--powers-db", "powers_db", powers_db, "source powers (dB)");
        add(app, "--sigma-db", "sigma_db", sigma_db, "noise variance (dB)");
        add(app, "-T,--snapshots", "snapshots", snapshots, "snapshots per realization");
        add(app, "--init-azimuths", "init_azimuths_deg", init_azimuths, "initial azimuths (deg)");
        add(app, "--init-signal", "init_signal", init_signal, "initial waveform entry: re [im]")->expected(1, 2);
        add(app, "--init-powers", "init_powers", init_powers, "initial source powers (linear)");
        add(app, "--init-sigma", "init_sigma", init_sigma, "initial noise variance (linear)");
        add(app, "--init-source-sigmas", "init_source_sigmas", init_source_sigmas,
            "initial per-source noise variances for MEM (linear)");
        add(app, "--alpha", "alpha", alpha, "noise split for EM, sums to one");
        add(app, "--epsilon", "epsilon_deg", epsilon, "stopping threshold on the azimuth change (deg)");
        add(app, "--max-iterations", "max_iterations", max_iterations, "iteration cap");
        add(app, "--rho", "rho", rho, "line search initial step");
        add(app, "--eta", "eta", eta, "Armijo sufficient-increase constant");
        add(app, "--gamma", "gamma", gamma, "backtracking factor");
        add(app, "--tol", "tol", tol, "gradient magnitude tolerance");
        add(app, "--max-gradient-steps", "max_gradient_steps", max_gradient_steps, "gradient step cap per search");
        add(app, "--max-backtracks", "max_backtracks", max_backtracks, "backtracking cap per step");
        add(app, "-n,--realizations", "realizations", realizations, "Monte Carlo realizations");
        add(app, "-s,--seed", "master_seed", seed, "master seed");
        add(app, "--wanted-tol", "wanted_tolerance_deg", wanted_tol, "wanted-point tolerance (deg)");
        add(app, "-j,--threads", "threads", threads, "worker threads (0: all cores)");
    }

    json overrides() const
    {
        json j = json::object();
        json ls = json::object();
        auto set = [&](const std::string& key, json v) {
            if (key == "rho" || key == "eta" || key == "gamma" || key == "tol" || key == "max_gradient_steps" ||
                key == "max_backtracks")
                ls[key] = std::move(v);
            else
                j[key] = std::move(v);
        };
        for (const auto& [key, opt] : given) {
            if (opt->count() == 0) continue;
            if (key == "model") set(key, model);
            else if (key == "solvers") set(key, solvers);
            else if (key == "sensors") set(key, sensors);
            else if (key == "geometry") set(key, read_json_file(geometry_file));
            else if (key == "elevation_deg") set(key, elevation_deg);
            else if (key == "true_azimuths_deg") set(key, azimuths);
            else if (key == "powers_db") set(key, powers_db);
            else if (key == "sigma_db") set(key, sigma_db);
            else if (key == "snapshots") set(key, snapshots);
            else if (key == "init_azimuths_deg") set(key, init_azimuths);
            else if (key == "init_signal") set(key, init_signal.size() == 1 ? json::array({init_signal[0], 0.0}) : json(init_signal));
            else if (key == "init_powers") set(key, init_powers);
            else if (key == "init_sigma") set(key, init_sigma);
            else if (key == "init_source_sigmas") set(key, init_source_sigmas);
            else if (key == "alpha") set(key, alpha);
            else if (key == "epsilon_deg") set(key, epsilon);
            else if (key == "max_iterations") set(key, max_iterations);
            else if (key == "rho") set(key, rho);
            else if (key == "eta") set(key, eta);
            else if (key == "gamma") set(key, gamma);
            else if (key == "tol") set(key, tol);
            else if (key == "max_gradient_steps") set(key, max_gradient_steps);
            else if (key == "max_backtracks") set(key, max_backtracks);
            else if (key == "realizations") set(key, realizations);
            else if (key == "master_seed") set(key, seed);
            else if (key == "wanted_tolerance_deg") set(key, wanted_tol);
            else if (key == "threads") set(key, threads);
        }
        if (!ls.empty()) j["line_search"] = ls;
        return j;
    }

    ExperimentConfig resolve(ExperimentConfig base = {}) const
    {
        if (!config_file.empty()) base = config_from_json(read_json_file(config_file), std::move(base));
        ExperimentConfig c = config_from_json(overrides(), std::move(base));
        c.validate();
        return c;
    }
};

json result_to_json(const RealizationResult& r)
{
    return {{"solver", r.spec.label()},
            {"azimuths_deg", r.azimuths_deg},
            {"iterations", r.iterations},
            {"loglik", r.loglik_trace.empty() ? json(nullptr) : json(r.loglik_trace.back())},
            {"wanted", r.wanted},
            {"capped", r.capped},
            {"aborted", r.aborted},
            {"diagnostic", r.diagnostic},
            {"positivity_violations", r.positivity_violations},
            {"samples_checksum", r.samples_checksum}};
}

void write_trace_csv(std::ostream& out, const std::vector<RealizationResult>& runs, std::size_t sources)
{
    out << "k,solver,loglik";
    for (std::size_t m = 0; m < sources; ++m) out << ",phi" << m + 1 << "_deg";
    out << '\n' << std::setprecision(12);
    for (const auto& r : runs)
        for (std::size_t k = 0; k < r.loglik_trace.size(); ++k) {
            out << k << ',' << r.spec.label() << ',' << r.loglik_trace[k];
            for (double a : r.azimuth_trace_deg[k]) out << ',' << a;
            out << '\n';
        }
}

json summary_to_json(const MonteCarloResult& mc)
{
    json out = json::array();
    for (const auto& s : mc.summary)
        out.push_back({{"solver", s.spec.label()},
                       {"wanted", s.wanted},
                       {"capped", s.capped},
                       {"aborted", s.aborted},
                       {"positivity_violations", s.positivity_violations},
                       {"mean_iterations", s.counted ? json(s.mean_iterations) : json(nullptr)}});
    return out;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write " + path);
    return out;
}

int cmd_simulate(const ConfigFlags& flags, std::uint64_t realization, const std::string& out_path)
{
    const ExperimentConfig c = flags.resolve();
    const SnapshotMatrix Y = draw_samples(c, realization);
    if (out_path.empty()) {
        write_snapshots_csv(std::cout, Y);
    } else if (out_path.ends_with(".json")) {
        open_out(out_path) << snapshots_to_json(Y).dump() << '\n';
    } else {
        auto out = open_out(out_path);
        write_snapshots_csv(out, Y);
    }
    return exit_ok;
}

int cmd_solve(const ConfigFlags& flags, std::uint64_t realization, const std::string& samples_path,
              const std::string& trace_path)
{
    const ExperimentConfig c = flags.resolve();
    const SnapshotMatrix Y = samples_path.empty() ? draw_samples(c, realization) : load_snapshots(samples_path);
    if (Y.rows() != c.geometry.size()) throw std::invalid_argument("samples have " + std::to_string(Y.rows()) +
                                                                   " rows but the geometry has " +
                                                                   std::to_string(c.geometry.size()) + " sensors");
    std::vector<RealizationResult> runs;
    for (const auto& spec : c.solvers_or_default()) runs.push_back(run_solver(c, spec, Y));

    json out = {{"config", config_to_json(c)}, {"results", json::array()}};
    bool all_aborted = true;
    for (const auto& r : runs) {
        out["results"].push_back(result_to_json(r));
        all_aborted = all_aborted && r.aborted;
    }
    std::cout << out.dump(2) << '\n';
    if (!trace_path.empty()) {
        auto f = open_out(trace_path);
        write_trace_csv(f, runs, c.sources());
    }
    return all_aborted ? exit_aborted : exit_ok;
}

int cmd_montecarlo(const ConfigFlags& flags, const std::string& rows_path)
{
    const ExperimentConfig c = flags.resolve();
    const MonteCarloResult mc = monte_carlo(c);
    std::cout << json{{"config", config_to_json(c)}, {"summary", summary_to_json(mc)}}.dump(2) << '\n';
    if (!rows_path.empty()) {
        auto f = open_out(rows_path);
        f << "realization,solver";
        for (std::size_t m = 0; m < c.sources(); ++m) f << ",phi" << m + 1 << "_hat";
        f << ",iterations,wanted,capped,aborted\n" << std::setprecision(12);
        for (const auto& r : mc.realizations)
            for (const auto& run : r.runs) {
                f << r.index << ',' << run.spec.label();
                for (double a : run.azimuths_deg) f << ',' << a;
                f << ',' << run.iterations << ',' << run.wanted << ',' << run.capped << ',' << run.aborted << '\n';
            }
    }
    return mc.all_aborted() ? exit_aborted : exit_ok;
}

int cmd_reproduce(const ConfigFlags& flags, const std::string& name, const std::string& out_dir)
{
    FigureRecipe recipe = figure_recipe(name);
    recipe.config = flags.resolve(recipe.config);
    const FigureOutput out = reproduce_figure(recipe, out_dir);
    for (const auto& f : out.files) std::cout << f.string() << '\n';
    for (const auto& s : out.result.summary)
        std::cerr << s.spec.label() << ": wanted " << s.wanted << '/' << recipe.config.realizations << ", mean iterations "
                  << s.mean_iterations << ", capped " << s.capped << ", aborted " << s.aborted << '\n';
    return out.result.all_aborted() ? exit_aborted : exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Direction-of-arrival estimation with EM, MEM and SAGE"};
    app.require_subcommand(1);

    ConfigFlags sim_flags, solve_flags, mc_flags, fig_flags;
    std::uint64_t sim_realization = 0, solve_realization = 0;
    std::string sim_out, solve_samples, solve_trace, mc_rows, fig_name, fig_out = ".";

    auto* sim = app.add_subcommand("simulate", "draw one sample set and write it as CSV or JSON");
    sim_flags.attach(*sim);
    sim->add_option("-r,--realization", sim_realization, "realization index (random stream)");
    sim->add_option("-o,--out", sim_out, "output file (.csv or .json); stdout when omitted");

    auto* solve = app.add_subcommand("solve", "run the configured solvers on one realization");
    solve_flags.attach(*solve);
    solve->add_option("-r,--realization", solve_realization, "realization index to draw when no samples are given");
    solve->add_option("--samples", solve_samples, "snapshot file (.csv or .json) to solve instead of drawing")
        ->check(CLI::ExistingFile);
    solve->add_option("--trace", solve_trace, "write per-iteration log-likelihood and azimuths to this CSV");

    auto* mc = app.add_subcommand("montecarlo", "run every solver on the same samples over many realizations");
    mc_flags.attach(*mc);
    mc->add_option("-o,--out", mc_rows, "per-realization CSV");

    auto* fig = app.add_subcommand("reproduce-fig", "run a figure recipe and write <name>.csv and <name>.json");
    fig_flags.attach(*fig);
    fig->add_option("name", fig_name, "fig1 .. fig8")->required();
    fig->add_option("-o,--out-dir", fig_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*sim) return cmd_simulate(sim_flags, sim_realization, sim_out);
        if (*solve) return cmd_solve(solve_flags, solve_realization, solve_samples, solve_trace);
        if (*mc) return cmd_montecarlo(mc_flags, mc_rows);
        if (*fig) return cmd_reproduce(fig_flags, fig_name, fig_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }
    return exit_ok;
}

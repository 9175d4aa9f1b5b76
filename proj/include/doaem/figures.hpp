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

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "runner.hpp"

namespace doaem {

inline constexpr int figure_schema_version = 1;

enum class FigureKind {
    trace,       // per-iteration log-likelihood and azimuths for one realization
    scatter,     // final azimuth estimates per realization and solver
    iterations,  // per-realization iteration counts
};

struct FigureRecipe {
    std::string name;
    FigureKind kind = FigureKind::trace;
    ExperimentConfig config;
};

inline const std::vector<std::string>& figure_names()
{
    static const std::vector<std::string> names = {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"};
    return names;
}

/// Settings of each reproducible figure: ULA of 10 half-wavelength spaced
/// sensors, 20 snapshots, two sources at broadside elevation.
inline FigureRecipe figure_recipe(const std::string& name)
{
    using enum SignalModel;
    FigureRecipe f;
    f.name = name;
    ExperimentConfig& c = f.config;
    c.sigma_db = 4.0;
    c.init_sigma = 1.0;
    c.init_source_sigmas = {0.5, 0.5};
    c.alpha = {0.5, 0.5};
    auto three = [](SignalModel m) {
        return std::vector<SolverSpec>{{Algorithm::em, m}, {Algorithm::mem, m}, {Algorithm::sage, m}};
    };
    if (name == "fig1") {
        f.kind = FigureKind::trace;
        c.model = deterministic;
        c.true_azimuths_deg = {20, 80};
        c.powers_db = {-2, 4};
        c.init_azimuths_deg = {24, 84};
        c.realizations = 1;
    } else if (name == "fig2") {
        f.kind = FigureKind::scatter;
        c.model = deterministic;
        c.true_azimuths_deg = {25, 75};
        c.powers_db = {-4, 2};
        c.init_azimuths_deg = {40, 60};
        c.realizations = 200;
    } else if (name == "fig3") {
        f.kind = FigureKind::scatter;
        c.model = deterministic;
        c.true_azimuths_deg = {70, 78};
        c.powers_db = {-2, 4};
        c.init_azimuths_deg = {50, 58};
        c.realizations = 200;
    } else if (name == "fig4") {
        f.kind = FigureKind::trace;
        c.model = stochastic;
        c.true_azimuths_deg = {20, 80};
        c.powers_db = {-4, 4};
        c.init_azimuths_deg = {24, 84};
        c.realizations = 1;
    } else if (name == "fig5") {
        f.kind = FigureKind::scatter;
        c.model = stochastic;
        c.true_azimuths_deg = {25, 75};
        c.powers_db = {-4, 2};
        c.init_azimuths_deg = {40, 60};
        c.realizations = 200;
    } else if (name == "fig6") {
        f.kind = FigureKind::scatter;
        c.model = stochastic;
        c.true_azimuths_deg = {70, 78};
        c.powers_db = {-2, -1};
        c.init_azimuths_deg = {55, 63};
        c.realizations = 200;
    } else if (name == "fig7" || name == "fig8") {
        f.kind = name == "fig7" ? FigureKind::scatter : FigureKind::iterations;
        c.model = stochastic;
        c.true_azimuths_deg = {50, 100};
        c.powers_db = {-4, 4};
        c.init_azimuths_deg = {55, 95};
        c.realizations = 50;
        c.solvers = {{Algorithm::em, deterministic}, {Algorithm::em, stochastic},
                     {Algorithm::sage, deterministic}, {Algorithm::sage, stochastic}};
        return f;
    } else {
        throw std::invalid_argument("unknown figure '" + name + "' (expected fig1..fig8)");
    }
    c.solvers = three(c.model);
    return f;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::string fmt_num(double v)
{
    std::ostringstream s;
    s << std::setprecision(12) << v;
    return s.str();
}

} // namespace detail

struct FigureOutput {
    std::vector<std::filesystem::path> files;
    MonteCarloResult result;
};

inline std::vector<std::string> figure_columns(FigureKind kind)
{
    switch (kind) {
    case FigureKind::trace: return {"k", "algorithm", "loglik", "phi1_deg", "phi2_deg"};
    case FigureKind::scatter:
        return {"realization", "algorithm", "model", "phi1_hat", "phi2_hat", "iterations", "wanted"};
    case FigureKind::iterations:
        return {"realization", "em_det_iters", "em_sto_iters", "sage_det_iters", "sage_sto_iters"};
    }
    return {};
}

/// Runs a recipe and writes <name>.csv plus a <name>.json sidecar holding
/// the configuration and summary counts.
inline FigureOutput reproduce_figure(const FigureRecipe& recipe, const std::filesystem::path& out_dir)
{
    const ExperimentConfig& c = recipe.config;
    c.validate();
    if (c.sources() != 2) throw std::invalid_argument("reproduce_figure: figure schemas assume two sources");
    std::filesystem::create_directories(out_dir);

    FigureOutput out;
    out.result = monte_carlo(c);
    const auto columns = figure_columns(recipe.kind);
    std::ostringstream csv;
    for (std::size_t i = 0; i < columns.size(); ++i) csv << (i ? "," : "") << columns[i];
    csv << '\n';

    using detail::fmt_num;
    switch (recipe.kind) {
    case FigureKind::trace: {
        const auto& runs = out.result.realizations.front().runs;
        for (const auto& run : runs)
            for (std::size_t k = 0; k < run.loglik_trace.size(); ++k)
                csv << k << ',' << to_string(run.spec.algorithm) << ',' << fmt_num(run.loglik_trace[k]) << ','
                    << fmt_num(run.azimuth_trace_deg[k][0]) << ',' << fmt_num(run.azimuth_trace_deg[k][1]) << '\n';
        break;
    }
    case FigureKind::scatter:
        for (const auto& r : out.result.realizations)
            for (const auto& run : r.runs)
                csv << r.index << ',' << to_string(run.spec.algorithm) << ',' << to_string(run.spec.model) << ','
                    << fmt_num(run.azimuths_deg[0]) << ',' << fmt_num(run.azimuths_deg[1]) << ',' << run.iterations
                    << ',' << (run.wanted ? 1 : 0) << '\n';
        break;
    case FigureKind::iterations: {
        const std::vector<SolverSpec> order = {{Algorithm::em, SignalModel::deterministic},
                                               {Algorithm::em, SignalModel::stochastic},
                                               {Algorithm::sage, SignalModel::deterministic},
                                               {Algorithm::sage, SignalModel::stochastic}};
        const auto specs = c.solvers_or_default();
        for (const auto& r : out.result.realizations) {
            csv << r.index;
            for (const auto& want : order) {
                const auto it = std::find(specs.begin(), specs.end(), want);
                if (it == specs.end()) throw std::invalid_argument("reproduce_figure: iteration figure needs " + want.label());
                csv << ',' << r.runs[static_cast<std::size_t>(it - specs.begin())].iterations;
            }
            csv << '\n';
        }
        break;
    }
    }

    json summary = json::array();
    for (const auto& s : out.result.summary)
        summary.push_back({{"solver", s.spec.label()},
                           {"wanted", s.wanted},
                           {"capped", s.capped},
                           {"aborted", s.aborted},
                           {"positivity_violations", s.positivity_violations},
                           {"mean_iterations", s.counted ? json(s.mean_iterations) : json(nullptr)}});
    const json sidecar = {{"figure", recipe.name},
                          {"schema_version", figure_schema_version},
                          {"columns", columns},
                          {"config", config_to_json(c)},
                          {"summary", summary}};

    const auto csv_path = out_dir / (recipe.name + ".csv");
    const auto json_path = out_dir / (recipe.name + ".json");
    detail::write_text(csv_path, csv.str());
    detail::write_text(json_path, sidecar.dump(2) + "\n");
    out.files = {csv_path, json_path};
    return out;
}

inline FigureOutput reproduce_figure(const std::string& name, const std::filesystem::path& out_dir)
{
    return reproduce_figure(figure_recipe(name), out_dir);
}

} // namespace doaem

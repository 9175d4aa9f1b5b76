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
#include <numeric>
#include <stdexcept>
#include <vector>

#include "angle_search.hpp"
#include "estep.hpp"
#include "iteration.hpp"
#include "likelihood.hpp"

namespace doaem {

/// Per-source noise variances sigma_m; the array noise is their sum and the
/// implied split is alpha_m = sigma_m / sigma.
struct PerSourceNoise {
    std::vector<double> sigmas;

    double total() const { return std::accumulate(sigmas.begin(), sigmas.end(), 0.0); }

    std::vector<double> implied_alpha() const
    {
        const double s = total();
        std::vector<double> out(sigmas.size());
        std::transform(sigmas.begin(), sigmas.end(), out.begin(), [s](double v) { return v / s; });
        return out;
    }

    bool all_positive() const
    {
        return std::all_of(sigmas.begin(), sigmas.end(), [](double v) { return v > 0.0; });
    }
};

struct MemDetState {
    std::vector<Direction> dirs;
    DeterministicSignals signals;
    PerSourceNoise noise;
    int iter = 0;
};

struct MemStoState {
    std::vector<Direction> dirs;
    std::vector<double> powers;
    PerSourceNoise noise;
    int iter = 0;
};

/// Deterministic E-step output; c[m] = N sigma_m (1 - sigma_m / sigma).
struct MemDetEStep : DetEStep {
    std::vector<double> c;
};

// ---------------------------------------------------------------- deterministic

inline MemDetEStep mem_det_estep(const SnapshotMatrix& Y, const MemDetState& state, const ArrayGeometry& geom)
{
    if (!state.noise.all_positive()) throw std::domain_error("mem_det_estep: per-source noise must be positive");
    const std::vector<double> ratio = state.noise.implied_alpha();
    MemDetEStep out{split_residual(Y, steering_matrix(geom, state.dirs), state.signals, ratio), {}};
    const double n = static_cast<double>(geom.size());
    for (std::size_t m = 0; m < ratio.size(); ++m)
        out.c.push_back(n * state.noise.sigmas[m] * (1.0 - ratio[m]));
    return out;
}

/// sigma_m^(k) = sigma_m (1 - sigma_m / sigma) + d_m / N.
inline double mem_det_sigma_update(double sigma_m, double sigma_total, double d, Eigen::Index n_sensors)
{
    return sigma_m * (1.0 - sigma_m / sigma_total) + d / static_cast<double>(n_sensors);
}

inline MemDetState mem_det_mstep(const MemDetEStep& estep, const MemDetState& state, const ArrayGeometry& geom,
                                 const LineSearchParams& search)
{
    const std::size_t M = state.dirs.size();
    const double n = static_cast<double>(geom.size());
    const double total = state.noise.total();
    MemDetState next{state.dirs, state.signals, state.noise, state.iter + 1};
    for (std::size_t m = 0; m < M; ++m) {
        const auto& R = estep.stats[m];
        next.dirs[m] = update_direction(geom, R, state.dirs[m], search);
        const CVector a = steering_vector(geom, next.dirs[m]);
        next.signals.row(static_cast<Eigen::Index>(m)) = (a.adjoint() * estep.components[m]) / n;
        next.noise.sigmas[m] = mem_det_sigma_update(state.noise.sigmas[m], total, projection_stats(a, R).d, geom.size());
    }
    return next;
}

inline MemDetState mem_det_iteration(const SnapshotMatrix& Y, const MemDetState& state, const ArrayGeometry& geom,
                                     const LineSearchParams& search)
{
    return mem_det_mstep(mem_det_estep(Y, state, geom), state, geom, search);
}

inline TraceRecord describe(const SnapshotMatrix& Y, const MemDetState& s, const ArrayGeometry& geom)
{
    TraceRecord r;
    r.azimuths_deg = azimuths_deg(s.dirs);
    r.sigma = s.noise.total();
    r.source_sigmas = s.noise.sigmas;
    r.loglik = loglik_det(Y, s.dirs, s.signals, r.sigma, geom);
    r.noise_positive = s.noise.all_positive();
    return r;
}

inline SolveResult solve_mem_det(const SnapshotMatrix& Y, const ArrayGeometry& geom, MemDetState init,
                                 const LineSearchParams& search, const StoppingRule& rule,
                                 const TraceObserver& observer = {})
{
    if (init.noise.sigmas.size() != init.dirs.size() || !init.noise.all_positive())
        throw std::invalid_argument("solve_mem_det: one positive initial noise variance per source required");
    search.validate();
    return iterate_solver(
        std::move(init), [&](MemDetState s, int) { return mem_det_iteration(Y, s, geom, search); },
        [&](const MemDetState& s) { return describe(Y, s, geom); }, rule, observer);
}

// ---------------------------------------------------------------- stochastic

inline std::vector<CompleteDataStat> mem_sto_estep(const CMatrix& Ry, const MemStoState& state,
                                                   const ArrayGeometry& geom)
{
    const std::size_t M = state.dirs.size();
    std::vector<CMatrix> Cm;
    Cm.reserve(M);
    CMatrix Cy = CMatrix::Zero(geom.size(), geom.size());
    for (std::size_t m = 0; m < M; ++m) {
        Cm.push_back(source_cov(steering_vector(geom, state.dirs[m]), state.powers[m], state.noise.sigmas[m]));
        Cy += Cm.back();
    }
    const GaussianSplitter splitter(Cy, Ry);
    std::vector<CompleteDataStat> out;
    out.reserve(M);
    for (const auto& C : Cm) out.push_back(splitter.conditional_stat(C));
    return out;
}

/// Closed-form (sigma_m, P_m) for one source given its projection statistics.
/// signal_present is false on the e <= Tr/N branch (P_m = 0).
struct SourceNoisePower {
    double sigma = 0.0;
    double power = 0.0;
    bool signal_present = false;
};

inline SourceNoisePower concentrated_noise_power(const ProjectionStats& ps, Eigen::Index n_sensors)
{
    const double n = static_cast<double>(n_sensors);
    const double tr = ps.trace();
    if (ps.e > tr / n) return {ps.d / (n - 1.0), (ps.e - tr / n) / (n - 1.0), true};
    return {tr / n, 0.0, false};
}

inline MemStoState mem_sto_mstep(const std::vector<CompleteDataStat>& stats, const MemStoState& state,
                                 const ArrayGeometry& geom, const LineSearchParams& search)
{
    MemStoState next{state.dirs, state.powers, state.noise, state.iter + 1};
    for (std::size_t m = 0; m < state.dirs.size(); ++m) {
        const Direction cand = update_direction(geom, stats[m], state.dirs[m], search);
        const SourceNoisePower sp = concentrated_noise_power(projection_stats(geom, cand, stats[m]), geom.size());
        // outside the feasible set the direction is indeterminate: keep the previous one
        next.dirs[m] = sp.signal_present ? cand : state.dirs[m];
        next.noise.sigmas[m] = sp.sigma;
        next.powers[m] = sp.power;
    }
    return next;
}

inline MemStoState mem_sto_iteration(const CMatrix& Ry, const MemStoState& state, const ArrayGeometry& geom,
                                     const LineSearchParams& search)
{
    return mem_sto_mstep(mem_sto_estep(Ry, state, geom), state, geom, search);
}

inline TraceRecord describe(const CMatrix& Ry, Eigen::Index n_snapshots, const MemStoState& s,
                            const ArrayGeometry& geom)
{
    TraceRecord r;
    r.azimuths_deg = azimuths_deg(s.dirs);
    r.sigma = s.noise.total();
    r.source_sigmas = s.noise.sigmas;
    r.powers = s.powers;
    r.noise_positive = s.noise.all_positive();
    r.loglik = r.sigma > 0.0 ? loglik_sto(Ry, s.dirs, s.powers, r.sigma, geom, n_snapshots)
                             : std::numeric_limits<double>::quiet_NaN();
    return r;
}

inline SolveResult solve_mem_sto(const CMatrix& Ry, Eigen::Index n_snapshots, const ArrayGeometry& geom,
                                 MemStoState init, const LineSearchParams& search, const StoppingRule& rule,
                                 const TraceObserver& observer = {})
{
    if (init.noise.sigmas.size() != init.dirs.size() || !init.noise.all_positive())
        throw std::invalid_argument("solve_mem_sto: one positive initial noise variance per source required");
    search.validate();
    return iterate_solver(
        std::move(init), [&](MemStoState s, int) { return mem_sto_iteration(Ry, s, geom, search); },
        [&](const MemStoState& s) { return describe(Ry, n_snapshots, s, geom); }, rule, observer);
}

} // namespace doaem

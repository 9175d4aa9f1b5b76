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
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "angle_search.hpp"
#include "estep.hpp"
#include "iteration.hpp"
#include "likelihood.hpp"

namespace doaem {

/// Split of the noise among the complete-data components; sums to one.
struct NoiseSplit {
    std::vector<double> alpha;

    static NoiseSplit uniform(std::size_t n_sources)
    {
        return NoiseSplit{std::vector<double>(n_sources, 1.0 / static_cast<double>(n_sources))};
    }

    void validate(std::size_t n_sources) const
    {
        if (alpha.size() != n_sources) throw std::invalid_argument("NoiseSplit: one entry per source required");
        for (double a : alpha)
            if (!(a > 0.0)) throw std::invalid_argument("NoiseSplit: every alpha_m must be positive for EM");
        const double sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("NoiseSplit: alpha must sum to one");
    }
};

struct EmDetState {
    std::vector<Direction> dirs;
    DeterministicSignals signals;
    double sigma = 1.0;
    int iter = 0;
};

struct EmStoState {
    std::vector<Direction> dirs;
    std::vector<double> powers;
    double sigma = 1.0;
    int iter = 0;
};

/// E-step output for the deterministic model; c = N (M - 1) sigma.
struct EmDetEStep : DetEStep {
    double c = 0.0;
};

// ---------------------------------------------------------------- deterministic

inline EmDetEStep em_det_estep(const SnapshotMatrix& Y, const EmDetState& state, const NoiseSplit& alpha,
                               const ArrayGeometry& geom)
{
    const CMatrix A = steering_matrix(geom, state.dirs);
    EmDetEStep out{split_residual(Y, A, state.signals, alpha.alpha), 0.0};
    const double n = static_cast<double>(geom.size());
    const double m = static_cast<double>(state.dirs.size());
    out.c = n * (m - 1.0) * state.sigma;
    return out;
}

/// sigma^(k) = (1 - 1/M) sigma^(k-1) + (1/(M N)) sum_m d_m / alpha_m.
inline double em_det_sigma_update(double sigma_prev, const std::vector<double>& d, const NoiseSplit& alpha,
                                  Eigen::Index n_sensors)
{
    const double m = static_cast<double>(d.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) acc += d[i] / alpha.alpha[i];
    return (1.0 - 1.0 / m) * sigma_prev + acc / (m * static_cast<double>(n_sensors));
}

inline EmDetState em_det_mstep(const EmDetEStep& estep, const EmDetState& state, const NoiseSplit& alpha,
                               const ArrayGeometry& geom, const LineSearchParams& search)
{
    const std::size_t M = state.dirs.size();
    const double n = static_cast<double>(geom.size());
    EmDetState next{state.dirs, state.signals, state.sigma, state.iter + 1};
    std::vector<double> d(M);
    for (std::size_t m = 0; m < M; ++m) {
        const auto& R = estep.stats[m];
        next.dirs[m] = update_direction(geom, R, state.dirs[m], search);
        const CVector a = steering_vector(geom, next.dirs[m]);
        next.signals.row(static_cast<Eigen::Index>(m)) = (a.adjoint() * estep.components[m]) / n;
        d[m] = projection_stats(a, R).d;
    }
    next.sigma = em_det_sigma_update(state.sigma, d, alpha, geom.size());
    return next;
}

inline EmDetState em_det_iteration(const SnapshotMatrix& Y, const EmDetState& state, const NoiseSplit& alpha,
                                   const ArrayGeometry& geom, const LineSearchParams& search)
{
    return em_det_mstep(em_det_estep(Y, state, alpha, geom), state, alpha, geom, search);
}

inline TraceRecord describe(const SnapshotMatrix& Y, const EmDetState& s, const ArrayGeometry& geom)
{
    TraceRecord r;
    r.azimuths_deg = azimuths_deg(s.dirs);
    r.sigma = s.sigma;
    r.loglik = loglik_det(Y, s.dirs, s.signals, s.sigma, geom);
    r.noise_positive = s.sigma > 0.0;
    return r;
}

inline SolveResult solve_em_det(const SnapshotMatrix& Y, const ArrayGeometry& geom, EmDetState init,
                                const NoiseSplit& alpha, const LineSearchParams& search, const StoppingRule& rule,
                                const TraceObserver& observer = {})
{
    alpha.validate(init.dirs.size());
    search.validate();
    return iterate_solver(
        std::move(init),
        [&](EmDetState s, int) { return em_det_iteration(Y, s, alpha, geom, search); },
        [&](const EmDetState& s) { return describe(Y, s, geom); }, rule, observer);
}

// ---------------------------------------------------------------- stochastic

inline std::vector<CompleteDataStat> em_sto_estep(const CMatrix& Ry, const EmStoState& state, const NoiseSplit& alpha,
                                                  const ArrayGeometry& geom)
{
    const std::size_t M = state.dirs.size();
    std::vector<CMatrix> Cm;
    Cm.reserve(M);
    CMatrix Cy = CMatrix::Zero(geom.size(), geom.size());
    for (std::size_t m = 0; m < M; ++m) {
        Cm.push_back(source_cov(steering_vector(geom, state.dirs[m]), state.powers[m], alpha.alpha[m] * state.sigma));
        Cy += Cm.back();
    }
    const GaussianSplitter splitter(Cy, Ry);
    std::vector<CompleteDataStat> out;
    out.reserve(M);
    for (const auto& C : Cm) out.push_back(splitter.conditional_stat(C));
    return out;
}

/// Tr{D^{-1} R} / alpha-scaled form used by the noise CM-step, with
/// D = r a a^H + alpha I and r = P / sigma_prev. For P > 0 this reduces to
/// d / alpha + sigma_prev.
inline double noise_cm_term(const ProjectionStats& ps, double power, double sigma_prev, double alpha,
                            Eigen::Index n_sensors)
{
    const double nr = static_cast<double>(n_sensors) * power / sigma_prev;
    return (ps.d + ps.e - nr / (nr + alpha) * ps.e) / alpha;
}

inline EmStoState em_sto_mstep(const std::vector<CompleteDataStat>& stats, const EmStoState& state,
                               const NoiseSplit& alpha, const ArrayGeometry& geom, const LineSearchParams& search)
{
    const std::size_t M = state.dirs.size();
    const double n = static_cast<double>(geom.size());
    EmStoState next{state.dirs, state.powers, state.sigma, state.iter + 1};
    double acc = 0.0;
    // first CM-step: directions and powers at sigma = sigma^(k-1)
    for (std::size_t m = 0; m < M; ++m) {
        const Direction cand = update_direction(geom, stats[m], state.dirs[m], search);
        ProjectionStats ps = projection_stats(geom, cand, stats[m]);
        double p = std::max((ps.e - alpha.alpha[m] * state.sigma) / n, 0.0);
        if (p > 0.0) {
            next.dirs[m] = cand;
        } else {
            // direction indeterminate at zero power: keep the previous iterate
            next.dirs[m] = state.dirs[m];
            ps = projection_stats(geom, state.dirs[m], stats[m]);
            p = 0.0;
        }
        next.powers[m] = p;
        acc += noise_cm_term(ps, p, state.sigma, alpha.alpha[m], geom.size());
    }
    // second CM-step: sigma with the new directions and SNRs held fixed
    next.sigma = acc / (static_cast<double>(M) * n);
    return next;
}

inline EmStoState em_sto_iteration(const CMatrix& Ry, const EmStoState& state, const NoiseSplit& alpha,
                                   const ArrayGeometry& geom, const LineSearchParams& search)
{
    return em_sto_mstep(em_sto_estep(Ry, state, alpha, geom), state, alpha, geom, search);
}

inline TraceRecord describe(const CMatrix& Ry, Eigen::Index n_snapshots, const EmStoState& s,
                            const ArrayGeometry& geom)
{
    TraceRecord r;
    r.azimuths_deg = azimuths_deg(s.dirs);
    r.sigma = s.sigma;
    r.powers = s.powers;
    r.noise_positive = s.sigma > 0.0;
    r.loglik = r.noise_positive ? loglik_sto(Ry, s.dirs, s.powers, s.sigma, geom, n_snapshots)
                                : std::numeric_limits<double>::quiet_NaN();
    return r;
}

inline SolveResult solve_em_sto(const CMatrix& Ry, Eigen::Index n_snapshots, const ArrayGeometry& geom,
                                EmStoState init, const NoiseSplit& alpha, const LineSearchParams& search,
                                const StoppingRule& rule, const TraceObserver& observer = {})
{
    alpha.validate(init.dirs.size());
    search.validate();
    return iterate_solver(
        std::move(init),
        [&](EmStoState s, int) { return em_sto_iteration(Ry, s, alpha, geom, search); },
        [&](const EmStoState& s) { return describe(Ry, n_snapshots, s, geom); }, rule, observer);
}

} // namespace doaem

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
#include <stdexcept>
#include <vector>

#include "angle_search.hpp"
#include "em.hpp"
#include "estep.hpp"
#include "iteration.hpp"
#include "likelihood.hpp"
#include "mem.hpp"

namespace doaem {

/// (k, i): outer iteration k >= 1 and active source i in 1..M. (k, 0) is
/// the same iterate as (k - 1, M).
struct SageSubstepIndex {
    int k = 0;
    int i = 0;
};

struct SageDetState {
    std::vector<Direction> dirs;
    DeterministicSignals signals;
    double sigma = 1.0;
    SageSubstepIndex substep;
};

struct SageStoState {
    std::vector<Direction> dirs;
    std::vector<double> powers;
    double sigma = 1.0;
    std::vector<double> phat;  // latest conditional power statistics, one per source
    SageSubstepIndex substep;
    bool fallback_used = false;  // the last substep needed the two CM-step re-estimate
};

/// Threshold, relative to Tr(R_y), under which the noise estimate of a
/// stochastic sub-step is treated as zero.
inline constexpr double sage_zero_sigma_rel = 1e-14;

// ---------------------------------------------------------------- deterministic

/// x_i(t) with all noise attributed to source i: the full residual plus
/// the current contribution of source i.
inline CMatrix sage_det_component(const SnapshotMatrix& Y, const SageDetState& state, std::size_t i,
                                  const ArrayGeometry& geom)
{
    const CMatrix A = steering_matrix(geom, state.dirs);
    const auto ii = static_cast<Eigen::Index>(i);
    return Y - A * state.signals + A.col(ii) * state.signals.row(ii);
}

/// Substep for 0-based source index i.
inline SageDetState sage_det_substep(const SnapshotMatrix& Y, const SageDetState& state, std::size_t i,
                                     const ArrayGeometry& geom, const LineSearchParams& search)
{
    if (i >= state.dirs.size()) throw std::out_of_range("sage_det_substep: source index out of range");
    const CMatrix X = sage_det_component(Y, state, i, geom);
    const CompleteDataStat R = outer_mean(X);
    SageDetState next = state;
    next.dirs[i] = update_direction(geom, R, state.dirs[i], search);
    const CVector a = steering_vector(geom, next.dirs[i]);
    next.signals.row(static_cast<Eigen::Index>(i)) = (a.adjoint() * X) / static_cast<double>(geom.size());
    next.sigma = projection_stats(a, R).d / static_cast<double>(geom.size());
    next.substep.i = static_cast<int>(i) + 1;
    return next;
}

inline TraceRecord describe(const SnapshotMatrix& Y, const SageDetState& s, const ArrayGeometry& geom)
{
    TraceRecord r;
    r.azimuths_deg = azimuths_deg(s.dirs);
    r.sigma = s.sigma;
    r.loglik = loglik_det(Y, s.dirs, s.signals, s.sigma, geom);
    r.noise_positive = s.sigma >= 0.0;  // sigma = 0 is a valid noiseless fixed point
    return r;
}

inline SageDetState sage_det_iteration(const SnapshotMatrix& Y, SageDetState state, int k, const ArrayGeometry& geom,
                                       const LineSearchParams& search, const TraceObserver& observer = {})
{
    state.substep = {k, 0};
    for (std::size_t i = 0; i < state.dirs.size(); ++i) {
        state = sage_det_substep(Y, state, i, geom, search);
        if (observer) {
            TraceRecord r;
            r.k = k;
            r.substep = state.substep.i;
            r.azimuths_deg = azimuths_deg(state.dirs);
            r.sigma = state.sigma;
            observer(r);
        }
    }
    return state;
}

inline SolveResult solve_sage_det(const SnapshotMatrix& Y, const ArrayGeometry& geom, SageDetState init,
                                  const LineSearchParams& search, const StoppingRule& rule,
                                  const TraceObserver& observer = {})
{
    search.validate();
    return iterate_solver(
        std::move(init),
        [&](SageDetState s, int k) { return sage_det_iteration(Y, std::move(s), k, geom, search, observer); },
        [&](const SageDetState& s) { return describe(Y, s, geom); }, rule, observer);
}

// ---------------------------------------------------------------- stochastic

/// E-step of substep i: conditional power statistics of the inactive sources
/// and the conditional covariance of the active component.
struct SageStoEStep {
    std::vector<double> phat;  // entry i is unused
    CompleteDataStat stat;
};

inline SageStoEStep sage_sto_estep(const CMatrix& Ry, const SageStoState& state, std::size_t i,
                                   const ArrayGeometry& geom)
{
    if (!(state.sigma > 0.0)) throw std::domain_error("sage_sto_estep: sigma must be positive");
    const CMatrix Cy = build_cov(geom, state.dirs, state.powers, state.sigma);
    const GaussianSplitter splitter(Cy, Ry);
    SageStoEStep out{std::vector<double>(state.dirs.size(), 0.0), {}};
    for (std::size_t m = 0; m < state.dirs.size(); ++m) {
        if (m == i) continue;
        const double p = state.powers[m];
        if (p == 0.0) continue;  // b_m = 0
        const CVector a = steering_vector(geom, state.dirs[m]);
        const CVector b = splitter.solve(a) * p;
        const double v = p * (1.0 - a.dot(b).real()) + b.dot(Ry * b).real();
        out.phat[m] = std::max(v, 0.0);
    }
    out.stat = splitter.conditional_stat(source_cov(steering_vector(geom, state.dirs[i]), state.powers[i], state.sigma));
    return out;
}

/// Substep for 0-based source index i. If the closed-form noise estimate
/// collapses to zero, (theta_i, P_i) and sigma are re-estimated by two
/// conditional maximizations holding sigma and then (theta_i, r_i) fixed.
inline SageStoState sage_sto_substep(const CMatrix& Ry, const SageStoState& state, std::size_t i,
                                     const ArrayGeometry& geom, const LineSearchParams& search)
{
    if (i >= state.dirs.size()) throw std::out_of_range("sage_sto_substep: source index out of range");
    const SageStoEStep es = sage_sto_estep(Ry, state, i, geom);
    SageStoState next = state;
    next.fallback_used = false;
    next.phat = es.phat;
    for (std::size_t m = 0; m < state.dirs.size(); ++m)
        if (m != i) next.powers[m] = es.phat[m];

    const Eigen::Index n_sensors = geom.size();
    const double n = static_cast<double>(n_sensors);
    const Direction cand = update_direction(geom, es.stat, state.dirs[i], search);
    const ProjectionStats ps = projection_stats(geom, cand, es.stat);
    const SourceNoisePower sp = concentrated_noise_power(ps, n_sensors);
    next.dirs[i] = sp.signal_present ? cand : state.dirs[i];
    next.sigma = sp.sigma;
    next.powers[i] = sp.power;

    if (next.sigma <= sage_zero_sigma_rel * Ry.trace().real()) {
        next.fallback_used = true;
        const double sigma_prev = state.sigma;
        // first CM-step: sigma held at its previous value
        double p = std::max((ps.e - sigma_prev) / n, 0.0);
        ProjectionStats used = ps;
        if (p > 0.0) {
            next.dirs[i] = cand;
        } else {
            next.dirs[i] = state.dirs[i];
            used = projection_stats(geom, state.dirs[i], es.stat);
            p = 0.0;
        }
        const double snr = p / sigma_prev;
        // second CM-step: direction and SNR held fixed
        next.sigma = noise_cm_term(used, p, sigma_prev, 1.0, n_sensors) / n;
        next.powers[i] = snr * next.sigma;
    }
    next.substep.i = static_cast<int>(i) + 1;
    return next;
}

inline TraceRecord describe(const CMatrix& Ry, Eigen::Index n_snapshots, const SageStoState& s,
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

inline SageStoState sage_sto_iteration(const CMatrix& Ry, SageStoState state, int k, const ArrayGeometry& geom,
                                       const LineSearchParams& search, const TraceObserver& observer = {},
                                       int* positivity_violations = nullptr)
{
    state.substep = {k, 0};
    for (std::size_t i = 0; i < state.dirs.size(); ++i) {
        state = sage_sto_substep(Ry, state, i, geom, search);
        if (!(state.sigma > 0.0) && positivity_violations) ++*positivity_violations;
        if (observer) {
            TraceRecord r;
            r.k = k;
            r.substep = state.substep.i;
            r.azimuths_deg = azimuths_deg(state.dirs);
            r.sigma = state.sigma;
            r.powers = state.powers;
            r.noise_positive = state.sigma > 0.0;
            observer(r);
        }
    }
    return state;
}

inline SolveResult solve_sage_sto(const CMatrix& Ry, Eigen::Index n_snapshots, const ArrayGeometry& geom,
                                  SageStoState init, const LineSearchParams& search, const StoppingRule& rule,
                                  const TraceObserver& observer = {})
{
    if (!(init.sigma > 0.0)) throw std::invalid_argument("solve_sage_sto: initial sigma must be positive");
    if (init.powers.size() != init.dirs.size()) throw std::invalid_argument("solve_sage_sto: one power per source");
    if (init.phat.size() != init.dirs.size()) init.phat.assign(init.dirs.size(), 0.0);
    search.validate();
    int substep_violations = 0;
    SolveResult r = iterate_solver(
        std::move(init),
        [&](SageStoState s, int k) {
            return sage_sto_iteration(Ry, std::move(s), k, geom, search, observer, &substep_violations);
        },
        [&](const SageStoState& s) { return describe(Ry, n_snapshots, s, geom); }, rule, observer);
    r.positivity_violations += substep_violations;
    return r;
}

} // namespace doaem

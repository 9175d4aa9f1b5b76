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

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "array_model.hpp"

namespace doaem {

/// Outer stopping rule shared by every solver: stop once the Euclidean norm
/// of the direction change, in degrees, is at most epsilon_deg, or after
/// max_iterations.
struct StoppingRule {
    double epsilon_deg = 1e-3;
    int max_iterations = 2000;

    void validate() const
    {
        if (!(epsilon_deg > 0.0)) throw std::invalid_argument("StoppingRule: epsilon must be positive");
        if (max_iterations < 1) throw std::invalid_argument("StoppingRule: max_iterations must be at least 1");
    }
};

/// One trace sample. substep == 0 marks an iteration boundary; SAGE also
/// emits records for substeps 1..M. loglik is NaN where not evaluated.
struct TraceRecord {
    int k = 0;
    int substep = 0;
    std::vector<double> azimuths_deg;
    double sigma = 0.0;
    std::vector<double> source_sigmas;  // MEM only
    std::vector<double> powers;         // stochastic model only
    double loglik = std::numeric_limits<double>::quiet_NaN();
    bool noise_positive = true;
};

using TraceObserver = std::function<void(const TraceRecord&)>;

struct SolveResult {
    std::vector<Direction> dirs;
    int iterations = 0;
    std::vector<double> loglik_trace;                    // entry k is L at iterate k, k = 0..iterations
    std::vector<std::vector<double>> azimuth_trace_deg;  // entry k is theta^(k) in degrees
    bool converged = false;
    bool capped = false;
    bool aborted = false;
    std::string diagnostic;
    int positivity_violations = 0;
};

inline std::vector<double> azimuths_deg(const std::vector<Direction>& dirs)
{
    std::vector<double> out;
    out.reserve(dirs.size());
    for (const auto& d : dirs) out.push_back(rad2deg(d.azimuth));
    return out;
}

/// ||theta^(k) - theta^(k-1)|| in degrees over all elevation and azimuth components.
inline double direction_change_deg(const std::vector<Direction>& a, const std::vector<Direction>& b)
{
    if (a.size() != b.size()) throw std::invalid_argument("direction_change_deg: size mismatch");
    double acc = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) {
        const double de = rad2deg(a[m].elevation - b[m].elevation);
        const double da = rad2deg(a[m].azimuth - b[m].azimuth);
        acc += de * de + da * da;
    }
    return std::sqrt(acc);
}

template <class S>
concept SolverState = requires(const S& s) {
    { s.dirs } -> std::convertible_to<std::vector<Direction>>;
};

/// Runs step() until the stopping rule fires. describe() maps a state to its
/// trace record (log-likelihood and positivity included). A non-finite
/// iterate or a numerical exception aborts the run with a diagnostic.
template <SolverState State, class Step, class Describe>
SolveResult iterate_solver(State state, Step&& step, Describe&& describe, const StoppingRule& rule,
                           const TraceObserver& observer = {})
{
    rule.validate();
    SolveResult result;
    auto push = [&](TraceRecord rec, int k) {
        rec.k = k;
        rec.substep = 0;
        if (!rec.noise_positive) ++result.positivity_violations;
        result.loglik_trace.push_back(rec.loglik);
        result.azimuth_trace_deg.push_back(rec.azimuths_deg);
        if (observer) observer(rec);
    };
    push(describe(state), 0);

    for (int k = 1; k <= rule.max_iterations; ++k) {
        const std::vector<Direction> previous = state.dirs;
        TraceRecord rec;
        try {
            state = step(std::move(state), k);
            rec = describe(state);
        } catch (const std::exception& ex) {
            result.aborted = true;
            result.diagnostic = std::string("iteration ") + std::to_string(k) + ": " + ex.what();
            result.iterations = k;
            result.dirs = previous;
            return result;
        }
        bool finite = std::isfinite(rec.loglik) && std::isfinite(rec.sigma);
        for (double v : rec.azimuths_deg) finite = finite && std::isfinite(v);
        if (!finite) {
            result.aborted = true;
            result.diagnostic = "iteration " + std::to_string(k) + ": non-finite iterate";
            result.iterations = k;
            result.dirs = state.dirs;
            return result;
        }
        push(std::move(rec), k);
        result.iterations = k;
        if (direction_change_deg(state.dirs, previous) <= rule.epsilon_deg) {
            result.converged = true;
            break;
        }
    }
    result.capped = !result.converged;
    result.dirs = std::move(state.dirs);
    return result;
}

} // namespace doaem

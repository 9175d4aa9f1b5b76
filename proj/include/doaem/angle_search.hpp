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
#include <functional>
#include <limits>
#include <stdexcept>

#include "array_model.hpp"

namespace doaem {

/// Parameters of the backtracking gradient ascent over azimuth.
struct LineSearchParams {
    double rho = 0.1;    // fraction of the distance to the interval edge used as the first step
    double eta = 0.3;    // Armijo sufficient-increase constant
    double gamma = 0.5;  // backtracking shrink factor
    double tol = 1e-3;   // stop when |g'| <= tol (objective units per radian)
    int max_gradient_steps = 500;
    int max_backtracks = 100;

    void validate() const
    {
        if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("LineSearchParams: rho must lie in (0,1)");
        if (!(eta > 0.0 && eta < 0.5)) throw std::invalid_argument("LineSearchParams: eta must lie in (0,0.5)");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("LineSearchParams: gamma must lie in (0,1)");
        if (!(tol > 0.0)) throw std::invalid_argument("LineSearchParams: tol must be positive");
        if (max_gradient_steps < 1 || max_backtracks < 1)
            throw std::invalid_argument("LineSearchParams: step caps must be positive");
    }
};

struct ObjectiveValue {
    double g = 0.0;   // a^H R a
    double dg = 0.0;  // d g / d azimuth
};

namespace detail {

// d psi_n / d azimuth at fixed elevation, psi_n = -(2 pi / lambda) p_n^T q.
inline RVector phase_slope(const ArrayGeometry& geom, double elevation, double azim)
{
    const double k = 2 * pi / geom.wavelength;
    const double se = std::sin(elevation);
    const double ds_x = -se * std::sin(azim);
    const double ds_y = se * std::cos(azim);
    RVector slope(geom.size());
    for (Eigen::Index n = 0; n < geom.size(); ++n) {
        const auto& p = geom.positions[static_cast<std::size_t>(n)];
        slope(n) = -k * (p.x() * ds_x + p.y() * ds_y);
    }
    return slope;
}

} // namespace detail

/// g(azim) = a^H R a = N Tr{Pi R} and its exact derivative with respect to azimuth.
inline ObjectiveValue objective_and_gradient(const ArrayGeometry& geom, const CMatrix& R, double azim,
                                             double elevation = pi / 2)
{
    const CVector a = steering_vector(geom, Direction{elevation, azim});
    const CVector Ra = R * a;
    const CVector da = detail::phase_slope(geom, elevation, azim).cast<cplx>().cwiseProduct(a);
    // da/dphi = j * slope .* a, so g' = 2 Re(j (Ra)^H (slope .* a)) = -2 Im(...)
    const cplx ga = a.dot(Ra);
    const cplx gb = Ra.dot(da);
    return {ga.real(), -2.0 * gb.imag()};
}

inline double objective(const ArrayGeometry& geom, const CMatrix& R, double azim, double elevation = pi / 2)
{
    const CVector a = steering_vector(geom, Direction{elevation, azim});
    return a.dot(R * a).real();
}

/// One accepted gradient step, reported to an optional observer.
struct AscentStep {
    double azim_before = 0.0;
    double azim_after = 0.0;
    double t = 0.0;
    double g_before = 0.0;
    double g_after = 0.0;
    double dg = 0.0;
};

using AscentObserver = std::function<void(const AscentStep&)>;

struct AscentResult {
    double azimuth = 0.0;
    int steps = 0;
    bool capped = false;  // max_gradient_steps reached before |g'| <= tol
};

/// Gradient ascent with backtracking line search on g over azimuth in (0, pi).
/// The first trial step moves a fraction rho of the way to the interval edge
/// in the ascent direction, so every iterate stays strictly inside (0, pi).
inline AscentResult ascend(const ArrayGeometry& geom, const CMatrix& R, double azim_init,
                           const LineSearchParams& params = {}, double elevation = pi / 2,
                           const AscentObserver& observer = {})
{
    if (!(azim_init > 0.0 && azim_init < pi))
        throw std::invalid_argument("ascend: initial azimuth must lie strictly inside (0, pi)");
    AscentResult out{azim_init, 0, false};
    double phi = azim_init;
    ObjectiveValue cur = objective_and_gradient(geom, R, phi, elevation);
    while (std::abs(cur.dg) > params.tol) {
        if (out.steps >= params.max_gradient_steps) {
            out.capped = true;
            break;
        }
        double t = cur.dg > 0.0 ? params.rho * (pi - phi) / cur.dg : params.rho * (-phi) / cur.dg;
        const double slope_sq = cur.dg * cur.dg;
        bool accepted = false;
        double cand = phi;
        double g_cand = cur.g;
        for (int j = 0; j <= params.max_backtracks; ++j) {
            cand = phi + t * cur.dg;
            g_cand = objective(geom, R, cand, elevation);
            if (g_cand >= cur.g + params.eta * t * slope_sq) {
                accepted = true;
                break;
            }
            t *= params.gamma;
        }
        if (!accepted || cand == phi) break;  // no representable ascent step left
        if (observer) observer({phi, cand, t, cur.g, g_cand, cur.dg});
        phi = cand;
        cur = objective_and_gradient(geom, R, phi, elevation);
        ++out.steps;
    }
    out.azimuth = phi;
    return out;
}

/// Grid point j * resolution in (0, pi) maximizing g; ties go to the smallest angle.
inline double grid_init(const ArrayGeometry& geom, const CMatrix& R, double resolution, double elevation = pi / 2)
{
    if (!(resolution > 0.0 && resolution < pi)) throw std::invalid_argument("grid_init: resolution must lie in (0, pi)");
    double best_phi = resolution;
    double best_g = -std::numeric_limits<double>::infinity();
    for (int j = 1;; ++j) {
        const double phi = j * resolution;
        if (phi >= pi) break;
        const double g = objective(geom, R, phi, elevation);
        if (g > best_g) {
            best_g = g;
            best_phi = phi;
        }
    }
    return best_phi;
}

/// Warm-started direction update: ascend from the previous azimuth, keep its elevation.
inline Direction update_direction(const ArrayGeometry& geom, const CMatrix& R, const Direction& previous,
                                  const LineSearchParams& params)
{
    const AscentResult r = ascend(geom, R, previous.azimuth, params, previous.elevation);
    return Direction{previous.elevation, r.azimuth};
}

} // namespace doaem

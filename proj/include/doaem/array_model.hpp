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
#include <string>
#include <vector>

#include "types.hpp"

namespace doaem {

/// Sensor positions and carrier wavelength. Positions share the wavelength's
/// length unit; the origin is the phase reference of the array.
struct ArrayGeometry {
    std::vector<Eigen::Vector3d> positions;
    double wavelength = 1.0;

    ArrayGeometry() = default;
    ArrayGeometry(std::vector<Eigen::Vector3d> pos, double lambda)
        : positions(std::move(pos)), wavelength(lambda)
    {
        validate();
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(positions.size()); }

    void validate() const
    {
        if (positions.size() < 2)
            throw std::invalid_argument("ArrayGeometry: at least two sensors are required");
        if (!(wavelength > 0.0) || !std::isfinite(wavelength))
            throw std::invalid_argument("ArrayGeometry: wavelength must be positive and finite");
        for (const auto& p : positions)
            if (!p.allFinite())
                throw std::invalid_argument("ArrayGeometry: sensor positions must be finite");
    }

    /// Uniform linear array on the x axis: p_n = [spacing * n, 0, 0], n = 0..N-1.
    /// spacing defaults to half a wavelength.
    static ArrayGeometry ula(int n_sensors, double wavelength = 1.0, double spacing = -1.0)
    {
        if (spacing < 0.0) spacing = wavelength / 2.0;
        std::vector<Eigen::Vector3d> pos;
        pos.reserve(static_cast<std::size_t>(std::max(n_sensors, 0)));
        for (int n = 0; n < n_sensors; ++n)
            pos.emplace_back(spacing * n, 0.0, 0.0);
        return ArrayGeometry(std::move(pos), wavelength);
    }
};

/// Source direction in radians: elevation in [0, pi], azimuth in [0, 2 pi).
struct Direction {
    double elevation = pi / 2;
    double azimuth = 0.0;

    static Direction from_azimuth(double azim, double elev = pi / 2)
    {
        return canonical(elev, azim);
    }

    /// Maps any (elevation, azimuth) pair onto the canonical ranges without
    /// changing the unit direction vector.
    static Direction canonical(double elev, double azim)
    {
        elev = std::fmod(elev, 2 * pi);
        if (elev < 0) elev += 2 * pi;
        if (elev > pi) {
            elev = 2 * pi - elev;
            azim += pi;
        }
        azim = std::fmod(azim, 2 * pi);
        if (azim < 0) azim += 2 * pi;
        if (azim >= 2 * pi) azim = 0.0;
        return {elev, azim};
    }

    bool operator==(const Direction&) const = default;
};

inline Eigen::Vector3d unit_direction(const Direction& dir)
{
    const double se = std::sin(dir.elevation);
    return {se * std::cos(dir.azimuth), se * std::sin(dir.azimuth), std::cos(dir.elevation)};
}

/// a(theta): entry n is exp(j psi_n) with psi_n = -(2 pi / lambda) p_n^T q.
inline CVector steering_vector(const ArrayGeometry& geom, const Direction& dir)
{
    const Eigen::Vector3d q = unit_direction(dir);
    const double k = 2 * pi / geom.wavelength;
    CVector a(geom.size());
    for (Eigen::Index n = 0; n < geom.size(); ++n)
        a(n) = std::polar(1.0, -k * geom.positions[static_cast<std::size_t>(n)].dot(q));
    return a;
}

/// A(theta) = [a(theta_1) ... a(theta_M)].
inline CMatrix steering_matrix(const ArrayGeometry& geom, const std::vector<Direction>& dirs)
{
    CMatrix A(geom.size(), static_cast<Eigen::Index>(dirs.size()));
    for (std::size_t m = 0; m < dirs.size(); ++m)
        A.col(static_cast<Eigen::Index>(m)) = steering_vector(geom, dirs[m]);
    return A;
}

/// Projection-trace statistics of a surrogate covariance along a steering
/// direction: e = (1/N) a^H R a and d = Tr{R} - e.
struct ProjectionStats {
    double e = 0.0;
    double d = 0.0;

    double trace() const { return e + d; }
};

// Relative tolerances for Hermitian / PSD checks on iterated matrices.
inline constexpr double hermitian_tolerance = 1e-8;
inline constexpr double psd_tolerance = 1e-8;

inline bool is_hermitian(const CMatrix& R, double rel_tol = hermitian_tolerance)
{
    if (R.rows() != R.cols()) return false;
    const double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
    return (R - R.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Minimum eigenvalue >= -rel_tol * Tr{R}. Not used on hot paths.
inline bool is_psd(const CMatrix& R, double rel_tol = psd_tolerance)
{
    if (!is_hermitian(R)) return false;
    const CMatrix H = 0.5 * (R + R.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(H, Eigen::EigenvaluesOnly);
    const double tr = std::abs(H.trace().real());
    return es.eigenvalues().minCoeff() >= -rel_tol * std::max(tr, 1e-300);
}

/// e and d for a steering vector already evaluated at the direction of interest.
inline ProjectionStats projection_stats(const CVector& a, const CMatrix& R)
{
    if (R.rows() != a.size() || R.cols() != a.size())
        throw std::invalid_argument("projection_stats: dimension mismatch");
    if (!is_hermitian(R))
        throw std::invalid_argument("projection_stats: matrix is not Hermitian");
    const double n = static_cast<double>(a.size());
    const double tr = R.trace().real();
    const double e = std::max(0.0, (a.adjoint() * R * a)(0, 0).real() / n);
    double d = tr - e;
    if (d < 0.0) {
        if (d < -psd_tolerance * std::abs(tr))
            throw std::domain_error("projection_stats: matrix is not positive semi-definite");
        d = 0.0;
    }
    return {e, d};
}

inline ProjectionStats projection_stats(const ArrayGeometry& geom, const Direction& dir, const CMatrix& R)
{
    return projection_stats(steering_vector(geom, dir), R);
}

} // namespace doaem

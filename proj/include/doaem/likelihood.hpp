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
#include <stdexcept>
#include <vector>

#include "array_model.hpp"

namespace doaem {

/// Floor applied to the noise variance inside logarithms. A deterministic
/// model iterate may legitimately reach sigma = 0 on noiseless data.
inline constexpr double sigma_log_floor = 1e-300;

/// C_y = sum_m P_m a_m a_m^H + sigma I.
inline CMatrix build_cov(const ArrayGeometry& geom, const std::vector<Direction>& dirs,
                         const std::vector<double>& powers, double sigma)
{
    if (dirs.size() != powers.size()) throw std::invalid_argument("build_cov: dirs/powers size mismatch");
    if (!(sigma > 0.0)) throw std::invalid_argument("build_cov: sigma must be positive");
    const Eigen::Index n = geom.size();
    CMatrix C = sigma * CMatrix::Identity(n, n);
    for (std::size_t m = 0; m < dirs.size(); ++m) {
        const CVector a = steering_vector(geom, dirs[m]);
        C.noalias() += powers[m] * (a * a.adjoint());
    }
    return C;
}

/// Per-source component covariance C_m = P a a^H + noise I.
inline CMatrix source_cov(const CVector& a, double power, double noise)
{
    CMatrix C = power * (a * a.adjoint());
    C.diagonal().array() += noise;
    return C;
}

/// -TN ln(pi sigma) - (1/sigma) sum_t ||y(t) - A s(t)||^2.
inline double loglik_det(const SnapshotMatrix& Y, const std::vector<Direction>& dirs,
                         const DeterministicSignals& S, double sigma, const ArrayGeometry& geom)
{
    if (!(sigma >= 0.0)) throw std::invalid_argument("loglik_det: sigma must be positive");
    if (Y.rows() != geom.size() || S.rows() != static_cast<Eigen::Index>(dirs.size()) || S.cols() != Y.cols())
        throw std::invalid_argument("loglik_det: dimension mismatch");
    const double s = std::max(sigma, sigma_log_floor);
    const double rss = (Y - steering_matrix(geom, dirs) * S).squaredNorm();
    const double tn = static_cast<double>(Y.cols() * Y.rows());
    return -tn * std::log(pi * s) - rss / s;
}

/// Stochastic-model log-likelihood in trace form:
/// -TN ln pi - T ln|C_y| - T Tr{C_y^{-1} R_y}.
inline double loglik_sto_cov(const CMatrix& Ry, const CMatrix& Cy, Eigen::Index n_snapshots)
{
    if (Ry.rows() != Cy.rows() || Ry.cols() != Cy.cols()) throw std::invalid_argument("loglik_sto: dimension mismatch");
    Eigen::LLT<CMatrix> llt(Cy);
    if (llt.info() != Eigen::Success) throw std::domain_error("loglik_sto: C_y is not positive definite");
    const CMatrix& L = llt.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i).real());
    const double quad = llt.solve(Ry).trace().real();
    const double t = static_cast<double>(n_snapshots);
    return -t * static_cast<double>(Ry.rows()) * std::log(pi) - t * logdet - t * quad;
}

inline double loglik_sto(const CMatrix& Ry, const std::vector<Direction>& dirs, const std::vector<double>& powers,
                         double sigma, const ArrayGeometry& geom, Eigen::Index n_snapshots)
{
    if (!(sigma > 0.0)) throw std::invalid_argument("loglik_sto: sigma must be positive");
    return loglik_sto_cov(Ry, build_cov(geom, dirs, powers, sigma), n_snapshots);
}

} // namespace doaem

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

#include <stdexcept>
#include <vector>

#include "array_model.hpp"

namespace doaem {

/// Conditional-expectation surrogates of the per-source complete data for
/// the deterministic model. components[m] is the N x T matrix of x_m(t).
struct DetEStep {
    std::vector<CMatrix> components;
    std::vector<CompleteDataStat> stats;
};

/// (1/T) X X^H, Hermitian by construction.
inline CompleteDataStat outer_mean(const CMatrix& X)
{
    CMatrix R = (X * X.adjoint()) / static_cast<double>(X.cols());
    return 0.5 * (R + R.adjoint());
}

/// x_m(t) = w_m [y(t) - A s(t)] + a_m s_m(t) for every source m, where
/// weight[m] is the share of the residual handed to source m.
inline DetEStep split_residual(const SnapshotMatrix& Y, const CMatrix& A, const DeterministicSignals& S,
                               const std::vector<double>& weight)
{
    if (A.cols() != S.rows() || Y.cols() != S.cols() || Y.rows() != A.rows() ||
        static_cast<Eigen::Index>(weight.size()) != S.rows())
        throw std::invalid_argument("split_residual: dimension mismatch");
    const CMatrix resid = Y - A * S;
    DetEStep out;
    out.components.reserve(weight.size());
    out.stats.reserve(weight.size());
    for (Eigen::Index m = 0; m < S.rows(); ++m) {
        CMatrix X = weight[static_cast<std::size_t>(m)] * resid + A.col(m) * S.row(m);
        out.stats.push_back(outer_mean(X));
        out.components.push_back(std::move(X));
    }
    return out;
}

/// E{R_m | Y} = C_m C_y^{-1} R_y C_y^{-1} C_m + (C_m - C_m C_y^{-1} C_m)
/// for zero-mean Gaussian components with covariances C_m summing to C_y.
class GaussianSplitter {
public:
    GaussianSplitter(const CMatrix& Cy, const CMatrix& Ry) : llt_(Cy), Ry_(Ry)
    {
        if (llt_.info() != Eigen::Success) throw std::domain_error("E-step: C_y is not positive definite");
    }

    CompleteDataStat conditional_stat(const CMatrix& Cm) const
    {
        const CMatrix G = llt_.solve(Cm);  // C_y^{-1} C_m; its adjoint is C_m C_y^{-1}
        CMatrix R = G.adjoint() * Ry_ * G + Cm - Cm * G;
        return 0.5 * (R + R.adjoint());
    }

    /// b = C_y^{-1} v
    CVector solve(const CVector& v) const { return llt_.solve(v); }

private:
    Eigen::LLT<CMatrix> llt_;
    CMatrix Ry_;
};

} // namespace doaem

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

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "array_model.hpp"

namespace doaem {

/// Reproducible random stream keyed by (seed, stream index). Distinct
/// indices under one master seed give independent realizations.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                          0x9e3779b9u};
        engine_.seed(seq);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Circular complex normal CN(0, variance): independent real and
    /// imaginary parts, each N(0, variance / 2).
    cplx complex_normal(double variance)
    {
        if (variance <= 0.0) {
            // keep the draw count independent of the variance
            normal_(engine_);
            normal_(engine_);
            return {0.0, 0.0};
        }
        const double s = std::sqrt(variance / 2.0);
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {s * re, s * im};
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Source waveforms drawn as independent CN(0, P_m) samples (M x T).
inline DeterministicSignals draw_signals(const std::vector<double>& powers, Eigen::Index n_snapshots, RngStream& rng)
{
    if (n_snapshots < 1) throw std::invalid_argument("draw_signals: T must be at least 1");
    DeterministicSignals S(static_cast<Eigen::Index>(powers.size()), n_snapshots);
    for (Eigen::Index t = 0; t < n_snapshots; ++t)
        for (Eigen::Index m = 0; m < S.rows(); ++m) {
            if (powers[static_cast<std::size_t>(m)] < 0.0)
                throw std::invalid_argument("draw_signals: powers must be nonnegative");
            S(m, t) = rng.complex_normal(powers[static_cast<std::size_t>(m)]);
        }
    return S;
}

/// y(t) = sum_m a(theta_m) s_m(t) + w(t), w(t) ~ CN(0, sigma I).
inline SnapshotMatrix gen_deterministic(const ArrayGeometry& geom, const std::vector<Direction>& dirs,
                                        const DeterministicSignals& S, double sigma, RngStream& rng)
{
    if (static_cast<Eigen::Index>(dirs.size()) != S.rows())
        throw std::invalid_argument("gen_deterministic: number of directions must equal rows of S");
    if (S.cols() < 1) throw std::invalid_argument("gen_deterministic: T must be at least 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("gen_deterministic: sigma must be nonnegative");
    SnapshotMatrix Y = steering_matrix(geom, dirs) * S;
    if (sigma > 0.0)
        for (Eigen::Index t = 0; t < Y.cols(); ++t)
            for (Eigen::Index n = 0; n < Y.rows(); ++n)
                Y(n, t) += rng.complex_normal(sigma);
    return Y;
}

/// Columns i.i.d. CN(0, sum_m P_m a_m a_m^H + sigma I). The waveforms are
/// drawn first, then the noise, from the same stream.
inline SnapshotMatrix gen_stochastic(const ArrayGeometry& geom, const std::vector<Direction>& dirs,
                                     const std::vector<double>& powers, double sigma, Eigen::Index n_snapshots,
                                     RngStream& rng)
{
    if (dirs.size() != powers.size())
        throw std::invalid_argument("gen_stochastic: number of directions must equal number of powers");
    if (!(sigma > 0.0)) throw std::invalid_argument("gen_stochastic: sigma must be positive");
    const DeterministicSignals S = draw_signals(powers, n_snapshots, rng);
    return gen_deterministic(geom, dirs, S, sigma, rng);
}

/// (1/T) Y Y^H, symmetrized so the result is exactly Hermitian.
inline CMatrix sample_covariance(const SnapshotMatrix& Y)
{
    if (Y.cols() < 1) throw std::invalid_argument("sample_covariance: T must be at least 1");
    CMatrix R = (Y * Y.adjoint()) / static_cast<double>(Y.cols());
    return 0.5 * (R + R.adjoint());
}

} // namespace doaem

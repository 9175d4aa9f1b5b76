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

#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace doaem {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Complex N x T array output; column t is the snapshot y(t).
using SnapshotMatrix = CMatrix;

/// Complex M x T source waveforms for the deterministic signal model.
using DeterministicSignals = CMatrix;

/// Hermitian N x N conditional-expectation surrogate of a per-source sample covariance.
using CompleteDataStat = CMatrix;

inline constexpr double pi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / pi; }

/// Linear power from a decibel value: 10^(dB/10).
inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }

enum class SignalModel { deterministic, stochastic };
enum class Algorithm { em, mem, sage };

inline const char* to_string(SignalModel m)
{
    return m == SignalModel::deterministic ? "deterministic" : "stochastic";
}

inline const char* to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::em: return "em";
    case Algorithm::mem: return "mem";
    case Algorithm::sage: return "sage";
    }
    return "?";
}

} // namespace doaem

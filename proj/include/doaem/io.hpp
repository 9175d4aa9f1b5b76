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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "array_model.hpp"

namespace doaem {

using json = nlohmann::json;

// ---------------------------------------------------------------- geometry

/// {"wavelength": real, "positions": [[x, y, z], ...]}
inline ArrayGeometry geometry_from_json(const json& j)
{
    if (!j.contains("wavelength") || !j.contains("positions"))
        throw std::invalid_argument("geometry: 'wavelength' and 'positions' are required");
    std::vector<Eigen::Vector3d> pos;
    for (const auto& p : j.at("positions")) {
        if (!p.is_array() || p.size() != 3) throw std::invalid_argument("geometry: each position needs 3 coordinates");
        pos.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    return ArrayGeometry(std::move(pos), j.at("wavelength").get<double>());
}

inline json geometry_to_json(const ArrayGeometry& g)
{
    json pos = json::array();
    for (const auto& p : g.positions) pos.push_back({p.x(), p.y(), p.z()});
    return {{"wavelength", g.wavelength}, {"positions", pos}};
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------- snapshots
//
// Row n holds sensor n; snapshot t occupies columns 2t (real) and 2t + 1 (imaginary).

inline void write_snapshots_csv(std::ostream& out, const SnapshotMatrix& Y)
{
    out << std::setprecision(17);
    for (Eigen::Index n = 0; n < Y.rows(); ++n) {
        for (Eigen::Index t = 0; t < Y.cols(); ++t) {
            if (t) out << ',';
            out << Y(n, t).real() << ',' << Y(n, t).imag();
        }
        out << '\n';
    }
}

inline SnapshotMatrix read_snapshots_csv(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::invalid_argument("snapshot CSV: bad number '" + cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("snapshot CSV: no data");
    const std::size_t width = rows.front().size();
    if (width == 0 || width % 2 != 0) throw std::invalid_argument("snapshot CSV: expected re/im column pairs");
    SnapshotMatrix Y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width / 2));
    for (std::size_t n = 0; n < rows.size(); ++n) {
        if (rows[n].size() != width) throw std::invalid_argument("snapshot CSV: ragged rows");
        for (std::size_t t = 0; t < width / 2; ++t) {
            const double re = rows[n][2 * t], im = rows[n][2 * t + 1];
            if (!std::isfinite(re) || !std::isfinite(im)) throw std::invalid_argument("snapshot CSV: non-finite entry");
            Y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t)) = {re, im};
        }
    }
    return Y;
}

/// {"sensors": N, "snapshots": T, "data": [[re, im, re, im, ...], ...]}
inline json snapshots_to_json(const SnapshotMatrix& Y)
{
    json data = json::array();
    for (Eigen::Index n = 0; n < Y.rows(); ++n) {
        json row = json::array();
        for (Eigen::Index t = 0; t < Y.cols(); ++t) {
            row.push_back(Y(n, t).real());
            row.push_back(Y(n, t).imag());
        }
        data.push_back(std::move(row));
    }
    return {{"sensors", Y.rows()}, {"snapshots", Y.cols()}, {"data", std::move(data)}};
}

inline SnapshotMatrix snapshots_from_json(const json& j)
{
    const auto n = j.at("sensors").get<Eigen::Index>();
    const auto t = j.at("snapshots").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (n < 1 || t < 1 || static_cast<Eigen::Index>(data.size()) != n)
        throw std::invalid_argument("snapshot JSON: inconsistent dimensions");
    SnapshotMatrix Y(n, t);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = data[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != 2 * t) throw std::invalid_argument("snapshot JSON: ragged rows");
        for (Eigen::Index c = 0; c < t; ++c)
            Y(r, c) = {row[static_cast<std::size_t>(2 * c)].get<double>(),
                       row[static_cast<std::size_t>(2 * c + 1)].get<double>()};
    }
    return Y;
}

inline SnapshotMatrix load_snapshots(const std::string& path)
{
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return snapshots_from_json(read_json_file(path));
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    return read_snapshots_csv(in);
}

/// FNV-1a over the raw bytes of the entries; identifies a sample set.
inline std::uint64_t checksum(const SnapshotMatrix& Y)
{
    std::uint64_t h = 1469598103934665603ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(Y.data());
    const std::size_t len = static_cast<std::size_t>(Y.size()) * sizeof(cplx);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    h ^= static_cast<std::uint64_t>(Y.rows()) * 0x9e3779b97f4a7c15ull;
    return h;
}

} // namespace doaem

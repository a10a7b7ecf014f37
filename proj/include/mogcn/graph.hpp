// Copyright 2026 The mogcn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mogcn/features.hpp"

namespace mogcn {

/// Compressed sparse rows; column indices ascending within each row.
struct Csr {
  int n = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<int> cols;
  std::vector<double> values;

  std::size_t nnz() const { return cols.size(); }

  double at(int i, int j) const {
    const auto begin = cols.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    const auto end = cols.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    const auto it = std::lower_bound(begin, end, j);
    return (it != end && *it == j) ? values[static_cast<std::size_t>(it - cols.begin())] : 0.0;
  }

  /// this * m, rows accumulated in stored order.
  Matrix multiply(const Matrix& m) const {
    require(m.rows() == n, ErrorCode::kShapeMismatch, "sparse product: inner dimensions differ");
    Matrix out = Matrix::Zero(n, m.cols());
    for (int i = 0; i < n; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) out.row(i) += values[k] * m.row(cols[k]);
    return out;
  }

  /// transpose(this) * m.
  Matrix multiply_transpose(const Matrix& m) const {
    require(m.rows() == n, ErrorCode::kShapeMismatch, "sparse product: inner dimensions differ");
    Matrix out = Matrix::Zero(n, m.cols());
    for (int i = 0; i < n; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) out.row(cols[k]) += values[k] * m.row(i);
    return out;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) d(i, cols[k]) = values[k];
    return d;
  }

  friend bool operator==(const Csr&, const Csr&) = default;
};

/// Builds CSR from (row, col, value) triplets; duplicates are not merged.
inline Csr csr_from_triplets(int n, std::vector<std::tuple<int, int, double>> triplets) {
  std::sort(triplets.begin(), triplets.end(),
            [](const auto& a, const auto& b) { return std::tie(std::get<0>(a), std::get<1>(a)) <
                                                      std::tie(std::get<0>(b), std::get<1>(b)); });
  Csr csr;
  csr.n = n;
  csr.row_offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  csr.cols.reserve(triplets.size());
  csr.values.reserve(triplets.size());
  for (const auto& [i, j, v] : triplets) {
    ++csr.row_offsets[static_cast<std::size_t>(i) + 1];
    csr.cols.push_back(j);
    csr.values.push_back(v);
  }
  for (int i = 0; i < n; ++i) csr.row_offsets[i + 1] += csr.row_offsets[i];
  return csr;
}

struct DirectedEdge {
  int from = 0;
  int to = 0;
  double distance = 0.0;
  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

struct UndirectedEdge {
  int i = 0;  // i < j
  int j = 0;
  double distance = 0.0;
  double weight = 0.0;
  friend bool operator==(const UndirectedEdge&, const UndirectedEdge&) = default;
};

/// Exact k nearest neighbours of every row under Euclidean distance; ties
/// go to the smaller index, self excluded. Output grouped by source node in
/// increasing distance.
inline std::vector<DirectedEdge> knn(const FeatureMatrix& x, int k, unsigned jobs = 1) {
  const auto n = static_cast<int>(x.nodes());
  require(k >= 1 && k < n, ErrorCode::kInvalidArgument,
          "k=" + std::to_string(k) + " must satisfy 1 <= k < N=" + std::to_string(n));
  require(x.values.allFinite(), ErrorCode::kInvalidArgument, "feature matrix has non-finite entries");
  const Eigen::Index c = x.dimension();
  std::vector<DirectedEdge> edges(static_cast<std::size_t>(n) * k);
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t qi) {
    const int q = static_cast<int>(qi);
    std::vector<std::pair<double, int>> cand;
    cand.reserve(static_cast<std::size_t>(n) - 1);
    const double* xq = x.values.row(q).data();
    for (int j = 0; j < n; ++j) {
      if (j == q) continue;
      const double* xj = x.values.row(j).data();
      double s = 0.0;
      for (Eigen::Index d = 0; d < c; ++d) {
        const double diff = xq[d] - xj[d];
        s += diff * diff;
      }
      cand.emplace_back(s, j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int r = 0; r < k; ++r)
      edges[qi * k + r] = {q, cand[r].second, std::sqrt(cand[r].first)};
  });
  return edges;
}

/// Union of reciprocal and one-way edges, each undirected pair once.
inline std::vector<UndirectedEdge> symmetrize(const std::vector<DirectedEdge>& directed) {
  std::vector<UndirectedEdge> out;
  out.reserve(directed.size());
  for (const auto& e : directed)
    out.push_back({std::min(e.from, e.to), std::max(e.from, e.to), e.distance, 0.0});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.i == b.i && a.j == b.j; }),
            out.end());
  return out;
}

/// Kernel width: sum of edge distances over (|E| + N), edges counted once.
/// A zero result (all duplicates) is replaced by 1.
inline double compute_rho(const std::vector<UndirectedEdge>& edges, int n) {
  require(!edges.empty(), ErrorCode::kEmptySet, "rho needs at least one edge");
  double sum = 0.0;
  for (const auto& e : edges) sum += e.distance;
  const double rho = sum / static_cast<double>(edges.size() + static_cast<std::size_t>(n));
  return rho > 0.0 ? rho : 1.0;
}

inline double gaussian_weight(double distance, double rho) {
  return std::exp(-(distance * distance) / (rho * rho));
}

/// Symmetric weighted adjacency without self-loops.
struct SparseGraph {
  int n = 0;
  std::vector<UndirectedEdge> edges;
  Csr adjacency;
  double rho = 1.0;
  std::size_t directed_edge_count = 0;
};

inline Csr adjacency_from_edges(int n, const std::vector<UndirectedEdge>& edges) {
  std::vector<std::tuple<int, int, double>> t;
  t.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    t.emplace_back(e.i, e.j, e.weight);
    t.emplace_back(e.j, e.i, e.weight);
  }
  return csr_from_triplets(n, std::move(t));
}

inline SparseGraph build_graph(const FeatureMatrix& x, int k, unsigned jobs = 1) {
  const auto directed = knn(x, k, jobs);
  SparseGraph g;
  g.n = static_cast<int>(x.nodes());
  g.directed_edge_count = directed.size();
  g.edges = symmetrize(directed);
  g.rho = compute_rho(g.edges, g.n);
  for (auto& e : g.edges) e.weight = gaussian_weight(e.distance, g.rho);
  g.adjacency = adjacency_from_edges(g.n, g.edges);
  return g;
}

/// Propagation operator D~^{-1/2} (A + I) D~^{-1/2}.
struct NormalizedAdjacency {
  int n = 0;
  Csr matrix;
};

inline NormalizedAdjacency normalize(const Csr& adjacency) {
  const int n = adjacency.n;
  std::vector<double> degree(static_cast<std::size_t>(n), 1.0);
  for (int i = 0; i < n; ++i)
    for (std::size_t k = adjacency.row_offsets[i]; k < adjacency.row_offsets[i + 1]; ++k) {
      require(adjacency.cols[k] != i, ErrorCode::kInvalidArgument, "adjacency has a self-loop");
      degree[i] += adjacency.values[k];
    }
  std::vector<std::tuple<int, int, double>> t;
  t.reserve(adjacency.nnz() + static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 1.0 / degree[i]);
    for (std::size_t k = adjacency.row_offsets[i]; k < adjacency.row_offsets[i + 1]; ++k) {
      const int j = adjacency.cols[k];
      t.emplace_back(i, j, adjacency.values[k] / std::sqrt(degree[i] * degree[j]));
    }
  }
  return {n, csr_from_triplets(n, std::move(t))};
}

inline NormalizedAdjacency normalize(const SparseGraph& g) { return normalize(g.adjacency); }

// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kGraphMagic = 0x5247474d;  // "MGGR"

// Header: magic, N, nnz (u32); then N+1 row offsets (u32), nnz column
// indices (u32), nnz weights (f64). Stores the symmetric adjacency A.
inline void save_csr(const std::string& path, const Csr& csr) {
  auto os = open_out(path, true);
  le::put<std::uint32_t>(os, kGraphMagic);
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(csr.n));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(csr.nnz()));
  for (auto o : csr.row_offsets) le::put<std::uint32_t>(os, static_cast<std::uint32_t>(o));
  for (auto c : csr.cols) le::put<std::uint32_t>(os, static_cast<std::uint32_t>(c));
  for (auto v : csr.values) le::put<double>(os, v);
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed: " + path);
}

inline Csr load_csr(const std::string& path) {
  auto is = open_in(path, true);
  require(le::get<std::uint32_t>(is) == kGraphMagic, ErrorCode::kMalformedFile, path + ": not a graph file");
  Csr csr;
  csr.n = static_cast<int>(le::get<std::uint32_t>(is));
  const auto nnz = le::get<std::uint32_t>(is);
  csr.row_offsets.resize(static_cast<std::size_t>(csr.n) + 1);
  for (auto& o : csr.row_offsets) o = le::get<std::uint32_t>(is);
  require(csr.row_offsets.front() == 0 && csr.row_offsets.back() == nnz, ErrorCode::kMalformedFile,
          path + ": inconsistent row offsets");
  for (int i = 0; i < csr.n; ++i)
    require(csr.row_offsets[i] <= csr.row_offsets[i + 1], ErrorCode::kMalformedFile, path + ": offsets decrease");
  csr.cols.resize(nnz);
  for (auto& c : csr.cols) {
    c = static_cast<int>(le::get<std::uint32_t>(is));
    require(c >= 0 && c < csr.n, ErrorCode::kMalformedFile, path + ": column out of range");
  }
  csr.values.resize(nnz);
  for (auto& v : csr.values) v = le::get<double>(is);
  return csr;
}

/// Recovers the undirected edge list (weights only) from a stored adjacency.
inline std::vector<UndirectedEdge> edges_from_adjacency(const Csr& a) {
  std::vector<UndirectedEdge> out;
  for (int i = 0; i < a.n; ++i)
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      if (a.cols[k] > i) out.push_back({i, a.cols[k], 0.0, a.values[k]});
  return out;
}

/// Text export, one "i j w" line per undirected edge.
inline void export_edge_list(const std::string& path, const Csr& a) {
  auto os = open_out(path);
  for (const auto& e : edges_from_adjacency(a)) os << e.i << ' ' << e.j << ' ' << format_double(e.weight) << '\n';
}

}  // namespace mogcn

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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mogcn/background.hpp"
#include "mogcn/media_io.hpp"

namespace mogcn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kStatsPerHistogram = 6;

/// Bin counts of the node descriptor plus the flow extraction knobs.
struct FeatureLayout {
  int flow_magnitude_bins = 32;
  int flow_orientation_bins = 32;
  int lbp_bins = 256;
  int intensity_bins = 64;
  double flow_magnitude_max = 16.0;  // px; larger magnitudes land in the last bin
  int lk_window = 5;

  /// Descriptor length C.
  int dimension() const {
    return (flow_magnitude_bins + kStatsPerHistogram) + (flow_orientation_bins + kStatsPerHistogram) +
           4 * lbp_bins + 4 * intensity_bins;
  }

  void validate() const {
    require(flow_magnitude_bins >= 1 && flow_orientation_bins >= 1 && lbp_bins >= 1 && intensity_bins >= 1,
            ErrorCode::kInvalidArgument, "all bin counts must be >= 1");
    require(lbp_bins <= 256, ErrorCode::kInvalidArgument, "lbp_bins must be <= 256");
    require(flow_magnitude_max > 0.0, ErrorCode::kInvalidArgument, "flow_magnitude_max must be positive");
    require(lk_window >= 3 && lk_window % 2 == 1, ErrorCode::kInvalidArgument, "lk_window must be odd and >= 3");
  }

  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

struct FlowVector {
  double u = 0.0;  // along columns
  double v = 0.0;  // along rows
};

struct FlowField {
  std::vector<FlowVector> flows;  // one per support pixel, same order
  std::vector<bool> degenerate;
  std::size_t degenerate_count = 0;
};

/// Structure-tensor eigenvalue below which a direction is unconstrained.
inline constexpr double kLkEigenFloor = 1e-6;

/// Lucas-Kanade on a square window around each support pixel. Spatial
/// gradients are central differences of `prev`; the temporal term is
/// curr - prev. Border samples are clamped. Where the smaller eigenvalue of
/// the structure tensor is below kLkEigenFloor the pixel is flagged and the
/// flow is the least-norm solution along the well-conditioned direction
/// (zero when both eigenvalues are small).
inline FlowField lucas_kanade(const Frame& prev, const Frame& curr, const std::vector<Pixel>& support,
                              int window) {
  require(prev.same_shape(curr), ErrorCode::kDimensionMismatch, "flow frames differ in size");
  require(!support.empty(), ErrorCode::kEmptySet, "empty flow support");
  require(window >= 3 && window % 2 == 1, ErrorCode::kInvalidArgument, "window must be odd and >= 3");
  const int W = prev.width, H = prev.height, half = window / 2;
  auto px = [&](const Frame& f, int r, int c) { return f.at(std::clamp(r, 0, H - 1), std::clamp(c, 0, W - 1)); };

  FlowField out;
  out.flows.resize(support.size());
  out.degenerate.resize(support.size(), false);
  for (std::size_t k = 0; k < support.size(); ++k) {
    const Pixel p = support[k];
    double gxx = 0, gxy = 0, gyy = 0, bx = 0, by = 0;
    for (int dr = -half; dr <= half; ++dr) {
      for (int dc = -half; dc <= half; ++dc) {
        const int r = std::clamp(p.row + dr, 0, H - 1), c = std::clamp(p.col + dc, 0, W - 1);
        const double ix = (px(prev, r, c + 1) - px(prev, r, c - 1)) / 2.0;
        const double iy = (px(prev, r + 1, c) - px(prev, r - 1, c)) / 2.0;
        const double it = curr.at(r, c) - prev.at(r, c);
        gxx += ix * ix;
        gxy += ix * iy;
        gyy += iy * iy;
        bx -= ix * it;
        by -= iy * it;
      }
    }
    const double mean = (gxx + gyy) / 2.0;
    const double disc = std::sqrt((gxx - gyy) * (gxx - gyy) / 4.0 + gxy * gxy);
    const double lmax = mean + disc, lmin = mean - disc;
    FlowVector f;
    if (lmin >= kLkEigenFloor) {
      const double det = gxx * gyy - gxy * gxy;
      f.u = (gyy * bx - gxy * by) / det;
      f.v = (gxx * by - gxy * bx) / det;
    } else {
      out.degenerate[k] = true;
      ++out.degenerate_count;
      if (lmax >= kLkEigenFloor) {
        double ex, ey;
        if (std::abs(gxy) > 0.0) {
          ex = lmax - gyy;
          ey = gxy;
        } else if (gxx >= gyy) {
          ex = 1.0;
          ey = 0.0;
        } else {
          ex = 0.0;
          ey = 1.0;
        }
        const double norm = std::hypot(ex, ey);
        ex /= norm;
        ey /= norm;
        const double s = (ex * bx + ey * by) / lmax;
        f.u = s * ex;
        f.v = s * ey;
      }
    }
    out.flows[k] = f;
  }
  return out;
}

/// (min, max, mean, population std, mean absolute deviation, range).
inline std::array<double, kStatsPerHistogram> descriptive_stats(const std::vector<double>& values) {
  std::array<double, kStatsPerHistogram> s{};
  if (values.empty()) return s;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double var = 0, mad = 0;
  for (double v : values) {
    var += (v - mean) * (v - mean);
    mad += std::abs(v - mean);
  }
  s[0] = *lo;
  s[1] = *hi;
  s[2] = mean;
  s[3] = std::sqrt(var / static_cast<double>(values.size()));
  s[4] = mad / static_cast<double>(values.size());
  s[5] = *hi - *lo;
  return s;
}

namespace detail {

// Normalized histogram over [lo, hi]; values outside clamp to the end bins.
inline std::vector<double> normalized_histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  if (values.empty()) return h;
  for (double v : values) {
    const double t = (v - lo) / (hi - lo) * bins;
    const int b = t <= 0.0 ? 0 : static_cast<int>(std::min<double>(std::floor(t), bins - 1));
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& x : h) x /= static_cast<double>(values.size());
  return h;
}

}  // namespace detail

/// Magnitude histogram + stats, then orientation histogram + stats.
inline std::vector<double> flow_features(const std::vector<FlowVector>& flows, const FeatureLayout& layout) {
  layout.validate();
  std::vector<double> mags, oris;
  mags.reserve(flows.size());
  oris.reserve(flows.size());
  for (const auto& f : flows) {
    mags.push_back(std::hypot(f.u, f.v));
    oris.push_back(std::atan2(f.v, f.u));
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(layout.flow_magnitude_bins + layout.flow_orientation_bins +
                                       2 * kStatsPerHistogram));
  auto append = [&](const std::vector<double>& vals, int bins, double lo, double hi) {
    const auto h = detail::normalized_histogram(vals, bins, lo, hi);
    out.insert(out.end(), h.begin(), h.end());
    const auto s = descriptive_stats(vals);
    out.insert(out.end(), s.begin(), s.end());
  };
  append(mags, layout.flow_magnitude_bins, 0.0, layout.flow_magnitude_max);
  append(oris, layout.flow_orientation_bins, -std::numbers::pi, std::numbers::pi);
  return out;
}

struct Histogram {
  std::vector<double> values;
  bool degenerate = false;  // source region too small; values all zero
};

/// Radius-1, 8-neighbour LBP over interior pixels. Bit b is set when
/// neighbour b >= centre, neighbours clockwise from the top-left. Codes map
/// to `bins` buckets as code * bins / 256.
inline Histogram lbp_histogram(const Frame& image, int bins = 256) {
  require(bins >= 1 && bins <= 256, ErrorCode::kInvalidArgument, "lbp bins must be in [1, 256]");
  Histogram h{std::vector<double>(static_cast<std::size_t>(bins), 0.0), false};
  if (image.width < 3 || image.height < 3) {
    h.degenerate = true;
    return h;
  }
  static constexpr int kDr[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  static constexpr int kDc[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  std::size_t count = 0;
  for (int r = 1; r + 1 < image.height; ++r) {
    for (int c = 1; c + 1 < image.width; ++c) {
      const double centre = image.at(r, c);
      int code = 0;
      for (int b = 0; b < 8; ++b)
        if (image.at(r + kDr[b], c + kDc[b]) >= centre) code |= 1 << b;
      h.values[static_cast<std::size_t>(code * bins / 256)] += 1.0;
      ++count;
    }
  }
  for (auto& v : h.values) v /= static_cast<double>(count);
  return h;
}

/// Uniform bins over [0, 1], last bin closed on the right.
inline Histogram intensity_histogram(const Frame& image, int bins) {
  require(bins >= 1, ErrorCode::kInvalidArgument, "intensity bins must be >= 1");
  Histogram h{std::vector<double>(static_cast<std::size_t>(bins), 0.0), false};
  if (image.data.empty()) {
    h.degenerate = true;
    return h;
  }
  h.values = detail::normalized_histogram(image.data, bins, 0.0, 1.0);
  return h;
}

inline Frame abs_difference(const Frame& a, const Frame& b) {
  require(a.same_shape(b), ErrorCode::kDimensionMismatch, "abs_difference operands differ in size");
  Frame out(a.width, a.height, 0.0, a.frame_index);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = std::abs(a.data[i] - b.data[i]);
  return out;
}

struct NodeFeatures {
  int node_id = 0;
  std::vector<double> vector;
  std::size_t degenerate_flow = 0;  // support pixels with an ill-conditioned tensor
  bool degenerate_texture = false;  // RoI smaller than 3x3
};

/// Descriptor of one instance: flow over the mask, then LBP and intensity
/// histograms of the RoI in I_t, I_{t-1}, B and |I_t - B|.
inline NodeFeatures node_features(const Frame& frame_t, const Frame& frame_prev, const BackgroundModel& background,
                                  const Instance& inst, const FeatureLayout& layout) {
  layout.validate();
  require(frame_t.same_shape(frame_prev) && frame_t.same_shape(background.image), ErrorCode::kDimensionMismatch,
          "frame, previous frame and background differ in size");
  validate_instance(inst, frame_t.width, frame_t.height);

  NodeFeatures nf;
  nf.node_id = inst.node_id;
  nf.vector.reserve(static_cast<std::size_t>(layout.dimension()));
  const FlowField flow = lucas_kanade(frame_prev, frame_t, inst.mask_pixels, layout.lk_window);
  nf.degenerate_flow = flow.degenerate_count;
  const auto flow_part = flow_features(flow.flows, layout);
  nf.vector.insert(nf.vector.end(), flow_part.begin(), flow_part.end());

  const Frame roi_t = extract_roi(frame_t, inst.bbox);
  const Frame roi_prev = extract_roi(frame_prev, inst.bbox);
  const Frame roi_bg = extract_roi(background.image, inst.bbox);
  const Frame roi_diff = abs_difference(roi_t, roi_bg);
  for (const Frame* img : {&roi_t, &roi_prev, &roi_bg, &roi_diff}) {
    const Histogram lbp = lbp_histogram(*img, layout.lbp_bins);
    nf.degenerate_texture = nf.degenerate_texture || lbp.degenerate;
    nf.vector.insert(nf.vector.end(), lbp.values.begin(), lbp.values.end());
    const Histogram inten = intensity_histogram(*img, layout.intensity_bins);
    nf.vector.insert(nf.vector.end(), inten.values.begin(), inten.values.end());
  }
  return nf;
}

// ---------------------------------------------------------------------------

/// N x C node descriptors; row i belongs to node i.
struct FeatureMatrix {
  FeatureLayout layout;
  Matrix values;

  Eigen::Index nodes() const { return values.rows(); }
  Eigen::Index dimension() const { return values.cols(); }
};

inline FeatureMatrix assemble_features(const std::vector<NodeFeatures>& rows, const FeatureLayout& layout) {
  FeatureMatrix fm{layout, Matrix(static_cast<Eigen::Index>(rows.size()), layout.dimension())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].node_id == static_cast<int>(i), ErrorCode::kInvalidArgument, "node ids must be 0..N-1 in order");
    require(rows[i].vector.size() == static_cast<std::size_t>(layout.dimension()), ErrorCode::kShapeMismatch,
            "descriptor length differs from layout");
    for (int c = 0; c < layout.dimension(); ++c) fm.values(static_cast<Eigen::Index>(i), c) = rows[i].vector[c];
  }
  return fm;
}

inline constexpr std::uint32_t kFeatureMagic = 0x5446474d;  // "MGFT"

// Header: magic, N, C, magnitude bins, orientation bins, lbp bins,
// intensity bins, stats per histogram, lk window, magnitude max (f32);
// then N*C f32 row-major.
inline void save_features(const std::string& path, const FeatureMatrix& fm) {
  auto os = open_out(path, true);
  le::put<std::uint32_t>(os, kFeatureMagic);
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(fm.nodes()));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(fm.dimension()));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(fm.layout.flow_magnitude_bins));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(fm.layout.flow_orientation_bins));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(fm.layout.lbp_bins));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(fm.layout.intensity_bins));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(kStatsPerHistogram));
  le::put<std::uint32_t>(os, static_cast<std::uint32_t>(fm.layout.lk_window));
  le::put<float>(os, static_cast<float>(fm.layout.flow_magnitude_max));
  for (Eigen::Index i = 0; i < fm.nodes(); ++i)
    for (Eigen::Index c = 0; c < fm.dimension(); ++c) le::put<float>(os, static_cast<float>(fm.values(i, c)));
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed: " + path);
}

inline FeatureMatrix load_features(const std::string& path) {
  auto is = open_in(path, true);
  require(le::get<std::uint32_t>(is) == kFeatureMagic, ErrorCode::kMalformedFile, path + ": not a feature file");
  const auto n = le::get<std::uint32_t>(is);
  const auto c = le::get<std::uint32_t>(is);
  FeatureMatrix fm;
  fm.layout.flow_magnitude_bins = static_cast<int>(le::get<std::uint32_t>(is));
  fm.layout.flow_orientation_bins = static_cast<int>(le::get<std::uint32_t>(is));
  fm.layout.lbp_bins = static_cast<int>(le::get<std::uint32_t>(is));
  fm.layout.intensity_bins = static_cast<int>(le::get<std::uint32_t>(is));
  require(le::get<std::uint32_t>(is) == kStatsPerHistogram, ErrorCode::kMalformedFile, path + ": stats count");
  fm.layout.lk_window = static_cast<int>(le::get<std::uint32_t>(is));
  fm.layout.flow_magnitude_max = le::get<float>(is);
  require(static_cast<int>(c) == fm.layout.dimension(), ErrorCode::kMalformedFile, path + ": C disagrees with layout");
  fm.values.resize(n, c);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < c; ++j) fm.values(i, j) = le::get<float>(is);
  return fm;
}

inline void export_features_csv(const std::string& path, const FeatureMatrix& fm) {
  auto os = open_out(path);
  os << "node";
  for (Eigen::Index c = 0; c < fm.dimension(); ++c) os << ",f" << c;
  os << '\n';
  for (Eigen::Index i = 0; i < fm.nodes(); ++i) {
    os << i;
    for (Eigen::Index c = 0; c < fm.dimension(); ++c) os << ',' << format_double(fm.values(i, c));
    os << '\n';
  }
}

}  // namespace mogcn

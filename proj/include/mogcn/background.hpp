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
#include <string>
#include <vector>

#include "json.hpp"
#include "mogcn/media_io.hpp"

namespace mogcn {

/// Static background image of a video, estimated by a per-pixel temporal median.
struct BackgroundModel {
  std::string video_id;
  Frame image;
  std::vector<int> source_frame_indices;
};

/// Stride that keeps at most `max_samples` of `frame_count` frames.
inline int default_stride(std::size_t frame_count, std::size_t max_samples) {
  if (max_samples == 0 || frame_count <= max_samples) return 1;
  return static_cast<int>((frame_count + max_samples - 1) / max_samples);
}

/// Median of a sample set; even sizes take the mean of the two middle values.
inline double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

/// Per-pixel median over frames 0, stride, 2*stride, ... capped at
/// `max_samples` (0 means no cap).
inline BackgroundModel median_background(const std::vector<Frame>& frames, std::size_t max_samples = 150,
                                         int stride = 1, const std::string& video_id = {}) {
  require(!frames.empty(), ErrorCode::kEmptySet, "median_background needs at least one frame");
  require(stride >= 1, ErrorCode::kInvalidArgument, "stride must be >= 1");
  std::vector<const Frame*> sampled;
  for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(stride)) {
    if (max_samples != 0 && sampled.size() == max_samples) break;
    require(frames[i].same_shape(frames.front()), ErrorCode::kDimensionMismatch, "frame sizes differ");
    sampled.push_back(&frames[i]);
  }
  BackgroundModel model;
  model.video_id = video_id;
  model.image = Frame(frames.front().width, frames.front().height);
  for (const Frame* f : sampled) model.source_frame_indices.push_back(f->frame_index);
  std::sort(model.source_frame_indices.begin(), model.source_frame_indices.end());
  model.source_frame_indices.erase(
      std::unique(model.source_frame_indices.begin(), model.source_frame_indices.end()),
      model.source_frame_indices.end());

  std::vector<double> samples(sampled.size());
  for (std::size_t p = 0; p < model.image.size(); ++p) {
    for (std::size_t k = 0; k < sampled.size(); ++k) samples[k] = sampled[k]->data[p];
    model.image.data[p] = median_of(samples);
  }
  return model;
}

/// Sub-image under `box` (x = column, y = row).
inline Frame extract_roi(const Frame& image, const BBox& box) {
  require(box.inside(image.width, image.height), ErrorCode::kOutOfBounds, "RoI outside image");
  Frame roi(box.w, box.h, 0.0, image.frame_index);
  for (int r = 0; r < box.h; ++r)
    for (int c = 0; c < box.w; ++c) roi.at(r, c) = image.at(box.y + r, box.x + c);
  return roi;
}

/// Writes `<stem>.pgm` plus `<stem>.json` recording the source frames. The
/// PGM is 16-bit so the median survives a round trip to 1/65535.
inline void save_background(const std::string& stem, const BackgroundModel& model) {
  RawImage img;
  img.width = model.image.width;
  img.height = model.image.height;
  img.maxval = 65535;
  img.samples.resize(model.image.size());
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    img.samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(model.image.data[i], 0.0, 1.0) * 65535.0));
  write_image(stem + ".pgm", img);
  nlohmann::json meta;
  meta["video_id"] = model.video_id;
  meta["width"] = model.image.width;
  meta["height"] = model.image.height;
  meta["source_frame_indices"] = model.source_frame_indices;
  auto os = open_out(stem + ".json");
  os << meta.dump(2) << '\n';
}

inline BackgroundModel load_background(const std::string& stem) {
  BackgroundModel model;
  model.image = load_frame(stem + ".pgm");
  auto is = open_in(stem + ".json");
  nlohmann::json meta;
  try {
    is >> meta;
    model.video_id = meta.at("video_id").get<std::string>();
    model.source_frame_indices = meta.at("source_frame_indices").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, stem + ".json: " + e.what());
  }
  return model;
}

}  // namespace mogcn

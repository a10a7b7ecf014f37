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

#include <gtest/gtest.h>

#include "mogcn/background.hpp"
#include "support.hpp"

using namespace mogcn;

namespace {

std::vector<Frame> pixel_series(const std::vector<double>& values) {
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < values.size(); ++i) frames.emplace_back(1, 1, values[i], static_cast<int>(i + 1));
  return frames;
}

// Sort-based median per pixel.
Frame sorted_median(const std::vector<Frame>& frames) {
  Frame out(frames[0].width, frames[0].height);
  for (std::size_t p = 0; p < out.size(); ++p) {
    std::vector<double> v;
    for (const auto& f : frames) v.push_back(f.data[p]);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    out.data[p] = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  }
  return out;
}

}  // namespace

TEST(Median, OddAndEvenCounts) {
  EXPECT_DOUBLE_EQ(median_background(pixel_series({0.1, 0.2, 0.3})).image.at(0, 0), 0.2);
  EXPECT_DOUBLE_EQ(median_background(pixel_series({0.4, 0.1, 0.3, 0.2})).image.at(0, 0), (0.2 + 0.3) / 2.0);
}

TEST(Median, ConstantSequence) {
  Frame f(5, 4, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) f.data[i] = i / 20.0;
  std::vector<Frame> frames(6, f);
  EXPECT_EQ(median_background(frames).image.data, f.data);
}

TEST(Median, MatchesSortOracleAndIsPermutationInvariant) {
  Rng rng(5);
  std::vector<Frame> frames;
  for (int t = 0; t < 8; ++t) {
    Frame f(7, 5, 0.0, t);
    for (auto& v : f.data) v = rng.uniform();
    frames.push_back(f);
  }
  const auto model = median_background(frames);
  EXPECT_EQ(model.image.data, sorted_median(frames).data);
  for (std::size_t p = 0; p < model.image.size(); ++p) {
    double lo = 1, hi = 0;
    for (const auto& f : frames) {
      lo = std::min(lo, f.data[p]);
      hi = std::max(hi, f.data[p]);
    }
    EXPECT_GE(model.image.data[p], lo);
    EXPECT_LE(model.image.data[p], hi);
  }
  auto shuffled = frames;
  rng.shuffle(shuffled);
  EXPECT_EQ(median_background(shuffled).image.data, model.image.data);
}

TEST(Median, StrideAndCap) {
  const auto frames = pixel_series({0.9, 0.0, 0.8, 0.0, 0.7, 0.0, 0.1});
  const auto strided = median_background(frames, 0, 2);
  EXPECT_EQ(strided.source_frame_indices, (std::vector<int>{1, 3, 5, 7}));
  EXPECT_DOUBLE_EQ(strided.image.at(0, 0), (0.7 + 0.8) / 2.0);
  const auto capped = median_background(frames, 3, 1);
  EXPECT_EQ(capped.source_frame_indices, (std::vector<int>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(capped.image.at(0, 0), 0.8);
  EXPECT_EQ(default_stride(300, 150), 2);
  EXPECT_EQ(default_stride(301, 150), 3);
  EXPECT_EQ(default_stride(10, 150), 1);
}

TEST(Median, Errors) {
  EXPECT_THROW(median_background({}), Error);
  EXPECT_THROW(median_background(pixel_series({0.1}), 0, 0), Error);
  std::vector<Frame> mixed = {Frame(2, 2), Frame(3, 2)};
  EXPECT_THROW(median_background(mixed), Error);
}

TEST(Roi, IdentityPointAndBounds) {
  Frame f(4, 3);
  for (std::size_t i = 0; i < f.size(); ++i) f.data[i] = i * 0.01;
  EXPECT_EQ(extract_roi(f, {0, 0, 4, 3}).data, f.data);
  const Frame p = extract_roi(f, {2, 1, 1, 1});
  EXPECT_EQ(p.size(), 1u);
  EXPECT_DOUBLE_EQ(p.at(0, 0), f.at(1, 2));
  try {
    extract_roi(f, {1, 0, 4, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfBounds);
  }
}

TEST(Background, SaveLoadRoundTrip) {
  testing_support::TempDir dir("bg");
  BackgroundModel m{"vid", Frame(3, 2), {1, 4, 9}};
  for (std::size_t i = 0; i < m.image.size(); ++i) m.image.data[i] = i / 5.0;
  save_background(dir.str("b"), m);
  const auto back = load_background(dir.str("b"));
  EXPECT_EQ(back.video_id, "vid");
  EXPECT_EQ(back.source_frame_indices, m.source_frame_indices);
  for (std::size_t i = 0; i < m.image.size(); ++i) EXPECT_NEAR(back.image.data[i], m.image.data[i], 0.5 / 65535);
}

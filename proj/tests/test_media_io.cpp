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

#include "mogcn/media_io.hpp"
#include "support.hpp"

using namespace mogcn;
using testing_support::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

Frame ramp(int w, int h, int index) {
  Frame f(w, h, 0.0, index);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) f.at(r, c) = ((r * w + c + index) % 256) / 255.0;
  return f;
}

}  // namespace

TEST(Grayscale, Weights) {
  EXPECT_DOUBLE_EQ(to_grayscale(1, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(to_grayscale(0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(to_grayscale(1, 0, 0), 0.299);
  EXPECT_DOUBLE_EQ(to_grayscale(0, 1, 0), 0.587);
  EXPECT_DOUBLE_EQ(to_grayscale(2, -1, 0.5), to_grayscale(1, 0, 0.5));
}

TEST(ImageIo, PgmRoundTrip8And16Bit) {
  TempDir dir("img");
  RawImage a{5, 3, 1, 255, {}};
  for (int i = 0; i < 15; ++i) a.samples.push_back(static_cast<std::uint16_t>(i * 17));
  write_image(dir.str("a.pgm"), a);
  const RawImage a2 = read_image(dir.str("a.pgm"));
  EXPECT_EQ(a2.samples, a.samples);
  EXPECT_EQ(a2.maxval, 255);

  RawImage b{4, 2, 1, 65535, {0, 1, 256, 65535, 1000, 2000, 3000, 40000}};
  write_image(dir.str("b.pgm"), b);
  EXPECT_EQ(read_image(dir.str("b.pgm")).samples, b.samples);
}

TEST(ImageIo, PngRoundTripGrayRgbAnd16Bit) {
  TempDir dir("png");
  RawImage g{3, 2, 1, 255, {0, 10, 20, 30, 40, 255}};
  write_image(dir.str("g.png"), g);
  EXPECT_EQ(read_image(dir.str("g.png")).samples, g.samples);

  RawImage rgb{2, 1, 3, 255, {255, 0, 0, 0, 0, 255}};
  write_image(dir.str("c.png"), rgb);
  const RawImage rgb2 = read_image(dir.str("c.png"));
  EXPECT_EQ(rgb2.channels, 3);
  EXPECT_EQ(rgb2.samples, rgb.samples);
  const Frame f = frame_from_raw(rgb2);
  EXPECT_NEAR(f.at(0, 0), 0.299, 1e-12);
  EXPECT_NEAR(f.at(0, 1), 0.114, 1e-12);

  RawImage w{2, 2, 1, 65535, {0, 1, 300, 65535}};
  write_image(dir.str("w.png"), w);
  const RawImage w2 = read_image(dir.str("w.png"));
  EXPECT_EQ(w2.maxval, 65535);
  EXPECT_EQ(w2.samples, w.samples);
}

TEST(ImageIo, Errors) {
  TempDir dir("imgerr");
  EXPECT_EQ(code_of([&] { read_image(dir.str("missing.pgm")); }), ErrorCode::kMissingPath);
  std::ofstream(dir.str("bad.pgm")) << "P2\n1 1\n255\n0\n";
  EXPECT_EQ(code_of([&] { read_image(dir.str("bad.pgm")); }), ErrorCode::kMalformedFile);
  std::ofstream(dir.str("short.pgm"), std::ios::binary) << "P5\n4 4\n255\nab";
  EXPECT_EQ(code_of([&] { read_image(dir.str("short.pgm")); }), ErrorCode::kMalformedFile);
  std::ofstream(dir.str("junk.png"), std::ios::binary) << "not a png at all";
  EXPECT_EQ(code_of([&] { read_image(dir.str("junk.png")); }), ErrorCode::kMalformedFile);
  EXPECT_EQ(code_of([&] { read_image(dir.str("x.bmp")); }), ErrorCode::kMissingPath);
}

TEST(Sequence, SortedByParsedIndex) {
  TempDir dir("seq");
  for (int i : {3, 1, 2}) save_frame((dir.path() / format_template("in%06d.pgm", i)).string(), ramp(6, 4, i));
  std::ofstream(dir.str("notes.txt")) << "ignored";
  const auto frames = load_sequence(dir.str(), "in%06d.pgm");
  ASSERT_EQ(frames.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(frames[i].frame_index, i + 1);
    EXPECT_EQ(frames[i], ramp(6, 4, i + 1));
  }
}

TEST(Sequence, Errors) {
  TempDir dir("seqerr");
  EXPECT_EQ(code_of([&] { load_sequence(dir.str("nope"), "in%06d.pgm"); }), ErrorCode::kMissingPath);
  EXPECT_EQ(code_of([&] { load_sequence(dir.str(), "in%06d.pgm"); }), ErrorCode::kNoFrames);
  save_frame(dir.str("in000001.pgm"), ramp(6, 4, 1));
  EXPECT_EQ(code_of([&] { load_sequence(dir.str(), "in%06d.pgm"); }), ErrorCode::kTooFewFrames);
  save_frame(dir.str("in000002.pgm"), ramp(7, 4, 2));
  EXPECT_EQ(code_of([&] { load_sequence(dir.str(), "in%06d.pgm"); }), ErrorCode::kDimensionMismatch);
}

TEST(Instances, TightBoxAndDedup) {
  const Instance inst = make_instance("v", 4, {{3, 5}, {2, 4}, {2, 4}, {3, 4}, {2, 6}, {3, 6}}, 7, 11);
  EXPECT_EQ(inst.mask_pixels.size(), 5u);
  EXPECT_EQ(inst.bbox, (BBox{4, 2, 3, 2}));
  EXPECT_TRUE(std::is_sorted(inst.mask_pixels.begin(), inst.mask_pixels.end()));
  EXPECT_EQ(code_of([] { make_instance("v", 0, {}); }), ErrorCode::kEmptyMask);
}

TEST(Instances, RleRoundTripWithOverlaps) {
  TempDir dir("rle");
  std::vector<Instance> list = {
      make_instance("vid", 1, {{2, 1}, {2, 2}, {2, 3}, {3, 1}, {3, 2}}, 1, 0),
      make_instance("vid", 1, {{3, 2}, {3, 3}, {0, 0}}, 2, 1),  // overlaps the first, disconnected part
      make_instance("vid", 3, {{4, 7}}, 9, 2),
  };
  write_instances(dir.str("i.txt"), list, 8, 5);
  const InstanceFile back = load_instances(dir.str("i.txt"));
  EXPECT_EQ(back.width, 8);
  EXPECT_EQ(back.height, 5);
  EXPECT_EQ(back.instances, list);
  EXPECT_EQ(decode_rle(encode_rle(list[0], 8, 5), 8, 5), list[0].mask_pixels);
}

TEST(Instances, SingleRegionFromText) {
  TempDir dir("one");
  std::ofstream(dir.str("i.txt")) << "# mogcn-instances v1 width=4 height=4\nvideo,frame,label,rle\n"
                                  << "v,1,1,9 0 3 1 2 0 2 1\n";
  const auto f = load_instances(dir.str("i.txt"), 5);
  ASSERT_EQ(f.instances.size(), 1u);
  EXPECT_EQ(f.instances[0].mask_pixels.size(), 5u);
  EXPECT_EQ(f.instances[0].bbox, (BBox{1, 2, 3, 2}));
  EXPECT_EQ(f.instances[0].node_id, 5);
}

TEST(Instances, TextErrors) {
  TempDir dir("bad");
  auto try_body = [&](const std::string& body) {
    std::ofstream(dir.str("i.txt")) << "# mogcn-instances v1 width=4 height=2\nvideo,frame,label,rle\n" << body;
    return code_of([&] { load_instances(dir.str("i.txt")); });
  };
  EXPECT_EQ(try_body("v,1,1,7 0 2 1\n"), ErrorCode::kPixelOutOfFrame);
  EXPECT_EQ(try_body("v,1,1,8 0\n"), ErrorCode::kEmptyMask);
  EXPECT_EQ(try_body("v,1,1,3 0 2 1\n"), ErrorCode::kMalformedFile);
  EXPECT_EQ(try_body("v,1,1,3 0 2 7 3 0\n"), ErrorCode::kMalformedFile);
  EXPECT_EQ(try_body("v,x,1,8 0\n"), ErrorCode::kMalformedFile);
  std::ofstream(dir.str("h.txt")) << "garbage\n";
  EXPECT_EQ(code_of([&] { load_instances(dir.str("h.txt")); }), ErrorCode::kMalformedFile);
}

TEST(Instances, LabelImagesSplitComponents) {
  RawImage labels{6, 4, 1, 65535, std::vector<std::uint16_t>(24, 0)};
  auto set = [&](int r, int c, int v) { labels.samples[r * 6 + c] = static_cast<std::uint16_t>(v); };
  set(0, 0, 4);
  set(1, 1, 4);  // diagonal: same component
  set(3, 5, 4);  // second component of label 4
  set(2, 2, 300);
  const auto inst = instances_from_labels(labels, "v", 2, 10);
  ASSERT_EQ(inst.size(), 3u);
  EXPECT_EQ(inst[0].label, 4);
  EXPECT_EQ(inst[0].mask_pixels.size(), 2u);
  EXPECT_EQ(inst[1].label, 4);
  EXPECT_EQ(inst[1].bbox, (BBox{5, 3, 1, 1}));
  EXPECT_EQ(inst[2].label, 300);
  EXPECT_EQ(inst[0].node_id, 10);
  EXPECT_EQ(inst[2].node_id, 12);
}

TEST(Instances, LabelImageDirectoryRoundTrip) {
  TempDir dir("lab");
  std::vector<Instance> list = {make_instance("v", 1, {{0, 0}, {0, 1}}, 1, 0),
                                make_instance("v", 1, {{2, 3}, {3, 3}}, 2, 1),
                                make_instance("v", 2, {{1, 1}}, 1000, 2)};
  write_instance_labels(dir.str("lab"), "in%06d.png", list, 5, 4);
  const auto back = load_instance_labels(dir.str("lab"), "in%06d.png", "v");
  EXPECT_EQ(back.instances, list);
}

TEST(Instances, ZeroRegionsMeansNoInstances) {
  RawImage empty{4, 4, 1, 255, std::vector<std::uint16_t>(16, 0)};
  EXPECT_TRUE(instances_from_labels(empty, "v", 1).empty());
}

TEST(Instances, Validation) {
  Instance inst = make_instance("v", 1, {{1, 1}});
  EXPECT_NO_THROW(validate_instance(inst, 4, 4));
  EXPECT_EQ(code_of([&] { validate_instance(inst, 1, 1); }), ErrorCode::kOutOfBounds);
  inst.mask_pixels.push_back({3, 3});
  EXPECT_EQ(code_of([&] { validate_instance(inst, 4, 4); }), ErrorCode::kOutOfBounds);
}

TEST(GroundTruth, Mapping) {
  RawImage img{4, 1, 1, 255, {0, 255, 85, 170}};
  const auto gt = gt_from_raw(img, "v", 1);
  EXPECT_EQ(gt.at(0, 0), GtLabel::kBackground);
  EXPECT_EQ(gt.at(0, 1), GtLabel::kForeground);
  EXPECT_EQ(gt.at(0, 2), GtLabel::kUnknown);
  EXPECT_EQ(gt.at(0, 3), GtLabel::kUnknown);
  EXPECT_EQ(gt_from_raw(gt_to_raw(gt), "v", 1), gt);
}

TEST(Synthetic, SingleMovingSquare) {
  SyntheticSpec spec;
  spec.frames = 10;
  spec.width = 32;
  spec.height = 24;
  spec.movers = {MovingObject{4, 4, 2, 3, 1, 0, 0.9, 0.1}};
  const auto seq = synth_sequence(spec);
  ASSERT_EQ(seq.frames.size(), 10u);
  ASSERT_EQ(seq.instances.size(), 10u);
  for (int t = 0; t < 10; ++t) {
    const Instance& inst = seq.instances[t];
    EXPECT_EQ(inst.bbox, (BBox{2 + t, 3, 4, 4}));
    EXPECT_EQ(inst.node_id, t);
    const auto& gt = seq.ground_truth[t];
    std::vector<Pixel> fg;
    for (int r = 0; r < gt.height; ++r)
      for (int c = 0; c < gt.width; ++c)
        if (gt.at(r, c) == GtLabel::kForeground) fg.push_back({r, c});
    EXPECT_EQ(fg, inst.mask_pixels);
  }
}

TEST(Synthetic, DistractorsOnly) {
  SyntheticSpec spec;
  spec.frames = 3;
  spec.distractors = {StaticDistractor{{5, 5, 6, 6}, 0.2, 0.1}};
  const auto seq = synth_sequence(spec);
  ASSERT_EQ(seq.instances.size(), 3u);
  for (const auto& gt : seq.ground_truth)
    EXPECT_TRUE(std::all_of(gt.data.begin(), gt.data.end(), [](GtLabel l) { return l == GtLabel::kBackground; }));
}

TEST(Synthetic, DeterministicAndValidated) {
  SyntheticSpec spec;
  spec.movers = {MovingObject{}};
  spec.distractors = {StaticDistractor{}};
  const auto a = synth_sequence(spec);
  const auto b = synth_sequence(spec);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.instances, b.instances);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  spec.seed = 2;
  EXPECT_NE(synth_sequence(spec).frames, a.frames);

  spec.movers[0].start_x = spec.width - 10;
  spec.movers[0].velocity_x = 1;
  EXPECT_EQ(code_of([&] { synth_sequence(spec); }), ErrorCode::kOutOfBounds);
  spec.movers.clear();
  spec.frames = 1;
  EXPECT_EQ(code_of([&] { synth_sequence(spec); }), ErrorCode::kInvalidArgument);
}

TEST(Synthetic, FramesSurviveEightBitRoundTrip) {
  TempDir dir("synrt");
  SyntheticSpec spec;
  spec.movers = {MovingObject{}};
  const auto seq = synth_sequence(spec);
  save_frame(dir.str("f.pgm"), seq.frames[3]);
  Frame back = load_frame(dir.str("f.pgm"), seq.frames[3].frame_index);
  EXPECT_EQ(back, seq.frames[3]);
}

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
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "mogcn/common.hpp"
#include "mogcn/image_io.hpp"

namespace mogcn {

namespace fs = std::filesystem;

/// Grayscale image, row-major, intensities in [0, 1].
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> data;
  int frame_index = 0;

  Frame() = default;
  Frame(int w, int h, double fill = 0.0, int index = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill), frame_index(index) {}

  double& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Frame& o) const { return width == o.width && height == o.height; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct Pixel {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Axis-aligned box; x is the column, y the row of the top-left corner.
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  friend bool operator==(const BBox&, const BBox&) = default;

  bool contains(const Pixel& p) const { return p.col >= x && p.col < x + w && p.row >= y && p.row < y + h; }
  bool inside(int width, int height) const {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= width && y + h <= height;
  }
};

/// One segmented object in one frame; one graph node.
struct Instance {
  std::string video_id;
  int frame_index = 0;
  BBox bbox;
  std::vector<Pixel> mask_pixels;  // sorted row-major, unique
  int node_id = 0;
  int label = 0;  // the segmenter's label value, opaque

  friend bool operator==(const Instance&, const Instance&) = default;
};

inline BBox tight_bbox(const std::vector<Pixel>& pixels) {
  require(!pixels.empty(), ErrorCode::kEmptyMask, "bbox of empty pixel set");
  int r0 = pixels.front().row, r1 = r0, c0 = pixels.front().col, c1 = c0;
  for (const auto& p : pixels) {
    r0 = std::min(r0, p.row);
    r1 = std::max(r1, p.row);
    c0 = std::min(c0, p.col);
    c1 = std::max(c1, p.col);
  }
  return {c0, r0, c1 - c0 + 1, r1 - r0 + 1};
}

/// Builds an instance from a pixel set: sorts, dedups, and fits the bbox.
inline Instance make_instance(std::string video_id, int frame_index, std::vector<Pixel> pixels, int label = 1,
                              int node_id = 0) {
  require(!pixels.empty(), ErrorCode::kEmptyMask, video_id + " frame " + std::to_string(frame_index));
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  Instance inst;
  inst.video_id = std::move(video_id);
  inst.frame_index = frame_index;
  inst.bbox = tight_bbox(pixels);
  inst.mask_pixels = std::move(pixels);
  inst.node_id = node_id;
  inst.label = label;
  return inst;
}

inline void validate_instance(const Instance& inst, int width, int height) {
  require(!inst.mask_pixels.empty(), ErrorCode::kEmptyMask, "instance " + std::to_string(inst.node_id));
  require(inst.bbox.inside(width, height), ErrorCode::kOutOfBounds, "bbox outside frame");
  for (const auto& p : inst.mask_pixels) {
    require(p.row >= 0 && p.row < height && p.col >= 0 && p.col < width, ErrorCode::kPixelOutOfFrame,
            "instance " + std::to_string(inst.node_id));
    require(inst.bbox.contains(p), ErrorCode::kOutOfBounds, "mask pixel outside bbox");
  }
}

enum class GtLabel : std::uint8_t { kBackground = 0, kForeground = 1, kUnknown = 2 };

struct GroundTruthMask {
  std::string video_id;
  int frame_index = 0;
  int width = 0;
  int height = 0;
  std::vector<GtLabel> data;

  GtLabel at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  friend bool operator==(const GroundTruthMask&, const GroundTruthMask&) = default;
};

// ---------------------------------------------------------------------------

/// BT.601 luma, inputs clamped to [0, 1].
inline double to_grayscale(double r, double g, double b) {
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return clamp01(0.299 * clamp01(r) + 0.587 * clamp01(g) + 0.114 * clamp01(b));
}

inline Frame frame_from_raw(const RawImage& img, int frame_index = 0) {
  Frame f(img.width, img.height, 0.0, frame_index);
  const double maxval = img.maxval;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (img.channels == 1) {
        f.at(r, c) = img.at(r, c) / maxval;
      } else {
        f.at(r, c) = to_grayscale(img.at(r, c, 0) / maxval, img.at(r, c, 1) / maxval, img.at(r, c, 2) / maxval);
      }
    }
  }
  return f;
}

/// Quantizes to 8 bits (round to nearest).
inline RawImage frame_to_raw(const Frame& f) {
  RawImage img;
  img.width = f.width;
  img.height = f.height;
  img.samples.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    img.samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(f.data[i], 0.0, 1.0) * 255.0));
  return img;
}

inline Frame load_frame(const std::string& path, int frame_index = 0) {
  return frame_from_raw(read_image(path), frame_index);
}

inline void save_frame(const std::string& path, const Frame& f) { write_image(path, frame_to_raw(f)); }

/// One image file of a sequence with the index parsed from its name.
struct SequenceEntry {
  int frame_index = 0;
  std::string path;
};

namespace detail {

// "in%06d.png" -> ^in(\d+)\.png$
inline std::regex template_regex(const std::string& pattern) {
  static const std::regex spec(R"(%0?\d*d)");
  std::smatch m;
  require(std::regex_search(pattern, m, spec), ErrorCode::kInvalidArgument,
          "filename template needs a %d field: " + pattern);
  auto escape = [](const std::string& s) {
    static const std::regex meta(R"([.^$|()\[\]{}*+?\\])");
    return std::regex_replace(s, meta, R"(\$&)");
  };
  return std::regex("^" + escape(m.prefix().str()) + R"((\d+))" + escape(m.suffix().str()) + "$");
}

}  // namespace detail

inline std::string format_template(const std::string& pattern, int index) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern.c_str(), index);
  return buf;
}

/// Lists files in `dir` matching `pattern` (printf-style, e.g. "in%06d.png"),
/// sorted by parsed index. Does not decode.
inline std::vector<SequenceEntry> list_sequence(const std::string& dir, const std::string& pattern) {
  require(fs::is_directory(dir), ErrorCode::kMissingPath, dir);
  const std::regex re = detail::template_regex(pattern);
  std::vector<SequenceEntry> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, re)) out.push_back({std::stoi(m[1].str()), entry.path().string()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
  return out;
}

inline std::vector<Frame> load_sequence(const std::string& dir, const std::string& pattern) {
  const auto entries = list_sequence(dir, pattern);
  require(!entries.empty(), ErrorCode::kNoFrames, dir);
  require(entries.size() >= 2, ErrorCode::kTooFewFrames, dir + " has a single frame");
  std::vector<Frame> frames;
  frames.reserve(entries.size());
  for (const auto& e : entries) {
    frames.push_back(load_frame(e.path, e.frame_index));
    require(frames.back().same_shape(frames.front()), ErrorCode::kDimensionMismatch, e.path);
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Instance masks.
//
// Text format, one instance per line after the header:
//
//   # mogcn-instances v1 width=<W> height=<H>
//   video,frame,label,rle
//   <video>,<frame>,<label>,<count> <value> <count> <value> ...
//
// The RLE covers the whole frame in row-major order with values 0/1 and
// counts summing to W*H. Overlapping instances are kept as separate lines.

inline std::string encode_rle(const Instance& inst, int width, int height) {
  std::ostringstream os;
  const std::size_t total = static_cast<std::size_t>(width) * height;
  std::size_t pos = 0;
  bool first = true;
  auto emit = [&](std::size_t count, int value) {
    if (count == 0) return;
    if (!first) os << ' ';
    os << count << ' ' << value;
    first = false;
  };
  std::size_t i = 0;
  const auto& px = inst.mask_pixels;
  while (i < px.size()) {
    const std::size_t start = static_cast<std::size_t>(px[i].row) * width + px[i].col;
    std::size_t end = start + 1;
    ++i;
    while (i < px.size() && static_cast<std::size_t>(px[i].row) * width + px[i].col == end) {
      ++end;
      ++i;
    }
    emit(start - pos, 0);
    emit(end - start, 1);
    pos = end;
  }
  emit(total - pos, 0);
  return os.str();
}

inline std::vector<Pixel> decode_rle(const std::string& rle, int width, int height) {
  std::istringstream is(rle);
  const std::size_t total = static_cast<std::size_t>(width) * height;
  std::size_t pos = 0;
  std::vector<Pixel> pixels;
  long long count = 0;
  int value = 0;
  while (is >> count) {
    require(static_cast<bool>(is >> value) && count > 0 && (value == 0 || value == 1), ErrorCode::kMalformedFile,
            "bad run in RLE");
    require(pos + static_cast<std::size_t>(count) <= total, ErrorCode::kPixelOutOfFrame, "RLE runs past frame end");
    if (value == 1) {
      for (std::size_t k = pos; k < pos + static_cast<std::size_t>(count); ++k)
        pixels.push_back({static_cast<int>(k / width), static_cast<int>(k % width)});
    }
    pos += static_cast<std::size_t>(count);
  }
  require(is.eof(), ErrorCode::kMalformedFile, "trailing garbage in RLE");
  require(pos == total, ErrorCode::kMalformedFile, "RLE does not cover the frame");
  return pixels;
}

struct InstanceFile {
  int width = 0;
  int height = 0;
  std::vector<Instance> instances;
};

inline void write_instances(const std::string& path, const std::vector<Instance>& instances, int width, int height) {
  auto os = open_out(path);
  os << "# mogcn-instances v1 width=" << width << " height=" << height << '\n';
  os << "video,frame,label,rle\n";
  for (const auto& inst : instances) {
    validate_instance(inst, width, height);
    os << inst.video_id << ',' << inst.frame_index << ',' << inst.label << ',' << encode_rle(inst, width, height)
       << '\n';
  }
}

/// Reads the text format. Node ids are assigned in file order from
/// `first_node_id`; bboxes are recomputed from the pixels.
inline InstanceFile load_instances(const std::string& path, int first_node_id = 0) {
  auto is = open_in(path);
  InstanceFile out;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::kMalformedFile, path + ": empty file");
  static const std::regex header(R"(^#\s*mogcn-instances v1 width=(\d+) height=(\d+)\s*$)");
  std::smatch m;
  require(std::regex_match(line, m, header), ErrorCode::kMalformedFile, path + ": bad header");
  out.width = std::stoi(m[1].str());
  out.height = std::stoi(m[2].str());
  require(out.width > 0 && out.height > 0, ErrorCode::kMalformedFile, path + ": bad dimensions");
  require(static_cast<bool>(std::getline(is, line)) && line == "video,frame,label,rle", ErrorCode::kMalformedFile,
          path + ": missing column header");
  int next_id = first_node_id;
  int lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    std::array<std::string, 4> fields;
    std::size_t start = 0;
    for (int f = 0; f < 3; ++f) {
      const auto comma = line.find(',', start);
      require(comma != std::string::npos, ErrorCode::kMalformedFile, where + ": expected 4 fields");
      fields[f] = line.substr(start, comma - start);
      start = comma + 1;
    }
    fields[3] = line.substr(start);
    int frame = 0, label = 0;
    try {
      std::size_t used = 0;
      frame = std::stoi(fields[1], &used);
      require(used == fields[1].size(), ErrorCode::kMalformedFile, where);
      label = std::stoi(fields[2], &used);
      require(used == fields[2].size(), ErrorCode::kMalformedFile, where);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kMalformedFile, where + ": bad integer field");
    }
    std::vector<Pixel> pixels;
    try {
      pixels = decode_rle(fields[3], out.width, out.height);
    } catch (const Error& e) {
      throw Error(e.code(), where);
    }
    require(!pixels.empty(), ErrorCode::kEmptyMask, where);
    out.instances.push_back(make_instance(fields[0], frame, std::move(pixels), label, next_id++));
  }
  return out;
}

/// 8-connected components of each nonzero label in a label raster.
/// Components are ordered by label, then by their first pixel.
inline std::vector<Instance> instances_from_labels(const RawImage& labels, const std::string& video_id,
                                                   int frame_index, int first_node_id = 0) {
  require(labels.channels == 1, ErrorCode::kMalformedFile, "label image must be single channel");
  const int W = labels.width, H = labels.height;
  std::vector<int> seen(static_cast<std::size_t>(W) * H, 0);
  std::map<int, std::vector<std::vector<Pixel>>> by_label;
  std::vector<Pixel> stack;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const int lab = labels.at(r, c);
      if (lab == 0 || seen[static_cast<std::size_t>(r) * W + c]) continue;
      std::vector<Pixel> comp;
      stack.assign(1, {r, c});
      seen[static_cast<std::size_t>(r) * W + c] = 1;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = p.row + dr, cc = p.col + dc;
            if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
            const std::size_t k = static_cast<std::size_t>(rr) * W + cc;
            if (seen[k] || labels.at(rr, cc) != lab) continue;
            seen[k] = 1;
            stack.push_back({rr, cc});
          }
        }
      }
      by_label[lab].push_back(std::move(comp));
    }
  }
  std::vector<Instance> out;
  int next_id = first_node_id;
  for (auto& [lab, comps] : by_label)
    for (auto& comp : comps) out.push_back(make_instance(video_id, frame_index, std::move(comp), lab, next_id++));
  return out;
}

/// Reads a directory of per-frame 16-bit (or 8-bit) label images.
inline InstanceFile load_instance_labels(const std::string& dir, const std::string& pattern,
                                         const std::string& video_id, int first_node_id = 0) {
  InstanceFile out;
  int next_id = first_node_id;
  for (const auto& e : list_sequence(dir, pattern)) {
    const RawImage img = read_image(e.path);
    if (out.width == 0) {
      out.width = img.width;
      out.height = img.height;
    }
    require(img.width == out.width && img.height == out.height, ErrorCode::kDimensionMismatch, e.path);
    auto frame_instances = instances_from_labels(img, video_id, e.frame_index, next_id);
    next_id += static_cast<int>(frame_instances.size());
    for (auto& inst : frame_instances) out.instances.push_back(std::move(inst));
  }
  return out;
}

/// Writes one 16-bit label image per frame that has instances. Where
/// instances overlap, the later one wins.
inline void write_instance_labels(const std::string& dir, const std::string& pattern,
                                  const std::vector<Instance>& instances, int width, int height) {
  fs::create_directories(dir);
  std::map<int, RawImage> frames;
  for (const auto& inst : instances) {
    validate_instance(inst, width, height);
    auto [it, fresh] = frames.try_emplace(inst.frame_index);
    if (fresh) {
      it->second.width = width;
      it->second.height = height;
      it->second.maxval = 65535;
      it->second.samples.assign(static_cast<std::size_t>(width) * height, 0);
    }
    require(inst.label > 0 && inst.label <= 65535, ErrorCode::kInvalidArgument, "label out of 16-bit range");
    for (const auto& p : inst.mask_pixels)
      it->second.samples[static_cast<std::size_t>(p.row) * width + p.col] = static_cast<std::uint16_t>(inst.label);
  }
  for (const auto& [index, img] : frames) write_image((fs::path(dir) / format_template(pattern, index)).string(), img);
}

// ---------------------------------------------------------------------------
// Ground truth: 0 background, 255 foreground, anything else unknown.

inline GroundTruthMask gt_from_raw(const RawImage& img, const std::string& video_id, int frame_index) {
  require(img.channels == 1, ErrorCode::kMalformedFile, "ground truth must be single channel");
  GroundTruthMask gt{video_id, frame_index, img.width, img.height, {}};
  gt.data.resize(img.samples.size());
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    const auto v = img.samples[i];
    gt.data[i] = v == 0 ? GtLabel::kBackground : (v == img.maxval ? GtLabel::kForeground : GtLabel::kUnknown);
  }
  return gt;
}

inline RawImage gt_to_raw(const GroundTruthMask& gt) {
  RawImage img;
  img.width = gt.width;
  img.height = gt.height;
  img.samples.resize(gt.data.size());
  for (std::size_t i = 0; i < gt.data.size(); ++i)
    img.samples[i] = gt.data[i] == GtLabel::kBackground ? 0 : gt.data[i] == GtLabel::kForeground ? 255 : 170;
  return img;
}

inline GroundTruthMask load_ground_truth(const std::string& path, const std::string& video_id, int frame_index) {
  return gt_from_raw(read_image(path), video_id, frame_index);
}

// ---------------------------------------------------------------------------
// Synthetic sequences.

/// A textured rectangle translating by a constant integer velocity.
struct MovingObject {
  int width = 8;
  int height = 8;
  int start_x = 0;
  int start_y = 0;
  int velocity_x = 1;
  int velocity_y = 0;
  double intensity = 0.85;
  double texture = 0.1;
};

struct StaticDistractor {
  BBox box{0, 0, 8, 8};
  double intensity = 0.2;
  double texture = 0.1;
};

struct SyntheticSpec {
  std::string video_id = "synth";
  int frames = 10;
  int width = 64;
  int height = 48;
  int first_index = 1;
  std::vector<MovingObject> movers;
  std::vector<StaticDistractor> distractors;
  double noise = 0.02;
  double background_texture = 0.15;
  std::uint64_t seed = 1;
};

struct SyntheticSequence {
  std::vector<Frame> frames;
  std::vector<Instance> instances;
  std::vector<GroundTruthMask> ground_truth;
};

inline BBox mover_box(const MovingObject& m, int t) {
  return {m.start_x + t * m.velocity_x, m.start_y + t * m.velocity_y, m.width, m.height};
}

inline void validate(const SyntheticSpec& spec) {
  require(spec.frames >= 2, ErrorCode::kInvalidArgument, "synthetic sequence needs at least 2 frames");
  require(spec.width >= 3 && spec.height >= 3, ErrorCode::kInvalidArgument, "frame too small");
  require(spec.noise >= 0.0, ErrorCode::kInvalidArgument, "negative noise");
  for (std::size_t k = 0; k < spec.movers.size(); ++k) {
    const auto& m = spec.movers[k];
    require(m.width > 0 && m.height > 0, ErrorCode::kInvalidArgument, "empty mover");
    for (int t = 0; t < spec.frames; ++t)
      require(mover_box(m, t).inside(spec.width, spec.height), ErrorCode::kOutOfBounds,
              "mover " + std::to_string(k) + " leaves the frame at t=" + std::to_string(t));
  }
  for (const auto& d : spec.distractors)
    require(d.box.inside(spec.width, spec.height), ErrorCode::kOutOfBounds, "distractor outside frame");
}

/// Deterministic in `spec.seed`. Intensities are quantized to multiples of
/// 1/255 so that frames survive an 8-bit round trip unchanged.
inline SyntheticSequence synth_sequence(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const int W = spec.width, H = spec.height;

  // Static background: a few random low-frequency sinusoids.
  Frame background(W, H, 0.45);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 4; ++k)
    waves.push_back({rng.uniform(0.02, 0.25), rng.uniform(0.02, 0.25), rng.uniform(0.0, 6.283185307179586),
                     spec.background_texture * rng.uniform(0.3, 1.0)});
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double v = 0.45;
      for (const auto& w : waves) v += w.amp * std::sin(w.fx * c + w.fy * r + w.phase) / 2.0;
      background.at(r, c) = v;
    }

  // Checkerboard texture anchored to the object.
  auto textured = [](double base, double amp, int lr, int lc) {
    return base + ((((lr >> 1) + (lc >> 1)) & 1) ? amp : -amp) / 2.0;
  };

  SyntheticSequence out;
  int node_id = 0;
  for (int t = 0; t < spec.frames; ++t) {
    const int index = spec.first_index + t;
    Frame f = background;
    f.frame_index = index;
    for (const auto& d : spec.distractors)
      for (int r = d.box.y; r < d.box.y + d.box.h; ++r)
        for (int c = d.box.x; c < d.box.x + d.box.w; ++c)
          f.at(r, c) = textured(d.intensity, d.texture, r - d.box.y, c - d.box.x);

    GroundTruthMask gt{spec.video_id, index, W, H, std::vector<GtLabel>(static_cast<std::size_t>(W) * H,
                                                                         GtLabel::kBackground)};
    std::vector<Instance> frame_instances;
    int label = 1;
    for (const auto& m : spec.movers) {
      const BBox b = mover_box(m, t);
      std::vector<Pixel> px;
      for (int r = b.y; r < b.y + b.h; ++r)
        for (int c = b.x; c < b.x + b.w; ++c) {
          f.at(r, c) = textured(m.intensity, m.texture, r - b.y, c - b.x);
          gt.data[static_cast<std::size_t>(r) * W + c] = GtLabel::kForeground;
          px.push_back({r, c});
        }
      frame_instances.push_back(make_instance(spec.video_id, index, std::move(px), label++));
    }
    for (const auto& d : spec.distractors) {
      std::vector<Pixel> px;
      for (int r = d.box.y; r < d.box.y + d.box.h; ++r)
        for (int c = d.box.x; c < d.box.x + d.box.w; ++c) px.push_back({r, c});
      frame_instances.push_back(make_instance(spec.video_id, index, std::move(px), label++));
    }
    for (auto& v : f.data) v = std::lround(std::clamp(v + spec.noise * rng.normal(), 0.0, 1.0) * 255.0) / 255.0;
    for (auto& inst : frame_instances) {
      inst.node_id = node_id++;
      out.instances.push_back(std::move(inst));
    }
    out.frames.push_back(std::move(f));
    out.ground_truth.push_back(std::move(gt));
  }
  return out;
}

}  // namespace mogcn

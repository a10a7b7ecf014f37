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

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mogcn/common.hpp"

namespace mogcn {

/// Decoded raster: interleaved samples, row-major, 1 or 3 channels,
/// maxval 255 (8-bit) or 65535 (16-bit).
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  int maxval = 255;
  std::vector<std::uint16_t> samples;

  std::uint16_t at(int row, int col, int ch = 0) const {
    return samples[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

namespace detail {

inline std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// Skips whitespace and '#' comments between PNM header tokens.
inline int pnm_header_int(std::istream& is) {
  for (;;) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  int v = -1;
  is >> v;
  if (!is || v < 0) throw Error(ErrorCode::kMalformedFile, "bad PNM header");
  return v;
}

inline RawImage read_pnm(const std::string& path) {
  auto is = open_in(path, true);
  char magic[2] = {0, 0};
  is.read(magic, 2);
  require(is && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'), ErrorCode::kMalformedFile,
          path + ": only binary P5/P6 supported");
  RawImage img;
  img.channels = magic[1] == '5' ? 1 : 3;
  img.width = pnm_header_int(is);
  img.height = pnm_header_int(is);
  img.maxval = pnm_header_int(is);
  require(img.width > 0 && img.height > 0 && img.maxval > 0 && img.maxval <= 65535,
          ErrorCode::kMalformedFile, path + ": bad PNM dimensions");
  is.get();  // single whitespace before raster
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.samples.resize(count);
  if (img.maxval < 256) {
    std::vector<unsigned char> buf(count);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
    require(static_cast<std::size_t>(is.gcount()) == count, ErrorCode::kMalformedFile, path + ": truncated");
    for (std::size_t i = 0; i < count; ++i) img.samples[i] = buf[i];
  } else {
    std::vector<unsigned char> buf(count * 2);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<std::size_t>(is.gcount()) == buf.size(), ErrorCode::kMalformedFile, path + ": truncated");
    for (std::size_t i = 0; i < count; ++i)
      img.samples[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return img;
}

inline void write_pnm(const std::string& path, const RawImage& img) {
  auto os = open_out(path, true);
  os << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  if (img.maxval < 256) {
    std::vector<unsigned char> buf(img.samples.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<unsigned char>(img.samples[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  } else {
    std::vector<unsigned char> buf(img.samples.size() * 2);
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
      buf[2 * i] = static_cast<unsigned char>(img.samples[i] >> 8);
      buf[2 * i + 1] = static_cast<unsigned char>(img.samples[i] & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed: " + path);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline RawImage read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorCode::kMissingPath, "cannot read " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::kIo, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::kIo, "libpng init failed");
  }
  RawImage img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kMalformedFile, path + ": invalid PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int source_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && source_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (source_depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  img.maxval = depth == 16 ? 65535 : 255;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * img.height);
  rows.resize(img.height);
  for (int r = 0; r < img.height; ++r) rows[r] = buffer.data() + rowbytes * r;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  require(img.channels == 1 || img.channels == 3, ErrorCode::kMalformedFile, path + ": unsupported channel count");
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.samples.resize(count);
  for (int r = 0; r < img.height; ++r) {
    const png_byte* row = rows[r];
    for (std::size_t i = 0; i < static_cast<std::size_t>(img.width) * img.channels; ++i) {
      std::uint16_t v = depth == 16 ? static_cast<std::uint16_t>(row[2 * i] | (row[2 * i + 1] << 8)) : row[i];
      img.samples[static_cast<std::size_t>(r) * img.width * img.channels + i] = v;
    }
  }
  return img;
}

// libpng encode step; false on a libpng error.
inline bool png_encode(std::FILE* fp, int width, int height, int depth, int color, png_bytep* rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline void write_png(const std::string& path, const RawImage& img) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, ErrorCode::kIo, "cannot write " + path);
  const int depth = img.maxval > 255 ? 16 : 8;
  const std::size_t per_row = static_cast<std::size_t>(img.width) * img.channels * (depth / 8);
  std::vector<png_byte> buffer(per_row * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (depth == 16) {
      buffer[2 * i] = static_cast<png_byte>(img.samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(img.samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(img.samples[i]);
    }
  }
  std::vector<png_bytep> rows(img.height);
  for (int r = 0; r < img.height; ++r) rows[r] = buffer.data() + per_row * r;
  require(png_encode(fp.get(), img.width, img.height, depth,
                     img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, rows.data()),
          ErrorCode::kIo, "PNG encode failed: " + path);
}

}  // namespace detail

/// Reads PGM (P5), PPM (P6) or PNG by extension.
inline RawImage read_image(const std::string& path) {
  require(std::filesystem::exists(path), ErrorCode::kMissingPath, path);
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return detail::read_pnm(path);
  throw Error(ErrorCode::kMalformedFile, path + ": unsupported image type (use .pgm, .ppm or .png)");
}

inline void write_image(const std::string& path, const RawImage& img) {
  require(img.samples.size() == static_cast<std::size_t>(img.width) * img.height * img.channels,
          ErrorCode::kShapeMismatch, "raster size does not match dimensions");
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::write_png(path, img);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return detail::write_pnm(path, img);
  throw Error(ErrorCode::kInvalidArgument, path + ": unsupported image type");
}

}  // namespace mogcn

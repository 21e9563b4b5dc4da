#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "diffstr/common.hpp"

namespace diffstr {

/// Dense image with one h x w plane per channel. Model inputs are
/// normalized to [-1, 1]; the renderer works in [0, 1] until the end.
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<MatF> planes;

  static Image zeros(int h, int w, int c) {
    Image img;
    img.h = h;
    img.w = w;
    img.c = c;
    img.planes.assign(static_cast<std::size_t>(c), MatF::Zero(h, w));
    return img;
  }
};

/// Bilinear resize with half-pixel centers; an identity-size call is an
/// exact passthrough.
inline MatF resize_bilinear(const MatF& src, int oh, int ow) {
  const int ih = static_cast<int>(src.rows());
  const int iw = static_cast<int>(src.cols());
  MatF out(oh, ow);
  const float sy = static_cast<float>(ih) / static_cast<float>(oh);
  const float sx = static_cast<float>(iw) / static_cast<float>(ow);
  for (int y = 0; y < oh; ++y) {
    float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
    fy = std::clamp(fy, 0.0f, static_cast<float>(ih - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, ih - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int x = 0; x < ow; ++x) {
      float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      fx = std::clamp(fx, 0.0f, static_cast<float>(iw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, iw - 1);
      const float wx = fx - static_cast<float>(x0);
      out(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                  wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
    }
  }
  return out;
}

/// Rotates around the image center by `deg` (counterclockwise), bilinear
/// sampling, `bg` outside the source.
inline MatF rotate_bilinear(const MatF& src, double deg, float bg) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  const double rad = deg * M_PI / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  MatF out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // inverse map: rotate the destination point back into the source
      const double dy = y - cy, dx = x - cx;
      const double sy = cy + (-sn * dx + cs * dy);
      const double sx = cx + (cs * dx + sn * dy);
      if (sy < 0 || sy > h - 1 || sx < 0 || sx > w - 1) {
        out(y, x) = bg;
        continue;
      }
      const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const float wy = static_cast<float>(sy - y0);
      const float wx = static_cast<float>(sx - x0);
      out(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                  wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
    }
  }
  return out;
}

/// Separable box blur with replicated edges; radius 0 is identity.
inline MatF box_blur(const MatF& src, int radius) {
  if (radius <= 0) return src;
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  const float norm = 1.0f / static_cast<float>(2 * radius + 1);
  MatF tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int k = -radius; k <= radius; ++k)
        acc += src(y, std::clamp(x + k, 0, w - 1));
      tmp(y, x) = acc * norm;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int k = -radius; k <= radius; ++k)
        acc += tmp(std::clamp(y + k, 0, h - 1), x);
      out(y, x) = acc * norm;
    }
  return out;
}

/// Writes a binary PGM (1 channel) or PPM (3 channels), mapping [-1, 1]
/// to bytes 0..255.
inline void write_pnm(const std::string& path, const Image& img) {
  if (img.c != 1 && img.c != 3)
    throw IoError("write_pnm: only 1- or 3-channel images, got " +
                  std::to_string(img.c));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << (img.c == 1 ? "P5" : "P6") << "\n"
      << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.w) * img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        const float v01 = (img.planes[static_cast<std::size_t>(ch)](y, x) + 1.0f) * 0.5f;
        const int b = static_cast<int>(std::lround(std::clamp(v01, 0.0f, 1.0f) * 255.0f));
        row[static_cast<std::size_t>(x) * img.c + ch] = static_cast<unsigned char>(b);
      }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("short write: " + path);
}

/// Reads a binary PGM/PPM into [-1, 1] planes.
inline Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableImage("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6")
    throw UnreadableImage("unsupported image format (want P5/P6): " + path);
  auto next_int = [&]() {
    // skips whitespace and '#' comments between header fields
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
      if (c == '#') in.ignore(1 << 20, '\n');
      else in.get();
      c = in.peek();
    }
    int v;
    in >> v;
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  in.get();  // single whitespace after maxval
  if (!in || w <= 0 || h <= 0 || maxval != 255)
    throw UnreadableImage("bad image header: " + path);
  const int c = magic == "P5" ? 1 : 3;
  Image img = Image::zeros(h, w, c);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * c);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!in) throw UnreadableImage("truncated image data: " + path);
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        img.planes[static_cast<std::size_t>(ch)](y, x) =
            static_cast<float>(row[static_cast<std::size_t>(x) * c + ch]) /
                255.0f * 2.0f -
            1.0f;
  }
  return img;
}

/// Converts channel count by averaging (3 -> 1) or replication (1 -> 3).
inline Image convert_channels(const Image& img, int c) {
  if (img.c == c) return img;
  Image out = Image::zeros(img.h, img.w, c);
  if (img.c == 3 && c == 1) {
    out.planes[0] = ((img.planes[0] + img.planes[1] + img.planes[2]) / 3.0f);
    return out;
  }
  if (img.c == 1 && c == 3) {
    for (int ch = 0; ch < 3; ++ch) out.planes[static_cast<std::size_t>(ch)] = img.planes[0];
    return out;
  }
  throw UnreadableImage("unsupported channel conversion " +
                        std::to_string(img.c) + " -> " + std::to_string(c));
}

inline Image resize_image(const Image& img, int h, int w) {
  if (img.h == h && img.w == w) return img;
  Image out;
  out.h = h;
  out.w = w;
  out.c = img.c;
  for (const auto& p : img.planes) out.planes.push_back(resize_bilinear(p, h, w));
  return out;
}

}  // namespace diffstr

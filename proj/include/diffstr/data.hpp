#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "diffstr/common.hpp"
#include "diffstr/font_glyphs.hpp"
#include "diffstr/image.hpp"
#include "diffstr/rng.hpp"
#include "diffstr/vocab.hpp"

namespace diffstr {

struct AugmentConfig {
  bool rotate = false;
  double rotate_deg = 10.0;  // angle drawn uniformly from [-deg, +deg]
  bool noise = false;
  double noise_sigma = 0.05;  // additive gaussian on [0, 1] intensities
  bool blur = false;
  int blur_radius = 1;
};

/// Everything that determines a rendered dataset. Labels draw a length
/// uniformly from [1, max_len], then characters i.i.d. from the charset.
struct RenderSpec {
  Charset charset = Charset::lower_alnum36();
  int max_len = 8;
  int img_h = 32, img_w = 96, img_c = 1;
  AugmentConfig augment;
  std::uint64_t seed = 0;
};

struct LabeledSample {
  Image image;
  std::string label;
  std::uint64_t sample_seed = 0;
};

namespace font {

inline bool has_glyph(char c) {
  const int code = static_cast<unsigned char>(c);
  return code >= kGlyphFirstCodepoint &&
         code < kGlyphFirstCodepoint + kGlyphCount;
}

inline const std::array<std::uint16_t, 11>& glyph(char c) {
  if (!has_glyph(c))
    throw GlyphMissing("no glyph for codepoint " +
                       std::to_string(static_cast<unsigned char>(c)));
  return kGlyphBits[static_cast<std::size_t>(static_cast<unsigned char>(c)) -
                    kGlyphFirstCodepoint];
}

/// Ink columns [x0, x0 + width) of a glyph; the bitmaps carry blank
/// columns that a proportional layout must not advance over.
struct GlyphSpan {
  int x0 = 0;
  int width = 0;
};

inline GlyphSpan ink_span(char c) {
  const auto& bits = glyph(c);
  int lo = kGlyphWidth, hi = -1;
  for (int y = 0; y < kGlyphHeight; ++y)
    for (int x = 0; x < kGlyphWidth; ++x)
      if (bits[static_cast<std::size_t>(y)] >> x & 1) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
  if (hi < 0) return {0, 2};
  return {lo, hi - lo + 1};
}

}  // namespace font

inline void check_glyph_coverage(const Charset& charset) {
  for (char c : charset.chars())
    if (!font::has_glyph(c))
      throw GlyphMissing("charset character '" + std::string(1, c) +
                         "' has no glyph");
}

/// Paints the label left-to-right with a proportional advance (glyphs
/// cropped to their ink span) and a fixed 2 px gap, onto a canvas wide
/// enough for `cells` worst-case glyphs. Labels shorter than the canvas
/// leave its tail empty: glyph scale is independent of label length, and
/// both the text end and each character's horizontal position must be read
/// from the image itself.
inline MatF rasterize_label(const std::string& label, int cells) {
  const int margin = 1, gap = 2;
  const int n = static_cast<int>(label.size());
  if (n > cells) cells = n;
  const int w = cells * (kGlyphWidth + gap) + 2 * margin;
  const int h = kGlyphHeight + 2 * margin;
  MatF canvas = MatF::Zero(h, w);
  int x = margin;
  for (int i = 0; i < n; ++i) {
    const char c = label[static_cast<std::size_t>(i)];
    const auto& bits = font::glyph(c);
    const font::GlyphSpan span = font::ink_span(c);
    for (int gy = 0; gy < kGlyphHeight; ++gy)
      for (int gx = 0; gx < span.width; ++gx)
        if (bits[static_cast<std::size_t>(gy)] >> (span.x0 + gx) & 1)
          canvas(margin + gy, x + gx) = 1.0f;
    x += span.width + gap;
  }
  return canvas;
}

/// Rasterize, scale to the target size, apply enabled augmentations
/// (rotation, blur, noise, in that order), normalize to [-1, 1].
/// The rng drives augmentation draws only.
inline Image render_label(const RenderSpec& spec, const std::string& label,
                          Rng& rng) {
  MatF plane = resize_bilinear(rasterize_label(label, spec.max_len), spec.img_h,
                               spec.img_w);
  if (spec.augment.rotate) {
    const double deg =
        rng.uniform(-spec.augment.rotate_deg, spec.augment.rotate_deg);
    plane = rotate_bilinear(plane, deg, 0.0f);
  }
  if (spec.augment.blur) plane = box_blur(plane, spec.augment.blur_radius);
  if (spec.augment.noise) {
    for (Eigen::Index y = 0; y < plane.rows(); ++y)
      for (Eigen::Index x = 0; x < plane.cols(); ++x)
        plane(y, x) = std::clamp(
            plane(y, x) +
                static_cast<float>(rng.normal() * spec.augment.noise_sigma),
            0.0f, 1.0f);
  }
  Image img;
  img.h = spec.img_h;
  img.w = spec.img_w;
  img.c = spec.img_c;
  MatF normalized = plane * 2.0f - MatF::Ones(plane.rows(), plane.cols());
  for (int ch = 0; ch < spec.img_c; ++ch) img.planes.push_back(normalized);
  return img;
}

/// One sample from its recorded seed: the draw order is fixed as
/// length, characters, then augmentation parameters.
inline LabeledSample render_sample(const RenderSpec& spec,
                                   std::uint64_t sample_seed) {
  check_glyph_coverage(spec.charset);
  Rng rng(sample_seed);
  const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_len)));
  std::string label;
  label.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    label.push_back(spec.charset.char_at(
        static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.charset.size())))));
  return LabeledSample{render_label(spec, label, rng), label, sample_seed};
}

/// Samples i = 0..n-1 use seeds derive_seed(spec.seed, i), so disjoint
/// spec seeds give disjoint per-sample seed sets.
inline std::vector<LabeledSample> render_dataset(const RenderSpec& spec, int n) {
  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.push_back(render_sample(spec, derive_seed(spec.seed, static_cast<std::uint64_t>(i))));
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directory format: labels.tsv (UTF-8, `filename<TAB>label` per
// line, \n endings, no header) plus the referenced image files.
// ---------------------------------------------------------------------------

/// Writes images as PGM/PPM plus labels.tsv. Returns the files written, in
/// order, so a failed run can be cleaned up by the caller.
inline std::vector<std::string> save_dataset(
    const std::string& dir, const std::vector<LabeledSample>& samples) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  const std::string labels_path = dir + "/labels.tsv";
  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw IoError("cannot write " + labels_path);
  written.push_back(labels_path);
  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "img_%06zu.%s", i,
                  samples[i].image.c == 1 ? "pgm" : "ppm");
    const std::string path = dir + "/" + name;
    write_pnm(path, samples[i].image);
    written.push_back(path);
    labels << name << '\t' << samples[i].label << '\n';
  }
  labels.flush();
  if (!labels) throw IoError("short write: " + labels_path);
  return written;
}

/// Loads a dataset directory, resizing and channel-converting images to the
/// requested shape and validating labels against the charset.
inline std::vector<LabeledSample> load_dataset(const std::string& dir,
                                               const Charset& charset,
                                               int max_label_len, int img_h,
                                               int img_w, int img_c) {
  const std::string labels_path = dir + "/labels.tsv";
  std::ifstream in(labels_path, std::ios::binary);
  if (!in) throw MissingLabelsFile("no labels.tsv in " + dir);
  std::vector<LabeledSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoError("labels.tsv line without a tab: \"" + line + "\"");
    const std::string fname = line.substr(0, tab);
    const std::string label = line.substr(tab + 1);
    for (char c : label)
      if (!charset.contains(c))
        throw UnknownCharacter("label for " + fname +
                               " contains character '" + std::string(1, c) +
                               "' outside the charset");
    if (static_cast<int>(label.size()) > max_label_len)
      throw LabelTooLong("label for " + fname + " has length " +
                         std::to_string(label.size()) + " > " +
                         std::to_string(max_label_len));
    Image img = read_pnm(dir + "/" + fname);
    img = convert_channels(img, img_c);
    img = resize_image(img, img_h, img_w);
    out.push_back(LabeledSample{std::move(img), label, 0});
  }
  return out;
}

}  // namespace diffstr

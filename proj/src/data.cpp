/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "xbarmap/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>

#include "xbarmap/errors.hpp"
#include "xbarmap/rng.hpp"

namespace xbarmap {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), 4);
  if (!in) {
    throw FormatError("idx: unexpected end of file in " + path);
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> buf{
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf.data()), 4);
}

std::string hex_magic(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) {
    s += digits[(v >> shift) & 0xf];
  }
  return s;
}

// 5x7 digit glyphs, one string per row, '#' marks an on pixel.
constexpr std::array<std::array<std::string_view, 7>, 10> kGlyphs{{
    {"  ### ", " #   #", " #  ##", " # # #", " ##  #", " #   #", "  ### "},
    {"   #  ", "  ##  ", "   #  ", "   #  ", "   #  ", "   #  ", "  ### "},
    {"  ### ", " #   #", "     #", "    # ", "   #  ", "  #   ", " #####"},
    {" #####", "    # ", "   ## ", "     #", "     #", " #   #", "  ### "},
    {"    # ", "   ## ", "  # # ", " #  # ", " #####", "    # ", "    # "},
    {" #####", " #    ", " #### ", "     #", "     #", " #   #", "  ### "},
    {"   ## ", "  #   ", " #    ", " #### ", " #   #", " #   #", "  ### "},
    {" #####", "     #", "    # ", "   #  ", "   #  ", "  #   ", "  #   "},
    {"  ### ", " #   #", " #   #", "  ### ", " #   #", " #   #", "  ### "},
    {"  ### ", " #   #", " #   #", "  ####", "     #", "   #  ", "  ##  "},
}};

constexpr int kDigitSide = 28;

// Renders one jittered glyph into a 28x28 grayscale image.
Eigen::VectorXd render_digit(int digit, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> scale_dist(3, 4);
  const int scale = scale_dist(rng);
  const int glyph_w = 6 * scale;
  const int glyph_h = 7 * scale;
  std::uniform_int_distribution<int> dx_dist(0, kDigitSide - glyph_w);
  std::uniform_int_distribution<int> dy_dist(0, kDigitSide - glyph_h);
  const int dx = dx_dist(rng);
  const int dy = dy_dist(rng);
  const double stroke = 0.6 + 0.4 * unit(rng);

  Eigen::MatrixXd img = Eigen::MatrixXd::Zero(kDigitSide, kDigitSide);
  const auto& glyph = kGlyphs[static_cast<std::size_t>(digit)];
  for (int gy = 0; gy < 7; ++gy) {
    for (int gx = 0; gx < 6; ++gx) {
      if (glyph[static_cast<std::size_t>(gy)][static_cast<std::size_t>(gx)] != '#') {
        continue;
      }
      for (int sy = 0; sy < scale; ++sy) {
        for (int sx = 0; sx < scale; ++sx) {
          img(dy + gy * scale + sy, dx + gx * scale + sx) = stroke;
        }
      }
    }
  }

  // 3x3 box blur softens the strokes, then additive pixel noise.
  Eigen::MatrixXd blurred = Eigen::MatrixXd::Zero(kDigitSide, kDigitSide);
  for (int y = 0; y < kDigitSide; ++y) {
    for (int x = 0; x < kDigitSide; ++x) {
      double acc = 0.0;
      int cnt = 0;
      for (int oy = -1; oy <= 1; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
          const int yy = y + oy, xx = x + ox;
          if (yy < 0 || yy >= kDigitSide || xx < 0 || xx >= kDigitSide) continue;
          acc += img(yy, xx);
          ++cnt;
        }
      }
      blurred(y, x) = acc / cnt;
    }
  }

  std::normal_distribution<double> noise(0.0, 0.12);
  Eigen::VectorXd out(kDigitSide * kDigitSide);
  for (int y = 0; y < kDigitSide; ++y) {
    for (int x = 0; x < kDigitSide; ++x) {
      const double v = std::clamp(blurred(y, x) + noise(rng), 0.0, 1.0);
      out(y * kDigitSide + x) = std::round(v * 255.0) / 255.0;
    }
  }
  return out;
}

} // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img_in(images_path, std::ios::binary);
  if (!img_in) {
    throw FormatError("idx: cannot open " + images_path);
  }
  const std::uint32_t img_magic = read_u32_be(img_in, images_path);
  if (img_magic != kImagesMagic) {
    throw FormatError("idx: bad image magic " + hex_magic(img_magic) + " in " +
                      images_path + ", expected " + hex_magic(kImagesMagic));
  }
  const std::uint32_t count = read_u32_be(img_in, images_path);
  const std::uint32_t rows = read_u32_be(img_in, images_path);
  const std::uint32_t cols = read_u32_be(img_in, images_path);
  const std::size_t pixels = std::size_t(rows) * cols;

  std::vector<unsigned char> buf(pixels);
  Eigen::MatrixXd features(static_cast<Eigen::Index>(pixels),
                           static_cast<Eigen::Index>(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    img_in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(pixels));
    if (!img_in) {
      throw FormatError("idx: truncated image data in " + images_path);
    }
    for (std::size_t p = 0; p < pixels; ++p) {
      features(static_cast<Eigen::Index>(p), i) = buf[p] / 255.0;
    }
  }

  std::ifstream lbl_in(labels_path, std::ios::binary);
  if (!lbl_in) {
    throw FormatError("idx: cannot open " + labels_path);
  }
  const std::uint32_t lbl_magic = read_u32_be(lbl_in, labels_path);
  if (lbl_magic != kLabelsMagic) {
    throw FormatError("idx: bad label magic " + hex_magic(lbl_magic) + " in " +
                      labels_path + ", expected " + hex_magic(kLabelsMagic));
  }
  const std::uint32_t lbl_count = read_u32_be(lbl_in, labels_path);
  if (lbl_count != count) {
    throw FormatError("idx: image/label count mismatch (" +
                      std::to_string(count) + " images, " +
                      std::to_string(lbl_count) + " labels)");
  }
  std::vector<unsigned char> raw_labels(lbl_count);
  lbl_in.read(reinterpret_cast<char*>(raw_labels.data()),
              static_cast<std::streamsize>(lbl_count));
  if (!lbl_in) {
    throw FormatError("idx: truncated label data in " + labels_path);
  }

  Dataset ds;
  ds.features = std::move(features);
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  ds.n_classes =
      ds.labels.empty()
          ? 0
          : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path, int rows, int cols) {
  if (rows == 0 || cols == 0) {
    const int side = static_cast<int>(std::lround(std::sqrt(
        static_cast<double>(ds.dim()))));
    if (static_cast<Eigen::Index>(side) * side != ds.dim()) {
      throw DimensionError("write_idx: feature dimension is not square; pass "
                           "explicit rows/cols");
    }
    rows = cols = side;
  }
  if (static_cast<Eigen::Index>(rows) * cols != ds.dim()) {
    throw DimensionError("write_idx: rows * cols does not match feature dim");
  }

  std::ofstream img_out(images_path, std::ios::binary);
  if (!img_out) {
    throw FormatError("idx: cannot write " + images_path);
  }
  write_u32_be(img_out, kImagesMagic);
  write_u32_be(img_out, static_cast<std::uint32_t>(ds.size()));
  write_u32_be(img_out, static_cast<std::uint32_t>(rows));
  write_u32_be(img_out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index p = 0; p < ds.dim(); ++p) {
      const double v = std::clamp(ds.features(p, i), 0.0, 1.0);
      const unsigned char byte =
          static_cast<unsigned char>(std::lround(v * 255.0));
      img_out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }

  std::ofstream lbl_out(labels_path, std::ios::binary);
  if (!lbl_out) {
    throw FormatError("idx: cannot write " + labels_path);
  }
  write_u32_be(lbl_out, kLabelsMagic);
  write_u32_be(lbl_out, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.labels) {
    const unsigned char byte = static_cast<unsigned char>(label);
    lbl_out.write(reinterpret_cast<const char*>(&byte), 1);
  }
}

Dataset synthetic_blobs(int n_classes, int dim, int n_per_class,
                        double separation, std::uint64_t seed) {
  if (n_classes < 1 || dim < 1 || n_per_class < 1) {
    throw InputError("synthetic_blobs: all size parameters must be positive");
  }
  if (separation < 0.0) {
    throw InputError("synthetic_blobs: separation must be >= 0");
  }
  if (dim < n_classes) {
    throw InputError("synthetic_blobs: dim must be >= n_classes");
  }

  // Class means on a regular simplex: unit basis vectors have pairwise
  // distance sqrt(2), so scaling by separation/sqrt(2) gives the requested
  // pairwise mean distance. Centered in the unit box.
  Eigen::MatrixXd means = Eigen::MatrixXd::Constant(dim, n_classes, 0.5);
  const double radius = separation / std::sqrt(2.0);
  for (int c = 0; c < n_classes; ++c) {
    for (int d = 0; d < n_classes; ++d) {
      means(d, c) += radius * ((d == c ? 1.0 : 0.0) - 1.0 / n_classes);
    }
  }

  Rng rng = make_rng(seed, "blobs");
  std::normal_distribution<double> noise(0.0, 1.0);
  const Eigen::Index n = static_cast<Eigen::Index>(n_classes) * n_per_class;
  Dataset ds;
  ds.features.resize(dim, n);
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.n_classes = n_classes;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i) % n_classes;
    ds.labels[static_cast<std::size_t>(i)] = c;
    for (Eigen::Index d = 0; d < dim; ++d) {
      ds.features(d, i) = std::clamp(means(d, c) + noise(rng), 0.0, 1.0);
    }
  }
  return ds;
}

Dataset synthetic_digits(int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) {
    throw InputError("synthetic_digits: n_per_class must be positive");
  }
  const int n_classes = 10;
  const Eigen::Index n = static_cast<Eigen::Index>(n_classes) * n_per_class;
  Dataset ds;
  ds.features.resize(kDigitSide * kDigitSide, n);
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.n_classes = n_classes;
  Rng rng = make_rng(seed, "digits");
  for (Eigen::Index i = 0; i < n; ++i) {
    const int digit = static_cast<int>(i) % n_classes;
    ds.labels[static_cast<std::size_t>(i)] = digit;
    ds.features.col(i) = render_digit(digit, rng);
  }
  return ds;
}

Dataset subset(const Dataset& ds, Eigen::Index n, std::uint64_t seed) {
  if (n > ds.size()) {
    throw InputError("subset: requested " + std::to_string(n) +
                     " examples from a dataset of " +
                     std::to_string(ds.size()));
  }
  std::vector<std::vector<Eigen::Index>> by_class(
      static_cast<std::size_t>(ds.n_classes));
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  }

  Rng rng = make_rng(seed, "subset");
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
  }

  // Round-robin over classes keeps per-class counts within one of each
  // other; classes that run out are simply skipped.
  std::vector<Eigen::Index> chosen;
  chosen.reserve(static_cast<std::size_t>(n));
  std::vector<std::size_t> cursor(by_class.size(), 0);
  while (chosen.size() < static_cast<std::size_t>(n)) {
    bool advanced = false;
    for (std::size_t c = 0;
         c < by_class.size() && chosen.size() < static_cast<std::size_t>(n);
         ++c) {
      if (cursor[c] < by_class[c].size()) {
        chosen.push_back(by_class[c][cursor[c]++]);
        advanced = true;
      }
    }
    if (!advanced) {
      break;
    }
  }

  Dataset out;
  out.features.resize(ds.dim(), static_cast<Eigen::Index>(chosen.size()));
  out.labels.resize(chosen.size());
  out.n_classes = ds.n_classes;
  out.split = ds.split;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    out.features.col(static_cast<Eigen::Index>(i)) = ds.features.col(chosen[i]);
    out.labels[i] = ds.labels[static_cast<std::size_t>(chosen[i])];
  }
  return out;
}

} // namespace xbarmap

/**
 * Copyright 2026 The xbarmap authors.
 *
 * This code is licensed under the Apache License, Version 2.0. You may obtain
 * a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "xbarmap/data.hpp"
#include "xbarmap/errors.hpp"

using namespace xbarmap;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path("/tmp/xbarmap_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24),
          static_cast<unsigned char>(v >> 16),
          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

void append(std::vector<unsigned char>& dst, const std::vector<unsigned char>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

} // namespace

TEST_CASE("idx loader parses a handcrafted fixture") {
  TempFile images("fixture_images.idx"), labels("fixture_labels.idx");

  // Two 2x2 images: bytes laid out per the standard big-endian IDX layout.
  std::vector<unsigned char> img_bytes;
  append(img_bytes, be32(0x00000803));
  append(img_bytes, be32(2)); // count
  append(img_bytes, be32(2)); // rows
  append(img_bytes, be32(2)); // cols
  append(img_bytes, {0, 255, 128, 64, 10, 20, 30, 40});
  write_bytes(images.path, img_bytes);

  std::vector<unsigned char> lbl_bytes;
  append(lbl_bytes, be32(0x00000801));
  append(lbl_bytes, be32(2));
  append(lbl_bytes, {1, 0});
  write_bytes(labels.path, lbl_bytes);

  const Dataset ds = load_idx(images.path, labels.path);
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.dim() == 4);
  CHECK(ds.features(0, 0) == doctest::Approx(0.0));
  CHECK(ds.features(1, 0) == doctest::Approx(1.0)); // byte 255 -> 1.0
  CHECK(ds.features(2, 0) == doctest::Approx(128.0 / 255.0));
  CHECK(ds.features(3, 0) == doctest::Approx(64.0 / 255.0));
  CHECK(ds.features(0, 1) == doctest::Approx(10.0 / 255.0));
  CHECK(ds.labels == std::vector<int>{1, 0});
  CHECK(ds.n_classes == 2);
}

TEST_CASE("idx loader rejects malformed files") {
  TempFile images("bad_images.idx"), labels("bad_labels.idx");

  SUBCASE("zero magic") {
    std::vector<unsigned char> bytes;
    append(bytes, be32(0x00000000));
    append(bytes, be32(1));
    append(bytes, be32(1));
    append(bytes, be32(1));
    append(bytes, {7});
    write_bytes(images.path, bytes);
    std::vector<unsigned char> lbl;
    append(lbl, be32(0x00000801));
    append(lbl, be32(1));
    append(lbl, {0});
    write_bytes(labels.path, lbl);
    CHECK_THROWS_WITH_AS(load_idx(images.path, labels.path),
                         doctest::Contains("0x00000000"), FormatError);
  }
  SUBCASE("truncated pixel data") {
    std::vector<unsigned char> bytes;
    append(bytes, be32(0x00000803));
    append(bytes, be32(2));
    append(bytes, be32(2));
    append(bytes, be32(2));
    append(bytes, {1, 2, 3}); // 8 bytes expected
    write_bytes(images.path, bytes);
    std::vector<unsigned char> lbl;
    append(lbl, be32(0x00000801));
    append(lbl, be32(2));
    append(lbl, {0, 1});
    write_bytes(labels.path, lbl);
    CHECK_THROWS_AS(load_idx(images.path, labels.path), FormatError);
  }
  SUBCASE("image/label count mismatch") {
    std::vector<unsigned char> bytes;
    append(bytes, be32(0x00000803));
    append(bytes, be32(1));
    append(bytes, be32(1));
    append(bytes, be32(1));
    append(bytes, {9});
    write_bytes(images.path, bytes);
    std::vector<unsigned char> lbl;
    append(lbl, be32(0x00000801));
    append(lbl, be32(3));
    append(lbl, {0, 1, 0});
    write_bytes(labels.path, lbl);
    CHECK_THROWS_AS(load_idx(images.path, labels.path), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx("/tmp/xbarmap_does_not_exist.idx", labels.path),
                    FormatError);
  }
}

TEST_CASE("idx round trip is exact on the byte grid") {
  TempFile images("rt_images.idx"), labels("rt_labels.idx");
  const Dataset ds = synthetic_digits(3, 42);
  write_idx(ds, images.path, labels.path);
  const Dataset back = load_idx(images.path, labels.path);
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);

  TempFile images2("rt2_images.idx"), labels2("rt2_labels.idx");
  write_idx(back, images2.path, labels2.path);
  const Dataset back2 = load_idx(images2.path, labels2.path);
  CHECK(back2.features == back.features);
}

TEST_CASE("synthetic blobs") {
  SUBCASE("deterministic given the seed") {
    const Dataset a = synthetic_blobs(3, 8, 10, 4.0, 7);
    const Dataset b = synthetic_blobs(3, 8, 10, 4.0, 7);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    const Dataset c = synthetic_blobs(3, 8, 10, 4.0, 8);
    CHECK(a.features != c.features);
  }
  SUBCASE("features stay in the unit box") {
    const Dataset ds = synthetic_blobs(4, 16, 25, 10.0, 3);
    CHECK(ds.features.minCoeff() >= 0.0);
    CHECK(ds.features.maxCoeff() <= 1.0);
    CHECK(ds.size() == 100);
  }
  SUBCASE("well separated blobs are learnable by logistic regression") {
    const Dataset train = synthetic_blobs(2, 64, 250, 10.0, 11);
    const Dataset test = synthetic_blobs(2, 64, 100, 10.0, 12);
    const double acc = oracle::logistic_regression_accuracy(
        train.features, train.labels, test.features, test.labels, 2);
    CHECK(acc >= 0.99);
  }
  SUBCASE("zero separation is a chance-level task") {
    const Dataset train = synthetic_blobs(2, 16, 200, 0.0, 21);
    const Dataset test = synthetic_blobs(2, 16, 200, 0.0, 22);
    const double acc = oracle::logistic_regression_accuracy(
        train.features, train.labels, test.features, test.labels, 2);
    CHECK(acc < 0.6);
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(synthetic_blobs(0, 8, 10, 1.0, 1), InputError);
    CHECK_THROWS_AS(synthetic_blobs(4, 2, 10, 1.0, 1), InputError);
  }
}

TEST_CASE("synthetic digits") {
  const Dataset ds = synthetic_digits(20, 5);
  CHECK(ds.size() == 200);
  CHECK(ds.dim() == 784);
  CHECK(ds.n_classes == 10);
  CHECK(ds.features.minCoeff() >= 0.0);
  CHECK(ds.features.maxCoeff() <= 1.0);
  CHECK(synthetic_digits(20, 5).features == ds.features);

  // Balanced labels.
  std::array<int, 10> counts{};
  for (int label : ds.labels) ++counts[static_cast<std::size_t>(label)];
  for (int c : counts) CHECK(c == 20);

  // The task is learnable but not trivial.
  const Dataset train = synthetic_digits(100, 31);
  const Dataset test = synthetic_digits(50, 32);
  const double acc = oracle::logistic_regression_accuracy(
      train.features, train.labels, test.features, test.labels, 10);
  CHECK(acc >= 0.80);
}

TEST_CASE("stratified subsets") {
  const Dataset ds = synthetic_blobs(5, 8, 40, 3.0, 9);

  SUBCASE("class counts differ by at most one") {
    const Dataset sub = subset(ds, 37, 4);
    std::vector<int> counts(5, 0);
    for (int label : sub.labels) ++counts[static_cast<std::size_t>(label)];
    const int lo = *std::min_element(counts.begin(), counts.end());
    const int hi = *std::max_element(counts.begin(), counts.end());
    CHECK(hi - lo <= 1);
    CHECK(sub.size() == 37);
  }
  SUBCASE("one per class at n = n_classes") {
    const Dataset sub = subset(ds, 5, 4);
    std::vector<int> counts(5, 0);
    for (int label : sub.labels) ++counts[static_cast<std::size_t>(label)];
    for (int c : counts) CHECK(c == 1);
  }
  SUBCASE("full-size subset is a permutation") {
    const Dataset sub = subset(ds, ds.size(), 4);
    CHECK(sub.size() == ds.size());
    // Feature column sums are permutation-invariant.
    CHECK(sub.features.rowwise().sum().isApprox(ds.features.rowwise().sum()));
  }
  SUBCASE("deterministic given the seed") {
    CHECK(subset(ds, 20, 4).features == subset(ds, 20, 4).features);
  }
  SUBCASE("oversized request is rejected") {
    CHECK_THROWS_AS(subset(ds, ds.size() + 1, 4), InputError);
  }
}

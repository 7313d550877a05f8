#include <catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "periq/dataset.hpp"

using namespace periq;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "periq_dataset_tests";
  fs::create_directories(dir);
  return dir;
}

void write_be_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  out.write(b, 4);
}

// 2 images of 2x2 pixels plus matching labels
void write_idx_fixture(const fs::path& images, const fs::path& labels,
                       std::uint32_t image_count = 2, std::uint32_t label_count = 2,
                       std::uint32_t image_magic = 0x803, std::uint32_t label_magic = 0x801,
                       bool truncate_pixels = false) {
  std::ofstream img(images, std::ios::binary | std::ios::trunc);
  write_be_u32(img, image_magic);
  write_be_u32(img, image_count);
  write_be_u32(img, 2);
  write_be_u32(img, 2);
  const unsigned char pixels[8] = {0, 51, 102, 153, 204, 255, 0, 128};
  img.write(reinterpret_cast<const char*>(pixels), truncate_pixels ? 5 : 8);
  img.close();

  std::ofstream lab(labels, std::ios::binary | std::ios::trunc);
  write_be_u32(lab, label_magic);
  write_be_u32(lab, label_count);
  const unsigned char ls[2] = {1, 0};
  lab.write(reinterpret_cast<const char*>(ls), label_count >= 2 ? 2 : 1);
}

}  // namespace

TEST_CASE("synthetic generation is deterministic", "[dataset]") {
  for (SynthKind kind : {SynthKind::blobs, SynthKind::spirals}) {
    auto [train1, test1] = generate_synthetic(kind, 300, 3, 0.1, 42);
    auto [train2, test2] = generate_synthetic(kind, 300, 3, 0.1, 42);
    REQUIRE(train1.features == train2.features);
    REQUIRE(train1.labels == train2.labels);
    REQUIRE(test1.features == test2.features);
    auto [train3, test3] = generate_synthetic(kind, 300, 3, 0.1, 43);
    REQUIRE(train1.features != train3.features);
  }
}

TEST_CASE("synthetic label histogram is uniform within one", "[dataset]") {
  auto [train, test] = generate_synthetic(SynthKind::spirals, 1000, 3, 0.05, 1);
  for (const Dataset* ds : {&train, &test}) {
    std::vector<int> counts(3, 0);
    for (int l : ds->labels) ++counts[static_cast<std::size_t>(l)];
    const int mn = *std::min_element(counts.begin(), counts.end());
    const int mx = *std::max_element(counts.begin(), counts.end());
    REQUIRE(mx - mn <= 1);
  }
  REQUIRE(train.size() + test.size() == 1000);
  REQUIRE(test.size() == Approx(200).margin(3));
}

TEST_CASE("noise-free blobs are separable by a nearest-centroid probe", "[dataset]") {
  auto [train, test] = generate_synthetic(SynthKind::blobs, 300, 4, 0.0, 9);
  // centroids from the train split; linear decision rule argmax(mu.x - |mu|^2/2)
  std::vector<std::array<double, 2>> mu(4, {0.0, 0.0});
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    mu[static_cast<std::size_t>(train.labels[i])][0] += train.features(i, 0);
    mu[static_cast<std::size_t>(train.labels[i])][1] += train.features(i, 1);
    ++counts[static_cast<std::size_t>(train.labels[i])];
  }
  for (int k = 0; k < 4; ++k) {
    mu[static_cast<std::size_t>(k)][0] /= counts[static_cast<std::size_t>(k)];
    mu[static_cast<std::size_t>(k)][1] /= counts[static_cast<std::size_t>(k)];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    int best = 0;
    double best_score = -1e300;
    for (int k = 0; k < 4; ++k) {
      const auto& m = mu[static_cast<std::size_t>(k)];
      const double score = m[0] * train.features(i, 0) + m[1] * train.features(i, 1) -
                           (m[0] * m[0] + m[1] * m[1]) / 2.0;
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    if (best == train.labels[i]) ++correct;
  }
  REQUIRE(correct == train.size());
}

TEST_CASE("synthetic rejects degenerate class counts", "[dataset]") {
  REQUIRE_THROWS_AS(generate_synthetic(SynthKind::blobs, 100, 1, 0.1, 1), config_error);
}

TEST_CASE("idx loader reads the crafted fixture exactly", "[dataset]") {
  const auto dir = temp_dir();
  write_idx_fixture(dir / "img.idx", dir / "lab.idx");
  const Dataset ds = load_idx(dir / "img.idx", dir / "lab.idx");
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.feature_dim() == 4);
  REQUIRE(ds.labels == std::vector<int>{1, 0});
  REQUIRE(ds.class_count == 2);
  REQUIRE(ds.features(0, 0) == 0.0f);
  REQUIRE(ds.features(0, 1) == Approx(51.0 / 255.0));
  REQUIRE(ds.features(0, 3) == Approx(153.0 / 255.0));
  REQUIRE(ds.features(1, 1) == 1.0f);
  REQUIRE(ds.features(1, 2) == 0.0f);  // all-zero pixel stays zero
}

TEST_CASE("idx loader distinguishes error conditions", "[dataset]") {
  const auto dir = temp_dir();

  write_idx_fixture(dir / "bad_magic.idx", dir / "lab.idx", 2, 2, 0x804);
  try {
    load_idx(dir / "bad_magic.idx", dir / "lab.idx");
    FAIL("expected bad magic");
  } catch (const io_error& e) {
    REQUIRE(e.code() == io_errc::bad_magic);
  }

  write_idx_fixture(dir / "img.idx", dir / "short_labels.idx", 2, 1);
  try {
    load_idx(dir / "img.idx", dir / "short_labels.idx");
    FAIL("expected count mismatch");
  } catch (const io_error& e) {
    REQUIRE(e.code() == io_errc::count_mismatch);
  }

  write_idx_fixture(dir / "trunc.idx", dir / "lab2.idx", 2, 2, 0x803, 0x801, true);
  try {
    load_idx(dir / "trunc.idx", dir / "lab2.idx");
    FAIL("expected truncation");
  } catch (const io_error& e) {
    REQUIRE(e.code() == io_errc::truncated_payload);
  }
}

TEST_CASE("feature scaling is monotone into [0,1]", "[dataset]") {
  const auto dir = temp_dir();
  write_idx_fixture(dir / "img.idx", dir / "lab.idx");
  const Dataset ds = load_idx(dir / "img.idx", dir / "lab.idx");
  // raw pixels 0 < 51 < 102 < 153 keep their order after scaling
  REQUIRE(ds.features(0, 0) < ds.features(0, 1));
  REQUIRE(ds.features(0, 1) < ds.features(0, 2));
  REQUIRE(ds.features(0, 2) < ds.features(0, 3));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
      REQUIRE(ds.features(i, j) >= 0.0f);
      REQUIRE(ds.features(i, j) <= 1.0f);
    }
}

TEST_CASE("make_dataset dispatches on kind", "[dataset]") {
  DatasetSpec spec;
  spec.kind = "blobs";
  spec.samples = 100;
  spec.classes = 2;
  spec.noise = 0.1;
  spec.seed = 3;
  auto [train, test] = make_dataset(spec);
  REQUIRE(train.split == "train");
  REQUIRE(test.split == "test");
  spec.kind = "nope";
  REQUIRE_THROWS_AS(make_dataset(spec), config_error);
}

TEST_CASE("idx datasets flow through make_dataset", "[dataset]") {
  const auto dir = temp_dir();
  write_idx_fixture(dir / "tr_img.idx", dir / "tr_lab.idx");
  write_idx_fixture(dir / "te_img.idx", dir / "te_lab.idx");
  DatasetSpec spec;
  spec.kind = "idx";
  spec.train_images = (dir / "tr_img.idx").string();
  spec.train_labels = (dir / "tr_lab.idx").string();
  spec.test_images = (dir / "te_img.idx").string();
  spec.test_labels = (dir / "te_lab.idx").string();
  auto [train, test] = make_dataset(spec);
  REQUIRE(train.size() == 2);
  REQUIRE(test.split == "test");
  REQUIRE(train.class_count == test.class_count);
}

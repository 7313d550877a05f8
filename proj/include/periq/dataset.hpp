#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "periq/errors.hpp"
#include "periq/rng.hpp"
#include "periq/tensor.hpp"

namespace periq {

struct Dataset {
  Tensor features;          // [samples x feature dim]
  std::vector<int> labels;  // in [0, class_count)
  int class_count = 0;
  std::string split;  // "train" or "test"

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return features.rank() == 2 ? features.extent(1) : 0; }
};

enum class SynthKind { blobs, spirals };

inline const char* to_string(SynthKind k) { return k == SynthKind::blobs ? "blobs" : "spirals"; }

namespace detail {

// Class-balanced 80/20 split, stratified per class. Every fifth sample of a
// class goes to the test split, so both splits cover the same region of each
// class; the result depends only on (kind, samples, classes, noise, seed).
inline std::pair<Dataset, Dataset> split_and_pack(
    const std::vector<std::vector<std::array<double, 2>>>& per_class, int classes) {
  Dataset train, test;
  train.split = "train";
  test.split = "test";
  train.class_count = test.class_count = classes;

  std::vector<std::array<double, 2>> train_x, test_x;
  for (int k = 0; k < classes; ++k) {
    const auto& pts = per_class[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i % 5 == 4) {
        test_x.push_back(pts[i]);
        test.labels.push_back(k);
      } else {
        train_x.push_back(pts[i]);
        train.labels.push_back(k);
      }
    }
  }
  auto pack = [](const std::vector<std::array<double, 2>>& xs) {
    Tensor t({xs.size(), 2});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      t(i, 0) = static_cast<float>(xs[i][0]);
      t(i, 1) = static_cast<float>(xs[i][1]);
    }
    return t;
  };
  train.features = pack(train_x);
  test.features = pack(test_x);
  return {std::move(train), std::move(test)};
}

}  // namespace detail

// Seeded 2-D synthetic classification sets. blobs: class centers evenly spaced
// on a circle with gaussian noise; spirals: interleaved arms with gaussian
// noise. Class sizes are samples/classes, the first samples%classes classes
// get one extra.
inline std::pair<Dataset, Dataset> generate_synthetic(SynthKind kind, std::size_t samples,
                                                      int classes, double noise,
                                                      std::uint64_t seed) {
  if (classes < 2) throw config_error("generate_synthetic: classes must be >= 2");
  if (samples < static_cast<std::size_t>(classes))
    throw config_error("generate_synthetic: need at least one sample per class");
  Rng rng(seed);
  std::vector<std::vector<std::array<double, 2>>> per_class(static_cast<std::size_t>(classes));
  const std::size_t base = samples / static_cast<std::size_t>(classes);
  const std::size_t extra = samples % static_cast<std::size_t>(classes);

  for (int k = 0; k < classes; ++k) {
    const std::size_t nk = base + (static_cast<std::size_t>(k) < extra ? 1 : 0);
    auto& pts = per_class[static_cast<std::size_t>(k)];
    pts.reserve(nk);
    if (kind == SynthKind::blobs) {
      const double angle = 2.0 * std::numbers::pi * k / classes;
      const double cx = 2.5 * std::cos(angle);
      const double cy = 2.5 * std::sin(angle);
      for (std::size_t i = 0; i < nk; ++i)
        pts.push_back({cx + noise * rng.normal(), cy + noise * rng.normal()});
    } else {
      // arm k: radius grows with t, angle winds 2.5*pi over the arm
      const double offset = 2.0 * std::numbers::pi * k / classes;
      for (std::size_t i = 0; i < nk; ++i) {
        const double t = (static_cast<double>(i) + 1.0) / static_cast<double>(nk);
        const double radius = 0.15 + 0.85 * t;
        const double theta = offset + 2.5 * std::numbers::pi * t;
        pts.push_back({radius * std::cos(theta) + noise * rng.normal(),
                       radius * std::sin(theta) + noise * rng.normal()});
      }
    }
  }
  return detail::split_and_pack(per_class, classes);
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw io_error(io_errc::truncated_payload, std::string(what) + ": unexpected end of file");
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace detail

// IDX image/label pair (the MNIST container format). Pixels are scaled to
// [0, 1]; image and label counts must agree.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw io_error(io_errc::bad_header, "cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw io_error(io_errc::bad_header, "cannot open " + labels_path.string());

  const std::uint32_t img_magic = detail::read_be_u32(img, "idx images");
  if (img_magic != 0x00000803u)
    throw io_error(io_errc::bad_magic, "images magic " + std::to_string(img_magic));
  const std::uint32_t lab_magic = detail::read_be_u32(lab, "idx labels");
  if (lab_magic != 0x00000801u)
    throw io_error(io_errc::bad_magic, "labels magic " + std::to_string(lab_magic));

  const std::uint32_t n_img = detail::read_be_u32(img, "idx images");
  const std::uint32_t rows = detail::read_be_u32(img, "idx images");
  const std::uint32_t cols = detail::read_be_u32(img, "idx images");
  const std::uint32_t n_lab = detail::read_be_u32(lab, "idx labels");
  if (n_img != n_lab)
    throw io_error(io_errc::count_mismatch, std::to_string(n_img) + " images vs " +
                                                std::to_string(n_lab) + " labels");
  if (rows == 0 || cols == 0)
    throw io_error(io_errc::dim_mismatch, "image dims must be positive");

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  Dataset ds;
  ds.split = "train";
  ds.features = Tensor({n_img, dim});
  ds.labels.resize(n_img);

  std::vector<unsigned char> buf(dim);
  for (std::size_t i = 0; i < n_img; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim)))
      throw io_error(io_errc::truncated_payload, "images payload short at sample " +
                                                     std::to_string(i));
    for (std::size_t j = 0; j < dim; ++j)
      ds.features(i, j) = static_cast<float>(buf[j]) / 255.0f;
  }
  int max_label = 0;
  for (std::size_t i = 0; i < n_lab; ++i) {
    unsigned char l = 0;
    if (!lab.read(reinterpret_cast<char*>(&l), 1))
      throw io_error(io_errc::truncated_payload, "labels payload short at sample " +
                                                     std::to_string(i));
    ds.labels[i] = static_cast<int>(l);
    max_label = std::max(max_label, static_cast<int>(l));
  }
  ds.class_count = max_label + 1;
  return ds;
}

struct DatasetSpec {
  std::string kind = "spirals";  // blobs | spirals | idx
  std::size_t samples = 1500;
  int classes = 3;
  double noise = 0.1;
  std::uint64_t seed = 7;
  // idx paths
  std::string train_images, train_labels, test_images, test_labels;
};

inline std::pair<Dataset, Dataset> make_dataset(const DatasetSpec& spec) {
  if (spec.kind == "blobs")
    return generate_synthetic(SynthKind::blobs, spec.samples, spec.classes, spec.noise, spec.seed);
  if (spec.kind == "spirals")
    return generate_synthetic(SynthKind::spirals, spec.samples, spec.classes, spec.noise,
                              spec.seed);
  if (spec.kind == "idx") {
    Dataset train = load_idx(spec.train_images, spec.train_labels);
    Dataset test = load_idx(spec.test_images, spec.test_labels);
    test.split = "test";
    const int classes = std::max(train.class_count, test.class_count);
    train.class_count = test.class_count = classes;
    return {std::move(train), std::move(test)};
  }
  throw config_error("dataset kind must be blobs, spirals or idx: " + spec.kind);
}

}  // namespace periq

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace cpml::data {

struct Dataset {
  Eigen::MatrixXd X;  // m x d, features in [-1, 1]
  Eigen::VectorXd y;  // m labels in {0, 1}
  std::string name;

  [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(X.rows()); }
  [[nodiscard]] std::size_t cols() const noexcept { return static_cast<std::size_t>(X.cols()); }
  // Throws DimensionMismatch or InvalidParameter when the invariants fail.
  void validate() const;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

struct MnistOptions {
  int class_a = 3;  // label 0
  int class_b = 7;  // label 1
  // Keep only the first `limit` filtered samples of each split.
  std::optional<std::size_t> limit;
  // Place a copy of the 784 pixels next to the originals (d = 1568).
  bool duplicate_columns = false;
};

// Reads the four uncompressed IDX files from `dir` (train-images-idx3-ubyte,
// train-labels-idx1-ubyte, t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte)
// and keeps the two classes in file order. Pixels are divided by 255.
// Throws FileNotFound and FormatError.
TrainTest load_mnist_binary(const std::filesystem::path& dir, const MnistOptions& options = {});

// IDX parsing of a single file, exposed for tests.
Eigen::MatrixXd read_idx_images(const std::filesystem::path& file);
Eigen::VectorXi read_idx_labels(const std::filesystem::path& file);

// Directory named by CPML_DATA_DIR, if set.
std::optional<std::filesystem::path> data_dir_from_env();

struct SyntheticOptions {
  std::size_t m_train = 400;
  std::size_t m_test = 200;
  std::size_t d = 2;
  double separation = 4.0;  // distance between the class means
  double spread = 1.0;      // per-coordinate standard deviation
  // Samples closer than this to the separating hyperplane are redrawn, so the
  // classes are linearly separable whenever margin > 0.
  double margin = 0.5;
  std::uint64_t seed = 0;
};

// Two Gaussian blobs on either side of a hyperplane through the origin,
// scaled into [-1, 1] with scale_features.
TrainTest synthetic_blobs(const SyntheticOptions& options = {});

// Divides each feature by its largest |value| over both splits.
void scale_features(TrainTest& split);

}  // namespace cpml::data

#include "cpml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <vector>

#include "cpml/errors.hpp"
#include "cpml/rng.hpp"

namespace cpml::data {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FileNotFound(file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return std::uint32_t{b[at]} << 24 | std::uint32_t{b[at + 1]} << 16 | std::uint32_t{b[at + 2]} << 8 |
         std::uint32_t{b[at + 3]};
}

// Checks the IDX magic (0x00 0x00 type=0x08 ndims) and returns the dimensions.
std::vector<std::size_t> idx_header(const std::vector<std::uint8_t>& b, std::uint8_t ndims,
                                    const std::filesystem::path& file) {
  if (b.size() < 4 || b[0] != 0 || b[1] != 0 || b[2] != 0x08 || b[3] != ndims) {
    throw FormatError(file.string() + ": bad IDX magic");
  }
  if (b.size() < 4 + 4 * std::size_t{ndims}) throw FormatError(file.string() + ": truncated IDX header");
  std::vector<std::size_t> dims;
  std::size_t total = 1;
  for (std::uint8_t i = 0; i < ndims; ++i) {
    dims.push_back(be32(b, 4 + 4 * std::size_t{i}));
    total *= dims.back();
  }
  if (b.size() != 4 + 4 * std::size_t{ndims} + total) {
    throw FormatError(file.string() + ": payload size does not match the header");
  }
  return dims;
}

Dataset filter(const Eigen::MatrixXd& images, const Eigen::VectorXi& labels, const MnistOptions& opt,
               const std::string& name) {
  if (images.rows() != labels.size()) throw FormatError(name + ": image and label counts differ");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) == opt.class_a || labels(i) == opt.class_b) keep.push_back(i);
    if (opt.limit && keep.size() == *opt.limit) break;
  }
  const Eigen::Index d = images.cols();
  Dataset out;
  out.name = name;
  out.X.resize(static_cast<Eigen::Index>(keep.size()), opt.duplicate_columns ? 2 * d : d);
  out.y.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out.X.row(row).head(d) = images.row(keep[r]);
    if (opt.duplicate_columns) out.X.row(row).tail(d) = images.row(keep[r]);
    out.y(row) = labels(keep[r]) == opt.class_b ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (X.rows() != y.size()) throw DimensionMismatch(name + ": " + std::to_string(y.size()) + " labels for " +
                                                    std::to_string(X.rows()) + " rows");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0) throw InvalidParameter(name + ": labels must be 0 or 1");
  if (X.size() > 0 && X.cwiseAbs().maxCoeff() > 1.0) throw InvalidParameter(name + ": features must lie in [-1, 1]");
}

Eigen::MatrixXd read_idx_images(const std::filesystem::path& file) {
  const auto bytes = read_file(file);
  const auto dims = idx_header(bytes, 3, file);
  const std::size_t n = dims[0], d = dims[1] * dims[2];
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::uint8_t* p = bytes.data() + 16;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(p[i * d + j]) / 255.0;
  return out;
}

Eigen::VectorXi read_idx_labels(const std::filesystem::path& file) {
  const auto bytes = read_file(file);
  const auto dims = idx_header(bytes, 1, file);
  Eigen::VectorXi out(static_cast<Eigen::Index>(dims[0]));
  for (std::size_t i = 0; i < dims[0]; ++i) out(static_cast<Eigen::Index>(i)) = bytes[8 + i];
  return out;
}

TrainTest load_mnist_binary(const std::filesystem::path& dir, const MnistOptions& options) {
  if (options.class_a == options.class_b) throw InvalidParameter("the two classes must differ");
  TrainTest out;
  out.train = filter(read_idx_images(dir / "train-images-idx3-ubyte"), read_idx_labels(dir / "train-labels-idx1-ubyte"),
                     options, "mnist-train");
  out.test = filter(read_idx_images(dir / "t10k-images-idx3-ubyte"), read_idx_labels(dir / "t10k-labels-idx1-ubyte"),
                    options, "mnist-test");
  return out;
}

std::optional<std::filesystem::path> data_dir_from_env() {
  const char* v = std::getenv("CPML_DATA_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::filesystem::path(v);
}

TrainTest synthetic_blobs(const SyntheticOptions& o) {
  if (o.d == 0) throw InvalidParameter("synthetic data needs d >= 1");
  Rng rng(o.seed, 0xB10B);
  // Class means at +/- (separation / 2) along the all-ones direction.
  const double offset = o.separation / 2.0 / std::sqrt(static_cast<double>(o.d));
  const auto d = static_cast<Eigen::Index>(o.d);
  auto draw = [&](std::size_t m, const std::string& name) {
    Dataset ds;
    ds.name = name;
    ds.X.resize(static_cast<Eigen::Index>(m), d);
    ds.y.resize(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
      const bool positive = i % 2 == 0;
      Eigen::VectorXd x(d);
      double projection = 0.0;
      do {
        for (Eigen::Index j = 0; j < d; ++j) x(j) = (positive ? offset : -offset) + o.spread * rng.normal();
        projection = x.sum() / std::sqrt(static_cast<double>(o.d));
      } while (positive ? projection < o.margin : projection > -o.margin);
      ds.X.row(i) = x.transpose();
      ds.y(i) = positive ? 1.0 : 0.0;
    }
    return ds;
  };
  TrainTest out{draw(o.m_train, "synthetic-train"), draw(o.m_test, "synthetic-test")};
  scale_features(out);
  return out;
}

void scale_features(TrainTest& split) {
  const Eigen::Index d = split.train.X.cols();
  if (split.train.X.rows() == 0) return;
  for (Eigen::Index j = 0; j < d; ++j) {
    double s = split.train.X.col(j).cwiseAbs().maxCoeff();
    if (split.test.X.cols() == d && split.test.X.rows() > 0) s = std::max(s, split.test.X.col(j).cwiseAbs().maxCoeff());
    if (s > 0.0) {
      split.train.X.col(j) /= s;
      if (split.test.X.cols() == d) split.test.X.col(j) /= s;
    }
  }
}

}  // namespace cpml::data

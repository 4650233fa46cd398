#include "treegrad/tensor.hpp"

#include <cmath>
#include <utility>

namespace treegrad {

namespace {

// numerically stable logistic; never evaluates exp of a positive argument
double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_positive(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ArgumentError("tensor dimensions must be positive, got " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  check_positive(rows, cols);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  check_positive(rows, cols);
  if (data_.size() != rows * cols) {
    throw ArgumentError("tensor " + shape_str() + " needs " +
                        std::to_string(rows * cols) + " values, got " +
                        std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor(rows, cols, 0.0);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  return Tensor(rows, cols, value);
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::column(const std::vector<double>& values) {
  return Tensor(values.size(), 1, values);
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

std::string Tensor::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::axpy(double alpha, const Tensor& x) {
  if (!same_shape(x)) {
    throw DimensionError("axpy shapes differ: " + shape_str() + " vs " +
                         x.shape_str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * x.data_[i];
}

void Tensor::clamp(double lo, double hi) {
  for (double& v : data_) {
    if (v < lo) v = lo;
    if (v > hi) v = hi;
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shapes incompatible: " + a.shape_str() +
                         " * " + b.shape_str());
  }
  Tensor out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return out;
}

Tensor ew(const Tensor& a, const Tensor& b, EwKind kind) {
  if (!a.same_shape(b)) {
    throw DimensionError("elementwise shapes differ: " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  Tensor out(a.rows(), a.cols(), 0.0);
  const auto& pa = a.data();
  const auto& pb = b.data();
  auto& po = out.data();
  switch (kind) {
    case EwKind::add:
      for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + pb[i];
      break;
    case EwKind::sub:
      for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] - pb[i];
      break;
    case EwKind::mul:
      for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * pb[i];
      break;
  }
  return out;
}

Tensor map(const Tensor& a, MapKind kind) {
  Tensor out(a.rows(), a.cols(), 0.0);
  const auto& pa = a.data();
  auto& po = out.data();
  switch (kind) {
    case MapKind::tanh:
      for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::tanh(pa[i]);
      break;
    case MapKind::sigmoid:
      for (std::size_t i = 0; i < po.size(); ++i) po[i] = sigmoid(pa[i]);
      break;
    case MapKind::one_minus_sq_tanh:
      for (std::size_t i = 0; i < po.size(); ++i) {
        double t = std::tanh(pa[i]);
        po[i] = 1.0 - t * t;
      }
      break;
    case MapKind::sigmoid_deriv:
      for (std::size_t i = 0; i < po.size(); ++i) {
        double s = sigmoid(pa[i]);
        po[i] = s * (1.0 - s);
      }
      break;
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tensor rand_init(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  if (scale < 0.0) {
    throw ArgumentError("rand_init scale must be non-negative");
  }
  Tensor out(rows, cols, 0.0);
  for (double& v : out.data()) v = rng.uniform(-scale, scale);
  return out;
}

}  // namespace treegrad

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "treegrad/errors.hpp"
#include "treegrad/rng.hpp"

namespace treegrad {

// Dense row-major 2-D array of doubles. Operations return fresh tensors and
// never mutate their operands; the only mutating members are the optimizer
// helpers axpy/clamp and at().
class Tensor {
 public:
  Tensor() = default;  // empty placeholder; no operation produces one
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  static Tensor identity(std::size_t n);
  static Tensor column(const std::vector<double>& values);  // n x 1
  static Tensor scalar(double value);                       // 1 x 1

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_str() const;  // "3x4"
  bool all_finite() const;

  void axpy(double alpha, const Tensor& x);  // this += alpha * x
  void clamp(double lo, double hi);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class EwKind { add, sub, mul };
enum class MapKind { tanh, sigmoid, one_minus_sq_tanh, sigmoid_deriv };

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor ew(const Tensor& a, const Tensor& b, EwKind kind);
Tensor map(const Tensor& a, MapKind kind);
Tensor transpose(const Tensor& a);

// i.i.d. uniform in [-scale, scale]; consumes rows*cols draws in row-major
// order so results are reproducible for a fixed rng state
Tensor rand_init(std::size_t rows, std::size_t cols, double scale, Rng& rng);

}  // namespace treegrad

#include "treegrad/functions.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "treegrad/errors.hpp"

namespace treegrad {

namespace {

// Matrix product with optional bias. Reads operand values live from its
// inputs; they are unchanged between this node's forward and backward.
class LinearNode final : public FunctionNode {
 public:
  explicit LinearNode(std::vector<VarPtr> inputs)
      : FunctionNode(std::move(inputs)) {}

  std::vector<Tensor> backward(const Tensor& g) const override {
    const Tensor& W = inputs_[0]->value;
    const Tensor& x = inputs_[1]->value;
    Tensor dW = matmul(g, transpose(x));
    Tensor dx = matmul(transpose(W), g);
    if (inputs_.size() == 2) return {std::move(dW), std::move(dx)};
    return {std::move(dW), std::move(dx), g};
  }

  const char* kind() const override { return "linear"; }
};

class TanhNode final : public FunctionNode {
 public:
  TanhNode(std::vector<VarPtr> inputs, Tensor y)
      : FunctionNode(std::move(inputs)), y_(std::move(y)) {}

  std::vector<Tensor> backward(const Tensor& g) const override {
    Tensor d(y_.rows(), y_.cols(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      double t = y_.data()[i];
      d.data()[i] = g.data()[i] * (1.0 - t * t);
    }
    return {std::move(d)};
  }

  const char* kind() const override { return "tanh"; }

 private:
  Tensor y_;  // forward output
};

class SigmoidNode final : public FunctionNode {
 public:
  SigmoidNode(std::vector<VarPtr> inputs, Tensor y)
      : FunctionNode(std::move(inputs)), y_(std::move(y)) {}

  std::vector<Tensor> backward(const Tensor& g) const override {
    Tensor d(y_.rows(), y_.cols(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      double s = y_.data()[i];
      d.data()[i] = g.data()[i] * s * (1.0 - s);
    }
    return {std::move(d)};
  }

  const char* kind() const override { return "sigmoid"; }

 private:
  Tensor y_;
};

class AddNode final : public FunctionNode {
 public:
  explicit AddNode(std::vector<VarPtr> inputs)
      : FunctionNode(std::move(inputs)) {}

  std::vector<Tensor> backward(const Tensor& g) const override {
    return {g, g};
  }

  const char* kind() const override { return "add"; }
};

class HadamardNode final : public FunctionNode {
 public:
  explicit HadamardNode(std::vector<VarPtr> inputs)
      : FunctionNode(std::move(inputs)) {}

  std::vector<Tensor> backward(const Tensor& g) const override {
    return {ew(g, inputs_[1]->value, EwKind::mul),
            ew(g, inputs_[0]->value, EwKind::mul)};
  }

  const char* kind() const override { return "hadamard"; }
};

class MseNode final : public FunctionNode {
 public:
  MseNode(std::vector<VarPtr> inputs, Tensor target)
      : FunctionNode(std::move(inputs)), target_(std::move(target)) {}

  std::vector<Tensor> backward(const Tensor& g) const override {
    const Tensor& pred = inputs_[0]->value;
    double scale = g.at(0, 0) * 2.0 / static_cast<double>(pred.size());
    Tensor d = ew(pred, target_, EwKind::sub);
    for (double& v : d.data()) v *= scale;
    return {std::move(d)};
  }

  const char* kind() const override { return "mse"; }

 private:
  Tensor target_;
};

class SumLossNode final : public FunctionNode {
 public:
  explicit SumLossNode(std::vector<VarPtr> inputs)
      : FunctionNode(std::move(inputs)) {}

  std::vector<Tensor> backward(const Tensor& g) const override {
    return std::vector<Tensor>(inputs_.size(), g);
  }

  const char* kind() const override { return "sum_loss"; }
};

void require(const VarPtr& v, const char* who) {
  if (!v) throw ArgumentError(std::string(who) + " got a null variable");
}

}  // namespace

VarPtr linear(const VarPtr& W, const VarPtr& x, const VarPtr& b) {
  require(W, "linear");
  require(x, "linear");
  require(b, "linear");
  Tensor y = matmul(W->value, x->value);
  if (!b->value.same_shape(y)) {
    throw DimensionError("linear bias shape " + b->value.shape_str() +
                         " does not match product shape " + y.shape_str());
  }
  y = ew(y, b->value, EwKind::add);
  auto fn = std::make_shared<LinearNode>(std::vector<VarPtr>{W, x, b});
  return fn->attach_output(std::move(y));
}

VarPtr linear(const VarPtr& W, const VarPtr& x) {
  require(W, "linear");
  require(x, "linear");
  Tensor y = matmul(W->value, x->value);
  auto fn = std::make_shared<LinearNode>(std::vector<VarPtr>{W, x});
  return fn->attach_output(std::move(y));
}

VarPtr tanh_node(const VarPtr& x) {
  require(x, "tanh_node");
  Tensor y = map(x->value, MapKind::tanh);
  auto fn = std::make_shared<TanhNode>(std::vector<VarPtr>{x}, y);
  return fn->attach_output(std::move(y));
}

VarPtr sigmoid_node(const VarPtr& x) {
  require(x, "sigmoid_node");
  Tensor y = map(x->value, MapKind::sigmoid);
  auto fn = std::make_shared<SigmoidNode>(std::vector<VarPtr>{x}, y);
  return fn->attach_output(std::move(y));
}

VarPtr add_node(const VarPtr& a, const VarPtr& b) {
  require(a, "add_node");
  require(b, "add_node");
  Tensor y = ew(a->value, b->value, EwKind::add);
  auto fn = std::make_shared<AddNode>(std::vector<VarPtr>{a, b});
  return fn->attach_output(std::move(y));
}

VarPtr hadamard_node(const VarPtr& a, const VarPtr& b) {
  require(a, "hadamard_node");
  require(b, "hadamard_node");
  Tensor y = ew(a->value, b->value, EwKind::mul);
  auto fn = std::make_shared<HadamardNode>(std::vector<VarPtr>{a, b});
  return fn->attach_output(std::move(y));
}

VarPtr mse_node(const VarPtr& pred, const Tensor& target) {
  require(pred, "mse_node");
  if (!pred->value.same_shape(target)) {
    throw DimensionError("mse prediction shape " + pred->value.shape_str() +
                         " does not match target shape " + target.shape_str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    double d = pred->value.data()[i] - target.data()[i];
    acc += d * d;
  }
  acc /= static_cast<double>(target.size());
  auto fn = std::make_shared<MseNode>(std::vector<VarPtr>{pred}, target);
  return fn->attach_output(Tensor::scalar(acc));
}

VarPtr sum_loss_node(const std::vector<VarPtr>& losses) {
  if (losses.empty()) {
    throw ArgumentError("sum_loss_node needs at least one loss");
  }
  double acc = 0.0;
  for (const VarPtr& l : losses) {
    require(l, "sum_loss_node");
    if (l->value.rows() != 1 || l->value.cols() != 1) {
      throw DimensionError("sum_loss_node inputs must be 1x1, got " +
                           l->value.shape_str());
    }
    acc += l->value.at(0, 0);
  }
  auto fn = std::make_shared<SumLossNode>(losses);
  return fn->attach_output(Tensor::scalar(acc));
}

BatchStats batch_stats(const Tensor& batch, double epsilon) {
  if (epsilon <= 0.0) {
    throw ArgumentError("batch_stats epsilon must be positive");
  }
  std::size_t m = batch.rows();
  std::size_t features = batch.cols();
  BatchStats stats;
  stats.m = m;
  stats.epsilon = epsilon;
  stats.mean = Tensor::zeros(1, features);
  stats.variance = Tensor::zeros(1, features);
  for (std::size_t k = 0; k < features; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += batch.at(i, k);
    double mean = sum / static_cast<double>(m);
    double sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double d = batch.at(i, k) - mean;
      sq += d * d;
    }
    stats.mean.at(0, k) = mean;
    stats.variance.at(0, k) = sq / static_cast<double>(m);
  }
  return stats;
}

Tensor standardize(const Tensor& batch, const BatchStats& stats) {
  if (stats.mean.cols() != batch.cols()) {
    throw DimensionError("standardize stats cover " +
                         std::to_string(stats.mean.cols()) +
                         " features but batch has " +
                         std::to_string(batch.cols()));
  }
  Tensor out(batch.rows(), batch.cols(), 0.0);
  for (std::size_t k = 0; k < batch.cols(); ++k) {
    double denom = std::sqrt(stats.variance.at(0, k) + stats.epsilon);
    double mean = stats.mean.at(0, k);
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      out.at(i, k) = (batch.at(i, k) - mean) / denom;
    }
  }
  return out;
}

}  // namespace treegrad

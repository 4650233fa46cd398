#pragma once

#include <cstddef>
#include <vector>

#include "treegrad/graph.hpp"
#include "treegrad/tensor.hpp"

namespace treegrad {

// Graph-building operations. Each call runs the forward computation, records
// a FunctionNode holding what its backward needs, and returns the output
// Variable wired to that node.

// W*x + b; bias shape must equal the product shape
VarPtr linear(const VarPtr& W, const VarPtr& x, const VarPtr& b);
// W*x without a bias (same node kind)
VarPtr linear(const VarPtr& W, const VarPtr& x);

VarPtr tanh_node(const VarPtr& x);
VarPtr sigmoid_node(const VarPtr& x);
VarPtr add_node(const VarPtr& a, const VarPtr& b);
VarPtr hadamard_node(const VarPtr& a, const VarPtr& b);

// mean squared error against a constant target; output is 1x1
VarPtr mse_node(const VarPtr& pred, const Tensor& target);

// scalar sum of 1x1 losses; backward hands the seed to every input
VarPtr sum_loss_node(const std::vector<VarPtr>& losses);

// Per-feature batch statistics. Rows of the batch are samples, columns are
// features; variance is the population form (divisor m, no Bessel
// correction).
struct BatchStats {
  Tensor mean;      // 1 x features
  Tensor variance;  // 1 x features
  std::size_t m = 0;
  double epsilon = 0.0;
};

BatchStats batch_stats(const Tensor& batch, double epsilon);

// (x - mean) / sqrt(variance + epsilon), applied per feature. This is an
// input transform on plain tensors: it happens before graph construction and
// gradients do not flow through it.
Tensor standardize(const Tensor& batch, const BatchStats& stats);

}  // namespace treegrad

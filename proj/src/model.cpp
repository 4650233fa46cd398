#include "treegrad/model.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "treegrad/errors.hpp"
#include "treegrad/functions.hpp"

namespace treegrad {

void TrainConfig::validate() const {
  if (intvl < 1) throw ArgumentError("intvl must be at least 1");
  if (epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (hidden < 1) throw ArgumentError("hidden must be at least 1");
  if (!(lr > 0.0)) throw ArgumentError("lr must be positive");
  if (seq_len < 1) throw ArgumentError("seq-len must be at least 1");
  if (batch_m != seq_len) {
    throw ArgumentError("batch-m must equal seq-len (each block standardizes "
                        "exactly the window it consumes)");
  }
  if (!(eps > 0.0)) throw ArgumentError("eps must be positive");
  if (!(sine_step > 0.0)) throw ArgumentError("sine-step must be positive");
  if (clip && !(*clip > 0.0)) throw ArgumentError("clip must be positive");
}

long interior_executions(const TraversalTrace& trace, const BlockEntry& block) {
  long total = 0;
  for (const auto& [id, n] : trace.backward_executions) {
    if (id > block.node_id_lo && id <= block.node_id_hi) total += n;
  }
  return total;
}

BlockChain::BlockChain(const TrainConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  tree_ = SLstmParams::init(cfg_.hidden, 0.08, rng);
  lift_w_ = Variable::leaf(rand_init(cfg_.hidden, 1, 0.08, rng));
  lift_b_ = Variable::leaf(Tensor::zeros(cfg_.hidden, 1));
  head_w_ = Variable::leaf(rand_init(1, cfg_.hidden, 0.08, rng));
  head_b_ = Variable::leaf(Tensor::zeros(1, 1));
}

VarPtr BlockChain::append_block(const Tensor& inputs, const Tensor& target) {
  if (inputs.rows() != cfg_.batch_m || inputs.cols() != 1) {
    throw DimensionError("append_block expects a " +
                         std::to_string(cfg_.batch_m) +
                         "x1 window, got " + inputs.shape_str());
  }
  if (target.rows() != 1 || target.cols() != 1) {
    throw DimensionError("append_block expects a 1x1 target, got " +
                         target.shape_str());
  }

  std::uint64_t lo = node_id_watermark();

  if (!carried_state_) {
    carried_state_ = LstmState{
        Variable::leaf(Tensor::zeros(cfg_.hidden, 1)),
        Variable::leaf(Tensor::zeros(cfg_.hidden, 1))};
  }

  // standardized window, then one leaf state per sample
  Tensor normed = standardize(inputs, batch_stats(inputs, cfg_.eps));
  std::vector<LstmState> leaves;
  leaves.reserve(cfg_.batch_m + 1);
  leaves.push_back(*carried_state_);
  for (std::size_t j = 0; j < cfg_.batch_m; ++j) {
    VarPtr sample = Variable::leaf(Tensor::scalar(normed.at(j, 0)));
    LstmState leaf{Variable::leaf(Tensor::zeros(cfg_.hidden, 1)),
                   linear(lift_w_, sample, lift_b_)};
    leaves.push_back(leaf);
  }

  TreeBuildResult tree = build_lstm_tree(tree_, leaves, cfg_.cell_update);
  VarPtr pred = tanh_node(linear(head_w_, tree.root_var, head_b_));
  VarPtr loss = mse_node(pred, target);

  std::uint64_t hi = node_id_watermark();

  int id = next_block_id_++;
  loss->block_id = id;
  tree.root.h->block_id = id;
  tree.root.c->block_id = id;

  BlockEntry entry;
  entry.block_id = id;
  entry.root = tree.root.h;
  entry.root_c = tree.root.c;
  entry.loss = loss;
  entry.node_id_lo = lo;
  entry.node_id_hi = hi;
  blocks_.push_back(entry);

  // the loss-sum spine lives outside every block's bracket
  running_loss_ = running_loss_ ? sum_loss_node({running_loss_, loss}) : loss;
  carried_state_ = tree.root;
  ++steps_since_reset_;
  return loss;
}

TraversalTrace BlockChain::constrained_backward() {
  if (blocks_.empty()) {
    throw StateError("constrained backward on a chain with no blocks");
  }
  // marking pass over the ordered registry; the latest block is the one
  // with the highest id
  int latest = blocks_.back().block_id;
  for (BlockEntry& b : blocks_) {
    block_guard(*b.loss, latest);
    block_guard(*b.root, latest);
    block_guard(*b.root_c, latest);
  }
  TraversalTrace trace;
  backward(running_loss_, Tensor::scalar(1.0), trace);
  return trace;
}

void BlockChain::apply_sgd(double lr) {
  for (const VarPtr& p : parameters()) {
    if (!p->grad) continue;
    if (cfg_.clip) {
      Tensor g = *p->grad;
      g.clamp(-*cfg_.clip, *cfg_.clip);
      p->value.axpy(-lr, g);
    } else {
      p->value.axpy(-lr, *p->grad);
    }
  }
}

void BlockChain::zero_all_grads() {
  std::vector<VarPtr> roots = parameters();
  if (running_loss_) roots.push_back(running_loss_);
  if (carried_state_) {
    roots.push_back(carried_state_->c);
    roots.push_back(carried_state_->h);
  }
  zero_grads(roots);
}

void BlockChain::release_graph() {
  blocks_.clear();
  running_loss_.reset();
  carried_state_.reset();
}

void BlockChain::reset_state() {
  release_graph();
  steps_since_reset_ = 0;
}

std::pair<double, double> BlockChain::train_step(const Tensor& inputs,
                                                 const Tensor& target,
                                                 double lr) {
  auto t0 = std::chrono::steady_clock::now();
  append_block(inputs, target);
  double loss_value = running_loss_->value.at(0, 0);
  if (!std::isfinite(loss_value)) {
    throw DivergenceError(static_cast<int>(total_steps_ + 1),
                          "non-finite loss at step " +
                              std::to_string(total_steps_ + 1));
  }
  constrained_backward();
  apply_sgd(lr);
  zero_all_grads();
  ++total_steps_;
  if (steps_since_reset_ >= cfg_.intvl) reset_state();
  auto t1 = std::chrono::steady_clock::now();
  double ms =
      std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(
          t1 - t0)
          .count();
  return {loss_value, ms};
}

void BlockChain::set_carried_state(const Tensor& c, const Tensor& h) {
  if (c.rows() != cfg_.hidden || c.cols() != 1 || !c.same_shape(h)) {
    throw DimensionError("carried state must be two " +
                         std::to_string(cfg_.hidden) + "x1 tensors, got " +
                         c.shape_str() + " and " + h.shape_str());
  }
  carried_state_ = LstmState{Variable::leaf(c), Variable::leaf(h)};
}

std::vector<VarPtr> BlockChain::parameters() const {
  std::vector<VarPtr> out = tree_.all();
  out.push_back(lift_w_);
  out.push_back(lift_b_);
  out.push_back(head_w_);
  out.push_back(head_b_);
  return out;
}

}  // namespace treegrad

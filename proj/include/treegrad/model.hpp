#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "treegrad/graph.hpp"
#include "treegrad/lstm.hpp"
#include "treegrad/rng.hpp"
#include "treegrad/tensor.hpp"

namespace treegrad {

struct TrainConfig {
  int intvl = 10;           // training steps between state/graph resets
  int epochs = 1000;        // one window consumed per epoch (epochs = steps)
  std::size_t hidden = 16;
  double lr = 0.2;
  std::uint64_t seed = 42;
  std::size_t seq_len = 4;  // samples folded into each block's tree
  std::size_t batch_m = 4;  // standardization batch length; must equal seq_len
  double sine_step = 0.5;   // waveform phase increment per sample
  double sine_phase = 0.0;
  double eps = 1e-5;        // standardization epsilon
  CellUpdate cell_update = CellUpdate::left_cell_only;
  std::optional<double> clip;  // elementwise gradient clip, off by default

  void validate() const;  // throws ArgumentError
};

// Registry entry for one appended block. node_id_lo/hi bracket every node
// (Variables and FunctionNodes) created while the block was built, which is
// how a trace's executions are attributed to a block's interior.
struct BlockEntry {
  int block_id = 0;
  VarPtr root;    // tree root hidden state
  VarPtr root_c;  // tree root memory
  VarPtr loss;
  std::uint64_t node_id_lo = 0;
  std::uint64_t node_id_hi = 0;
};

// backward executions recorded inside the block's build bracket
long interior_executions(const TraversalTrace& trace, const BlockEntry& block);

// A growing chain of model blocks over one shared parameter set. Each block:
// standardize the input window, lift each sample to a leaf state through a
// learned linear map, fold the leaves into the tree combiner seeded with the
// carried state, apply the tanh read-out head, score with MSE, and link the
// loss into the running sum. The carried state crosses block boundaries;
// gradients never do (backward is constrained to the latest block).
class BlockChain {
 public:
  BlockChain(const TrainConfig& cfg, Rng& rng);

  // inputs: batch_m x 1 window; target: 1 x 1 next value. Returns the loss.
  VarPtr append_block(const Tensor& inputs, const Tensor& target);

  // Marks every registered block against the latest block id, then runs
  // backward from the running loss with seed 1.
  TraversalTrace constrained_backward();

  // p <- p - lr * grad for every parameter with a gradient, with optional
  // elementwise clipping of the gradient first
  void apply_sgd(double lr);

  void zero_all_grads();

  // Drops the chain's references to the block graphs. Parameters survive;
  // the carried state is re-zeroed lazily on the next append.
  void release_graph();

  // release_graph plus reset of the interval counter
  void reset_state();

  // append + divergence check + constrained backward + sgd + grad reset,
  // then a state reset once steps_since_reset reaches intvl.
  // Returns (objective value, elapsed milliseconds). The objective is the
  // accumulated loss the backward pass runs on: the sum of every block loss
  // since the last reset, so consecutive steps within one interval report a
  // growing sum until the reset clears it.
  std::pair<double, double> train_step(const Tensor& inputs,
                                       const Tensor& target, double lr);

  const std::vector<BlockEntry>& blocks() const { return blocks_; }
  const VarPtr& running_loss() const { return running_loss_; }
  const std::optional<LstmState>& carried_state() const {
    return carried_state_;
  }
  // overrides the carried state with constant leaves (testing/priming)
  void set_carried_state(const Tensor& c, const Tensor& h);

  std::vector<VarPtr> parameters() const;
  const SLstmParams& tree_params() const { return tree_; }
  const VarPtr& lift_w() const { return lift_w_; }
  const VarPtr& lift_b() const { return lift_b_; }
  const VarPtr& head_w() const { return head_w_; }
  const VarPtr& head_b() const { return head_b_; }

  int steps_since_reset() const { return steps_since_reset_; }
  long total_steps() const { return total_steps_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  TrainConfig cfg_;
  SLstmParams tree_;
  VarPtr lift_w_, lift_b_;  // input_dim(1) -> hidden
  VarPtr head_w_, head_b_;  // hidden -> 1
  std::vector<BlockEntry> blocks_;
  VarPtr running_loss_;
  std::optional<LstmState> carried_state_;
  int next_block_id_ = 1;
  int steps_since_reset_ = 0;
  long total_steps_ = 0;
};

}  // namespace treegrad

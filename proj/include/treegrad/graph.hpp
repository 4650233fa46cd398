#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "treegrad/tensor.hpp"

namespace treegrad {

class FunctionNode;
class Variable;

using VarPtr = std::shared_ptr<Variable>;
using FnPtr = std::shared_ptr<FunctionNode>;

// One value node in the define-by-run graph. Ownership points backward only:
// a Variable keeps its creator alive and a creator keeps its inputs alive,
// so dropping every reference to the downstream end of a graph releases the
// whole structure while leaves held elsewhere (parameters) survive.
class Variable {
 public:
  explicit Variable(Tensor v);
  ~Variable();
  Variable(const Variable&) = delete;
  Variable& operator=(const Variable&) = delete;

  static VarPtr leaf(Tensor v) { return std::make_shared<Variable>(std::move(v)); }

  Tensor value;
  std::optional<Tensor> grad;  // accumulated during backward; empty until then
  FnPtr creator;               // null for leaves

  // Branch gate bookkeeping. consumer_count is the number of registered
  // downstream uses; forward_count is how many of those have not yet handed
  // back a gradient contribution. Recursion past this node happens exactly
  // once, when forward_count drains to zero.
  int consumer_count = 0;
  int forward_count = 0;
  bool proceeded = false;  // the gate already fired once

  // Latest-block marking. Only block roots carry a block_id. The marking
  // pass sets is_last_backward; backward prunes (no recursion into this
  // node's subgraph) when the flag holds false.
  std::optional<int> block_id;
  std::optional<bool> is_last_backward;

  std::uint64_t id() const { return id_; }
  bool is_leaf() const { return creator == nullptr; }

  static long live_count();

 private:
  std::uint64_t id_;
};

// An executed operation. Subclasses cache whatever forward intermediates
// their backward needs; input values may be read live because no node is
// backpropagated after its inputs change (updates happen after backward,
// and stale graph regions are never traversed again).
class FunctionNode : public std::enable_shared_from_this<FunctionNode> {
 public:
  explicit FunctionNode(std::vector<VarPtr> inputs);
  virtual ~FunctionNode();
  FunctionNode(const FunctionNode&) = delete;
  FunctionNode& operator=(const FunctionNode&) = delete;

  // gradient of the objective w.r.t. each input, given the gradient w.r.t.
  // the output; result order matches inputs()
  virtual std::vector<Tensor> backward(const Tensor& grad_out) const = 0;
  virtual const char* kind() const = 0;

  const std::vector<VarPtr>& inputs() const { return inputs_; }
  std::uint64_t id() const { return id_; }
  std::size_t out_rows() const { return out_rows_; }
  std::size_t out_cols() const { return out_cols_; }

  static long live_count();

  // creates the output Variable and wires its creator link; call once
  VarPtr attach_output(Tensor value);

 protected:
  std::vector<VarPtr> inputs_;

 private:
  std::uint64_t id_;
  std::size_t out_rows_ = 0;
  std::size_t out_cols_ = 0;
  bool output_attached_ = false;
};

// Bumps v's consumer bookkeeping; called once per (node, input slot) when a
// node is constructed.
void register_consumption(Variable& v);

enum class GateDecision { proceed, defer };
enum class GuardDecision { proceed, prune };

// Branch gate: one gradient contribution has just been accumulated into v.
// Decrements the pending-consumer count; defers recursion until the last
// contribution arrives. A contribution after the gate already fired means a
// second backward without a grad reset and raises GraphError.
GateDecision branch_gate(Variable& v);

// Latest-block guard: marks v's is_last_backward flag by comparing its
// block_id against the latest issued block, and reports whether backward
// may recurse into v's subgraph. Requires v.block_id to be set.
GuardDecision block_guard(Variable& v, int latest_block);

// Instrumentation collected by backward: how often each Variable was entered
// for recursion, how often each FunctionNode executed its backward, plus an
// ordered event log. Events: seed, visit, exec, contrib, defer, proceed,
// prune.
struct TraversalTrace {
  struct Event {
    const char* event;
    std::uint64_t node_id;
    std::string kind;
    int count;
  };

  std::unordered_map<std::uint64_t, int> variable_visits;
  std::unordered_map<std::uint64_t, int> backward_executions;
  std::vector<Event> events;

  int visits(std::uint64_t variable_id) const;
  int executions(std::uint64_t function_id) const;
  long total_executions() const;

  // one "event,node_id,kind,count" line per event, in order
  std::string dump() const;
};

// Reverse-mode sweep from root with the given seed gradient (same shape as
// root's value). Iterative with an explicit work stack; honors the branch
// gate on every contribution and the latest-block flags at recursion entry.
void backward(const VarPtr& root, const Tensor& seed, TraversalTrace& trace);
void backward(const VarPtr& root, const Tensor& seed);

// Clears grads and restores gate bookkeeping (forward_count, proceeded) on
// everything reachable from the given roots through creator links. Values,
// consumer counts and block marks are untouched.
void zero_grads(const std::vector<VarPtr>& roots);

// Current value of the shared node-id counter. Ids are handed out
// monotonically, so two watermarks bracket the nodes built between them.
std::uint64_t node_id_watermark();

}  // namespace treegrad

#include "treegrad/graph.hpp"

#include <atomic>
#include <unordered_set>
#include <utility>

#include "treegrad/errors.hpp"

namespace treegrad {

namespace {

std::atomic<std::uint64_t> g_next_id{0};
std::atomic<long> g_live_variables{0};
std::atomic<long> g_live_functions{0};

std::uint64_t take_id() { return g_next_id.fetch_add(1) + 1; }

void accumulate(std::optional<Tensor>& slot, const Tensor& t) {
  if (slot) {
    *slot = ew(*slot, t, EwKind::add);
  } else {
    slot = t;
  }
}

}  // namespace

Variable::Variable(Tensor v) : value(std::move(v)), id_(take_id()) {
  g_live_variables.fetch_add(1);
}

Variable::~Variable() { g_live_variables.fetch_sub(1); }

long Variable::live_count() { return g_live_variables.load(); }

FunctionNode::FunctionNode(std::vector<VarPtr> inputs)
    : inputs_(std::move(inputs)), id_(take_id()) {
  for (const VarPtr& in : inputs_) {
    if (!in) throw ArgumentError("function node got a null input");
    register_consumption(*in);
  }
  g_live_functions.fetch_add(1);
}

FunctionNode::~FunctionNode() { g_live_functions.fetch_sub(1); }

long FunctionNode::live_count() { return g_live_functions.load(); }

VarPtr FunctionNode::attach_output(Tensor value) {
  if (output_attached_) {
    throw GraphError("function node output attached twice");
  }
  output_attached_ = true;
  out_rows_ = value.rows();
  out_cols_ = value.cols();
  auto out = std::make_shared<Variable>(std::move(value));
  out->creator = shared_from_this();
  return out;
}

void register_consumption(Variable& v) {
  ++v.consumer_count;
  ++v.forward_count;
}

GateDecision branch_gate(Variable& v) {
  if (v.forward_count > 0) {
    --v.forward_count;
  } else if (v.proceeded) {
    throw GraphError(
        "double backward: node " + std::to_string(v.id()) +
        " received a gradient contribution after its gate already fired; "
        "reset grads before running backward again");
  }
  if (v.forward_count != 0) return GateDecision::defer;
  v.proceeded = true;
  return GateDecision::proceed;
}

GuardDecision block_guard(Variable& v, int latest_block) {
  if (!v.block_id) {
    throw ArgumentError("block_guard needs a variable carrying a block id");
  }
  bool last = (*v.block_id == latest_block);
  v.is_last_backward = last;
  return last ? GuardDecision::proceed : GuardDecision::prune;
}

int TraversalTrace::visits(std::uint64_t variable_id) const {
  auto it = variable_visits.find(variable_id);
  return it == variable_visits.end() ? 0 : it->second;
}

int TraversalTrace::executions(std::uint64_t function_id) const {
  auto it = backward_executions.find(function_id);
  return it == backward_executions.end() ? 0 : it->second;
}

long TraversalTrace::total_executions() const {
  long total = 0;
  for (const auto& [id, n] : backward_executions) total += n;
  return total;
}

std::string TraversalTrace::dump() const {
  std::string out;
  for (const Event& e : events) {
    out += e.event;
    out += ',';
    out += std::to_string(e.node_id);
    out += ',';
    out += e.kind;
    out += ',';
    out += std::to_string(e.count);
    out += '\n';
  }
  return out;
}

namespace {

void record(TraversalTrace& trace, const char* event, std::uint64_t id,
            const char* kind, int count) {
  trace.events.push_back(TraversalTrace::Event{event, id, kind, count});
}

}  // namespace

void backward(const VarPtr& root, const Tensor& seed, TraversalTrace& trace) {
  if (!root) throw ArgumentError("backward needs a non-null root");
  if (!seed.same_shape(root->value)) {
    throw DimensionError("backward seed shape " + seed.shape_str() +
                         " does not match root value shape " +
                         root->value.shape_str());
  }
  accumulate(root->grad, seed);
  record(trace, "seed", root->id(), "variable", 1);

  // Raw pointers are safe here: every variable on the stack is kept alive by
  // the chain of creator/input references hanging off root.
  std::vector<Variable*> stack;
  stack.push_back(root.get());

  while (!stack.empty()) {
    Variable* v = stack.back();
    stack.pop_back();
    int seen = ++trace.variable_visits[v->id()];
    record(trace, "visit", v->id(), v->creator ? v->creator->kind() : "leaf",
           seen);

    // Latest-block guard, applied at recursion entry: a node marked as not
    // belonging to the latest block keeps its accumulated gradient but its
    // subgraph is never traversed.
    if (v->is_last_backward && !*v->is_last_backward) {
      record(trace, "prune", v->id(), "stale_block", *v->block_id);
      continue;
    }
    if (!v->creator) continue;

    FunctionNode& fn = *v->creator;
    if (!v->grad) {
      throw GraphError("variable " + std::to_string(v->id()) +
                       " reached recursion without a gradient");
    }
    std::vector<Tensor> grads = fn.backward(*v->grad);
    int execs = ++trace.backward_executions[fn.id()];
    record(trace, "exec", fn.id(), fn.kind(), execs);
    if (grads.size() != fn.inputs().size()) {
      throw GraphError(std::string("backward of ") + fn.kind() +
                       " produced " + std::to_string(grads.size()) +
                       " gradients for " + std::to_string(fn.inputs().size()) +
                       " inputs");
    }

    for (std::size_t i = 0; i < grads.size(); ++i) {
      const VarPtr& input = fn.inputs()[i];
      if (!grads[i].same_shape(input->value)) {
        throw GraphError(std::string("backward of ") + fn.kind() +
                         " produced gradient shape " + grads[i].shape_str() +
                         " for input of shape " + input->value.shape_str());
      }
      accumulate(input->grad, grads[i]);
      record(trace, "contrib", input->id(), fn.kind(), 1);
      GateDecision gate = branch_gate(*input);
      if (gate == GateDecision::defer) {
        record(trace, "defer", input->id(), "gate", input->forward_count);
        continue;
      }
      record(trace, "proceed", input->id(), "gate", 0);
      stack.push_back(input.get());
    }
  }
}

void backward(const VarPtr& root, const Tensor& seed) {
  TraversalTrace trace;
  backward(root, seed, trace);
}

void zero_grads(const std::vector<VarPtr>& roots) {
  std::unordered_set<Variable*> seen;
  std::vector<Variable*> stack;
  for (const VarPtr& r : roots) {
    if (r && seen.insert(r.get()).second) stack.push_back(r.get());
  }
  while (!stack.empty()) {
    Variable* v = stack.back();
    stack.pop_back();
    v->grad.reset();
    v->forward_count = v->consumer_count;
    v->proceeded = false;
    if (!v->creator) continue;
    for (const VarPtr& in : v->creator->inputs()) {
      if (seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
}

std::uint64_t node_id_watermark() { return g_next_id.load(); }

}  // namespace treegrad

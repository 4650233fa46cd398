#include "treegrad/lstm.hpp"

#include <utility>

#include "treegrad/errors.hpp"

namespace treegrad {

namespace {

VarPtr zeros_leaf(std::size_t rows, std::size_t cols) {
  return Variable::leaf(Tensor::zeros(rows, cols));
}

void check_state(const LstmState& s, const char* who) {
  if (!s.c || !s.h) {
    throw ArgumentError(std::string(who) + " got a state with null members");
  }
  if (!s.c->value.same_shape(s.h->value)) {
    throw DimensionError(std::string(who) + " state shapes differ: c " +
                         s.c->value.shape_str() + " vs h " +
                         s.h->value.shape_str());
  }
}

}  // namespace

ChainLstmParams ChainLstmParams::init(std::size_t hidden,
                                      std::size_t input_dim, double scale,
                                      Rng& rng) {
  if (hidden == 0 || input_dim == 0) {
    throw ArgumentError("chain cell sizes must be positive");
  }
  ChainLstmParams p;
  auto w = [&](std::size_t r, std::size_t c) {
    return Variable::leaf(rand_init(r, c, scale, rng));
  };
  p.w_fh = w(hidden, hidden);
  p.w_fx = w(hidden, input_dim);
  p.p_f = zeros_leaf(hidden, 1);
  p.b_f = zeros_leaf(hidden, 1);
  p.w_i = w(hidden, input_dim);
  p.u_i = w(hidden, hidden);
  p.p_i = zeros_leaf(hidden, 1);
  p.b_i = zeros_leaf(hidden, 1);
  p.w_g = w(hidden, input_dim);
  p.u_g = w(hidden, hidden);
  p.b_g = zeros_leaf(hidden, 1);
  p.w_o = w(hidden, input_dim);
  p.u_o = w(hidden, hidden);
  p.p_o = zeros_leaf(hidden, 1);
  p.b_o = zeros_leaf(hidden, 1);
  return p;
}

std::vector<VarPtr> ChainLstmParams::all() const {
  return {w_fh, w_fx, p_f, b_f, w_i, u_i, p_i, b_i,
          w_g,  u_g,  b_g, w_o, u_o, p_o, b_o};
}

SLstmParams SLstmParams::init(std::size_t hidden, double scale, Rng& rng) {
  if (hidden == 0) throw ArgumentError("combiner cell size must be positive");
  SLstmParams p;
  auto w = [&]() { return Variable::leaf(rand_init(hidden, hidden, scale, rng)); };
  auto b = [&]() { return zeros_leaf(hidden, 1); };
  p.w_hi_l = w();
  p.w_hi_r = w();
  p.w_ci_l = w();
  p.w_ci_r = w();
  p.b_i = b();
  p.w_hfl_l = w();
  p.w_hfl_r = w();
  p.w_cfl_l = w();
  p.w_cfl_r = w();
  p.b_fl = b();
  p.w_hfr_l = w();
  p.w_hfr_r = w();
  p.w_cfr_l = w();
  p.w_cfr_r = w();
  p.b_fr = b();
  p.w_hx_l = w();
  p.w_hx_r = w();
  p.b_x = b();
  p.w_ho_l = w();
  p.w_ho_r = w();
  p.w_co = w();
  p.b_o = b();
  return p;
}

std::vector<VarPtr> SLstmParams::all() const {
  return {w_hi_l,  w_hi_r,  w_ci_l,  w_ci_r,  b_i,  w_hfl_l, w_hfl_r, w_cfl_l,
          w_cfl_r, b_fl,    w_hfr_l, w_hfr_r, w_cfr_l, w_cfr_r, b_fr, w_hx_l,
          w_hx_r,  b_x,     w_ho_l,  w_ho_r,  w_co, b_o};
}

std::pair<LstmState, ChainStepTrace> chain_lstm_step(const ChainLstmParams& p,
                                                     const VarPtr& x,
                                                     const LstmState& prev) {
  if (!x) throw ArgumentError("chain_lstm_step got a null input");
  check_state(prev, "chain_lstm_step");

  // forget, input and candidate gates read the previous state
  VarPtr pre_f = add_node(add_node(linear(p.w_fh, prev.h, p.b_f),
                                   linear(p.w_fx, x)),
                          hadamard_node(p.p_f, prev.c));
  VarPtr f = sigmoid_node(pre_f);

  VarPtr pre_i = add_node(add_node(linear(p.w_i, x, p.b_i),
                                   linear(p.u_i, prev.h)),
                          hadamard_node(p.p_i, prev.c));
  VarPtr i = sigmoid_node(pre_i);

  VarPtr pre_g = add_node(linear(p.w_g, x, p.b_g), linear(p.u_g, prev.h));
  VarPtr g = tanh_node(pre_g);

  VarPtr c = add_node(hadamard_node(i, g), hadamard_node(f, prev.c));

  // output gate peeks at the new memory
  VarPtr pre_o = add_node(add_node(linear(p.w_o, x, p.b_o),
                                   linear(p.u_o, prev.h)),
                          hadamard_node(p.p_o, c));
  VarPtr o = sigmoid_node(pre_o);

  VarPtr h = hadamard_node(o, tanh_node(c));

  ChainStepTrace trace{f, i, g, o, c, h};
  return {LstmState{c, h}, trace};
}

DeltaSet chain_lstm_deltas(const ChainStepTrace& t, const Tensor& prev_c,
                           const Tensor& dh) {
  if (!t.c || !t.o || !t.f || !t.i || !t.g) {
    throw ArgumentError("chain_lstm_deltas got an incomplete trace");
  }
  if (!dh.same_shape(t.c->value)) {
    throw DimensionError("chain_lstm_deltas dh shape " + dh.shape_str() +
                         " does not match state shape " +
                         t.c->value.shape_str());
  }
  Tensor tanh_c = map(t.c->value, MapKind::tanh);
  DeltaSet d;
  d.d_o = ew(tanh_c, dh, EwKind::mul);
  Tensor one_minus = tanh_c;
  for (double& v : one_minus.data()) v = 1.0 - v * v;
  d.d_c = ew(ew(one_minus, t.o->value, EwKind::mul), dh, EwKind::mul);
  d.d_f = ew(prev_c, d.d_c, EwKind::mul);
  d.d_c_prev = ew(t.f->value, d.d_c, EwKind::mul);
  d.d_i = ew(t.g->value, d.d_c, EwKind::mul);
  d.d_g = ew(t.i->value, d.d_c, EwKind::mul);
  return d;
}

std::pair<LstmState, TreeStepTrace> slstm_step(const SLstmParams& p,
                                               const LstmState& left,
                                               const LstmState& right,
                                               CellUpdate update) {
  check_state(left, "slstm_step");
  check_state(right, "slstm_step");
  if (!left.h->value.same_shape(right.h->value)) {
    throw DimensionError("slstm_step child shapes differ: left " +
                         left.h->value.shape_str() + " vs right " +
                         right.h->value.shape_str());
  }

  auto gate_pre = [&](const VarPtr& wh_l, const VarPtr& wh_r,
                      const VarPtr& wc_l, const VarPtr& wc_r,
                      const VarPtr& bias) {
    VarPtr hs = add_node(linear(wh_l, left.h, bias), linear(wh_r, right.h));
    VarPtr cs = add_node(linear(wc_l, left.c), linear(wc_r, right.c));
    return add_node(hs, cs);
  };

  VarPtr i = sigmoid_node(gate_pre(p.w_hi_l, p.w_hi_r, p.w_ci_l, p.w_ci_r,
                                   p.b_i));
  VarPtr f_l = sigmoid_node(gate_pre(p.w_hfl_l, p.w_hfl_r, p.w_cfl_l,
                                     p.w_cfl_r, p.b_fl));
  VarPtr f_r = sigmoid_node(gate_pre(p.w_hfr_l, p.w_hfr_r, p.w_cfr_l,
                                     p.w_cfr_r, p.b_fr));

  VarPtr x = add_node(linear(p.w_hx_l, left.h, p.b_x),
                      linear(p.w_hx_r, right.h));

  VarPtr kept_left = hadamard_node(f_l, left.c);
  VarPtr candidate = tanh_node(x);
  VarPtr c;
  if (update == CellUpdate::left_cell_only) {
    // the right child's memory enters only through the gate pre-activations
    c = add_node(kept_left, hadamard_node(f_r, hadamard_node(i, candidate)));
  } else {
    VarPtr kept_right = hadamard_node(f_r, right.c);
    c = add_node(add_node(kept_left, kept_right),
                 hadamard_node(i, candidate));
  }

  VarPtr o = sigmoid_node(add_node(add_node(linear(p.w_ho_l, left.h, p.b_o),
                                            linear(p.w_ho_r, right.h)),
                                   linear(p.w_co, c)));
  VarPtr h = hadamard_node(o, tanh_node(c));

  TreeStepTrace trace{i, f_l, f_r, x, c, h};
  return {LstmState{c, h}, trace};
}

TreeBuildResult build_lstm_tree(const SLstmParams& p,
                                const std::vector<LstmState>& leaves,
                                CellUpdate update) {
  if (leaves.empty()) {
    throw ArgumentError("build_lstm_tree needs at least one leaf state");
  }
  for (const LstmState& s : leaves) check_state(s, "build_lstm_tree");

  TreeBuildResult result;
  result.root = leaves[0];
  for (std::size_t k = 1; k < leaves.size(); ++k) {
    result.root = slstm_step(p, result.root, leaves[k], update).first;
    ++result.steps;
  }
  result.root_var = result.root.h;
  return result;
}

SLstmWeights SLstmWeights::from(const SLstmParams& p) {
  SLstmWeights w;
  w.w_hi_l = p.w_hi_l->value;
  w.w_hi_r = p.w_hi_r->value;
  w.w_ci_l = p.w_ci_l->value;
  w.w_ci_r = p.w_ci_r->value;
  w.b_i = p.b_i->value;
  w.w_hfl_l = p.w_hfl_l->value;
  w.w_hfl_r = p.w_hfl_r->value;
  w.w_cfl_l = p.w_cfl_l->value;
  w.w_cfl_r = p.w_cfl_r->value;
  w.b_fl = p.b_fl->value;
  w.w_hfr_l = p.w_hfr_l->value;
  w.w_hfr_r = p.w_hfr_r->value;
  w.w_cfr_l = p.w_cfr_l->value;
  w.w_cfr_r = p.w_cfr_r->value;
  w.b_fr = p.b_fr->value;
  w.w_hx_l = p.w_hx_l->value;
  w.w_hx_r = p.w_hx_r->value;
  w.b_x = p.b_x->value;
  w.w_ho_l = p.w_ho_l->value;
  w.w_ho_r = p.w_ho_r->value;
  w.w_co = p.w_co->value;
  w.b_o = p.b_o->value;
  return w;
}

std::pair<Tensor, Tensor> slstm_step_eval(const SLstmWeights& w,
                                          const Tensor& c_l, const Tensor& h_l,
                                          const Tensor& c_r, const Tensor& h_r,
                                          CellUpdate update) {
  auto gate = [&](const Tensor& wh_l, const Tensor& wh_r, const Tensor& wc_l,
                  const Tensor& wc_r, const Tensor& bias) {
    Tensor pre = ew(ew(matmul(wh_l, h_l), matmul(wh_r, h_r), EwKind::add),
                    ew(matmul(wc_l, c_l), matmul(wc_r, c_r), EwKind::add),
                    EwKind::add);
    return map(ew(pre, bias, EwKind::add), MapKind::sigmoid);
  };

  Tensor i = gate(w.w_hi_l, w.w_hi_r, w.w_ci_l, w.w_ci_r, w.b_i);
  Tensor f_l = gate(w.w_hfl_l, w.w_hfl_r, w.w_cfl_l, w.w_cfl_r, w.b_fl);
  Tensor f_r = gate(w.w_hfr_l, w.w_hfr_r, w.w_cfr_l, w.w_cfr_r, w.b_fr);

  Tensor x = ew(ew(matmul(w.w_hx_l, h_l), matmul(w.w_hx_r, h_r), EwKind::add),
                w.b_x, EwKind::add);
  Tensor candidate = map(x, MapKind::tanh);

  Tensor c;
  if (update == CellUpdate::left_cell_only) {
    c = ew(ew(f_l, c_l, EwKind::mul),
           ew(f_r, ew(i, candidate, EwKind::mul), EwKind::mul), EwKind::add);
  } else {
    c = ew(ew(ew(f_l, c_l, EwKind::mul), ew(f_r, c_r, EwKind::mul),
              EwKind::add),
           ew(i, candidate, EwKind::mul), EwKind::add);
  }

  Tensor pre_o = ew(ew(matmul(w.w_ho_l, h_l), matmul(w.w_ho_r, h_r),
                       EwKind::add),
                    ew(matmul(w.w_co, c), w.b_o, EwKind::add), EwKind::add);
  Tensor o = map(pre_o, MapKind::sigmoid);
  Tensor h = ew(o, map(c, MapKind::tanh), EwKind::mul);
  return {std::move(c), std::move(h)};
}

}  // namespace treegrad

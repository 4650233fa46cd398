#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "treegrad/functions.hpp"
#include "treegrad/graph.hpp"
#include "treegrad/rng.hpp"
#include "treegrad/tensor.hpp"

namespace treegrad {

// Memory cell plus hidden output, both hidden x 1.
struct LstmState {
  VarPtr c;
  VarPtr h;
};

// Sequential LSTM cell with elementwise peephole weights. Gate wiring:
//   f = sig(w_fh*h_prev + w_fx*x + p_f(.)c_prev + b_f)
//   i = sig(w_i*x + u_i*h_prev + p_i(.)c_prev + b_i)
//   g = tanh(w_g*x + u_g*h_prev + b_g)
//   c = i(.)g + f(.)c_prev
//   o = sig(w_o*x + u_o*h_prev + p_o(.)c + b_o)
//   h = o(.)tanh(c)
struct ChainLstmParams {
  VarPtr w_fh, w_fx, p_f, b_f;
  VarPtr w_i, u_i, p_i, b_i;
  VarPtr w_g, u_g, b_g;
  VarPtr w_o, u_o, p_o, b_o;

  // weights uniform(-scale, scale), peepholes and biases zero
  static ChainLstmParams init(std::size_t hidden, std::size_t input_dim,
                              double scale, Rng& rng);
  std::vector<VarPtr> all() const;
  std::size_t hidden() const { return b_f->value.rows(); }
};

// Binary-combiner LSTM cell joining a left and a right child state. All
// weights are hidden x hidden matrices (including the cell-to-gate ones),
// biases hidden x 1:
//   i   = sig(w_hi_l*h_l + w_hi_r*h_r + w_ci_l*c_l + w_ci_r*c_r + b_i)
//   f_l = sig(w_hfl_l*h_l + w_hfl_r*h_r + w_cfl_l*c_l + w_cfl_r*c_r + b_fl)
//   f_r = sig(w_hfr_l*h_l + w_hfr_r*h_r + w_cfr_l*c_l + w_cfr_r*c_r + b_fr)
//   x   = w_hx_l*h_l + w_hx_r*h_r + b_x
//   c   = f_l(.)c_l + f_r(.)i(.)tanh(x)          [left_cell_only]
//         f_l(.)c_l + f_r(.)c_r + i(.)tanh(x)    [symmetric]
//   o   = sig(w_ho_l*h_l + w_ho_r*h_r + w_co*c + b_o)
//   h   = o(.)tanh(c)
struct SLstmParams {
  VarPtr w_hi_l, w_hi_r, w_ci_l, w_ci_r, b_i;
  VarPtr w_hfl_l, w_hfl_r, w_cfl_l, w_cfl_r, b_fl;
  VarPtr w_hfr_l, w_hfr_r, w_cfr_l, w_cfr_r, b_fr;
  VarPtr w_hx_l, w_hx_r, b_x;
  VarPtr w_ho_l, w_ho_r, w_co, b_o;

  static SLstmParams init(std::size_t hidden, double scale, Rng& rng);
  std::vector<VarPtr> all() const;
  std::size_t hidden() const { return b_i->value.rows(); }
};

// Which memory terms enter the combined cell. left_cell_only keeps only the
// left child's memory (the default form); symmetric keeps both children's.
enum class CellUpdate { left_cell_only, symmetric };

// Intermediate Variables of one sequential step, for inspection and for the
// closed-form gradient set below.
struct ChainStepTrace {
  VarPtr f, i, g, o, c, h;
};

// Intermediates of one combiner step.
struct TreeStepTrace {
  VarPtr i, f_l, f_r, x, c, h;
};

// Closed-form gate gradients of the sequential cell for a given dL/dh,
// valid when the peephole weights are zero (the closed forms ignore
// peephole paths):
//   d_o = tanh(c) (.) dh
//   d_c = (1 - tanh(c)^2) (.) o (.) dh
//   d_f = c_prev (.) d_c
//   d_c_prev = f (.) d_c
//   d_i = g (.) d_c
//   d_g = i (.) d_c
struct DeltaSet {
  Tensor d_o, d_c, d_f, d_c_prev, d_i, d_g;
};

std::pair<LstmState, ChainStepTrace> chain_lstm_step(const ChainLstmParams& p,
                                                     const VarPtr& x,
                                                     const LstmState& prev);

DeltaSet chain_lstm_deltas(const ChainStepTrace& t, const Tensor& prev_c,
                           const Tensor& dh);

std::pair<LstmState, TreeStepTrace> slstm_step(
    const SLstmParams& p, const LstmState& left, const LstmState& right,
    CellUpdate update = CellUpdate::left_cell_only);

// Left-leaning fold of leaf states: the running state is always the left
// child and the next leaf the right child. A single leaf is returned
// unchanged; n leaves take n-1 combiner steps.
struct TreeBuildResult {
  LstmState root;
  VarPtr root_var;  // root.h
  std::size_t steps = 0;
};

TreeBuildResult build_lstm_tree(const SLstmParams& p,
                                const std::vector<LstmState>& leaves,
                                CellUpdate update = CellUpdate::left_cell_only);

// Plain-tensor copy of combiner weights, for forward-only evaluation that
// builds no graph (used by prediction).
struct SLstmWeights {
  Tensor w_hi_l, w_hi_r, w_ci_l, w_ci_r, b_i;
  Tensor w_hfl_l, w_hfl_r, w_cfl_l, w_cfl_r, b_fl;
  Tensor w_hfr_l, w_hfr_r, w_cfr_l, w_cfr_r, b_fr;
  Tensor w_hx_l, w_hx_r, b_x;
  Tensor w_ho_l, w_ho_r, w_co, b_o;

  static SLstmWeights from(const SLstmParams& p);
};

// Same arithmetic as slstm_step, on plain tensors. Returns (c, h).
std::pair<Tensor, Tensor> slstm_step_eval(const SLstmWeights& w,
                                          const Tensor& c_l, const Tensor& h_l,
                                          const Tensor& c_r, const Tensor& h_r,
                                          CellUpdate update);

}  // namespace treegrad

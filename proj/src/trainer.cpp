#include "treegrad/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <utility>

#include "treegrad/errors.hpp"
#include "treegrad/functions.hpp"

namespace treegrad {

std::vector<double> gen_sine(std::size_t n, double step, double phase) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::sin(phase + static_cast<double>(i) * step);
  }
  return out;
}

ForwardModel::ForwardModel(const BlockChain& chain)
    : cfg_(chain.config()),
      tree_(SLstmWeights::from(chain.tree_params())),
      lift_w_(chain.lift_w()->value),
      lift_b_(chain.lift_b()->value),
      head_w_(chain.head_w()->value),
      head_b_(chain.head_b()->value),
      state_c_(Tensor::zeros(cfg_.hidden, 1)),
      state_h_(Tensor::zeros(cfg_.hidden, 1)) {}

void ForwardModel::reset() {
  state_c_ = Tensor::zeros(cfg_.hidden, 1);
  state_h_ = Tensor::zeros(cfg_.hidden, 1);
}

double ForwardModel::step(const std::vector<double>& window) {
  if (window.size() != cfg_.seq_len) {
    throw ArgumentError("forward step expects a window of " +
                        std::to_string(cfg_.seq_len) + " samples, got " +
                        std::to_string(window.size()));
  }
  Tensor batch = Tensor::column(window);
  Tensor normed = standardize(batch, batch_stats(batch, cfg_.eps));

  Tensor c = state_c_;
  Tensor h = state_h_;
  for (std::size_t j = 0; j < cfg_.seq_len; ++j) {
    Tensor leaf_h = ew(matmul(lift_w_, Tensor::scalar(normed.at(j, 0))),
                       lift_b_, EwKind::add);
    Tensor leaf_c = Tensor::zeros(cfg_.hidden, 1);
    auto next = slstm_step_eval(tree_, c, h, leaf_c, leaf_h, cfg_.cell_update);
    c = std::move(next.first);
    h = std::move(next.second);
  }
  state_c_ = c;
  state_h_ = h;

  Tensor read = ew(matmul(head_w_, h), head_b_, EwKind::add);
  return std::tanh(read.at(0, 0));
}

TrainResult train(const TrainConfig& cfg,
                  const std::vector<int>& snapshot_steps) {
  cfg.validate();
  TrainResult result;
  Rng rng(cfg.seed);
  result.chain = std::make_shared<BlockChain>(cfg, rng);

  std::size_t samples = static_cast<std::size_t>(cfg.epochs) * cfg.seq_len + 1;
  std::vector<double> series = gen_sine(samples, cfg.sine_step, cfg.sine_phase);

  for (int step = 1; step <= cfg.epochs; ++step) {
    std::size_t base = static_cast<std::size_t>(step - 1) * cfg.seq_len;
    std::vector<double> window(series.begin() + base,
                               series.begin() + base + cfg.seq_len);
    Tensor inputs = Tensor::column(window);
    Tensor target = Tensor::scalar(series[base + cfg.seq_len]);

    double loss = 0.0;
    double ms = 0.0;
    try {
      auto [l, e] = result.chain->train_step(inputs, target, cfg.lr);
      loss = l;
      ms = e;
    } catch (const DivergenceError& de) {
      result.diverged_at = de.step();
      break;
    }
    result.log.rows.push_back(TrainLogRow{step, step, loss, ms});

    for (int want : snapshot_steps) {
      if (want == step) {
        result.snapshots.emplace_back(step, ForwardModel(*result.chain));
      }
    }
  }
  return result;
}

PredictionTrace predict(ForwardModel model, const TrainConfig& cfg,
                        const std::vector<double>& prime,
                        std::size_t horizon) {
  std::size_t m = cfg.seq_len;
  if (prime.size() < m) {
    throw ArgumentError("prime needs at least " + std::to_string(m) +
                        " samples, got " + std::to_string(prime.size()));
  }
  if (horizon < 1) throw ArgumentError("horizon must be at least 1");

  model.reset();

  // prime with consecutive windows aligned so the last ends the sequence;
  // the last prime window's output is the first generated value
  std::size_t k = prime.size() / m;
  std::size_t start = prime.size() - k * m;
  double next = 0.0;
  for (std::size_t w = 0; w < k; ++w) {
    std::vector<double> window(prime.begin() + start + w * m,
                               prime.begin() + start + (w + 1) * m);
    next = model.step(window);
  }

  std::vector<double> buffer(prime.end() - m, prime.end());
  PredictionTrace trace;
  for (std::size_t j = 0; j < horizon; ++j) {
    double t = cfg.sine_phase +
               static_cast<double>(prime.size() + j) * cfg.sine_step;
    trace.rows.push_back(PredictionRow{t, std::sin(t), next});
    // slide the window by one and predict the following value
    buffer.erase(buffer.begin());
    buffer.push_back(next);
    next = model.step(buffer);
  }
  return trace;
}

PredictionTrace predict(const BlockChain& chain,
                        const std::vector<double>& prime,
                        std::size_t horizon) {
  return predict(ForwardModel(chain), chain.config(), prime, horizon);
}

std::vector<std::pair<int, TrainLog>> sweep(const TrainConfig& base,
                                            const std::vector<int>& intvls,
                                            bool parallel) {
  if (intvls.empty()) throw ArgumentError("sweep needs at least one intvl");

  auto one = [&base](int intvl) {
    TrainConfig cfg = base;
    cfg.intvl = intvl;
    return train(cfg).log;
  };

  std::vector<std::pair<int, TrainLog>> out;
  if (parallel) {
    std::vector<std::future<TrainLog>> futures;
    futures.reserve(intvls.size());
    for (int intvl : intvls) {
      futures.push_back(std::async(std::launch::async, one, intvl));
    }
    for (std::size_t i = 0; i < intvls.size(); ++i) {
      try {
        out.emplace_back(intvls[i], futures[i].get());
      } catch (const std::exception&) {
        // failed configuration contributes nothing but does not stop the rest
      }
    }
  } else {
    for (int intvl : intvls) {
      try {
        out.emplace_back(intvl, one(intvl));
      } catch (const std::exception&) {
      }
    }
  }
  return out;
}

GradCheckReport grad_check(const GraphBuilder& build,
                           const std::vector<Tensor>& theta, double epsilon) {
  if (!(epsilon > 0.0)) throw ArgumentError("grad_check epsilon must be positive");
  if (theta.empty()) throw ArgumentError("grad_check needs parameters");

  auto make_leaves = [](const std::vector<Tensor>& values) {
    std::vector<VarPtr> leaves;
    leaves.reserve(values.size());
    for (const Tensor& t : values) leaves.push_back(Variable::leaf(t));
    return leaves;
  };

  auto eval = [&](const std::vector<Tensor>& values) {
    std::vector<VarPtr> leaves = make_leaves(values);
    VarPtr out = build(leaves);
    if (!out || out->value.rows() != 1 || out->value.cols() != 1) {
      throw ArgumentError("grad_check builder must return a 1x1 output");
    }
    double v = out->value.at(0, 0);
    if (!std::isfinite(v)) {
      throw EvaluationError("non-finite value during finite differencing");
    }
    return v;
  };

  // analytic gradients once
  std::vector<VarPtr> leaves = make_leaves(theta);
  VarPtr out = build(leaves);
  if (!out || out->value.rows() != 1 || out->value.cols() != 1) {
    throw ArgumentError("grad_check builder must return a 1x1 output");
  }
  if (!std::isfinite(out->value.at(0, 0))) {
    throw EvaluationError("non-finite output in grad_check");
  }
  backward(out, Tensor::scalar(1.0));

  GradCheckReport report;
  std::vector<Tensor> probe = theta;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    for (std::size_t k = 0; k < theta[p].size(); ++k) {
      double original = probe[p].data()[k];
      probe[p].data()[k] = original + epsilon;
      double fp = eval(probe);
      probe[p].data()[k] = original - epsilon;
      double fm = eval(probe);
      probe[p].data()[k] = original;

      double num = (fp - fm) / (2.0 * epsilon);
      double ana = leaves[p]->grad ? leaves[p]->grad->data()[k] : 0.0;
      double diff = std::fabs(num - ana);

      ++report.coords;
      if (diff > report.worst_abs_diff) report.worst_abs_diff = diff;
      if (std::fabs(ana) > kGradAbsTol) {
        double rel = diff / std::fabs(ana);
        if (rel > report.max_rel_err) report.max_rel_err = rel;
      } else if (diff > report.max_abs_err) {
        report.max_abs_err = diff;
      }
      double excess = diff - (kGradAbsTol + kGradRelTol * std::fabs(ana));
      if (excess > report.worst_excess) report.worst_excess = excess;
    }
  }
  return report;
}

std::vector<NamedBuilder> standard_grad_checks(std::size_t hidden, Rng& rng) {
  std::vector<NamedBuilder> out;

  auto rand_t = [&rng](std::size_t r, std::size_t c) {
    return rand_init(r, c, 0.9, rng);
  };

  // each builder ends in a scalar through mse against a fixed target so the
  // whole path, including the head op, is differentiated
  {
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "linear",
        {rand_t(hidden, hidden), rand_t(hidden, 1), rand_t(hidden, 1)},
        [target](const std::vector<VarPtr>& v) {
          return mse_node(linear(v[0], v[1], v[2]), target);
        }});
  }
  {
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "tanh",
        {rand_t(hidden, 1)},
        [target](const std::vector<VarPtr>& v) {
          return mse_node(tanh_node(v[0]), target);
        }});
  }
  {
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "sigmoid",
        {rand_t(hidden, 1)},
        [target](const std::vector<VarPtr>& v) {
          return mse_node(sigmoid_node(v[0]), target);
        }});
  }
  {
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "add",
        {rand_t(hidden, 1), rand_t(hidden, 1)},
        [target](const std::vector<VarPtr>& v) {
          return mse_node(add_node(v[0], v[1]), target);
        }});
  }
  {
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "hadamard",
        {rand_t(hidden, 1), rand_t(hidden, 1)},
        [target](const std::vector<VarPtr>& v) {
          return mse_node(hadamard_node(v[0], v[1]), target);
        }});
  }
  {
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "mse",
        {rand_t(hidden, 1)},
        [target](const std::vector<VarPtr>& v) {
          return mse_node(v[0], target);
        }});
  }
  {
    out.push_back(NamedBuilder{
        "sum_loss",
        {rand_t(1, 1), rand_t(1, 1), rand_t(1, 1)},
        [](const std::vector<VarPtr>& v) {
          std::vector<VarPtr> losses;
          for (const VarPtr& x : v) {
            losses.push_back(mse_node(x, Tensor::scalar(0.25)));
          }
          return sum_loss_node(losses);
        }});
  }
  {
    // full sequential step: all parameters plus input and previous state
    std::size_t input_dim = 3;
    Rng init_rng(rng.next());
    ChainLstmParams proto =
        ChainLstmParams::init(hidden, input_dim, 0.9, init_rng);
    std::vector<Tensor> theta;
    for (const VarPtr& p : proto.all()) theta.push_back(p->value);
    // give the zero-initialized peepholes and biases real values
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (theta[j].cols() == 1) theta[j] = rand_t(theta[j].rows(), 1);
    }
    theta.push_back(rand_t(input_dim, 1));  // x
    theta.push_back(rand_t(hidden, 1));     // c_prev
    theta.push_back(rand_t(hidden, 1));     // h_prev
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "chain_lstm_step", theta,
        [target](const std::vector<VarPtr>& v) {
          ChainLstmParams p;
          p.w_fh = v[0]; p.w_fx = v[1]; p.p_f = v[2]; p.b_f = v[3];
          p.w_i = v[4]; p.u_i = v[5]; p.p_i = v[6]; p.b_i = v[7];
          p.w_g = v[8]; p.u_g = v[9]; p.b_g = v[10];
          p.w_o = v[11]; p.u_o = v[12]; p.p_o = v[13]; p.b_o = v[14];
          LstmState prev{v[16], v[17]};
          auto [state, trace] = chain_lstm_step(p, v[15], prev);
          return mse_node(state.h, target);
        }});
  }
  {
    // full combiner step: all parameters plus both child states
    Rng init_rng(rng.next());
    SLstmParams proto = SLstmParams::init(hidden, 0.9, init_rng);
    std::vector<Tensor> theta;
    for (const VarPtr& p : proto.all()) theta.push_back(p->value);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (theta[j].cols() == 1) theta[j] = rand_t(theta[j].rows(), 1);
    }
    theta.push_back(rand_t(hidden, 1));  // c_l
    theta.push_back(rand_t(hidden, 1));  // h_l
    theta.push_back(rand_t(hidden, 1));  // c_r
    theta.push_back(rand_t(hidden, 1));  // h_r
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "slstm_step", theta,
        [target](const std::vector<VarPtr>& v) {
          SLstmParams p;
          p.w_hi_l = v[0]; p.w_hi_r = v[1]; p.w_ci_l = v[2]; p.w_ci_r = v[3];
          p.b_i = v[4];
          p.w_hfl_l = v[5]; p.w_hfl_r = v[6]; p.w_cfl_l = v[7];
          p.w_cfl_r = v[8]; p.b_fl = v[9];
          p.w_hfr_l = v[10]; p.w_hfr_r = v[11]; p.w_cfr_l = v[12];
          p.w_cfr_r = v[13]; p.b_fr = v[14];
          p.w_hx_l = v[15]; p.w_hx_r = v[16]; p.b_x = v[17];
          p.w_ho_l = v[18]; p.w_ho_r = v[19]; p.w_co = v[20]; p.b_o = v[21];
          LstmState left{v[22], v[23]};
          LstmState right{v[24], v[25]};
          auto [state, trace] = slstm_step(p, left, right);
          return mse_node(state.h, target);
        }});
  }
  {
    // four leaves folded through shared parameters
    Rng init_rng(rng.next());
    SLstmParams proto = SLstmParams::init(hidden, 0.9, init_rng);
    std::vector<Tensor> theta;
    for (const VarPtr& p : proto.all()) theta.push_back(p->value);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (theta[j].cols() == 1) theta[j] = rand_t(theta[j].rows(), 1);
    }
    for (int leaf = 0; leaf < 4; ++leaf) {
      theta.push_back(rand_t(hidden, 1));  // c
      theta.push_back(rand_t(hidden, 1));  // h
    }
    Tensor target = rand_t(hidden, 1);
    out.push_back(NamedBuilder{
        "slstm_tree", theta,
        [target](const std::vector<VarPtr>& v) {
          SLstmParams p;
          p.w_hi_l = v[0]; p.w_hi_r = v[1]; p.w_ci_l = v[2]; p.w_ci_r = v[3];
          p.b_i = v[4];
          p.w_hfl_l = v[5]; p.w_hfl_r = v[6]; p.w_cfl_l = v[7];
          p.w_cfl_r = v[8]; p.b_fl = v[9];
          p.w_hfr_l = v[10]; p.w_hfr_r = v[11]; p.w_cfr_l = v[12];
          p.w_cfr_r = v[13]; p.b_fr = v[14];
          p.w_hx_l = v[15]; p.w_hx_r = v[16]; p.b_x = v[17];
          p.w_ho_l = v[18]; p.w_ho_r = v[19]; p.w_co = v[20]; p.b_o = v[21];
          std::vector<LstmState> leaves;
          for (int leaf = 0; leaf < 4; ++leaf) {
            leaves.push_back(LstmState{v[22 + 2 * leaf], v[23 + 2 * leaf]});
          }
          TreeBuildResult tree = build_lstm_tree(p, leaves);
          return mse_node(tree.root_var, target);
        }});
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw EvaluationError("cannot open " + tmp.string() + " for writing");
    }
    out << content;
  }
  fs::rename(tmp, target);
}

}  // namespace

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  std::string content = "epoch,step,loss,elapsed_ms\n";
  for (const TrainLogRow& row : log.rows) {
    content += std::to_string(row.epoch);
    content += ',';
    content += std::to_string(row.step);
    content += ',';
    content += format_double(row.loss);
    content += ',';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", row.elapsed_ms);
    content += buf;
    content += '\n';
  }
  atomic_write(path, content);
}

void write_prediction_csv(const std::string& path,
                          const PredictionTrace& trace) {
  std::string content = "t,input,predicted\n";
  for (const PredictionRow& row : trace.rows) {
    content += format_double(row.t);
    content += ',';
    content += format_double(row.input);
    content += ',';
    content += format_double(row.predicted);
    content += '\n';
  }
  atomic_write(path, content);
}

}  // namespace treegrad

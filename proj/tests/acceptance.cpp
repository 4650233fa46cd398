// Acceptance suite: nine end-to-end checks, one [PASS]/[FAIL] line each.
// Exits 0 only if every criterion holds, including its time budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "treegrad/trainer.hpp"

using namespace treegrad;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double mean_loss(const TrainLog& log, std::size_t lo, std::size_t hi) {
  double acc = 0.0;
  for (std::size_t k = lo; k < hi; ++k) acc += log.rows[k].loss;
  return acc / static_cast<double>(hi - lo);
}

// rank correlation between position and value; ties count as neither
double kendall_tau(const std::vector<double>& xs) {
  long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      if (xs[j] > xs[i]) ++concordant;
      else if (xs[j] < xs[i]) ++discordant;
    }
  }
  double pairs = static_cast<double>(xs.size() * (xs.size() - 1) / 2);
  return (concordant - discordant) / pairs;
}

std::string drop_elapsed_column(const std::string& csv) {
  std::string out;
  std::stringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    std::size_t cut = line.rfind(',');
    out += line.substr(0, cut);
    out += '\n';
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

bool criterion1(std::string& detail) {
  // finite differences confirm every node kind and both cell steps, over at
  // least 20 random instances at small widths
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::size_t hidden = 2 + static_cast<std::size_t>(seed % 5);  // 2..6
    for (NamedBuilder& nb : standard_grad_checks(hidden, rng)) {
      GradCheckReport rep = grad_check(nb.build, nb.theta, 1e-6);
      if (!rep.ok()) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "seed %llu %s: worst excess %.3g (rel %.3g, abs %.3g)",
                      static_cast<unsigned long long>(seed), nb.name.c_str(),
                      rep.worst_excess, rep.max_rel_err, rep.max_abs_err);
        detail = buf;
        return false;
      }
    }
  }
  return true;
}

bool criterion2(std::string& detail) {
  // closed-form gate gradients match reverse-mode results to 1e-10 when the
  // peephole weights are zero
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(100 + inst);
    std::size_t hidden = 2 + static_cast<std::size_t>(inst % 7);  // 2..8
    std::size_t input_dim = 1 + static_cast<std::size_t>(inst % 4);
    ChainLstmParams p = ChainLstmParams::init(hidden, input_dim, 0.9, rng);
    VarPtr x = Variable::leaf(rand_init(input_dim, 1, 0.9, rng));
    LstmState prev{Variable::leaf(rand_init(hidden, 1, 0.9, rng)),
                   Variable::leaf(rand_init(hidden, 1, 0.9, rng))};
    auto [state, trace] = chain_lstm_step(p, x, prev);
    Tensor dh = rand_init(hidden, 1, 1.0, rng);
    backward(state.h, dh);
    DeltaSet d = chain_lstm_deltas(trace, prev.c->value, dh);

    struct Pair {
      const char* name;
      const Tensor* got;
      const Tensor* want;
    };
    Pair pairs[] = {{"d_o", &*trace.o->grad, &d.d_o},
                    {"d_c", &*trace.c->grad, &d.d_c},
                    {"d_f", &*trace.f->grad, &d.d_f},
                    {"d_c_prev", &*prev.c->grad, &d.d_c_prev},
                    {"d_i", &*trace.i->grad, &d.d_i},
                    {"d_g", &*trace.g->grad, &d.d_g}};
    for (const Pair& pr : pairs) {
      double diff = oracles::max_abs_diff(*pr.got, *pr.want);
      if (diff > 1e-10) {
        detail = "instance " + std::to_string(inst) + " " + pr.name +
                 " differs by " + std::to_string(diff);
        return false;
      }
    }
  }
  return true;
}

bool criterion3(std::string& detail) {
  // a value consumed k times receives k contributions but is expanded once,
  // and its gradient equals the sum over k disconnected copies
  for (int k = 2; k <= 4; ++k) {
    Rng rng(200 + k);
    Tensor pv = rand_init(3, 1, 0.9, rng);
    VarPtr p = Variable::leaf(pv);
    VarPtr shared = tanh_node(p);
    std::uint64_t shared_fn = shared->creator->id();
    VarPtr root;
    for (int j = 0; j < k; ++j) {
      VarPtr branch = sigmoid_node(shared);
      root = root ? add_node(root, branch) : branch;
    }
    TraversalTrace trace;
    backward(root, Tensor::full(3, 1, 1.0), trace);
    if (trace.visits(shared->id()) != 1 || trace.executions(shared_fn) != 1) {
      detail = "k=" + std::to_string(k) + ": shared node visited " +
               std::to_string(trace.visits(shared->id())) + "x, expanded " +
               std::to_string(trace.executions(shared_fn)) + "x";
      return false;
    }

    Tensor expected(3, 1, 0.0);
    for (int j = 0; j < k; ++j) {
      VarPtr pc = Variable::leaf(pv);
      backward(sigmoid_node(tanh_node(pc)), Tensor::full(3, 1, 1.0));
      expected = ew(expected, *pc->grad, EwKind::add);
    }
    double diff = oracles::max_abs_diff(*p->grad, expected);
    if (diff > 1e-12) {
      detail = "k=" + std::to_string(k) + ": gradient differs from " +
               "disconnected copies by " + std::to_string(diff);
      return false;
    }
  }
  return true;
}

bool criterion4(std::string& detail) {
  // with B chained blocks, backward executes nothing inside blocks 1..B-1
  // and parameter gradients equal an isolated rebuild of block B alone
  for (int B : {2, 5, 10}) {
    TrainConfig cfg;
    cfg.hidden = 8;
    cfg.intvl = B + 1;  // keep every block registered

    std::vector<double> series =
        gen_sine(static_cast<std::size_t>(B) * cfg.seq_len + 1, cfg.sine_step,
                 cfg.sine_phase);
    auto window_at = [&](int k) {
      std::vector<double> w(series.begin() + k * cfg.seq_len,
                            series.begin() + (k + 1) * cfg.seq_len);
      return Tensor::column(w);
    };
    auto target_at = [&](int k) {
      return Tensor::scalar(series[(k + 1) * cfg.seq_len]);
    };

    Rng r1(7);
    BlockChain full(cfg, r1);
    for (int k = 0; k < B; ++k) full.append_block(window_at(k), target_at(k));
    TraversalTrace trace = full.constrained_backward();

    for (int k = 0; k + 1 < B; ++k) {
      long execs = interior_executions(trace, full.blocks()[k]);
      if (execs != 0) {
        detail = "B=" + std::to_string(B) + ": block " + std::to_string(k + 1) +
                 " executed " + std::to_string(execs) + " backward nodes";
        return false;
      }
    }
    if (interior_executions(trace, full.blocks().back()) == 0) {
      detail = "B=" + std::to_string(B) + ": the latest block never ran";
      return false;
    }

    Rng r2(7);
    BlockChain solo(cfg, r2);
    if (B >= 2) {
      const BlockEntry& prev = full.blocks()[static_cast<std::size_t>(B) - 2];
      solo.set_carried_state(prev.root_c->value, prev.root->value);
    }
    solo.append_block(window_at(B - 1), target_at(B - 1));
    solo.constrained_backward();

    auto pf = full.parameters();
    auto ps = solo.parameters();
    for (std::size_t k = 0; k < pf.size(); ++k) {
      if (!pf[k]->grad || !ps[k]->grad) {
        detail = "B=" + std::to_string(B) + ": parameter " +
                 std::to_string(k) + " missing a gradient";
        return false;
      }
      double diff = oracles::max_abs_diff(*pf[k]->grad, *ps[k]->grad);
      if (diff > 1e-10) {
        detail = "B=" + std::to_string(B) + ": parameter " +
                 std::to_string(k) + " gradient differs by " +
                 std::to_string(diff);
        return false;
      }
    }
  }
  return true;
}

bool criterion5(std::string& detail) {
  for (std::size_t m : {4u, 16u, 64u}) {
    Rng rng(300 + m);
    // a generic batch and a waveform window, both must standardize cleanly
    std::vector<Tensor> batches;
    Tensor uniform_batch(m, 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      uniform_batch.at(i, 0) = rng.uniform(-3.0, 3.0);
    }
    batches.push_back(uniform_batch);
    batches.push_back(Tensor::column(gen_sine(m, 0.2, 0.0)));

    for (const Tensor& batch : batches) {
      Tensor z = standardize(batch, batch_stats(batch, 1e-5));
      BatchStats post = batch_stats(z, 1e-5);
      if (std::fabs(post.mean.at(0, 0)) >= 1e-10) {
        detail = "m=" + std::to_string(m) + ": standardized mean " +
                 std::to_string(post.mean.at(0, 0));
        return false;
      }
      if (std::fabs(post.variance.at(0, 0) - 1.0) >= 1e-3) {
        detail = "m=" + std::to_string(m) + ": standardized variance " +
                 std::to_string(post.variance.at(0, 0));
        return false;
      }
    }

    Tensor constant = Tensor::full(m, 1, 2.5);
    Tensor z = standardize(constant, batch_stats(constant, 1e-5));
    for (double v : z.data()) {
      if (v != 0.0) {
        detail = "m=" + std::to_string(m) + ": constant batch gave " +
                 std::to_string(v);
        return false;
      }
    }
  }
  return true;
}

struct SweepLogs {
  // seed -> intvl -> training log, shared between criteria 6 and 7
  std::map<std::uint64_t, std::map<int, TrainLog>> by_seed;
};

bool criterion6(SweepLogs& logs, std::string& detail) {
  const std::vector<std::uint64_t> seeds{42, 43, 44};
  const std::vector<int> intvls{5, 10, 15};

  for (std::uint64_t seed : seeds) {
    for (int intvl : intvls) {
      TrainConfig cfg;
      cfg.epochs = 1000;
      cfg.intvl = intvl;
      cfg.seed = seed;
      TrainResult result = train(cfg);
      if (result.diverged_at) {
        detail = "seed " + std::to_string(seed) + " intvl " +
                 std::to_string(intvl) + " diverged at step " +
                 std::to_string(*result.diverged_at);
        return false;
      }
      logs.by_seed[seed][intvl] = std::move(result.log);
    }
  }

  int converged = 0, plateaued = 0, five_smallest = 0;
  for (std::uint64_t seed : seeds) {
    bool conv_all = true, plat_all = true;
    for (int intvl : intvls) {
      const TrainLog& log = logs.by_seed[seed][intvl];
      double first50 = mean_loss(log, 0, 50);
      double t600 = mean_loss(log, 550, 600);
      double t1000 = mean_loss(log, 950, 1000);
      if (!(t1000 < 0.20 * first50)) conv_all = false;
      if (!(std::fabs(t600 - t1000) <= 0.25 * t1000)) plat_all = false;
    }
    if (conv_all) ++converged;
    if (plat_all) ++plateaued;
    double t5 = mean_loss(logs.by_seed[seed][5], 950, 1000);
    double t10 = mean_loss(logs.by_seed[seed][10], 950, 1000);
    double t15 = mean_loss(logs.by_seed[seed][15], 950, 1000);
    if (t5 < t10 && t5 < t15) ++five_smallest;
  }

  if (converged < 2 || plateaued < 2 || five_smallest < 2) {
    detail = "majorities over 3 seeds: converged " + std::to_string(converged) +
             "/3, plateaued by step 600 " + std::to_string(plateaued) +
             "/3, shortest interval best " + std::to_string(five_smallest) +
             "/3";
    return false;
  }
  return true;
}

bool criterion7(const SweepLogs& logs, std::string& detail) {
  if (logs.by_seed.empty()) {
    detail = "no training logs available (criterion 6 did not run)";
    return false;
  }
  int tau_ok = 0, drop_ok = 0, order_ok = 0;
  int seeds_seen = 0;

  for (const auto& [seed, per_intvl] : logs.by_seed) {
    ++seeds_seen;
    double tau_sum = 0.0;
    long tau_n = 0;
    double firsts = 0.0, lasts = 0.0;
    long boundary_n = 0;
    std::map<int, double> mean_ms;

    for (const auto& [intvl, log] : per_intvl) {
      double total = 0.0;
      for (const TrainLogRow& r : log.rows) total += r.elapsed_ms;
      mean_ms[intvl] = total / static_cast<double>(log.rows.size());

      std::size_t n = log.rows.size();
      std::size_t segments = n / static_cast<std::size_t>(intvl);
      for (std::size_t s = 0; s < segments; ++s) {
        std::vector<double> seg;
        for (int j = 0; j < intvl; ++j) {
          seg.push_back(log.rows[s * intvl + j].elapsed_ms);
        }
        tau_sum += kendall_tau(seg);
        ++tau_n;
        if (s > 0) {
          firsts += seg.front();
          lasts += log.rows[s * intvl - 1].elapsed_ms;
          ++boundary_n;
        }
      }
    }

    if (tau_n > 0 && tau_sum / tau_n > 0.0) ++tau_ok;
    if (boundary_n > 0 && firsts / boundary_n < lasts / boundary_n) ++drop_ok;
    if (mean_ms.count(5) && mean_ms.count(10) && mean_ms.count(15) &&
        mean_ms[5] < mean_ms[10] && mean_ms[10] < mean_ms[15]) {
      ++order_ok;
    }
  }

  int need = seeds_seen / 2 + 1;
  if (tau_ok < need || drop_ok < need || order_ok < need) {
    detail = "majorities over " + std::to_string(seeds_seen) +
             " seeds: rising cost within intervals " + std::to_string(tau_ok) +
             ", cheaper step after reset " + std::to_string(drop_ok) +
             ", longer intervals cost more " + std::to_string(order_ok);
    return false;
  }
  return true;
}

bool criterion8(std::string& detail) {
  const std::vector<std::uint64_t> seeds{42, 43, 44};
  const std::vector<int> snaps{1000, 2000, 3000};
  int improving = 0;
  std::string errs;

  for (std::uint64_t seed : seeds) {
    TrainConfig cfg;
    cfg.epochs = 3000;
    cfg.intvl = 10;
    cfg.seed = seed;
    TrainResult result = train(cfg, snaps);
    if (result.diverged_at || result.snapshots.size() != snaps.size()) {
      detail = "seed " + std::to_string(seed) + " did not finish training";
      return false;
    }

    // closed-loop generation over one full waveform period per snapshot
    std::size_t horizon =
        static_cast<std::size_t>(std::ceil(2.0 * M_PI / cfg.sine_step));
    std::vector<double> prime =
        gen_sine(2 * cfg.seq_len, cfg.sine_step, cfg.sine_phase);
    std::vector<double> mean_err;
    for (auto& [step, model] : result.snapshots) {
      PredictionTrace trace = predict(model, cfg, prime, horizon);
      double acc = 0.0;
      for (const PredictionRow& r : trace.rows) {
        acc += std::fabs(r.predicted - r.input);
      }
      mean_err.push_back(acc / static_cast<double>(trace.rows.size()));
    }
    bool monotone = mean_err[1] <= mean_err[0] && mean_err[2] <= mean_err[1];
    if (monotone) ++improving;
    char buf[96];
    std::snprintf(buf, sizeof(buf), " [seed %llu: %.4f %.4f %.4f]",
                  static_cast<unsigned long long>(seed), mean_err[0],
                  mean_err[1], mean_err[2]);
    errs += buf;
  }

  if (improving < 2) {
    detail = "closed-loop error non-increasing for only " +
             std::to_string(improving) + "/3 seeds;" + errs;
    return false;
  }
  return true;
}

bool criterion9(std::string& detail) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "treegrad_acceptance_c9";
  fs::remove_all(dir);

  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 42;

  std::vector<std::string> train_csv(2), pred_csv(2);
  for (int run = 0; run < 2; ++run) {
    TrainResult result = train(cfg);
    if (result.diverged_at) {
      detail = "run " + std::to_string(run + 1) + " diverged";
      return false;
    }
    std::string tpath = (dir / ("train" + std::to_string(run) + ".csv")).string();
    write_train_log_csv(tpath, result.log);
    train_csv[run] = slurp(tpath);

    std::vector<double> prime = gen_sine(8, cfg.sine_step, cfg.sine_phase);
    PredictionTrace trace = predict(*result.chain, prime, 16);
    std::string ppath = (dir / ("pred" + std::to_string(run) + ".csv")).string();
    write_prediction_csv(ppath, trace);
    pred_csv[run] = slurp(ppath);
  }
  fs::remove_all(dir);

  if (drop_elapsed_column(train_csv[0]) != drop_elapsed_column(train_csv[1])) {
    detail = "training logs differ beyond the elapsed-time column";
    return false;
  }
  if (pred_csv[0] != pred_csv[1]) {
    detail = "prediction traces differ between identical runs";
    return false;
  }
  return true;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* label;
    double budget_s;
  };

  SweepLogs logs;
  int failures = 0;

  auto report = [&failures](const Entry& e, bool ok, double elapsed,
                            const std::string& detail) {
    if (ok && elapsed <= e.budget_s) {
      std::printf("[PASS] criterion %d: %s (%.1fs)\n", e.id, e.label, elapsed);
    } else if (!ok) {
      std::printf("[FAIL] criterion %d: %s (%.1fs) — %s\n", e.id, e.label,
                  elapsed, detail.c_str());
      ++failures;
    } else {
      std::printf("[FAIL] criterion %d: %s — over budget (%.1fs > %.0fs)\n",
                  e.id, e.label, elapsed, e.budget_s);
      ++failures;
    }
    std::fflush(stdout);
  };

  auto run = [&](const Entry& e, auto&& fn) {
    std::string detail;
    double t0 = now_s();
    bool ok = false;
    try {
      ok = fn(detail);
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    report(e, ok, now_s() - t0, detail);
  };

  run(Entry{1, "finite differences confirm every backward rule", 30.0},
      [](std::string& d) { return criterion1(d); });
  run(Entry{2, "closed-form gate gradients match reverse mode", 5.0},
      [](std::string& d) { return criterion2(d); });
  run(Entry{3, "shared values expand once and add their contributions", 1.0},
      [](std::string& d) { return criterion3(d); });
  run(Entry{4, "backward touches only the latest block", 10.0},
      [](std::string& d) { return criterion4(d); });
  run(Entry{5, "window standardization centers and scales", 1.0},
      [](std::string& d) { return criterion5(d); });
  run(Entry{6, "training converges and shorter intervals fit best", 300.0},
      [&logs](std::string& d) { return criterion6(logs, d); });
  run(Entry{7, "per-step cost rises within an interval and resets after", 30.0},
      [&logs](std::string& d) { return criterion7(logs, d); });
  run(Entry{8, "longer training improves closed-loop generation", 600.0},
      [](std::string& d) { return criterion8(d); });
  run(Entry{9, "identical runs produce identical logs", 60.0},
      [](std::string& d) { return criterion9(d); });

  if (failures > 0) {
    std::printf("%d of 9 criteria failed\n", failures);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}

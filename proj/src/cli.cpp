#include "treegrad/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "treegrad/errors.hpp"
#include "treegrad/trainer.hpp"

namespace treegrad {

namespace {

struct CommonFlags {
  TrainConfig cfg;
  std::string clip = "off";
  std::string cell_update = "left_cell_only";
  std::string out;
  bool batch_m_given = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--intvl", flags.cfg.intvl,
                  "training steps between state resets")
      ->capture_default_str();
  cmd->add_option("--epochs", flags.cfg.epochs, "training steps to run")
      ->capture_default_str();
  cmd->add_option("--hidden", flags.cfg.hidden, "state width")
      ->capture_default_str();
  cmd->add_option("--lr", flags.cfg.lr, "learning rate")
      ->capture_default_str();
  cmd->add_option("--seed", flags.cfg.seed, "rng seed")
      ->capture_default_str();
  cmd->add_option("--seq-len", flags.cfg.seq_len, "samples per block")
      ->capture_default_str();
  cmd->add_option("--batch-m", flags.cfg.batch_m,
                  "standardization batch length (defaults to --seq-len)")
      ->capture_default_str();
  cmd->add_option("--eps", flags.cfg.eps, "standardization epsilon")
      ->capture_default_str();
  cmd->add_option("--sine-step", flags.cfg.sine_step,
                  "waveform phase increment per sample")
      ->capture_default_str();
  cmd->add_option("--cell-update", flags.cell_update,
                  "combiner memory update rule")
      ->check(CLI::IsMember({"left_cell_only", "symmetric"}))
      ->capture_default_str();
  cmd->add_option("--clip", flags.clip,
                  "elementwise gradient clip value, or 'off'")
      ->capture_default_str();
}

// resolves string flags into the config; throws ArgumentError on bad values
void finish_config(CLI::App* cmd, CommonFlags& flags) {
  if (cmd->count("--batch-m") == 0 && cmd->count("--seq-len") > 0) {
    flags.cfg.batch_m = flags.cfg.seq_len;
  }
  flags.cfg.cell_update = (flags.cell_update == "symmetric")
                              ? CellUpdate::symmetric
                              : CellUpdate::left_cell_only;
  if (flags.clip != "off") {
    char* end = nullptr;
    double v = std::strtod(flags.clip.c_str(), &end);
    if (end == flags.clip.c_str() || *end != '\0') {
      throw ArgumentError("--clip expects a number or 'off', got '" +
                          flags.clip + "'");
    }
    flags.cfg.clip = v;
  }
  flags.cfg.validate();
}

std::string with_suffix(const std::string& base, int intvl) {
  std::filesystem::path p(base);
  std::filesystem::path out = p.parent_path();
  out /= p.stem();
  out += "_i" + std::to_string(intvl);
  out += p.extension();
  return out.string();
}

double mean_elapsed(const TrainLog& log) {
  if (log.rows.empty()) return 0.0;
  double total = 0.0;
  for (const TrainLogRow& r : log.rows) total += r.elapsed_ms;
  return total / static_cast<double>(log.rows.size());
}

int cmd_train(CommonFlags& flags) {
  TrainResult result = train(flags.cfg);
  if (!flags.out.empty()) write_train_log_csv(flags.out, result.log);
  if (result.diverged_at) {
    std::fprintf(stderr, "diverged at step %d\n", *result.diverged_at);
    return 1;
  }
  double final_loss =
      result.log.rows.empty() ? 0.0 : result.log.rows.back().loss;
  std::printf("steps=%zu final_loss=%.6g mean_step_ms=%.4f\n",
              result.log.rows.size(), final_loss, mean_elapsed(result.log));
  if (!flags.out.empty()) std::printf("log=%s\n", flags.out.c_str());
  return 0;
}

int cmd_sweep(CommonFlags& flags, const std::vector<int>& intvls,
              bool parallel) {
  auto results = sweep(flags.cfg, intvls, parallel);
  int rc = results.size() == intvls.size() ? 0 : 1;
  for (const auto& [intvl, log] : results) {
    if (!flags.out.empty()) {
      write_train_log_csv(with_suffix(flags.out, intvl), log);
    }
    bool complete =
        log.rows.size() == static_cast<std::size_t>(flags.cfg.epochs);
    if (!complete) rc = 1;
    double final_loss = log.rows.empty() ? 0.0 : log.rows.back().loss;
    std::printf("intvl=%d steps=%zu final_loss=%.6g mean_step_ms=%.4f%s\n",
                intvl, log.rows.size(), final_loss, mean_elapsed(log),
                complete ? "" : " (diverged)");
  }
  return rc;
}

int cmd_predict(CommonFlags& flags, std::size_t horizon,
                std::size_t prime_len) {
  TrainResult result = train(flags.cfg);
  if (result.diverged_at) {
    std::fprintf(stderr, "diverged at step %d\n", *result.diverged_at);
    return 1;
  }
  std::vector<double> prime =
      gen_sine(prime_len, flags.cfg.sine_step, flags.cfg.sine_phase);
  PredictionTrace trace = predict(*result.chain, prime, horizon);
  if (!flags.out.empty()) write_prediction_csv(flags.out, trace);
  double err = 0.0;
  for (const PredictionRow& row : trace.rows) {
    err += std::fabs(row.predicted - row.input);
  }
  err /= static_cast<double>(trace.rows.size());
  std::printf("horizon=%zu mean_abs_err=%.6g\n", trace.rows.size(), err);
  if (!flags.out.empty()) std::printf("trace=%s\n", flags.out.c_str());
  return 0;
}

int cmd_gradcheck(std::size_t hidden, std::uint64_t seed, int rounds,
                  double fd_eps) {
  Rng rng(seed);
  bool all_ok = true;
  // worst report per builder name across rounds
  std::vector<std::pair<std::string, GradCheckReport>> worst;
  for (int round = 0; round < rounds; ++round) {
    for (NamedBuilder& nb : standard_grad_checks(hidden, rng)) {
      GradCheckReport rep = grad_check(nb.build, nb.theta, fd_eps);
      bool found = false;
      for (auto& [name, acc] : worst) {
        if (name == nb.name) {
          found = true;
          if (rep.worst_excess > acc.worst_excess) acc = rep;
        }
      }
      if (!found) worst.emplace_back(nb.name, rep);
    }
  }
  for (const auto& [name, rep] : worst) {
    bool ok = rep.ok();
    all_ok = all_ok && ok;
    std::printf("%-16s max_rel=%.3g max_abs_small=%.3g coords=%zu %s\n",
                name.c_str(), rep.max_rel_err, rep.max_abs_err, rep.coords,
                ok ? "ok" : "FAIL");
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"tree-structured LSTM trainer with constrained backward"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train on the sine task and log per-step loss");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--out", train_flags.out, "training log csv path");

  CommonFlags sweep_flags;
  std::vector<int> intvls{5, 10, 15};
  bool parallel = false;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "train once per reset interval value");
  add_common(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--intvls", intvls, "comma-separated interval values")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_flag("--parallel", parallel, "run configurations concurrently");
  sweep_cmd->add_option("--out", sweep_flags.out,
                        "csv base path; _i<intvl> is inserted before the "
                        "extension");

  CommonFlags predict_flags;
  std::size_t horizon = 64;
  std::size_t prime_len = 8;
  CLI::App* predict_cmd = app.add_subcommand(
      "predict", "train, then generate closed-loop predictions");
  add_common(predict_cmd, predict_flags);
  predict_cmd->add_option("--horizon", horizon, "values to generate")
      ->capture_default_str();
  predict_cmd->add_option("--prime-len", prime_len,
                          "waveform samples used to prime the state")
      ->capture_default_str();
  predict_cmd->add_option("--out", predict_flags.out, "prediction csv path");

  std::size_t gc_hidden = 4;
  std::uint64_t gc_seed = 42;
  int gc_rounds = 3;
  double gc_eps = 1e-6;
  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "verify gradients of every node kind by finite differences");
  gradcheck_cmd->add_option("--hidden", gc_hidden, "state width")
      ->capture_default_str();
  gradcheck_cmd->add_option("--seed", gc_seed, "rng seed")
      ->capture_default_str();
  gradcheck_cmd->add_option("--rounds", gc_rounds,
                            "random instances per node kind")
      ->capture_default_str();
  gradcheck_cmd->add_option("--fd-eps", gc_eps, "finite-difference epsilon")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) {
      finish_config(train_cmd, train_flags);
      return cmd_train(train_flags);
    }
    if (sweep_cmd->parsed()) {
      finish_config(sweep_cmd, sweep_flags);
      return cmd_sweep(sweep_flags, intvls, parallel);
    }
    if (predict_cmd->parsed()) {
      finish_config(predict_cmd, predict_flags);
      return cmd_predict(predict_flags, horizon, prime_len);
    }
    if (gradcheck_cmd->parsed()) {
      if (gc_hidden < 1 || gc_rounds < 1 || !(gc_eps > 0.0)) {
        throw ArgumentError("gradcheck sizes must be positive");
      }
      return cmd_gradcheck(gc_hidden, gc_seed, gc_rounds, gc_eps);
    }
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace treegrad

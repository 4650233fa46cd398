#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "treegrad/model.hpp"

namespace treegrad {

struct TrainLogRow {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
  double elapsed_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

struct PredictionRow {
  double t = 0.0;
  double input = 0.0;      // reference waveform value at t
  double predicted = 0.0;  // closed-loop model output for t
};

struct PredictionTrace {
  std::vector<PredictionRow> rows;
};

// s_i = sin(phase + i * step), i = 0..n-1
std::vector<double> gen_sine(std::size_t n, double step, double phase);

// Frozen copy of a chain's weights for forward-only evaluation. Holds its
// own carried state; step() consumes one window, updates the state and
// returns the next-value prediction. Builds no graph nodes.
class ForwardModel {
 public:
  explicit ForwardModel(const BlockChain& chain);

  double step(const std::vector<double>& window);
  void reset();

  std::size_t seq_len() const { return cfg_.seq_len; }
  const TrainConfig& config() const { return cfg_; }

 private:
  TrainConfig cfg_;
  SLstmWeights tree_;
  Tensor lift_w_, lift_b_, head_w_, head_b_;
  Tensor state_c_, state_h_;
};

struct TrainResult {
  TrainLog log;
  std::shared_ptr<BlockChain> chain;
  std::optional<int> diverged_at;  // 1-based step index
  // frozen weights captured right after the named steps completed
  std::vector<std::pair<int, ForwardModel>> snapshots;
};

// Runs cfg.epochs training steps over consecutive sine windows (window k
// covers samples [k*seq_len, (k+1)*seq_len), target = the following sample).
// On divergence the partial log is returned with diverged_at set.
TrainResult train(const TrainConfig& cfg,
                  const std::vector<int>& snapshot_steps = {});

// Closed-loop generation: primes the state with the prime samples (windows
// aligned so the last one ends at the prime's end), then feeds each
// prediction back as the next input, horizon times. The prime is taken to be
// the head of the configured waveform, which fixes the reference column.
// Never mutates the chain.
PredictionTrace predict(const BlockChain& chain,
                        const std::vector<double>& prime,
                        std::size_t horizon);
PredictionTrace predict(ForwardModel model, const TrainConfig& cfg,
                        const std::vector<double>& prime,
                        std::size_t horizon);

// One train() per interval value, same seed and data. Sequential unless
// parallel is set; per-configuration failures are isolated and every
// completed log is returned.
std::vector<std::pair<int, TrainLog>> sweep(const TrainConfig& base,
                                            const std::vector<int>& intvls,
                                            bool parallel = false);

// Central-difference gradient verification. build must construct a fresh
// scalar-output (1x1) graph from leaf variables created from the given
// parameter tensors; it is re-invoked for every probe.
using GraphBuilder = std::function<VarPtr(const std::vector<VarPtr>&)>;

inline constexpr double kGradRelTol = 1e-5;
inline constexpr double kGradAbsTol = 1e-8;

struct GradCheckReport {
  // |num - ana| / |ana| over coordinates with |ana| > kGradAbsTol
  double max_rel_err = 0.0;
  // |num - ana| over coordinates with |ana| <= kGradAbsTol
  double max_abs_err = 0.0;
  double worst_abs_diff = 0.0;
  // max over coordinates of |num - ana| - (kGradAbsTol + kGradRelTol*|ana|);
  // non-positive means every coordinate is within tolerance
  double worst_excess = 0.0;
  std::size_t coords = 0;
  bool ok() const { return worst_excess <= 0.0; }
};

GradCheckReport grad_check(const GraphBuilder& build,
                           const std::vector<Tensor>& theta, double epsilon);

// Named builder set covering every node kind plus both LSTM steps and a
// four-leaf tree, for the gradcheck command and the verification suite.
struct NamedBuilder {
  std::string name;
  std::vector<Tensor> theta;
  GraphBuilder build;
};

std::vector<NamedBuilder> standard_grad_checks(std::size_t hidden, Rng& rng);

// CSV output. Both writers create the file atomically (temp + rename).
// Train log header:  epoch,step,loss,elapsed_ms   (loss at 17 significant
// digits). Prediction header:  t,input,predicted
void write_train_log_csv(const std::string& path, const TrainLog& log);
void write_prediction_csv(const std::string& path,
                          const PredictionTrace& trace);

}  // namespace treegrad

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "bitattn/matrix.hpp"
#include "bitattn/surrogate.hpp"
#include "bitattn/tif.hpp"

namespace bitattn {

// Needle detection: does token `needle_token` appear anywhere in the
// sequence? Labels are balanced by construction (alternating), positive
// sequences get the needle planted at a random position, negative ones are
// sampled from the vocabulary with the needle excluded.
struct SynthTaskConfig {
  std::size_t vocab_size = 16;
  std::size_t seq_len = 32;
  int needle_token = 7;
  std::size_t train_examples = 256;
  std::size_t test_examples = 128;
};

struct Example {
  std::vector<int> tokens;
  int label = 0;
};

struct SynthTask {
  SynthTaskConfig cfg;
  std::vector<Example> train_set;
  std::vector<Example> test_set;

  static SynthTask generate(const SynthTaskConfig& cfg, std::uint64_t seed);
};

double positive_fraction(std::span<const Example> examples);

struct ToyModelConfig {
  std::size_t embed_dim = 16;
  TifConfig tif;
  GradMode grad_mode = GradMode::RelaxedExact;
  double hardness = 1.0;
};

// Embedding -> Q/K/V projections -> bitwise attention -> mean pool ->
// scalar logit. Small on purpose; exists to show the bitwise block passes a
// usable learning signal, not to win benchmarks.
struct ToyModel {
  ToyModelConfig cfg;
  std::size_t vocab_size = 0;
  FloatMatrix embedding;        // vocab x d
  FloatMatrix w_q, w_k, w_v;    // d x d
  std::vector<double> head_w;   // d
  double head_b = 0.0;

  static ToyModel init(std::size_t vocab_size, const ToyModelConfig& cfg,
                       std::uint64_t seed);

  double logit(std::span<const int> tokens) const;

  void save(std::ostream& os) const;
  static ToyModel load(std::istream& is);
};

struct EpochLog {
  std::size_t epoch = 0;     // 1-based
  double train_loss = 0.0;   // mean BCE over the epoch
  double test_acc = 0.0;
};

struct TrainOptions {
  std::size_t epochs = 30;
  double lr = 0.05;
  std::uint64_t seed = 42;  // weight init and epoch shuffling
};

struct TrainResult {
  std::vector<EpochLog> log;
  ToyModel model;
};

// Plain SGD, one update per example, seeded shuffle each epoch. Throws
// DomainError with a diagnostic if the loss or a logit stops being finite.
TrainResult train(const SynthTask& task, const ToyModelConfig& model_cfg,
                  const TrainOptions& opt);

double evaluate(const ToyModel& model, std::span<const Example> examples);

// Trains one fresh model per time-step count (same seed and options) and
// reports (T, final test accuracy) pairs.
std::vector<std::pair<std::size_t, double>> ablate_time_steps(
    const SynthTask& task, std::span<const std::size_t> t_values,
    const ToyModelConfig& base_cfg, const TrainOptions& opt);

// "epoch,train_loss,test_acc" header, one row per epoch, six decimals.
void write_training_csv(std::ostream& os, std::span<const EpochLog> log);

}  // namespace bitattn

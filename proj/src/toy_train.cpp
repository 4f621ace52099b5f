#include "bitattn/toy_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "bitattn/attention.hpp"
#include "bitattn/rng.hpp"

namespace bitattn {

namespace {

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct Forward {
  FloatMatrix x;  // embedded tokens, n x d
  FloatMatrix q_f, k_f, v_f;
  AttentionResult att;
  std::vector<double> pool;
  double logit = 0.0;
};

Forward run_forward(const ToyModel& m, std::span<const int> tokens) {
  if (tokens.empty()) throw ShapeError("toy model: empty token sequence");
  const std::size_t n = tokens.size(), d = m.cfg.embed_dim;

  Forward f;
  f.x = FloatMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const int tok = tokens[i];
    if (tok < 0 || static_cast<std::size_t>(tok) >= m.vocab_size)
      throw DomainError("toy model: token " + std::to_string(tok) +
                        " outside vocabulary");
    for (std::size_t c = 0; c < d; ++c)
      f.x(i, c) = m.embedding(static_cast<std::size_t>(tok), c);
  }

  f.q_f = project(f.x, m.w_q);
  f.k_f = project(f.x, m.w_k);
  f.v_f = project(f.x, m.w_v);

  const BitTimeTensor q_b = tif_convert(f.q_f, m.cfg.tif);
  const BitTimeTensor k_b = tif_convert(f.k_f, m.cfg.tif);
  f.att = bitwise_attention(q_b, k_b, f.v_f);

  f.pool.assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += f.att.output(i, c);
    f.pool[c] = acc / static_cast<double>(n);
  }

  f.logit = m.head_b;
  for (std::size_t c = 0; c < d; ++c) f.logit += m.head_w[c] * f.pool[c];
  return f;
}

void fill_uniform(FloatMatrix& m, Rng& rng, double lo, double hi) {
  for (double& v : m.data()) v = rng.uniform(lo, hi);
}

}  // namespace

SynthTask SynthTask::generate(const SynthTaskConfig& cfg, std::uint64_t seed) {
  if (cfg.vocab_size < 2)
    throw DomainError("SynthTask: vocab_size must be >= 2");
  if (cfg.needle_token < 0 ||
      static_cast<std::size_t>(cfg.needle_token) >= cfg.vocab_size)
    throw DomainError("SynthTask: needle_token outside vocabulary");
  if (cfg.seq_len < 1) throw DomainError("SynthTask: seq_len must be >= 1");
  if (cfg.train_examples < 1 || cfg.test_examples < 1)
    throw DomainError("SynthTask: need at least one example per split");

  Rng rng(seed);
  const std::int64_t vmax = static_cast<std::int64_t>(cfg.vocab_size) - 1;

  SynthTask task;
  task.cfg = cfg;
  const std::size_t total = cfg.train_examples + cfg.test_examples;
  for (std::size_t idx = 0; idx < total; ++idx) {
    Example ex;
    ex.label = static_cast<int>(idx % 2);  // alternate: exact balance
    ex.tokens.resize(cfg.seq_len);
    if (ex.label == 0) {
      // Sample from the vocabulary with the needle removed.
      for (int& t : ex.tokens) {
        std::int64_t v = rng.uniform_int(0, vmax - 1);
        if (v >= cfg.needle_token) ++v;
        t = static_cast<int>(v);
      }
    } else {
      for (int& t : ex.tokens) t = static_cast<int>(rng.uniform_int(0, vmax));
      const std::size_t pos = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(cfg.seq_len) - 1));
      ex.tokens[pos] = cfg.needle_token;
    }
    if (idx < cfg.train_examples)
      task.train_set.push_back(std::move(ex));
    else
      task.test_set.push_back(std::move(ex));
  }
  return task;
}

double positive_fraction(std::span<const Example> examples) {
  if (examples.empty())
    throw DomainError("positive_fraction: empty example list");
  std::size_t pos = 0;
  for (const Example& e : examples) pos += e.label == 1;
  return static_cast<double>(pos) / static_cast<double>(examples.size());
}

ToyModel ToyModel::init(std::size_t vocab_size, const ToyModelConfig& cfg,
                        std::uint64_t seed) {
  if (vocab_size < 1) throw DomainError("ToyModel: vocab_size must be >= 1");
  if (cfg.embed_dim < 1) throw DomainError("ToyModel: embed_dim must be >= 1");
  cfg.tif.validate();

  Rng rng(seed);
  ToyModel m;
  m.cfg = cfg;
  m.vocab_size = vocab_size;
  m.embedding = FloatMatrix(vocab_size, cfg.embed_dim);
  fill_uniform(m.embedding, rng, -0.5, 0.5);
  const double r = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
  m.w_q = FloatMatrix(cfg.embed_dim, cfg.embed_dim);
  m.w_k = FloatMatrix(cfg.embed_dim, cfg.embed_dim);
  m.w_v = FloatMatrix(cfg.embed_dim, cfg.embed_dim);
  fill_uniform(m.w_q, rng, -r, r);
  fill_uniform(m.w_k, rng, -r, r);
  fill_uniform(m.w_v, rng, -r, r);
  m.head_w.assign(cfg.embed_dim, 0.0);
  for (double& w : m.head_w) w = rng.uniform(-0.1, 0.1);
  m.head_b = 0.0;
  return m;
}

double ToyModel::logit(std::span<const int> tokens) const {
  return run_forward(*this, tokens).logit;
}

void ToyModel::save(std::ostream& os) const {
  os << "BITATTN_TOYMODEL 1\n";
  os << std::setprecision(17);
  os << vocab_size << ' ' << cfg.embed_dim << ' ' << cfg.tif.time_steps << ' '
     << cfg.tif.v_th << ' ' << static_cast<int>(cfg.tif.norm_mode) << ' '
     << static_cast<int>(cfg.grad_mode) << ' ' << cfg.hardness << '\n';
  const auto put_matrix = [&](const FloatMatrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        if (j) os << ' ';
        os << m(i, j);
      }
      os << '\n';
    }
  };
  put_matrix(embedding);
  put_matrix(w_q);
  put_matrix(w_k);
  put_matrix(w_v);
  for (std::size_t c = 0; c < head_w.size(); ++c) {
    if (c) os << ' ';
    os << head_w[c];
  }
  os << '\n' << head_b << '\n';
  if (!os) throw IoError("toy model save: write failed");
}

ToyModel ToyModel::load(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (!is || magic != "BITATTN_TOYMODEL" || version != 1)
    throw IoError("toy model load: unrecognized header");

  std::size_t vocab = 0;
  ToyModelConfig cfg;
  int norm_mode = 0, grad_mode = 0;
  is >> vocab >> cfg.embed_dim >> cfg.tif.time_steps >> cfg.tif.v_th >>
      norm_mode >> grad_mode >> cfg.hardness;
  if (!is) throw IoError("toy model load: truncated header");
  if (norm_mode < 0 || norm_mode > 2 || grad_mode < 0 || grad_mode > 1)
    throw IoError("toy model load: bad mode field");
  cfg.tif.norm_mode = static_cast<NormMode>(norm_mode);
  cfg.grad_mode = static_cast<GradMode>(grad_mode);

  ToyModel m;
  m.cfg = cfg;
  m.vocab_size = vocab;
  const auto get_matrix = [&](std::size_t rows, std::size_t cols) {
    FloatMatrix out(rows, cols);
    for (double& v : out.data()) is >> v;
    if (!is) throw IoError("toy model load: truncated matrix");
    return out;
  };
  if (vocab < 1 || cfg.embed_dim < 1)
    throw IoError("toy model load: bad dimensions");
  m.embedding = get_matrix(vocab, cfg.embed_dim);
  m.w_q = get_matrix(cfg.embed_dim, cfg.embed_dim);
  m.w_k = get_matrix(cfg.embed_dim, cfg.embed_dim);
  m.w_v = get_matrix(cfg.embed_dim, cfg.embed_dim);
  m.head_w.assign(cfg.embed_dim, 0.0);
  for (double& w : m.head_w) is >> w;
  is >> m.head_b;
  if (!is) throw IoError("toy model load: truncated weights");
  return m;
}

double evaluate(const ToyModel& model, std::span<const Example> examples) {
  if (examples.empty()) throw DomainError("evaluate: empty example list");
  std::size_t correct = 0;
  for (const Example& ex : examples) {
    const int pred = model.logit(ex.tokens) > 0.0 ? 1 : 0;
    correct += pred == ex.label;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train(const SynthTask& task, const ToyModelConfig& model_cfg,
                  const TrainOptions& opt) {
  if (task.train_set.empty() || task.test_set.empty())
    throw DomainError("train: task has an empty split");
  if (!std::isfinite(opt.lr) || opt.lr < 0.0)
    throw DomainError("train: learning rate must be finite and >= 0");
  if (opt.epochs < 1) throw DomainError("train: epochs must be >= 1");

  TrainResult res;
  res.model = ToyModel::init(task.cfg.vocab_size, model_cfg, opt.seed);
  ToyModel& m = res.model;
  const std::size_t d = model_cfg.embed_dim;

  Rng shuffle_rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(task.train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    // Fisher-Yates with the library RNG; std::shuffle output is
    // implementation-defined, which would break run-to-run determinism
    // across toolchains.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    for (const std::size_t idx : order) {
      const Example& ex = task.train_set[idx];
      const Forward f = run_forward(m, ex.tokens);
      if (!std::isfinite(f.logit))
        throw DomainError("training diverged: non-finite logit at epoch " +
                          std::to_string(epoch) +
                          " (try a smaller learning rate)");
      const double y = static_cast<double>(ex.label);
      const double loss = softplus(f.logit) - y * f.logit;
      loss_sum += loss;

      const std::size_t n = ex.tokens.size();
      const double dz = sigmoid(f.logit) - y;

      // Upstream gradient on the attention output: mean pool then head.
      FloatMatrix g(n, d);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c)
          g(i, c) = dz * m.head_w[c] / static_cast<double>(n);

      const GradBundle gb = backward(f.q_f, f.k_f, f.v_f, model_cfg.tif, g,
                                     model_cfg.grad_mode, model_cfg.hardness);

      const FloatMatrix xt = transpose(f.x);
      const FloatMatrix d_wq = project(xt, gb.d_q);
      const FloatMatrix d_wk = project(xt, gb.d_k);
      const FloatMatrix d_wv = project(xt, gb.d_v);

      FloatMatrix d_x = project(gb.d_q, transpose(m.w_q));
      {
        const FloatMatrix dk_x = project(gb.d_k, transpose(m.w_k));
        const FloatMatrix dv_x = project(gb.d_v, transpose(m.w_v));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < d; ++c)
            d_x(i, c) += dk_x(i, c) + dv_x(i, c);
      }

      // All gradients are computed against the pre-update weights; apply
      // the SGD step only now.
      for (std::size_t c = 0; c < d; ++c)
        m.head_w[c] -= opt.lr * dz * f.pool[c];
      m.head_b -= opt.lr * dz;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
          m.w_q(a, b) -= opt.lr * d_wq(a, b);
          m.w_k(a, b) -= opt.lr * d_wk(a, b);
          m.w_v(a, b) -= opt.lr * d_wv(a, b);
        }
      for (std::size_t i = 0; i < n; ++i) {
        const auto tok = static_cast<std::size_t>(ex.tokens[i]);
        for (std::size_t c = 0; c < d; ++c)
          m.embedding(tok, c) -= opt.lr * d_x(i, c);
      }
    }

    const double mean_loss =
        loss_sum / static_cast<double>(task.train_set.size());
    if (!std::isfinite(mean_loss))
      throw DomainError("training diverged: non-finite loss at epoch " +
                        std::to_string(epoch) +
                        " (try a smaller learning rate)");
    res.log.push_back({epoch, mean_loss, evaluate(m, task.test_set)});
  }
  return res;
}

std::vector<std::pair<std::size_t, double>> ablate_time_steps(
    const SynthTask& task, std::span<const std::size_t> t_values,
    const ToyModelConfig& base_cfg, const TrainOptions& opt) {
  if (t_values.empty())
    throw DomainError("ablate_time_steps: no time step counts given");
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(t_values.size());
  for (const std::size_t steps : t_values) {
    ToyModelConfig cfg = base_cfg;
    cfg.tif.time_steps = steps;
    const TrainResult r = train(task, cfg, opt);
    out.emplace_back(steps, r.log.back().test_acc);
  }
  return out;
}

void write_training_csv(std::ostream& os, std::span<const EpochLog> log) {
  os << "epoch,train_loss,test_acc\n";
  char buf[96];
  for (const EpochLog& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f\n", e.epoch, e.train_loss,
                  e.test_acc);
    os << buf;
  }
  if (!os) throw IoError("training log: write failed");
}

}  // namespace bitattn

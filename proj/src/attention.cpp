#include "bitattn/attention.hpp"

#include <string>
#include <vector>

#include "bitattn/parallel.hpp"
#include "bitattn/rng.hpp"

namespace bitattn {

namespace {

void check_attention_shapes(const BitTimeTensor& q_b, const BitTimeTensor& k_b,
                            const FloatMatrix& v, const char* who) {
  if (q_b.time_steps() != k_b.time_steps() || q_b.rows() != k_b.rows() ||
      q_b.cols() != k_b.cols())
    throw ShapeError(std::string(who) + ": q and k tensor shapes differ");
  if (v.empty()) throw ShapeError(std::string(who) + ": empty v");
  if (v.rows() != k_b.rows())
    throw ShapeError(std::string(who) + ": v must have one row per token (" +
                     std::to_string(v.rows()) + " vs " +
                     std::to_string(k_b.rows()) + ")");
  if (!v.all_finite())
    throw DomainError(std::string(who) + ": non-finite entry in v");
}

std::uint64_t dot_bits(std::span<const std::uint8_t> a,
                       std::span<const std::uint8_t> b) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] & b[i];
  return s;
}

std::uint64_t hamming_bits(std::span<const std::uint8_t> a,
                           std::span<const std::uint8_t> b) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] ^ b[i];
  return s;
}

void fill_separation_metrics(SeparationDemo& demo) {
  demo.dot_y1 = dot_bits(demo.x, demo.y1);
  demo.dot_y2 = dot_bits(demo.x, demo.y2);
  demo.hamming_y1 = hamming_bits(demo.x, demo.y1);
  demo.hamming_y2 = hamming_bits(demo.x, demo.y2);
  demo.score_y1 = 1.0 / (static_cast<double>(demo.hamming_y1) + 1.0);
  demo.score_y2 = 1.0 / (static_cast<double>(demo.hamming_y2) + 1.0);
}

}  // namespace

AttentionResult bitwise_attention(const BitTimeTensor& q_b,
                                  const BitTimeTensor& k_b,
                                  const FloatMatrix& v, int threads) {
  check_attention_shapes(q_b, k_b, v, "bitwise_attention");

  const std::size_t n = q_b.rows(), d = q_b.cols(), steps = q_b.time_steps();
  std::vector<std::uint64_t> dist(n * n, 0);
  for (std::size_t t = 0; t < steps; ++t) {
    parallel_for(n, threads, [&, t](std::size_t i) {
      const BitRowView qr = q_b.row_view(t, i);
      for (std::size_t j = 0; j < n; ++j)
        dist[i * n + j] += hamming(qr, k_b.row_view(t, j));
    });
  }

  AttentionResult res;
  res.scores = FloatMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      res.scores(i, j) = 1.0 / (static_cast<double>(dist[i * n + j]) + 1.0);

  res.output = FloatMatrix(n, v.cols());
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t c = 0; c < v.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += res.scores(i, j) * v(j, c);
      res.output(i, c) = acc;
    }
  });

  // Logical-bit accounting; the word-packed kernel above does the same
  // number of bit comparisons, just 64 at a time.
  const std::uint64_t nn = static_cast<std::uint64_t>(n) * n;
  res.ops.stage("scores").acs = steps * nn * d;
  res.ops.stage("output").macs = nn * v.cols();
  res.ops.ac_ops = steps * nn * d;
  res.ops.mac_ops = nn * v.cols();
  return res;
}

AttentionResult naive_bitwise_attention(const BitTimeTensor& q_b,
                                        const BitTimeTensor& k_b,
                                        const FloatMatrix& v) {
  check_attention_shapes(q_b, k_b, v, "naive_bitwise_attention");

  const std::size_t n = q_b.rows(), d = q_b.cols(), steps = q_b.time_steps();
  std::vector<std::uint64_t> dist(n * n, 0);
  std::uint64_t acs = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        std::uint64_t sum = 0;
        for (std::size_t f = 0; f < d; ++f) {
          sum += static_cast<std::uint64_t>(q_b.get(t, i, f) !=
                                            k_b.get(t, j, f));
          ++acs;
        }
        dist[i * n + j] += sum;
      }
    }
  }

  AttentionResult res;
  res.scores = FloatMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      res.scores(i, j) = 1.0 / (static_cast<double>(dist[i * n + j]) + 1.0);

  res.output = FloatMatrix(n, v.cols());
  std::uint64_t macs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < v.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += res.scores(i, j) * v(j, c);
        ++macs;
      }
      res.output(i, c) = acc;
    }
  }

  res.ops.stage("scores").acs = acs;
  res.ops.stage("output").macs = macs;
  res.ops.ac_ops = acs;
  res.ops.mac_ops = macs;
  return res;
}

SeparationDemo dot_vs_hamming_separation() {
  SeparationDemo demo;
  demo.x = {1, 1, 0, 0};
  demo.y1 = {1, 0, 0, 0};
  demo.y2 = {1, 0, 1, 1};
  fill_separation_metrics(demo);
  return demo;
}

SeparationDemo find_separating_triple(std::size_t d, std::uint64_t seed) {
  if (d < 3)
    throw DomainError("find_separating_triple: need width >= 3");
  Rng rng(seed);

  SeparationDemo demo;
  demo.x.resize(d);
  for (auto& b : demo.x) b = rng.coin() ? 1 : 0;
  // Force two zero positions into x, then build y1 = x and y2 = x with those
  // two zeros flipped on. The flipped bits multiply against zeros of x, so
  // both dot products stay equal to |x|, while the Hamming distances are 0
  // and 2: tied dots, separated distances, for any draw.
  std::size_t p1 = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(d) - 1));
  std::size_t p2 = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(d) - 2));
  if (p2 >= p1) ++p2;
  demo.x[p1] = 0;
  demo.x[p2] = 0;
  demo.y1 = demo.x;
  demo.y2 = demo.x;
  demo.y2[p1] = 1;
  demo.y2[p2] = 1;
  fill_separation_metrics(demo);
  return demo;
}

}  // namespace bitattn

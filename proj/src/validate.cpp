#include "bitattn/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bitattn/attention.hpp"
#include "bitattn/bit_tensor.hpp"
#include "bitattn/cost_model.hpp"
#include "bitattn/matrix.hpp"
#include "bitattn/rng.hpp"
#include "bitattn/surrogate.hpp"
#include "bitattn/tif.hpp"
#include "bitattn/toy_train.hpp"

namespace bitattn {

namespace {

// Uniform draw from [0,1) rejecting values whose product with any of the
// step counts lands within 1e-9 of an integer, where the floor identity is
// allowed to wobble by one.
double draw_boundary_safe(Rng& rng, std::span<const std::size_t> step_counts) {
  for (;;) {
    const double x = rng.uniform();
    bool safe = true;
    for (const std::size_t steps : step_counts) {
      const double tx = static_cast<double>(steps) * x;
      const double alpha = tx - std::floor(tx);
      if (alpha < 1e-9 || alpha > 1.0 - 1e-9) {
        safe = false;
        break;
      }
    }
    if (safe) return x;
  }
}

std::uint64_t simulated_spike_sum(double x, std::size_t steps) {
  std::uint64_t sum = 0;
  for (std::uint8_t s : scalar_spike_train(x, steps)) sum += s;
  return sum;
}

BoolTensor random_bool_tensor(Rng& rng, std::size_t t, std::size_t n,
                              std::size_t d) {
  BoolTensor b(t, n, d);
  for (auto& v : b.values) v = rng.coin() ? 1 : 0;
  return b;
}

FloatMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                          double lo, double hi) {
  FloatMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

bool spike_trains_equal(const BitTimeTensor& a, std::size_t i,
                        const BitTimeTensor& b, std::size_t j) {
  for (std::size_t t = 0; t < a.time_steps(); ++t)
    if (!(a.row_view(t, i).words.size() == b.row_view(t, j).words.size() &&
          std::equal(a.row_view(t, i).words.begin(),
                     a.row_view(t, i).words.end(),
                     b.row_view(t, j).words.begin())))
      return false;
  return true;
}

double loss_under(const FloatMatrix& upstream, const FloatMatrix& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t c = 0; c < y.cols(); ++c)
      acc += upstream(i, c) * y(i, c);
  return acc;
}

}  // namespace

std::vector<PropertyResult> run_validation_suite(const ValidateOptions& opt) {
  std::vector<PropertyResult> out;
  const auto add = [&out](const char* name, auto&& body) {
    PropertyResult r;
    r.name = name;
    try {
      body(r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    out.push_back(std::move(r));
  };

  const std::uint64_t seed = opt.seed;

  add("tif_floor_identity", [&](PropertyResult& r) {
    Rng rng(seed);
    const std::size_t step_counts[] = {1, 2, 4, 8, 16, 32, 64};
    std::size_t mismatches = 0;
    for (int rep = 0; rep < 2000; ++rep) {
      const double x = draw_boundary_safe(rng, step_counts);
      for (const std::size_t steps : step_counts) {
        const std::uint64_t sum = simulated_spike_sum(x, steps);
        const auto expected = static_cast<std::uint64_t>(
            std::floor(static_cast<double>(steps) * x));
        mismatches += sum != expected;
      }
    }
    // The endpoints are exact, not boundary-fuzzy: include them directly.
    mismatches += simulated_spike_sum(0.0, 64) != 0;
    mismatches += simulated_spike_sum(1.0, 64) != 64;
    r.measured = static_cast<double>(mismatches);
    r.pass = mismatches == 0;
    if (!r.pass) r.detail = "spike sum != floor(T*x)";
  });

  add("tif_monotone_in_x", [&](PropertyResult& r) {
    Rng rng(seed + 1);
    std::size_t violations = 0;
    for (int rep = 0; rep < 500; ++rep) {
      const double a = rng.uniform(), b = rng.uniform();
      const double x1 = std::min(a, b), x2 = std::max(a, b);
      const std::size_t steps =
          static_cast<std::size_t>(rng.uniform_int(1, 64));
      violations +=
          simulated_spike_sum(x1, steps) > simulated_spike_sum(x2, steps);
    }
    r.measured = static_cast<double>(violations);
    r.pass = violations == 0;
  });

  add("ratio_convergence", [&](PropertyResult& r) {
    Rng rng(seed + 2);
    const std::size_t t_values[] = {1024};
    double max_dev = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
      const double a = rng.uniform(0.05, 1.0), b = rng.uniform(0.05, 1.0);
      // Orient so the larger value is the denominator; then the spike sum
      // downstairs is at least floor(1024 * 0.05) and the deviation bound
      // 1/S(y) applies.
      const double x = std::min(a, b), y = std::max(a, b);
      const auto pts = ratio_convergence(x, y, t_values);
      max_dev = std::max(max_dev, pts[0].deviation.value());
    }
    r.measured = max_dev;
    r.pass = max_dev < 0.05;
  });

  add("pack_unpack_roundtrip", [&](PropertyResult& r) {
    Rng rng(seed + 3);
    const std::size_t widths[] = {1, 7, 63, 64, 65, 100, 128, 130};
    std::size_t failures = 0;
    for (const std::size_t d : widths) {
      const BoolTensor b = random_bool_tensor(rng, 2, 3, d);
      const BitTimeTensor packed = pack(b);
      const BoolTensor round = unpack(packed);
      failures += !(round.values == b.values);
      // Spot-check padding stays clear via the word view.
      if (d % kWordBits != 0) {
        const std::uint64_t pad_mask =
            ~((std::uint64_t{1} << (d % kWordBits)) - 1);
        for (std::size_t t = 0; t < 2; ++t)
          for (std::size_t i = 0; i < 3; ++i) {
            const BitRowView row = packed.row_view(t, i);
            failures += (row.words.back() & pad_mask) != 0;
          }
      }
    }
    r.measured = static_cast<double>(failures);
    r.pass = failures == 0;
  });

  add("hamming_kernel_oracle", [&](PropertyResult& r) {
    Rng rng(seed + 4);
    std::size_t mismatches = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t d =
          static_cast<std::size_t>(rng.uniform_int(1, 300));
      const BoolTensor b = random_bool_tensor(rng, 1, 2, d);
      BitTimeTensor packed = pack(b);
      if (opt.sabotage && rep == 0) {
        // Flip one data bit in the packed copy only; the unpacked reference
        // keeps the original value, so the comparison below must fail.
        const std::size_t j =
            static_cast<std::size_t>(rng.uniform_int(0, d - 1));
        packed.set(0, 0, j, !packed.get(0, 0, j));
      }
      std::uint64_t reference = 0;
      for (std::size_t j = 0; j < d; ++j)
        reference += b.at(0, 0, j) ^ b.at(0, 1, j);
      const std::uint64_t kernel =
          hamming(packed.row_view(0, 0), packed.row_view(0, 1));
      mismatches += kernel != reference;
    }
    r.measured = static_cast<double>(mismatches);
    r.pass = mismatches == 0;
    if (!r.pass)
      r.detail = "packed XOR/popcount disagrees with per-bit reference";
  });

  add("hamming_metric_axioms", [&](PropertyResult& r) {
    Rng rng(seed + 5);
    std::size_t violations = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t d =
          static_cast<std::size_t>(rng.uniform_int(1, 200));
      const BoolTensor b = random_bool_tensor(rng, 1, 3, d);
      const BitTimeTensor p = pack(b);
      const auto r0 = p.row_view(0, 0), r1 = p.row_view(0, 1),
                 r2 = p.row_view(0, 2);
      const std::uint64_t d01 = hamming(r0, r1), d10 = hamming(r1, r0);
      const std::uint64_t d02 = hamming(r0, r2), d12 = hamming(r1, r2);
      violations += d01 != d10;
      violations += hamming(r0, r0) != 0;
      violations += d02 > d01 + d12;
    }
    r.measured = static_cast<double>(violations);
    r.pass = violations == 0;
  });

  add("attention_kernel_oracle", [&](PropertyResult& r) {
    Rng rng(seed + 6);
    double max_diff = 0.0;
    std::size_t score_mismatches = 0;
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t steps =
          static_cast<std::size_t>(rng.uniform_int(1, 8));
      const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 16));
      const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 90));
      const BitTimeTensor q = pack(random_bool_tensor(rng, steps, n, d));
      const BitTimeTensor k = pack(random_bool_tensor(rng, steps, n, d));
      const FloatMatrix v = random_matrix(rng, n, d, -1.0, 1.0);
      const AttentionResult fast = bitwise_attention(q, k, v, opt.threads);
      const AttentionResult naive = naive_bitwise_attention(q, k, v);
      if (!(fast.scores == naive.scores)) ++score_mismatches;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c)
          max_diff = std::max(
              max_diff, std::abs(fast.output(i, c) - naive.output(i, c)));
    }
    r.measured = std::max(max_diff, static_cast<double>(score_mismatches));
    r.pass = score_mismatches == 0 && max_diff <= 1e-12;
  });

  add("attention_score_bounds", [&](PropertyResult& r) {
    Rng rng(seed + 7);
    std::size_t violations = 0;
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t steps =
          static_cast<std::size_t>(rng.uniform_int(1, 6));
      const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 10));
      const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 40));
      BoolTensor qb = random_bool_tensor(rng, steps, n, d);
      BoolTensor kb = random_bool_tensor(rng, steps, n, d);
      // Make one k row an exact copy of one q row so score 1 is attained.
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t j = 0; j < d; ++j) kb.at(t, 0, j) = qb.at(t, 0, j);
      const BitTimeTensor q = pack(qb), k = pack(kb);
      const FloatMatrix v = random_matrix(rng, n, d, -1.0, 1.0);
      const AttentionResult res = bitwise_attention(q, k, v);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double a = res.scores(i, j);
          violations += !(a > 0.0 && a <= 1.0);
          const bool equal_trains = spike_trains_equal(q, i, k, j);
          violations += (a == 1.0) != equal_trains;
        }
      violations += res.scores(0, 0) != 1.0;
    }
    r.measured = static_cast<double>(violations);
    r.pass = violations == 0;
  });

  add("attention_rows_not_normalized", [&](PropertyResult& r) {
    // All-zero spike trains: every score is 1, so each row sums to n.
    // A softmax would have forced the sums to 1.
    const BitTimeTensor q(2, 4, 8), k(2, 4, 8);
    FloatMatrix v(4, 8, 0.25);
    const AttentionResult res = bitwise_attention(q, k, v);
    double min_row_sum = 1e300;
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 4; ++j) s += res.scores(i, j);
      min_row_sum = std::min(min_row_sum, s);
    }
    r.measured = min_row_sum;
    r.pass = min_row_sum == 4.0;
  });

  add("mse_hamming_identity", [&](PropertyResult& r) {
    Rng rng(seed + 8);
    std::size_t mismatches = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t d =
          static_cast<std::size_t>(rng.uniform_int(1, 256));
      const BoolTensor b = random_bool_tensor(rng, 1, 2, d);
      std::uint64_t sq_sum = 0, ham = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const int diff = static_cast<int>(b.at(0, 0, j)) -
                         static_cast<int>(b.at(0, 1, j));
        sq_sum += static_cast<std::uint64_t>(diff * diff);
        ham += b.at(0, 0, j) != b.at(0, 1, j);
      }
      mismatches += sq_sum != ham;
    }
    r.measured = static_cast<double>(mismatches);
    r.pass = mismatches == 0;
  });

  add("relaxed_approaches_hard", [&](PropertyResult& r) {
    Rng rng(seed + 9);
    TifConfig cfg;
    cfg.time_steps = 4;
    cfg.norm_mode = NormMode::Raw;
    double max_gap = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      // Keep membranes away from the exact threshold, where the sigmoid
      // stays at 1/2 no matter how hard; off-threshold it saturates.
      FloatMatrix q(3, 4), k(3, 4);
      for (double& x : q.data()) x = rng.coin() ? 0.2 : 0.8;
      for (double& x : k.data()) x = rng.coin() ? 0.2 : 0.8;
      const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
      const RelaxedForwardTrace soft = relaxed_forward(q, k, v, cfg, 1e4);
      const BitTimeTensor qb = tif_convert(q, cfg), kb = tif_convert(k, cfg);
      const AttentionResult hard = bitwise_attention(qb, kb, v);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          max_gap = std::max(
              max_gap, std::abs(soft.scores(i, j) - hard.scores(i, j)));
    }
    r.measured = max_gap;
    r.pass = max_gap <= 1e-6;
  });

  add("grad_dv_matches_fd", [&](PropertyResult& r) {
    Rng rng(seed + 10);
    TifConfig cfg;
    cfg.time_steps = 2;
    FloatMatrix q = random_matrix(rng, 3, 4, -1.0, 1.0);
    FloatMatrix k = random_matrix(rng, 3, 4, -1.0, 1.0);
    FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
    const FloatMatrix upstream = random_matrix(rng, 3, 4, -1.0, 1.0);
    const GradBundle gb = backward(q, k, v, cfg, upstream);
    const BitTimeTensor qb = tif_convert(q, cfg), kb = tif_convert(k, cfg);
    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < 4; ++c) {
        const double keep = v(i, c);
        v(i, c) = keep + h;
        const double up = loss_under(upstream, bitwise_attention(qb, kb, v).output);
        v(i, c) = keep - h;
        const double dn = loss_under(upstream, bitwise_attention(qb, kb, v).output);
        v(i, c) = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double scale = std::max({std::abs(fd), std::abs(gb.d_v(i, c)), 1e-12});
        max_rel = std::max(max_rel, std::abs(fd - gb.d_v(i, c)) / scale);
      }
    r.measured = max_rel;
    r.pass = max_rel <= 1e-6;
  });

  add("grad_dq_dk_match_fd", [&](PropertyResult& r) {
    Rng rng(seed + 11);
    TifConfig cfg;
    cfg.time_steps = 2;
    cfg.norm_mode = NormMode::Raw;  // keep min/max stats out of the probe
    FloatMatrix q = random_matrix(rng, 3, 4, 0.05, 0.95);
    FloatMatrix k = random_matrix(rng, 3, 4, 0.05, 0.95);
    const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
    const FloatMatrix upstream = random_matrix(rng, 3, 4, -1.0, 1.0);
    const GradBundle gb =
        backward(q, k, v, cfg, upstream, GradMode::RelaxedExact, 1.0);
    const double h = 1e-5;
    double max_rel = 0.0;
    const auto probe = [&](FloatMatrix& m, const FloatMatrix& grad) {
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 4; ++c) {
          const double keep = m(i, c);
          m(i, c) = keep + h;
          const double up =
              loss_under(upstream, relaxed_forward(q, k, v, cfg, 1.0).output);
          m(i, c) = keep - h;
          const double dn =
              loss_under(upstream, relaxed_forward(q, k, v, cfg, 1.0).output);
          m(i, c) = keep;
          const double fd = (up - dn) / (2.0 * h);
          const double scale =
              std::max({std::abs(fd), std::abs(grad(i, c)), 1e-12});
          max_rel = std::max(max_rel, std::abs(fd - grad(i, c)) / scale);
        }
    };
    probe(q, gb.d_q);
    probe(k, gb.d_k);
    r.measured = max_rel;
    r.pass = max_rel <= 1e-4;
  });

  add("hard_forward_piecewise_constant", [&](PropertyResult& r) {
    Rng rng(seed + 12);
    TifConfig cfg;
    cfg.time_steps = 2;
    cfg.norm_mode = NormMode::Raw;
    const double h = 1e-7;
    std::size_t zero = 0, total = 0;
    for (int rep = 0; rep < 10; ++rep) {
      FloatMatrix q = random_matrix(rng, 3, 4, 0.05, 0.95);
      const FloatMatrix k = random_matrix(rng, 3, 4, 0.05, 0.95);
      const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
      const FloatMatrix upstream = random_matrix(rng, 3, 4, -1.0, 1.0);
      const auto hard_loss = [&]() {
        const BitTimeTensor qb = tif_convert(q, cfg), kb = tif_convert(k, cfg);
        return loss_under(upstream, bitwise_attention(qb, kb, v).output);
      };
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < 4; ++c) {
          const double keep = q(i, c);
          q(i, c) = keep + h;
          const double up = hard_loss();
          q(i, c) = keep - h;
          const double dn = hard_loss();
          q(i, c) = keep;
          zero += up == dn;
          ++total;
        }
    }
    r.measured = static_cast<double>(zero) / static_cast<double>(total);
    r.pass = r.measured >= 0.99;
  });

  add("cost_model_closed_form", [&](PropertyResult& r) {
    Rng rng(seed + 13);
    std::size_t mismatches = 0;
    for (int rep = 0; rep < 5; ++rep) {
      const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 12));
      const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 40));
      const std::size_t steps =
          static_cast<std::size_t>(rng.uniform_int(1, 8));

      OpCounter measured_bits;
      const FloatMatrix m = random_matrix(rng, n, d, -2.0, 2.0);
      TifConfig cfg;
      cfg.time_steps = steps;
      const BitTimeTensor q = tif_convert(m, cfg, &measured_bits);
      const FloatMatrix v = random_matrix(rng, n, d, -1.0, 1.0);
      const AttentionResult naive = naive_bitwise_attention(q, q, v);
      measured_bits.merge(naive.ops);
      const OpCounter predicted_bits = count_bitwise_attention(n, d, steps);
      mismatches += !(measured_bits == predicted_bits);

      OpCounter measured_float;
      const FloatMatrix fq = random_matrix(rng, n, d, -1.0, 1.0);
      const FloatMatrix fk = random_matrix(rng, n, d, -1.0, 1.0);
      reference_attention(fq, fk, v, &measured_float);
      const OpCounter predicted_float = count_float_attention(n, d);
      mismatches += !(measured_float == predicted_float);

      // Score-stage cost ratio between the two pipelines is exactly T.
      mismatches += predicted_bits.stages.at("scores").acs !=
                    steps * predicted_float.stages.at("scores").macs;

      const CostReport rep_bits = energy(predicted_bits);
      const double expect = kMacEnergyPj * static_cast<double>(rep_bits.flops) +
                            kAcEnergyPj * static_cast<double>(rep_bits.sops);
      mismatches += rep_bits.energy_pj != expect;
    }
    r.measured = static_cast<double>(mismatches);
    r.pass = mismatches == 0;
  });

  add("toy_task_well_formed", [&](PropertyResult& r) {
    SynthTaskConfig cfg;
    cfg.train_examples = 64;
    cfg.test_examples = 32;
    const SynthTask task = SynthTask::generate(cfg, seed + 14);
    std::size_t bad_labels = 0;
    const auto check = [&](const std::vector<Example>& split) {
      for (const Example& ex : split) {
        const bool has_needle =
            std::find(ex.tokens.begin(), ex.tokens.end(), cfg.needle_token) !=
            ex.tokens.end();
        bad_labels += has_needle != (ex.label == 1);
      }
    };
    check(task.train_set);
    check(task.test_set);
    const double balance = positive_fraction(task.train_set);
    r.measured = balance;
    r.pass = bad_labels == 0 && balance >= 0.45 && balance <= 0.55;
  });

  add("thread_count_invariance", [&](PropertyResult& r) {
    Rng rng(seed + 15);
    const BitTimeTensor q = pack(random_bool_tensor(rng, 4, 16, 70));
    const BitTimeTensor k = pack(random_bool_tensor(rng, 4, 16, 70));
    const FloatMatrix v = random_matrix(rng, 16, 70, -1.0, 1.0);
    const AttentionResult one = bitwise_attention(q, k, v, 1);
    const AttentionResult four = bitwise_attention(q, k, v, 4);
    const AttentionResult again = bitwise_attention(q, k, v, 4);
    r.pass = one.scores == four.scores && one.output == four.output &&
             four.output == again.output;
    r.measured = r.pass ? 0.0 : 1.0;
  });

  return out;
}

}  // namespace bitattn

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bitattn/attention.hpp"
#include "bitattn/rng.hpp"
#include "bitattn/surrogate.hpp"
#include "oracles.hpp"

using namespace bitattn;

namespace {

FloatMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo,
                          double hi) {
  FloatMatrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

double hard_loss(const FloatMatrix& q, const FloatMatrix& k,
                 const FloatMatrix& v, const TifConfig& cfg,
                 const FloatMatrix& upstream) {
  const BitTimeTensor qb = tif_convert(q, cfg), kb = tif_convert(k, cfg);
  const AttentionResult res = bitwise_attention(qb, kb, v);
  double acc = 0.0;
  for (std::size_t i = 0; i < res.output.rows(); ++i)
    for (std::size_t c = 0; c < res.output.cols(); ++c)
      acc += upstream(i, c) * res.output(i, c);
  return acc;
}

}  // namespace

TEST_CASE("sigmoid basics") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid_grad(0.0) == 0.25);
  CHECK(sigmoid(40.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sigmoid(-40.0) == doctest::Approx(0.0).epsilon(1e-15));
  // no overflow deep in the tails
  CHECK(sigmoid(750.0) == 1.0);
  CHECK(sigmoid(-750.0) == 0.0);
  Rng rng(401);
  for (int rep = 0; rep < 100; ++rep) {
    const double x = rng.uniform(-30.0, 30.0);
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sigmoid(x) > 0.0);
    CHECK(sigmoid(x) < 1.0);
  }
}

TEST_CASE("sigmoid_grad matches finite differences of sigmoid") {
  Rng rng(409);
  for (int rep = 0; rep < 50; ++rep) {
    const double x = rng.uniform(-6.0, 6.0);
    const double h = 1e-6;
    const double fd = (sigmoid(x + h) - sigmoid(x - h)) / (2.0 * h);
    CHECK(sigmoid_grad(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("squared difference equals Hamming distance on binary vectors") {
  Rng rng(419);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 128));
    std::uint64_t sq = 0, ham = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const int a = rng.coin() ? 1 : 0, b = rng.coin() ? 1 : 0;
      sq += static_cast<std::uint64_t>((a - b) * (a - b));
      ham += a != b;
    }
    CHECK(sq == ham);
  }
}

TEST_CASE("relaxed forward matches the independent oracle") {
  Rng rng(421);
  TifConfig cfg;
  cfg.time_steps = 3;
  cfg.norm_mode = NormMode::Raw;
  const FloatMatrix q = random_matrix(rng, 2, 3, 0.0, 1.0);
  const FloatMatrix k = random_matrix(rng, 2, 3, 0.0, 1.0);
  const FloatMatrix v = random_matrix(rng, 2, 3, -1.0, 1.0);
  const FloatMatrix upstream = random_matrix(rng, 2, 3, -1.0, 1.0);
  const RelaxedForwardTrace tr = relaxed_forward(q, k, v, cfg, 1.0);
  double lib_loss = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      lib_loss += upstream(i, c) * tr.output(i, c);
  const double want =
      oracle::relaxed_loss(q, k, v, upstream, 3, 1.0, 1.0);
  CHECK(lib_loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("relaxed scores approach the hard scores as hardness grows") {
  Rng rng(431);
  TifConfig cfg;
  cfg.time_steps = 4;
  cfg.norm_mode = NormMode::Raw;
  FloatMatrix q(3, 4), k(3, 4);
  // stay away from membrane values that land exactly on the threshold,
  // where the soft spike is pinned at 1/2 for every hardness
  for (double& x : q.data()) x = rng.coin() ? 0.15 : 0.85;
  for (double& x : k.data()) x = rng.coin() ? 0.15 : 0.85;
  const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);

  double prev_gap = 1e300;
  for (const double hardness : {10.0, 100.0, 10000.0}) {
    const RelaxedForwardTrace soft = relaxed_forward(q, k, v, cfg, hardness);
    const BitTimeTensor qb = tif_convert(q, cfg), kb = tif_convert(k, cfg);
    const AttentionResult hard = bitwise_attention(qb, kb, v);
    double gap = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        gap = std::max(gap,
                       std::abs(soft.scores(i, j) - hard.scores(i, j)));
    CHECK(gap <= prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap <= 1e-6);
}

TEST_CASE("identical q and k give unit diagonal scores at any hardness") {
  Rng rng(433);
  TifConfig cfg;
  cfg.time_steps = 2;
  const FloatMatrix q = random_matrix(rng, 3, 3, -2.0, 2.0);
  const RelaxedForwardTrace tr = relaxed_forward(q, q, random_matrix(rng, 3, 3, -1.0, 1.0), cfg, 0.7);
  for (std::size_t i = 0; i < 3; ++i) CHECK(tr.scores(i, i) == 1.0);
}

TEST_CASE("zero upstream gives zero gradients") {
  Rng rng(439);
  TifConfig cfg;
  cfg.time_steps = 2;
  const FloatMatrix q = random_matrix(rng, 3, 4, -1.0, 1.0);
  const FloatMatrix k = random_matrix(rng, 3, 4, -1.0, 1.0);
  const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
  const FloatMatrix zero(3, 4, 0.0);
  for (const GradMode mode :
       {GradMode::RelaxedExact, GradMode::HardSurrogate}) {
    const GradBundle gb = backward(q, k, v, cfg, zero, mode);
    for (const double g : gb.d_q.data()) CHECK(g == 0.0);
    for (const double g : gb.d_k.data()) CHECK(g == 0.0);
    for (const double g : gb.d_v.data()) CHECK(g == 0.0);
  }
}

TEST_CASE("d_v is exact for the hard pipeline") {
  Rng rng(443);
  TifConfig cfg;
  cfg.time_steps = 2;
  FloatMatrix q = random_matrix(rng, 3, 4, -1.0, 1.0);
  FloatMatrix k = random_matrix(rng, 3, 4, -1.0, 1.0);
  FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
  const FloatMatrix upstream = random_matrix(rng, 3, 4, -1.0, 1.0);
  const GradBundle gb = backward(q, k, v, cfg, upstream);

  const double h = 1e-5;
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t c = 0; c < 4; ++c) {
      const double keep = v(j, c);
      v(j, c) = keep + h;
      const double up = hard_loss(q, k, v, cfg, upstream);
      v(j, c) = keep - h;
      const double dn = hard_loss(q, k, v, cfg, upstream);
      v(j, c) = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double scale =
          std::max({std::abs(fd), std::abs(gb.d_v(j, c)), 1e-12});
      CHECK(std::abs(fd - gb.d_v(j, c)) / scale <= 1e-6);
    }
}

TEST_CASE("relaxed-exact d_q and d_k match finite differences") {
  Rng rng(449);
  TifConfig cfg;
  cfg.time_steps = 2;
  cfg.norm_mode = NormMode::Raw;
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
      for (std::size_t f = 0; f < 4; ++f) {
        const double keep = m(i, f);
        m(i, f) = keep + h;
        const double up =
            oracle::relaxed_loss(q, k, v, upstream, 2, 1.0, 1.0);
        m(i, f) = keep - h;
        const double dn =
            oracle::relaxed_loss(q, k, v, upstream, 2, 1.0, 1.0);
        m(i, f) = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double scale =
            std::max({std::abs(fd), std::abs(grad(i, f)), 1e-12});
        max_rel = std::max(max_rel, std::abs(fd - grad(i, f)) / scale);
      }
  };
  probe(q, gb.d_q);
  probe(k, gb.d_k);
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("the pre-transform scale factor reaches the gradients") {
  // Same relaxed pipeline, but the inputs are an affine blow-up of the raw
  // ones; with min/max statistics treated as constants, gradients must
  // shrink by exactly the range factor.
  Rng rng(457);
  TifConfig raw_cfg;
  raw_cfg.time_steps = 2;
  raw_cfg.norm_mode = NormMode::Raw;
  TifConfig unit_cfg = raw_cfg;
  unit_cfg.norm_mode = NormMode::UnitRange;

  FloatMatrix q = random_matrix(rng, 3, 4, 0.0, 1.0);
  FloatMatrix k = random_matrix(rng, 3, 4, 0.0, 1.0);
  // pin the range so UnitRange on the scaled copy reproduces q exactly
  q(0, 0) = 0.0;
  q(2, 3) = 1.0;
  k(0, 0) = 0.0;
  k(2, 3) = 1.0;
  const double scale = 8.0;
  FloatMatrix q_big(3, 4), k_big(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t f = 0; f < 4; ++f) {
      q_big(i, f) = q(i, f) * scale;
      k_big(i, f) = k(i, f) * scale;
    }
  const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
  const FloatMatrix upstream = random_matrix(rng, 3, 4, -1.0, 1.0);

  const GradBundle raw = backward(q, k, v, raw_cfg, upstream);
  const GradBundle unit = backward(q_big, k_big, v, unit_cfg, upstream);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t f = 0; f < 4; ++f) {
      CHECK(unit.d_q(i, f) ==
            doctest::Approx(raw.d_q(i, f) / scale).epsilon(1e-12));
      CHECK(unit.d_k(i, f) ==
            doctest::Approx(raw.d_k(i, f) / scale).epsilon(1e-12));
    }
}

TEST_CASE("degenerate constant inputs give zero q/k gradients, not NaNs") {
  TifConfig cfg;
  cfg.time_steps = 3;
  const FloatMatrix q(3, 4, 2.5);  // constant: unit-range denom is 0
  const FloatMatrix k(3, 4, -1.0);
  Rng rng(461);
  const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
  const FloatMatrix upstream = random_matrix(rng, 3, 4, -1.0, 1.0);
  const GradBundle gb = backward(q, k, v, cfg, upstream);
  for (const double g : gb.d_q.data()) {
    CHECK(std::isfinite(g));
    CHECK(g == 0.0);
  }
  for (const double g : gb.d_k.data()) CHECK(std::isfinite(g));
  for (const double g : gb.d_v.data()) CHECK(std::isfinite(g));
}

TEST_CASE("hard-surrogate mode produces finite gradients and the same d_v") {
  Rng rng(463);
  TifConfig cfg;
  cfg.time_steps = 3;
  const FloatMatrix q = random_matrix(rng, 4, 4, -1.0, 1.0);
  const FloatMatrix k = random_matrix(rng, 4, 4, -1.0, 1.0);
  const FloatMatrix v = random_matrix(rng, 4, 4, -1.0, 1.0);
  const FloatMatrix upstream = random_matrix(rng, 4, 4, -1.0, 1.0);
  const GradBundle ste = backward(q, k, v, cfg, upstream, GradMode::HardSurrogate);
  const GradBundle rex = backward(q, k, v, cfg, upstream, GradMode::RelaxedExact);
  CHECK(ste.d_v == rex.d_v);
  bool any_nonzero = false;
  for (const double g : ste.d_q.data()) {
    CHECK(std::isfinite(g));
    any_nonzero = any_nonzero || g != 0.0;
  }
  CHECK(any_nonzero);
}

TEST_CASE("backward shape errors") {
  TifConfig cfg;
  const FloatMatrix q(3, 4, 0.5);
  const FloatMatrix k(3, 5, 0.5);
  const FloatMatrix v(3, 4, 0.5);
  const FloatMatrix upstream(3, 4, 0.5);
  CHECK_THROWS_AS(backward(q, k, v, cfg, upstream), ShapeError);
  const FloatMatrix k2(3, 4, 0.5);
  const FloatMatrix bad_upstream(3, 2, 0.5);
  CHECK_THROWS_AS(backward(q, k2, v, cfg, bad_upstream), ShapeError);
  CHECK_THROWS_AS(relaxed_forward(q, k, v, cfg, 0.0), DomainError);
}

TEST_CASE("hard forward is flat almost everywhere in q") {
  Rng rng(467);
  TifConfig cfg;
  cfg.time_steps = 2;
  cfg.norm_mode = NormMode::Raw;
  const double h = 1e-7;
  std::size_t zero = 0, total = 0;
  for (int rep = 0; rep < 5; ++rep) {
    FloatMatrix q = random_matrix(rng, 3, 4, 0.05, 0.95);
    const FloatMatrix k = random_matrix(rng, 3, 4, 0.05, 0.95);
    const FloatMatrix v = random_matrix(rng, 3, 4, -1.0, 1.0);
    const FloatMatrix upstream = random_matrix(rng, 3, 4, -1.0, 1.0);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t f = 0; f < 4; ++f) {
        const double keep = q(i, f);
        q(i, f) = keep + h;
        const double up = hard_loss(q, k, v, cfg, upstream);
        q(i, f) = keep - h;
        const double dn = hard_loss(q, k, v, cfg, upstream);
        q(i, f) = keep;
        zero += up == dn;
        ++total;
      }
  }
  CHECK(static_cast<double>(zero) / static_cast<double>(total) >= 0.99);
}

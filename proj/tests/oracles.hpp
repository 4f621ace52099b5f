#pragma once

// Reference implementations used only by tests. Written in the plainest
// style possible and kept independent of the library kernels they check, so
// an agreement between the two is evidence, not tautology.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bitattn/matrix.hpp"

namespace oracle {

inline bitattn::FloatMatrix matmul(const bitattn::FloatMatrix& a,
                                   const bitattn::FloatMatrix& b) {
  bitattn::FloatMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

// Softmax attention without the max-shift trick (safe at test scales).
inline bitattn::FloatMatrix softmax_attention(const bitattn::FloatMatrix& q,
                                              const bitattn::FloatMatrix& k,
                                              const bitattn::FloatMatrix& v) {
  const std::size_t m = q.rows(), n = k.rows(), d = q.cols();
  bitattn::FloatMatrix a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t f = 0; f < d; ++f) s += q(i, f) * k(j, f);
      a(i, j) = s / std::sqrt(static_cast<double>(d));
    }
  for (std::size_t i = 0; i < m; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(a(i, j));
    for (std::size_t j = 0; j < n; ++j) a(i, j) = std::exp(a(i, j)) / z;
  }
  return matmul(a, v);
}

inline std::uint64_t hamming_bytes(std::span<const std::uint8_t> a,
                                   std::span<const std::uint8_t> b) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] != b[i];
  return s;
}

// Integrate-and-fire simulation written independently of the library's:
// tracks the running charge and emits a spike whenever it reaches v_th.
inline std::vector<std::uint8_t> spike_train(double x, std::size_t steps,
                                             double v_th = 1.0) {
  std::vector<std::uint8_t> out(steps, 0);
  double charge = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    charge += x;
    if (charge >= v_th) {
      out[t] = 1;
      charge -= v_th;
    }
  }
  return out;
}

// Relaxed pipeline re-implementation for gradient and agreement checks:
// sigmoid-softened threshold, squared-difference distances, reciprocal
// scores. Normalization is the caller's problem (feed pre-scaled values).
inline double relaxed_loss(const bitattn::FloatMatrix& q,
                           const bitattn::FloatMatrix& k,
                           const bitattn::FloatMatrix& v,
                           const bitattn::FloatMatrix& upstream,
                           std::size_t steps, double v_th, double hardness) {
  const std::size_t n = q.rows(), d = q.cols();
  std::vector<bitattn::FloatMatrix> qs(steps, bitattn::FloatMatrix(n, d));
  std::vector<bitattn::FloatMatrix> ks(steps, bitattn::FloatMatrix(n, d));
  const auto simulate = [&](const bitattn::FloatMatrix& x,
                            std::vector<bitattn::FloatMatrix>& spikes) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double mem = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
          const double h = mem + x(i, j);
          const double s = 1.0 / (1.0 + std::exp(-hardness * (h - v_th)));
          spikes[t](i, j) = s;
          mem = h - v_th * s;
        }
      }
  };
  simulate(q, qs);
  simulate(k, ks);

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> score(n);
    for (std::size_t j = 0; j < n; ++j) {
      double dist = 0.0;
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t f = 0; f < d; ++f) {
          const double diff = qs[t](i, f) - ks[t](j, f);
          dist += diff * diff;
        }
      score[j] = 1.0 / (dist + 1.0);
    }
    for (std::size_t c = 0; c < v.cols(); ++c) {
      double y = 0.0;
      for (std::size_t j = 0; j < n; ++j) y += score[j] * v(j, c);
      loss += upstream(i, c) * y;
    }
  }
  return loss;
}

}  // namespace oracle

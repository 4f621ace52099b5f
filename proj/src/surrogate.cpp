#include "bitattn/surrogate.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "bitattn/attention.hpp"
#include "bitattn/bit_tensor.hpp"

namespace bitattn {

double sigmoid(double x) {
  // Evaluate through exp of a non-positive argument on both tails so large
  // |x| saturates instead of overflowing.
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sigmoid_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

namespace {

struct Trace {
  std::vector<FloatMatrix> spikes;
  std::vector<FloatMatrix> membranes;  // pre-threshold potential H per step
};

// Neuron recurrence with the threshold softened to
// sigmoid(hardness * (H - v_th)); the soft spike also drives the reset.
Trace soft_trace(const FloatMatrix& x, std::size_t steps, double v_th,
                 double hardness) {
  Trace tr;
  tr.spikes.assign(steps, FloatMatrix(x.rows(), x.cols()));
  tr.membranes.assign(steps, FloatMatrix(x.rows(), x.cols()));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double mem = 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        const double h = mem + x(i, j);
        const double s = sigmoid(hardness * (h - v_th));
        tr.membranes[t](i, j) = h;
        tr.spikes[t](i, j) = s;
        mem = h - v_th * s;
      }
    }
  }
  return tr;
}

// Same bookkeeping along the hard (threshold) trajectories; spikes are
// exact 0/1 values.
Trace hard_trace(const FloatMatrix& x, std::size_t steps, double v_th) {
  Trace tr;
  tr.spikes.assign(steps, FloatMatrix(x.rows(), x.cols()));
  tr.membranes.assign(steps, FloatMatrix(x.rows(), x.cols()));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double mem = 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        const double h = mem + x(i, j);
        const bool fired = h - v_th >= 0.0;
        tr.membranes[t](i, j) = h;
        tr.spikes[t](i, j) = fired ? 1.0 : 0.0;
        mem = fired ? h - v_th : h;
      }
    }
  }
  return tr;
}

void check_pair_shapes(const FloatMatrix& q_f, const FloatMatrix& k_f,
                       const FloatMatrix& v, const char* who) {
  if (q_f.empty() || k_f.empty() || v.empty())
    throw ShapeError(std::string(who) + ": empty operand");
  if (q_f.rows() != k_f.rows() || q_f.cols() != k_f.cols())
    throw ShapeError(std::string(who) + ": q and k shapes differ");
  if (v.rows() != q_f.rows())
    throw ShapeError(std::string(who) + ": v must have one row per token");
  if (!q_f.all_finite() || !k_f.all_finite() || !v.all_finite())
    throw DomainError(std::string(who) + ": non-finite entry");
}

// Backpropagates ds (gradient w.r.t. each step's spike) through the neuron
// recurrence of one converted matrix, using the membrane trajectory in
// `tr`. Returns the gradient w.r.t. the *normalized* input matrix.
FloatMatrix backprop_through_neuron(const Trace& tr,
                                    const std::vector<FloatMatrix>& ds,
                                    double v_th, double hardness) {
  const std::size_t steps = tr.membranes.size();
  const std::size_t n = tr.membranes[0].rows(), d = tr.membranes[0].cols();
  FloatMatrix dx(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double dv_next = 0.0;
      double acc = 0.0;
      for (std::size_t t = steps; t-- > 0;) {
        const double g =
            hardness *
            sigmoid_grad(hardness * (tr.membranes[t](i, j) - v_th));
        // H feeds the spike (through the softened threshold) and the next
        // membrane (through the reset v = H - v_th * s).
        const double dh = ds[t](i, j) * g + dv_next * (1.0 - v_th * g);
        acc += dh;
        dv_next = dh;
      }
      dx(i, j) = acc;
    }
  }
  return dx;
}

}  // namespace

RelaxedForwardTrace relaxed_forward(const FloatMatrix& q_f,
                                    const FloatMatrix& k_f,
                                    const FloatMatrix& v, const TifConfig& cfg,
                                    double hardness) {
  cfg.validate();
  if (!std::isfinite(hardness) || hardness <= 0.0)
    throw DomainError("relaxed_forward: hardness must be finite and positive");
  check_pair_shapes(q_f, k_f, v, "relaxed_forward");

  const FloatMatrix qn = minmax_pretransform(q_f, cfg.norm_mode);
  const FloatMatrix kn = minmax_pretransform(k_f, cfg.norm_mode);
  const std::size_t n = qn.rows(), d = qn.cols(), steps = cfg.time_steps;

  Trace qt = soft_trace(qn, steps, cfg.v_th, hardness);
  Trace kt = soft_trace(kn, steps, cfg.v_th, hardness);

  RelaxedForwardTrace out;
  out.distance_sums = FloatMatrix(n, n);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double dist = 0.0;
        for (std::size_t f = 0; f < d; ++f) {
          const double diff = qt.spikes[t](i, f) - kt.spikes[t](j, f);
          dist += diff * diff;
        }
        out.distance_sums(i, j) += dist;
      }
    }
  }

  out.scores = FloatMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.scores(i, j) = 1.0 / (out.distance_sums(i, j) + 1.0);

  out.output = FloatMatrix(n, v.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < v.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += out.scores(i, j) * v(j, c);
      out.output(i, c) = acc;
    }

  out.q_spikes = std::move(qt.spikes);
  out.q_membranes = std::move(qt.membranes);
  out.k_spikes = std::move(kt.spikes);
  out.k_membranes = std::move(kt.membranes);
  return out;
}

GradBundle backward(const FloatMatrix& q_f, const FloatMatrix& k_f,
                    const FloatMatrix& v, const TifConfig& cfg,
                    const FloatMatrix& upstream, GradMode mode,
                    double hardness) {
  cfg.validate();
  if (!std::isfinite(hardness) || hardness <= 0.0)
    throw DomainError("backward: hardness must be finite and positive");
  check_pair_shapes(q_f, k_f, v, "backward");
  if (upstream.rows() != q_f.rows() || upstream.cols() != v.cols())
    throw ShapeError("backward: upstream must match the output shape");
  if (!upstream.all_finite())
    throw DomainError("backward: non-finite entry in upstream");

  const std::size_t n = q_f.rows(), d = q_f.cols(), dv = v.cols();
  const std::size_t steps = cfg.time_steps;

  // Hard forward: the score matrix that actually multiplies v.
  const BitTimeTensor q_b = tif_convert(q_f, cfg);
  const BitTimeTensor k_b = tif_convert(k_f, cfg);
  const AttentionResult hard = bitwise_attention(q_b, k_b, v);

  GradBundle gb;

  // Y = A * v is linear in v, so this gradient is exact, not a surrogate.
  gb.d_v = FloatMatrix(n, dv);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < dv; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += hard.scores(i, j) * upstream(i, c);
      gb.d_v(j, c) = acc;
    }

  // dL/dA(i,j) = sum_c upstream(i,c) * v(j,c).
  FloatMatrix d_scores(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < dv; ++c) acc += upstream(i, c) * v(j, c);
      d_scores(i, j) = acc;
    }

  // Spike and membrane trajectories the surrogate chain rule runs along,
  // and the distance sums feeding A = 1/(dist + 1).
  std::vector<FloatMatrix> q_spikes, k_spikes;
  Trace q_tr, k_tr;
  FloatMatrix dist_sums(n, n);
  if (mode == GradMode::RelaxedExact) {
    RelaxedForwardTrace tr = relaxed_forward(q_f, k_f, v, cfg, hardness);
    q_spikes = std::move(tr.q_spikes);
    k_spikes = std::move(tr.k_spikes);
    q_tr.membranes = std::move(tr.q_membranes);
    k_tr.membranes = std::move(tr.k_membranes);
    dist_sums = std::move(tr.distance_sums);
  } else {
    const FloatMatrix qn = minmax_pretransform(q_f, cfg.norm_mode);
    const FloatMatrix kn = minmax_pretransform(k_f, cfg.norm_mode);
    q_tr = hard_trace(qn, steps, cfg.v_th);
    k_tr = hard_trace(kn, steps, cfg.v_th);
    q_spikes = q_tr.spikes;
    k_spikes = k_tr.spikes;
    for (std::size_t t = 0; t < steps; ++t) {
      const DistanceMatrix dm = hamming_matrix(q_b, k_b, t);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          dist_sums(i, j) += static_cast<double>(dm.at(i, j));
    }
  }

  // dL/ddist(i,j) through A = 1/(dist + 1).
  FloatMatrix d_dist(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double denom = dist_sums(i, j) + 1.0;
      d_dist(i, j) = -d_scores(i, j) / (denom * denom);
    }

  // dist(i,j) = sum_t sum_f (qs(i,f) - ks(j,f))^2, so per step
  //   d qs(i,f) = 2 * (qs(i,f) * rowsum_i(d_dist) - (d_dist * ks)(i,f))
  //   d ks(j,f) = 2 * (ks(j,f) * colsum_j(d_dist) - (d_dist^T * qs)(j,f)).
  std::vector<double> row_sum(n, 0.0), col_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row_sum[i] += d_dist(i, j);
      col_sum[j] += d_dist(i, j);
    }

  std::vector<FloatMatrix> dq_spikes(steps, FloatMatrix(n, d));
  std::vector<FloatMatrix> dk_spikes(steps, FloatMatrix(n, d));
  for (std::size_t t = 0; t < steps; ++t) {
    const FloatMatrix& qs = q_spikes[t];
    const FloatMatrix& ks = k_spikes[t];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < d; ++f) {
        double cross = 0.0;
        for (std::size_t j = 0; j < n; ++j) cross += d_dist(i, j) * ks(j, f);
        dq_spikes[t](i, f) = 2.0 * (qs(i, f) * row_sum[i] - cross);
      }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t f = 0; f < d; ++f) {
        double cross = 0.0;
        for (std::size_t i = 0; i < n; ++i) cross += d_dist(i, j) * qs(i, f);
        dk_spikes[t](j, f) = 2.0 * (ks(j, f) * col_sum[j] - cross);
      }
  }

  FloatMatrix dq_norm =
      backprop_through_neuron(q_tr, dq_spikes, cfg.v_th, hardness);
  FloatMatrix dk_norm =
      backprop_through_neuron(k_tr, dk_spikes, cfg.v_th, hardness);

  // Through the pre-transform; min/max statistics are held constant, so the
  // map is linear with slope 1/denom per entry (slope 0 when degenerate).
  const NormStats qs_stats = norm_stats(q_f, cfg.norm_mode);
  const NormStats ks_stats = norm_stats(k_f, cfg.norm_mode);
  const double q_scale = qs_stats.denom == 0.0 ? 0.0 : 1.0 / qs_stats.denom;
  const double k_scale = ks_stats.denom == 0.0 ? 0.0 : 1.0 / ks_stats.denom;

  gb.d_q = FloatMatrix(n, d);
  gb.d_k = FloatMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < d; ++f) {
      gb.d_q(i, f) = dq_norm(i, f) * q_scale;
      gb.d_k(i, f) = dk_norm(i, f) * k_scale;
    }
  return gb;
}

}  // namespace bitattn

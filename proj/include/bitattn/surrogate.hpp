#pragma once

#include <cstddef>
#include <vector>

#include "bitattn/matrix.hpp"
#include "bitattn/tif.hpp"

namespace bitattn {

double sigmoid(double x);
double sigmoid_grad(double x);  // sigmoid(x) * (1 - sigmoid(x))

// How d_q / d_k are produced by backward().
enum class GradMode {
  // Exact reverse-mode differentiation of the relaxed forward pass. Matches
  // finite differences of relaxed_forward by construction and is what the
  // gradient checks pin down.
  RelaxedExact,
  // Straight-through estimate: the chain rule is applied along the *hard*
  // trajectories, with the threshold step's derivative replaced by the
  // sigmoid surrogate evaluated at the hard membrane values. Cheaper, biased.
  HardSurrogate,
};

struct GradBundle {
  FloatMatrix d_q;  // gradient w.r.t. q_f (same shape)
  FloatMatrix d_k;
  FloatMatrix d_v;
};

// Differentiable stand-in for the hard pipeline: the Heaviside threshold is
// replaced by sigmoid(hardness * (H - v_th)) inside the neuron recurrence
// (the soft spike also drives the membrane reset), the integer Hamming
// distance by the squared-difference sum over soft spikes, which coincides
// with it on binary vectors. Scores and output keep their hard-path form.
struct RelaxedForwardTrace {
  std::vector<FloatMatrix> q_spikes, k_spikes;        // T entries, n x d
  std::vector<FloatMatrix> q_membranes, k_membranes;  // pre-threshold H
  FloatMatrix distance_sums;  // n x n, summed over time
  FloatMatrix scores;         // 1 / (distance_sums + 1)
  FloatMatrix output;         // scores * v
};

RelaxedForwardTrace relaxed_forward(const FloatMatrix& q_f,
                                    const FloatMatrix& k_f,
                                    const FloatMatrix& v, const TifConfig& cfg,
                                    double hardness);

// Gradients of sum(upstream * Y) w.r.t. the float attention inputs.
//
// d_v is exact for the hard pipeline in every mode: Y is linear in v with
// the hard score matrix as coefficients, so d_v = A_hard^T * upstream.
//
// d_q / d_k flow back through the spike conversion, which has zero
// derivative almost everywhere, so a surrogate is required; `mode` picks the
// scheme (see GradMode). The min/max normalization statistics are treated as
// constants: only the per-entry linear factor 1/denom is propagated.
GradBundle backward(const FloatMatrix& q_f, const FloatMatrix& k_f,
                    const FloatMatrix& v, const TifConfig& cfg,
                    const FloatMatrix& upstream,
                    GradMode mode = GradMode::RelaxedExact,
                    double hardness = 1.0);

}  // namespace bitattn

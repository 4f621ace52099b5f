#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bitattn/bit_tensor.hpp"
#include "bitattn/matrix.hpp"

namespace bitattn {

struct OpCounter;

struct TifConfig {
  std::size_t time_steps = 8;
  double v_th = 1.0;
  NormMode norm_mode = NormMode::UnitRange;

  void validate() const;  // time_steps >= 1, v_th finite and > 0
};

struct IfStepResult {
  bool fired = false;
  double membrane = 0.0;
};

// One integrate-and-fire update. Charge: H = membrane + input. Fire when
// H - v_th >= 0 (the threshold itself fires). Reset by subtraction: the
// next membrane is H - v_th after a spike, H otherwise, so charge above
// threshold carries over instead of being discarded.
IfStepResult if_step(double membrane, double input, double v_th);

// Drives each matrix entry into an IF neuron for cfg.time_steps steps after
// applying cfg.norm_mode, producing a T x n x d spike tensor. With inputs in
// [0,1] and v_th = 1 the spike count over T steps is exactly floor(T * x).
// When `ops` is given, tallies one addition and one threshold comparison per
// neuron step.
BitTimeTensor tif_convert(const FloatMatrix& m, const TifConfig& cfg,
                          OpCounter* ops = nullptr);

// Spike train of a single scalar fed for `time_steps` steps, no
// normalization applied.
std::vector<std::uint8_t> scalar_spike_train(double x, std::size_t time_steps,
                                             double v_th = 1.0);

// Diagnostic for the floor identity at one scalar. Requires x in [0,1] and
// cfg.v_th == 1. alpha is the fractional part of T*x; near_boundary flags
// T*x within 1e-9 of the next integer on either side, where floating-point
// rounding can legitimately move the floor by one.
struct TifApproxReport {
  double x = 0.0;
  std::uint64_t spike_sum = 0;
  std::int64_t floor_tx = 0;
  double alpha = 0.0;
  bool near_boundary = false;
};

TifApproxReport spike_sum_report(double x, const TifConfig& cfg);

// Deviation |x/y - S_T(x)/S_T(y)| for a list of step counts, where S_T is
// the simulated spike sum at v_th = 1. The deviation is undefined while
// S_T(y) == 0 (empty optional). Inputs must lie in (0, 1].
struct RatioPoint {
  std::size_t time_steps = 0;
  std::optional<double> deviation;
};

std::vector<RatioPoint> ratio_convergence(double x, double y,
                                          std::span<const std::size_t> t_values);

}  // namespace bitattn

#include "bitattn/tif.hpp"

#include <cmath>
#include <string>

#include "bitattn/cost_model.hpp"

namespace bitattn {

void TifConfig::validate() const {
  if (time_steps < 1)
    throw DomainError("TifConfig: time_steps must be >= 1");
  if (!std::isfinite(v_th) || v_th <= 0.0)
    throw DomainError("TifConfig: v_th must be finite and positive");
}

IfStepResult if_step(double membrane, double input, double v_th) {
  if (!std::isfinite(membrane) || !std::isfinite(input))
    throw DomainError("if_step: non-finite membrane or input");
  if (!std::isfinite(v_th) || v_th <= 0.0)
    throw DomainError("if_step: v_th must be finite and positive");
  const double h = membrane + input;
  // Threshold test is >=: charge landing exactly on v_th fires. Reset is by
  // subtraction, so overshoot carries into the next step.
  const bool fired = h - v_th >= 0.0;
  return {fired, fired ? h - v_th : h};
}

BitTimeTensor tif_convert(const FloatMatrix& m, const TifConfig& cfg,
                          OpCounter* ops) {
  cfg.validate();
  const FloatMatrix x = minmax_pretransform(m, cfg.norm_mode);

  const std::size_t n = x.rows(), d = x.cols(), steps = cfg.time_steps;
  BitTimeTensor out(steps, n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double in = x(i, j);
      double mem = 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        const double h = mem + in;
        const bool fired = h - cfg.v_th >= 0.0;
        if (fired) out.set(t, i, j, true);
        mem = fired ? h - cfg.v_th : h;
      }
    }
  }
  if (ops) {
    const std::uint64_t tnd = static_cast<std::uint64_t>(steps) * n * d;
    ops->stage("tif").adds += tnd;
    ops->stage("tif").compares += tnd;
    ops->comparisons += tnd;
  }
  return out;
}

std::vector<std::uint8_t> scalar_spike_train(double x, std::size_t time_steps,
                                             double v_th) {
  if (!std::isfinite(x)) throw DomainError("scalar_spike_train: non-finite x");
  if (time_steps < 1)
    throw DomainError("scalar_spike_train: time_steps must be >= 1");
  std::vector<std::uint8_t> spikes(time_steps, 0);
  double mem = 0.0;
  for (std::size_t t = 0; t < time_steps; ++t) {
    const IfStepResult r = if_step(mem, x, v_th);
    spikes[t] = r.fired ? 1 : 0;
    mem = r.membrane;
  }
  return spikes;
}

TifApproxReport spike_sum_report(double x, const TifConfig& cfg) {
  cfg.validate();
  if (!(x >= 0.0 && x <= 1.0))
    throw DomainError("spike_sum_report: x must lie in [0, 1]");
  if (cfg.v_th != 1.0)
    throw DomainError("spike_sum_report: the floor identity holds for "
                      "v_th = 1 only");

  TifApproxReport rep;
  rep.x = x;
  for (std::uint8_t s : scalar_spike_train(x, cfg.time_steps, cfg.v_th))
    rep.spike_sum += s;
  const double tx = static_cast<double>(cfg.time_steps) * x;
  rep.floor_tx = static_cast<std::int64_t>(std::floor(tx));
  rep.alpha = tx - std::floor(tx);
  // Flag T*x sitting within 1e-9 of an integer it is *not* equal to; there,
  // rounding in either the product or the simulation can move the floor by
  // one, and spike_sum == floor_tx is no longer guaranteed. alpha alone
  // misses the case where the product itself rounded onto an integer (e.g.
  // 10 * 0.3), so also probe the multiplication's rounding error with fma.
  const double product_err = std::fma(static_cast<double>(cfg.time_steps), x,
                                      -tx);
  rep.near_boundary = (rep.alpha > 0.0 && rep.alpha < 1e-9) ||
                      rep.alpha > 1.0 - 1e-9 ||
                      (rep.alpha == 0.0 && product_err != 0.0);
  return rep;
}

std::vector<RatioPoint> ratio_convergence(
    double x, double y, std::span<const std::size_t> t_values) {
  if (!(x > 0.0 && x <= 1.0) || !(y > 0.0 && y <= 1.0))
    throw DomainError("ratio_convergence: x and y must lie in (0, 1]");

  std::vector<RatioPoint> points;
  points.reserve(t_values.size());
  for (std::size_t steps : t_values) {
    if (steps < 1)
      throw DomainError("ratio_convergence: time step counts must be >= 1");
    std::uint64_t sx = 0, sy = 0;
    for (std::uint8_t s : scalar_spike_train(x, steps)) sx += s;
    for (std::uint8_t s : scalar_spike_train(y, steps)) sy += s;
    RatioPoint p;
    p.time_steps = steps;
    if (sy > 0)
      p.deviation = std::abs(x / y - static_cast<double>(sx) /
                                         static_cast<double>(sy));
    points.push_back(p);
  }
  return points;
}

}  // namespace bitattn

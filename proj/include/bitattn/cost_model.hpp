#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

namespace bitattn {

// Operation tallies for one pipeline stage. "macs" are float
// multiply-accumulates, "acs" are binary XOR+accumulate steps counted per
// logical bit (word packing speeds the kernel up but does not change the
// tally). adds/compares cover the spike conversion; exps/divs the softmax.
struct StageOps {
  std::uint64_t macs = 0;
  std::uint64_t acs = 0;
  std::uint64_t adds = 0;
  std::uint64_t compares = 0;
  std::uint64_t exps = 0;
  std::uint64_t divs = 0;

  StageOps& operator+=(const StageOps& o);
  friend bool operator==(const StageOps&, const StageOps&) = default;
};

// Aggregate counter threaded through the instrumented kernels. The headline
// fields follow the usual accounting: mac_ops and ac_ops are the
// energy-bearing multiply/accumulate counts, comparisons the threshold tests
// of the spike conversion. The per-stage map keeps the full breakdown.
struct OpCounter {
  std::uint64_t mac_ops = 0;
  std::uint64_t ac_ops = 0;
  std::uint64_t comparisons = 0;
  std::map<std::string, StageOps> stages;

  StageOps& stage(const std::string& name) { return stages[name]; }
  void merge(const OpCounter& o);
  friend bool operator==(const OpCounter&, const OpCounter&) = default;
};

// 45nm process energy per operation, picojoules: one float MAC vs one
// binary accumulate.
inline constexpr double kMacEnergyPj = 4.6;
inline constexpr double kAcEnergyPj = 0.9;

struct CostReport {
  std::uint64_t flops = 0;
  std::uint64_t sops = 0;
  double energy_pj = 0.0;
  std::map<std::string, StageOps> breakdown;

  // {"flops":u,"sops":v,"energy_pj":w,"breakdown":{stage:{...}}}
  std::string to_json() const;
};

// Closed-form cost of one float attention block over n tokens of width d:
// scores (Q.K^T) and output (A.V) at n^2*d MACs each, plus the row softmax
// (n^2 exps, n^2 divides, priced outside the MAC count).
OpCounter count_float_attention(std::size_t n, std::size_t d);

// Closed-form cost of one bitwise attention block at T time steps: T*n^2*d
// XOR+accumulate ops for the distance scores, n^2*d MACs for the float A.V
// product, and the spike conversion of one n x d input (T*n*d additions and
// T*n*d threshold comparisons; a full Q+K front end performs that stage
// twice).
OpCounter count_bitwise_attention(std::size_t n, std::size_t d,
                                  std::size_t time_steps);

// flops = mac_ops, sops = ac_ops, energy_pj = 4.6*flops + 0.9*sops.
CostReport energy(const OpCounter& oc);

}  // namespace bitattn

#include "bitattn/cost_model.hpp"

#include "bitattn/errors.hpp"

#include <json.hpp>

namespace bitattn {

StageOps& StageOps::operator+=(const StageOps& o) {
  macs += o.macs;
  acs += o.acs;
  adds += o.adds;
  compares += o.compares;
  exps += o.exps;
  divs += o.divs;
  return *this;
}

void OpCounter::merge(const OpCounter& o) {
  mac_ops += o.mac_ops;
  ac_ops += o.ac_ops;
  comparisons += o.comparisons;
  for (const auto& [name, st] : o.stages) stages[name] += st;
}

OpCounter count_float_attention(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0)
    throw DomainError("count_float_attention: n and d must be >= 1");
  const std::uint64_t nn = static_cast<std::uint64_t>(n) * n;
  OpCounter oc;
  oc.stage("scores").macs = nn * d;
  oc.stage("softmax").exps = nn;
  oc.stage("softmax").divs = nn;
  oc.stage("output").macs = nn * d;
  oc.mac_ops = 2 * nn * d;
  return oc;
}

OpCounter count_bitwise_attention(std::size_t n, std::size_t d,
                                  std::size_t time_steps) {
  if (n == 0 || d == 0 || time_steps == 0)
    throw DomainError("count_bitwise_attention: n, d, T must be >= 1");
  const std::uint64_t nn = static_cast<std::uint64_t>(n) * n;
  const std::uint64_t tnd = static_cast<std::uint64_t>(time_steps) * n * d;
  OpCounter oc;
  oc.stage("tif").adds = tnd;
  oc.stage("tif").compares = tnd;
  oc.stage("scores").acs = time_steps * nn * d;
  oc.stage("output").macs = nn * d;
  oc.mac_ops = nn * d;
  oc.ac_ops = time_steps * nn * d;
  oc.comparisons = tnd;
  return oc;
}

CostReport energy(const OpCounter& oc) {
  CostReport r;
  r.flops = oc.mac_ops;
  r.sops = oc.ac_ops;
  r.energy_pj = kMacEnergyPj * static_cast<double>(r.flops) +
                kAcEnergyPj * static_cast<double>(r.sops);
  r.breakdown = oc.stages;
  return r;
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["flops"] = flops;
  j["sops"] = sops;
  j["energy_pj"] = energy_pj;
  nlohmann::ordered_json bd = nlohmann::ordered_json::object();
  for (const auto& [name, st] : breakdown) {
    bd[name] = {{"macs", st.macs},     {"acs", st.acs},
                {"adds", st.adds},     {"compares", st.compares},
                {"exps", st.exps},     {"divs", st.divs}};
  }
  j["breakdown"] = bd;
  return j.dump();
}

}  // namespace bitattn

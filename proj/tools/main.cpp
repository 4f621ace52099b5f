#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bitattn/attention.hpp"
#include "bitattn/bit_tensor.hpp"
#include "bitattn/cost_model.hpp"
#include "bitattn/errors.hpp"
#include "bitattn/matrix.hpp"
#include "bitattn/rng.hpp"
#include "bitattn/surrogate.hpp"
#include "bitattn/tif.hpp"
#include "bitattn/toy_train.hpp"
#include "bitattn/validate.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

// Shortest decimal form that parses back to the same double, so consumers
// of our CSV/JSON can round-trip values like energy_pj exactly.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t default_seed() {
  const char* env = std::getenv("BITATTN_SEED");
  if (!env || !*env) return 42;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0')
    throw bitattn::DomainError(
        std::string("BITATTN_SEED is not an unsigned integer: ") + env);
  return v;
}

// Writes `text` to the file at `path`, or to stdout when path is "-".
void write_text_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    if (!std::cout) throw bitattn::IoError("failed writing to stdout");
    return;
  }
  std::ofstream os(path);
  if (!os) throw bitattn::IoError("cannot open output file: " + path);
  os << text;
  os.flush();
  if (!os) throw bitattn::IoError("failed writing output file: " + path);
}

int cmd_validate(std::uint64_t seed, int threads, bool sabotage,
                 const std::string& json_target) {
  bitattn::ValidateOptions opt;
  opt.seed = seed;
  opt.threads = threads;
  opt.sabotage = sabotage;
  const std::vector<bitattn::PropertyResult> results =
      bitattn::run_validation_suite(opt);

  bool all_pass = true;
  for (const auto& r : results) all_pass = all_pass && r.pass;

  // Keep stdout clean for the report when it is the JSON target.
  std::ostream& human = json_target == "-" ? std::cerr : std::cout;
  for (const auto& r : results) {
    human << (r.pass ? "[PASS] " : "[FAIL] ") << r.name
          << "  measured=" << format_double(r.measured);
    if (!r.detail.empty()) human << "  (" << r.detail << ")";
    human << "\n";
  }
  human << (all_pass ? "all properties passed"
                     : "one or more properties FAILED")
        << "\n";

  if (!json_target.empty()) {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["sabotage"] = sabotage;
    auto props = nlohmann::ordered_json::array();
    for (const auto& r : results) {
      props.push_back({{"name", r.name},
                       {"pass", r.pass},
                       {"measured", r.measured},
                       {"detail", r.detail}});
    }
    j["properties"] = std::move(props);
    j["all_pass"] = all_pass;
    write_text_output(json_target, j.dump(2) + "\n");
  }
  return all_pass ? kExitOk : kExitPropertyFailure;
}

int cmd_tif(double x, std::size_t steps, const std::string& dump_path) {
  bitattn::TifConfig cfg;
  cfg.time_steps = steps;
  cfg.norm_mode = bitattn::NormMode::Raw;

  const bitattn::TifApproxReport rep = bitattn::spike_sum_report(x, cfg);
  const std::vector<std::uint8_t> train =
      bitattn::scalar_spike_train(x, steps);

  std::ostringstream line;
  for (std::size_t t = 0; t < train.size(); ++t) {
    if (t) line << ' ';
    line << static_cast<int>(train[t]);
  }
  line << " | sum=" << rep.spike_sum << " floor=" << rep.floor_tx;
  std::cout << line.str() << "\n";
  if (rep.near_boundary)
    std::cerr << "note: T*x is within 1e-9 of an integer; the floor identity "
                 "may be off by one here\n";

  if (!dump_path.empty()) {
    const bitattn::FloatMatrix m(1, 1, x);
    const bitattn::BitTimeTensor tensor = bitattn::tif_convert(m, cfg);
    std::ofstream os(dump_path, std::ios::binary);
    if (!os) throw bitattn::IoError("cannot open dump file: " + dump_path);
    tensor.dump(os);
    os.flush();
    if (!os) throw bitattn::IoError("failed writing dump file: " + dump_path);
  }
  return kExitOk;
}

int cmd_train(std::size_t steps, std::size_t epochs, double lr,
              std::uint64_t seed, const std::string& out_path) {
  bitattn::SynthTaskConfig task_cfg;
  const bitattn::SynthTask task = bitattn::SynthTask::generate(task_cfg, seed);

  bitattn::ToyModelConfig model_cfg;
  model_cfg.tif.time_steps = steps;

  bitattn::TrainOptions opt;
  opt.epochs = epochs;
  opt.lr = lr;
  opt.seed = seed;

  const bitattn::TrainResult res = bitattn::train(task, model_cfg, opt);

  std::ostringstream csv;
  bitattn::write_training_csv(csv, res.log);
  write_text_output(out_path, csv.str());

  std::ostream& summary = out_path == "-" ? std::cerr : std::cout;
  char acc[32];
  std::snprintf(acc, sizeof(acc), "%.6f", res.log.back().test_acc);
  summary << "final test_acc " << acc << " after " << res.log.size()
          << " epochs\n";
  return kExitOk;
}

struct TimingStats {
  double mean_ns = 0.0;
  double stddev_ns = 0.0;
};

template <typename Fn>
TimingStats time_reps(std::size_t reps, Fn&& fn) {
  fn();  // warm-up, untimed
  std::vector<double> samples;
  samples.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(
        std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  TimingStats st;
  for (const double s : samples) st.mean_ns += s;
  st.mean_ns /= static_cast<double>(reps);
  double sq = 0.0;
  for (const double s : samples)
    sq += (s - st.mean_ns) * (s - st.mean_ns);
  st.stddev_ns = std::sqrt(sq / static_cast<double>(reps - 1));
  return st;
}

int cmd_bench(std::size_t n, std::size_t d, std::size_t steps,
              std::size_t reps, std::uint64_t seed, int threads,
              const std::string& out_path) {
  bitattn::Rng rng(seed);
  bitattn::FloatMatrix q_f(n, d), k_f(n, d), v(n, d);
  for (double& x : q_f.data()) x = rng.uniform(-1.0, 1.0);
  for (double& x : k_f.data()) x = rng.uniform(-1.0, 1.0);
  for (double& x : v.data()) x = rng.uniform(-1.0, 1.0);

  bitattn::TifConfig cfg;
  cfg.time_steps = steps;
  const bitattn::BitTimeTensor q_b = bitattn::tif_convert(q_f, cfg);
  const bitattn::BitTimeTensor k_b = bitattn::tif_convert(k_f, cfg);

  // Never time a wrong kernel: packed and naive must agree first.
  const bitattn::AttentionResult fast =
      bitattn::bitwise_attention(q_b, k_b, v, threads);
  const bitattn::AttentionResult naive =
      bitattn::naive_bitwise_attention(q_b, k_b, v);
  if (!(fast.scores == naive.scores)) {
    std::cerr << "bench: packed and naive score matrices disagree\n";
    return kExitPropertyFailure;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c)
      if (std::abs(fast.output(i, c) - naive.output(i, c)) > 1e-12) {
        std::cerr << "bench: packed and naive outputs disagree\n";
        return kExitPropertyFailure;
      }
  // And the float baseline must be a valid softmax attention.
  bitattn::FloatMatrix ref_scores;
  bitattn::reference_attention(q_f, k_f, v, nullptr, &ref_scores);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += ref_scores(i, j);
    if (std::abs(row - 1.0) > 1e-9) {
      std::cerr << "bench: softmax rows of the float baseline do not sum "
                   "to 1\n";
      return kExitPropertyFailure;
    }
  }

  // The optimizer must not elide the timed calls; fold outputs into a sink.
  double sink = 0.0;
  const TimingStats t_float = time_reps(reps, [&] {
    sink += bitattn::reference_attention(q_f, k_f, v)(0, 0);
  });
  const TimingStats t_naive = time_reps(reps, [&] {
    sink += bitattn::naive_bitwise_attention(q_b, k_b, v).output(0, 0);
  });
  const TimingStats t_packed = time_reps(reps, [&] {
    sink += bitattn::bitwise_attention(q_b, k_b, v, threads).output(0, 0);
  });
  if (!std::isfinite(sink)) std::cerr << "bench: non-finite checksum\n";

  const bitattn::CostReport float_cost =
      bitattn::energy(bitattn::count_float_attention(n, d));
  const bitattn::CostReport bit_cost =
      bitattn::energy(bitattn::count_bitwise_attention(n, d, steps));

  std::ostringstream csv;
  csv << "impl,n,d,T,reps,mean_ns,stddev_ns,flops,sops,energy_pj\n";
  const auto row = [&](const char* impl, const TimingStats& st,
                       const bitattn::CostReport& cost) {
    csv << impl << ',' << n << ',' << d << ',' << steps << ',' << reps << ','
        << format_double(st.mean_ns) << ',' << format_double(st.stddev_ns)
        << ',' << cost.flops << ',' << cost.sops << ','
        << format_double(cost.energy_pj) << '\n';
  };
  row("float_ref", t_float, float_cost);
  row("bitwise_naive", t_naive, bit_cost);
  row("bitwise_packed", t_packed, bit_cost);
  write_text_output(out_path, csv.str());
  return kExitOk;
}

int cmd_report(std::size_t n, std::size_t d, std::size_t steps,
               bool as_json) {
  const bitattn::OpCounter float_ops = bitattn::count_float_attention(n, d);
  const bitattn::OpCounter bit_ops =
      bitattn::count_bitwise_attention(n, d, steps);
  const bitattn::CostReport float_cost = bitattn::energy(float_ops);
  const bitattn::CostReport bit_cost = bitattn::energy(bit_ops);
  // Word-level view of the score stage: the packed kernel touches
  // ceil(d/64)-word rows, T*n^2 times.
  const std::uint64_t word_ops =
      static_cast<std::uint64_t>(steps) * n * n *
      ((d + bitattn::kWordBits - 1) / bitattn::kWordBits);

  if (as_json) {
    nlohmann::ordered_json j;
    j["n"] = n;
    j["d"] = d;
    j["T"] = steps;
    j["float"] = nlohmann::ordered_json::parse(float_cost.to_json());
    j["bitwise"] = nlohmann::ordered_json::parse(bit_cost.to_json());
    j["bitwise_score_word_ops"] = word_ops;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }

  char line[128];
  std::snprintf(line, sizeof(line), "%-22s %20s %20s\n", "metric", "float",
                "bitwise");
  std::cout << line;
  const auto print_row = [&](const char* name, const std::string& a,
                             const std::string& b) {
    std::snprintf(line, sizeof(line), "%-22s %20s %20s\n", name, a.c_str(),
                  b.c_str());
    std::cout << line;
  };
  print_row("flops", std::to_string(float_cost.flops),
            std::to_string(bit_cost.flops));
  print_row("sops", std::to_string(float_cost.sops),
            std::to_string(bit_cost.sops));
  print_row("energy_pj", format_double(float_cost.energy_pj),
            format_double(bit_cost.energy_pj));

  const auto stage_value = [](const bitattn::CostReport& r,
                              const std::string& stage,
                              std::uint64_t bitattn::StageOps::*field) {
    const auto it = r.breakdown.find(stage);
    return it == r.breakdown.end() ? std::uint64_t{0} : it->second.*field;
  };
  const struct {
    const char* label;
    const char* stage;
    std::uint64_t bitattn::StageOps::*field;
  } rows[] = {
      {"tif.adds", "tif", &bitattn::StageOps::adds},
      {"tif.compares", "tif", &bitattn::StageOps::compares},
      {"scores.macs", "scores", &bitattn::StageOps::macs},
      {"scores.acs", "scores", &bitattn::StageOps::acs},
      {"softmax.exps", "softmax", &bitattn::StageOps::exps},
      {"softmax.divs", "softmax", &bitattn::StageOps::divs},
      {"output.macs", "output", &bitattn::StageOps::macs},
  };
  for (const auto& rdef : rows)
    print_row(rdef.label,
              std::to_string(stage_value(float_cost, rdef.stage, rdef.field)),
              std::to_string(stage_value(bit_cost, rdef.stage, rdef.field)));
  print_row("score word ops (W=64)", "-", std::to_string(word_ops));
  std::cout << "tif stage counts cover one n x d conversion; a Q+K front "
               "end runs it twice\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bitwise attention toolkit: validation, benchmarks, spike "
               "conversion, toy training, cost reports"};
  app.require_subcommand(1);

  int rc = kExitOk;

  try {
    const std::uint64_t seed_default = default_seed();

    auto* validate = app.add_subcommand(
        "validate", "run the self-check property suite");
    auto v_seed = std::make_shared<std::uint64_t>(seed_default);
    auto v_threads = std::make_shared<int>(1);
    auto v_json = std::make_shared<std::string>();
    auto v_sabotage = std::make_shared<bool>(false);
    validate->add_option("--seed", *v_seed, "RNG seed");
    validate->add_option("--threads", *v_threads, "worker thread cap")
        ->check(CLI::Range(1, 256));
    validate->add_option("--json", *v_json,
                         "write a JSON report to this path ('-' = stdout)");
    validate->add_flag("--sabotage", *v_sabotage,
                       "flip one packed bit to prove the suite can fail");
    validate->callback(
        [=, &rc] { rc = cmd_validate(*v_seed, *v_threads, *v_sabotage, *v_json); });

    auto* tif = app.add_subcommand(
        "tif", "convert one scalar to its spike train");
    auto t_x = std::make_shared<double>(0.0);
    auto t_steps = std::make_shared<std::size_t>(8);
    auto t_dump = std::make_shared<std::string>();
    tif->add_option("--x", *t_x, "input value in [0,1]")->required();
    tif->add_option("--T", *t_steps, "time steps")->check(CLI::Range(1, 1 << 20));
    tif->add_option("--dump", *t_dump, "write the packed tensor to this file");
    tif->callback([=, &rc] { rc = cmd_tif(*t_x, *t_steps, *t_dump); });

    auto* train = app.add_subcommand(
        "train", "train the toy needle classifier");
    auto tr_steps = std::make_shared<std::size_t>(8);
    auto tr_epochs = std::make_shared<std::size_t>(30);
    auto tr_lr = std::make_shared<double>(0.05);
    auto tr_seed = std::make_shared<std::uint64_t>(seed_default);
    auto tr_out = std::make_shared<std::string>("train_log.csv");
    train->add_option("--T", *tr_steps, "time steps")
        ->check(CLI::Range(1, 1 << 16));
    train->add_option("--epochs", *tr_epochs, "training epochs")
        ->check(CLI::Range(1, 100000));
    train->add_option("--lr", *tr_lr, "SGD learning rate");
    train->add_option("--seed", *tr_seed, "RNG seed");
    train->add_option("--out", *tr_out,
                      "CSV log path ('-' = stdout)");
    train->callback([=, &rc] {
      rc = cmd_train(*tr_steps, *tr_epochs, *tr_lr, *tr_seed, *tr_out);
    });

    auto* bench = app.add_subcommand(
        "bench", "micro-benchmark the attention implementations");
    auto b_n = std::make_shared<std::size_t>(64);
    auto b_d = std::make_shared<std::size_t>(64);
    auto b_steps = std::make_shared<std::size_t>(8);
    auto b_reps = std::make_shared<std::size_t>(5);
    auto b_seed = std::make_shared<std::uint64_t>(seed_default);
    auto b_threads = std::make_shared<int>(1);
    auto b_out = std::make_shared<std::string>("bench.csv");
    bench->add_option("--n", *b_n, "tokens")->check(CLI::Range(1, 1 << 16));
    bench->add_option("--d", *b_d, "feature width")
        ->check(CLI::Range(1, 1 << 16));
    bench->add_option("--T", *b_steps, "time steps")
        ->check(CLI::Range(1, 1 << 12));
    bench->add_option("--reps", *b_reps, "timed repetitions (>= 3)")
        ->check(CLI::Range(3, 1 << 20));
    bench->add_option("--seed", *b_seed, "RNG seed");
    bench->add_option("--threads", *b_threads, "worker thread cap")
        ->check(CLI::Range(1, 256));
    bench->add_option("--out", *b_out, "CSV path ('-' = stdout)");
    bench->callback([=, &rc] {
      rc = cmd_bench(*b_n, *b_d, *b_steps, *b_reps, *b_seed, *b_threads,
                     *b_out);
    });

    auto* report = app.add_subcommand(
        "report", "closed-form cost comparison, float vs bitwise");
    auto r_n = std::make_shared<std::size_t>(64);
    auto r_d = std::make_shared<std::size_t>(64);
    auto r_steps = std::make_shared<std::size_t>(8);
    auto r_json = std::make_shared<bool>(false);
    report->add_option("--n", *r_n, "tokens")->check(CLI::Range(1, 1 << 20));
    report->add_option("--d", *r_d, "feature width")
        ->check(CLI::Range(1, 1 << 20));
    report->add_option("--T", *r_steps, "time steps")
        ->check(CLI::Range(1, 1 << 12));
    report->add_flag("--json", *r_json, "emit JSON instead of a table");
    report->callback(
        [=, &rc] { rc = cmd_report(*r_n, *r_d, *r_steps, *r_json); });

    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const bitattn::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const bitattn::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bitattn::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPropertyFailure;
  }
  return rc;
}

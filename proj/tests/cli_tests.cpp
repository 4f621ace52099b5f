// Black-box tests of the command-line binary (path in argv[1]): exit codes,
// golden output lines, file formats, and the BITATTN_SEED override. Each
// failed expectation prints one line; the process exit code is the failure
// count capped at 1.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "bitattn/bit_tensor.hpp"
#include "subprocess.hpp"

namespace {

namespace fs = std::filesystem;

int failures = 0;

void expect(bool cond, const std::string& what) {
  if (cond) return;
  ++failures;
  std::cerr << "FAIL: " << what << "\n";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

struct Ctx {
  std::string cli;
  fs::path dir;

  std::string path(const char* name) const { return (dir / name).string(); }

  // Runs the binary with `args`, stdout/stderr captured into scratch files.
  int run(const std::string& args, const std::string& env = "") const {
    const std::string prefix = env.empty() ? "" : env + " ";
    return subprocess::run(prefix + quoted(cli) + " " + args + " > " +
                           quoted(path("stdout.txt")) + " 2> " +
                           quoted(path("stderr.txt")));
  }

  std::string out() const { return subprocess::read_file(path("stdout.txt")); }
  std::string err() const { return subprocess::read_file(path("stderr.txt")); }
};

void test_tif_golden(const Ctx& ctx) {
  expect(ctx.run("tif --x 0.5 --T 4") == 0, "tif exits 0");
  expect(ctx.out() == "0 1 0 1 | sum=2 floor=2\n",
         "tif prints the spike train with its sum and floor, got: " +
             ctx.out());
  expect(ctx.err().empty(), "tif prints no boundary note for x=0.5");

  expect(ctx.run("tif --x 1.5") == 2, "tif rejects x outside [0,1]");
  expect(ctx.run("tif --T 4") == 2, "tif requires --x");
}

void test_tif_dump(const Ctx& ctx) {
  const std::string dump = ctx.path("spikes.bin");
  expect(ctx.run("tif --x 0.5 --T 4 --dump " + quoted(dump)) == 0,
         "tif --dump exits 0");
  const std::string raw = subprocess::read_file(dump);
  expect(raw.size() > 5 && raw.compare(0, 4, "BITT") == 0 && raw[4] == '\x01',
         "dump starts with the BITT magic and version 1");

  std::ifstream is(dump, std::ios::binary);
  const bitattn::BitTimeTensor t = bitattn::BitTimeTensor::load(is);
  expect(t.time_steps() == 4 && t.rows() == 1 && t.cols() == 1,
         "dumped tensor has shape 4 x 1 x 1");
  expect(!t.get(0, 0, 0) && t.get(1, 0, 0) && !t.get(2, 0, 0) &&
             t.get(3, 0, 0),
         "dumped spike bits are 0 1 0 1");
}

void test_validate(const Ctx& ctx) {
  expect(ctx.run("validate") == 0, "validate exits 0 when all pass");
  expect(ctx.out().find("[PASS]") != std::string::npos,
         "validate prints [PASS] lines");

  expect(ctx.run("validate --json -") == 0, "validate --json - exits 0");
  const nlohmann::json j = nlohmann::json::parse(ctx.out());
  expect(j.at("all_pass").get<bool>(), "JSON on stdout reports all_pass");
  expect(j.at("seed").get<std::uint64_t>() == 42, "default seed is 42");
  expect(ctx.err().find("[PASS]") != std::string::npos,
         "human-readable lines move to stderr when stdout carries JSON");
}

void test_validate_sabotage(const Ctx& ctx) {
  const std::string report = ctx.path("sabotage.json");
  expect(ctx.run("validate --sabotage --json " + quoted(report)) == 1,
         "sabotaged validate exits 1");
  const nlohmann::json j =
      nlohmann::json::parse(subprocess::read_file(report));
  expect(!j.at("all_pass").get<bool>(), "sabotaged report clears all_pass");
  bool hit = false;
  for (const auto& prop : j.at("properties"))
    if (prop.at("name") == "hamming_kernel_oracle")
      hit = !prop.at("pass").get<bool>();
  expect(hit, "sabotage is caught by hamming_kernel_oracle");
}

void test_seed_env(const Ctx& ctx) {
  expect(ctx.run("validate --json -", "BITATTN_SEED=123") == 0,
         "validate accepts a seed from the environment");
  const nlohmann::json j = nlohmann::json::parse(ctx.out());
  expect(j.at("seed").get<std::uint64_t>() == 123,
         "BITATTN_SEED overrides the default seed");

  expect(ctx.run("validate --seed 9 --json -", "BITATTN_SEED=123") == 0,
         "an explicit --seed still parses with BITATTN_SEED set");
  expect(nlohmann::json::parse(ctx.out()).at("seed").get<std::uint64_t>() == 9,
         "--seed wins over BITATTN_SEED");

  expect(ctx.run("validate", "BITATTN_SEED=ponies") == 2,
         "a malformed BITATTN_SEED is a usage error");
}

void test_train(const Ctx& ctx) {
  const std::string a = ctx.path("train_a.csv"), b = ctx.path("train_b.csv");
  const std::string args = "train --T 2 --epochs 2 --seed 1 --out ";
  expect(ctx.run(args + quoted(a)) == 0, "train exits 0");
  expect(ctx.out().find("final test_acc") != std::string::npos,
         "train prints a summary line");
  expect(ctx.run(args + quoted(b)) == 0, "train exits 0 on the second run");
  const std::string csv = subprocess::read_file(a);
  expect(csv == subprocess::read_file(b), "training CSVs are run-to-run identical");
  expect(csv.rfind("epoch,train_loss,test_acc\n", 0) == 0,
         "training CSV header");
  expect(std::count(csv.begin(), csv.end(), '\n') == 3,
         "training CSV has one line per epoch plus the header");

  expect(ctx.run("train --out /nonexistent_dir/x.csv --epochs 1 --T 1") == 3,
         "an unwritable CSV path is an I/O error");
}

void test_bench(const Ctx& ctx) {
  const std::string out = ctx.path("bench.csv");
  expect(ctx.run("bench --n 4 --d 8 --T 2 --reps 3 --seed 1 --out " +
                 quoted(out)) == 0,
         "bench exits 0");
  const std::string csv = subprocess::read_file(out);
  expect(csv.rfind("impl,n,d,T,reps,mean_ns,stddev_ns,flops,sops,energy_pj\n",
                   0) == 0,
         "bench CSV header");
  expect(std::count(csv.begin(), csv.end(), '\n') == 4,
         "bench CSV has three implementation rows");

  // Row payloads: the op columns must satisfy the energy equation exactly,
  // and the two bitwise rows must agree on them.
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  std::string bit_cols;
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t end = line.find(',', start);
      f.push_back(line.substr(start, end - start));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    expect(f.size() == 10, "bench row has 10 columns: " + line);
    if (f.size() != 10) continue;
    const double flops = std::strtod(f[7].c_str(), nullptr);
    const double sops = std::strtod(f[8].c_str(), nullptr);
    const double energy = std::strtod(f[9].c_str(), nullptr);
    expect(energy == 4.6 * flops + 0.9 * sops,
           "bench energy column is 4.6*flops + 0.9*sops in row " + f[0]);
    if (f[0] == "float_ref")
      expect(sops == 0.0, "the float baseline has no binary ops");
    else if (f[0] == "bitwise_naive")
      bit_cols = f[7] + "," + f[8] + "," + f[9];
    else if (f[0] == "bitwise_packed")
      expect(bit_cols == f[7] + "," + f[8] + "," + f[9],
             "both bitwise rows report the same op counts");
  }

  expect(ctx.run("bench --reps 1 --n 2 --d 2") == 2,
         "fewer than 3 reps is a usage error");
}

void test_report(const Ctx& ctx) {
  expect(ctx.run("report --n 4 --d 70 --T 3 --json") == 0, "report exits 0");
  const nlohmann::json j = nlohmann::json::parse(ctx.out());
  expect(j.at("n") == 4 && j.at("d") == 70 && j.at("T") == 3,
         "report echoes the shape");
  const auto energy_ok = [](const nlohmann::json& side) {
    return side.at("energy_pj").get<double>() ==
           4.6 * side.at("flops").get<double>() +
               0.9 * side.at("sops").get<double>();
  };
  expect(energy_ok(j.at("float")) && energy_ok(j.at("bitwise")),
         "report energies satisfy the pJ equation");
  expect(j.at("float").at("sops") == 0, "float side counts no binary ops");
  // ceil(70/64) = 2 words per row, T*n^2 row pairs
  expect(j.at("bitwise_score_word_ops") == 3 * 4 * 4 * 2,
         "word-level score op count uses ceil(d/64)");

  expect(ctx.run("report --n 8 --d 8 --T 4") == 0, "table report exits 0");
  expect(ctx.out().find("metric") != std::string::npos &&
             ctx.out().find("score word ops") != std::string::npos,
         "table report prints the metric table");
}

void test_usage_errors(const Ctx& ctx) {
  expect(ctx.run("") == 2, "a missing subcommand is a usage error");
  expect(ctx.run("frobnicate") == 2, "an unknown subcommand is a usage error");
  expect(ctx.run("validate --no-such-flag") == 2,
         "an unknown flag is a usage error");
  expect(ctx.run("--help") == 0, "--help exits 0");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_tests <path-to-cli-binary>\n";
    return 2;
  }

  Ctx ctx;
  ctx.cli = argv[1];
  ctx.dir = fs::temp_directory_path() /
            ("bitattn_cli_tests_" + std::to_string(::getpid()));
  fs::create_directories(ctx.dir);

  try {
    test_tif_golden(ctx);
    test_tif_dump(ctx);
    test_validate(ctx);
    test_validate_sabotage(ctx);
    test_seed_env(ctx);
    test_train(ctx);
    test_bench(ctx);
    test_report(ctx);
    test_usage_errors(ctx);
  } catch (const std::exception& e) {
    ++failures;
    std::cerr << "FAIL: unexpected exception: " << e.what() << "\n";
  }

  fs::remove_all(ctx.dir);
  if (failures == 0) {
    std::cout << "cli_tests: all expectations held\n";
    return 0;
  }
  std::cerr << "cli_tests: " << failures << " failed expectation(s)\n";
  return 1;
}

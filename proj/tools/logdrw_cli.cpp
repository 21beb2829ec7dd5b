#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "logdrw/logdrw.hpp"

using namespace logdrw;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_cli, const std::vector<std::string>& suites, const std::uint64_t* seed,
            const std::string& format, bool timing) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (!suites.empty()) cfg.suites = suites;
    if (seed) cfg.seed = *seed;
    if (timing) cfg.timing = true;
    if (!out_cli.empty()) cfg.output = out_cli;
    validate_config(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  RunReport rep;
  try {
    rep = run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::string text = format == "table" ? render_table(rep.json) : rep.json.dump(2) + "\n";
  if (!cfg.output.empty()) {
    std::ofstream out(cfg.output);
    if (!out) {
      std::cerr << "cannot write " << cfg.output << "\n";
      return 2;
    }
    out << rep.json.dump(2) << "\n";
    if (format == "table") std::cout << text;
  } else {
    std::cout << text;
  }
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"log de Rham-Witt slices: build, verify, report"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run verification suites from a JSON config");
  std::string config, out, format = "json";
  std::vector<std::string> suites;
  std::uint64_t seed = 0;
  bool timing = false;
  run_cmd->add_option("--config", config, "config file")->required();
  run_cmd->add_option("--out", out, "write the JSON report here");
  run_cmd->add_option("--suite", suites, "restrict to these suites");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "seed for randomized lifts");
  run_cmd->add_option("--format", format, "json or table")->check(CLI::IsMember({"json", "table"}));
  run_cmd->add_flag("--timing", timing, "include per-suite timings");

  auto* slice_cmd = app.add_subcommand("slice", "print the serialization of one slice");
  i64 p = 2, K = 1;
  int m = 1, n = 1, r = 1;
  std::string flavor = "QuotientLogPoint";
  bool with_ops = false;
  slice_cmd->add_option("--p", p)->required();
  slice_cmd->add_option("--m", m)->required();
  slice_cmd->add_option("--n", n)->required();
  slice_cmd->add_option("--r", r)->required();
  slice_cmd->add_option("--K", K)->required();
  slice_cmd->add_option("--flavor", flavor);
  slice_cmd->add_flag("--operators", with_ops, "include F, V and restriction against level m+1");

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) return cmd_run(config, out, suites, seed_opt->count() ? &seed : nullptr, format, timing);

  try {
    PrimeLevel lv(p, m);
    BaseSpec base(n, r, parse_flavor(flavor));
    ComplexSlice S = build_slice(base, lv, K);
    if (with_ops) {
      ComplexSlice up = build_slice(base, PrimeLevel(p, m + 1), K);
      std::cout << slice_to_json(S, {&up}).dump(2) << "\n";
    } else {
      std::cout << slice_to_json(S).dump(2) << "\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

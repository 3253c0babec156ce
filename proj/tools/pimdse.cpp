// Copyright 2026 The pimdse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// pimdse: tune, map, schedule and evaluate from the command line.
//
// Every failure prints one JSON record {"error": kind, "message": text} on
// stderr and exits nonzero (2 for usage errors, 1 otherwise).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pimdse/pimdse.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string constraints;
  std::vector<std::string> workloads;
  std::string hw;
  std::string out;
  double alpha = 1.0;
  double beta = 1.0;
  int exact_limit = 10;
  std::int64_t quantum_kib = 64;
};

pimdse::HwConstraints constraints_of(const Common& o) {
  return o.constraints.empty() ? pimdse::HwConstraints{} : pimdse::load_constraints(o.constraints);
}

std::vector<pimdse::DnnGraph> workloads_of(const Common& o) {
  std::vector<pimdse::DnnGraph> out;
  for (const auto& p : o.workloads) out.push_back(pimdse::load_dnn(p));
  return out;
}

// --hw is a JSON file or an inline list of seven integers.
pimdse::HwParams hw_of(const Common& o) {
  std::error_code ec;
  if (fs::is_regular_file(o.hw, ec)) return pimdse::parse_hw_params(pimdse::read_text(o.hw, "hw"));
  return pimdse::parse_hw_params(o.hw);
}

pimdse::MapperOptions mapper_options(const Common& o) {
  if (o.quantum_kib < 1) throw pimdse::ConfigError("--quantum-kib must be positive");
  if (o.exact_limit < 2) throw pimdse::ConfigError("--exact-limit must be at least 2");
  pimdse::MapperOptions m;
  m.quantum_bytes = o.quantum_kib * 1024;
  m.ilp.exact_limit = o.exact_limit;
  m.alpha = o.alpha;
  m.beta = o.beta;
  return m;
}

// Mapping needs an array that tiles the banks; range and area violations
// are reported but do not stop the run.
std::vector<std::string> check_hw(const pimdse::HwParams& p, const pimdse::HwConstraints& c) {
  if (auto v = pimdse::check_divisibility(p, c); !v)
    throw pimdse::ConfigError("node array " + std::to_string(p.node_rows) + "x" + std::to_string(p.node_cols) +
                              " does not divide the bank array (" + v.violated + ")");
  std::vector<std::string> warnings;
  if (auto v = pimdse::validate_params(p, c); !v) warnings.push_back("parameters outside the legal space: " + v.violated);
  return warnings;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(fs::path(dir) / name);
  if (!f) throw pimdse::ConfigError("cannot write '" + (fs::path(dir) / name).string() + "'");
  return f;
}

int run_map(const Common& o, bool baseline) {
  const auto c = constraints_of(o);
  const auto graphs = workloads_of(o);
  const auto hw = hw_of(o);
  auto warnings = check_hw(hw, c);
  const auto opt = mapper_options(o);
  nlohmann::json summary;
  summary["hw"] = pimdse::to_json(hw);
  summary["mapper"] = baseline ? "baseline" : "pim-mapper";
  summary["warnings"] = warnings;
  nlohmann::json items = nlohmann::json::array();
  std::ostringstream csv;
  pimdse::write_cost_csv_header(csv);
  for (const auto& g : graphs) {
    auto s = baseline ? pimdse::baseline_map(g, hw, c, opt) : pimdse::map_dnn(g, hw, c, opt);
    pimdse::write_cost_csv_rows(csv, s, g);
    if (!o.out.empty()) open_out(o.out, "scheme_" + g.name + ".json") << pimdse::to_json(s, g).dump(2) << '\n';
    items.push_back({{"name", g.name}, {"latency_cycles", s.latency_cycles}, {"energy_pj", s.energy_pj},
                     {"edp", s.edp()}});
  }
  if (!o.out.empty()) open_out(o.out, "cost_report.csv") << csv.str();
  summary["workloads"] = items;
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int run_evaluate(const Common& o) {
  const auto c = constraints_of(o);
  const auto graphs = workloads_of(o);
  const auto hw = hw_of(o);
  auto warnings = check_hw(hw, c);
  const auto opt = mapper_options(o);
  std::vector<pimdse::WorkloadCost> costs;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& g : graphs) {
    auto s = pimdse::map_dnn(g, hw, c, opt);
    costs.push_back({s.energy_pj, static_cast<double>(s.latency_cycles), g.gamma});
    items.push_back({{"name", g.name}, {"gamma", g.gamma}, {"latency_cycles", s.latency_cycles},
                     {"energy_pj", s.energy_pj}});
  }
  nlohmann::json r{{"hw", pimdse::to_json(hw)},
                   {"area_mm2", pimdse::total_area(hw, c)},
                   {"alpha", o.alpha},
                   {"beta", o.beta},
                   {"cost", pimdse::total_cost(costs, o.alpha, o.beta)},
                   {"workloads", items},
                   {"warnings", warnings}};
  if (!o.out.empty()) open_out(o.out, "evaluate.json") << r.dump(2) << '\n';
  std::cout << r.dump(2) << '\n';
  return 0;
}

int run_schedule(const Common& o, const std::string& scenario) {
  const auto c = constraints_of(o);
  const auto s = pimdse::load_scenario(scenario);
  pimdse::IlpOptions ilp;
  if (o.exact_limit < 2) throw pimdse::ConfigError("--exact-limit must be at least 2");
  ilp.exact_limit = o.exact_limit;
  std::ostringstream csv;
  pimdse::write_schedule_csv(csv, pimdse::run_schedulers(s, c.noc_pj_per_bit_hop, ilp));
  if (!o.out.empty()) open_out(o.out, "schedule.csv") << csv.str();
  std::cout << csv.str();
  return 0;
}

int run_tune(const Common& o, std::uint64_t seed, int budget, std::size_t candidates) {
  const auto c = constraints_of(o);
  auto graphs = workloads_of(o);
  std::vector<std::string> names;
  for (const auto& g : graphs) names.push_back(g.name);
  pimdse::MapperEvaluator eval(std::move(graphs), c, o.alpha, o.beta, mapper_options(o));
  pimdse::TuneOptions opt;
  opt.budget = budget;
  opt.candidates = candidates;
  std::mt19937_64 rng(seed);
  auto r = pimdse::tune_loop(c, eval, opt, rng);
  std::ostringstream csv;
  pimdse::write_tune_csv(csv, r, names);
  auto report = pimdse::to_json(r, o.alpha, o.beta);
  report["seed"] = seed;
  open_out(o.out, "tune_history.csv") << csv.str();
  open_out(o.out, "tune_report.json") << report.dump(2) << '\n';
  std::cout << report.dump(2) << '\n';
  return 0;
}

void add_common(CLI::App* cmd, Common& o, bool workloads, bool hw) {
  cmd->add_option("--constraints", o.constraints, "Constraints JSON (defaults built in)")->check(CLI::ExistingFile);
  if (workloads)
    cmd->add_option("--workloads", o.workloads, "Workload JSON; repeatable")->required()->check(CLI::ExistingFile);
  if (hw) cmd->add_option("--hw", o.hw, "Hardware parameters: JSON file or seven comma-separated integers")->required();
  cmd->add_option("--alpha", o.alpha, "Energy exponent")->check(CLI::NonNegativeNumber);
  cmd->add_option("--beta", o.beta, "Latency exponent")->check(CLI::NonNegativeNumber);
  cmd->add_option("--exact-limit", o.exact_limit, "Largest sharing set solved exactly");
  cmd->add_option("--quantum-kib", o.quantum_kib, "Capacity quantum of the mapper DP in KiB");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-space exploration for processing-in-memory DNN accelerators"};
  app.require_subcommand(1);

  Common o;
  bool baseline = false;
  std::string scenario;
  std::uint64_t seed = 0;
  int budget = 20;
  std::size_t candidates = 1024;

  auto* tune = app.add_subcommand("tune", "Search hardware parameters");
  add_common(tune, o, true, false);
  tune->add_option("--seed", seed, "Random seed")->required();
  tune->add_option("--budget", budget, "Evaluations (iterations)")->check(CLI::PositiveNumber);
  tune->add_option("--candidates", candidates, "Filtered samples ranked per iteration")->check(CLI::PositiveNumber);
  tune->add_option("--out", o.out, "Output directory")->required();

  auto* map = app.add_subcommand("map", "Map workloads onto one architecture");
  add_common(map, o, true, true);
  map->add_flag("--baseline", baseline, "Use the sequential baseline mapper");
  map->add_option("--out", o.out, "Output directory");

  auto* sched = app.add_subcommand("schedule", "Compare data-sharing schedulers on a scenario");
  sched->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sched->add_option("--constraints", o.constraints, "Constraints JSON (defaults built in)")->check(CLI::ExistingFile);
  sched->add_option("--exact-limit", o.exact_limit, "Largest sharing set solved exactly");
  sched->add_option("--out", o.out, "Output directory");

  auto* evaluate = app.add_subcommand("evaluate", "Cost of one architecture over workloads");
  add_common(evaluate, o, true, true);
  evaluate->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << pimdse::error_record("usage", e.what()) << '\n';
    return 2;
  }

  try {
    if (*tune) return run_tune(o, seed, budget, candidates);
    if (*map) return run_map(o, baseline);
    if (*sched) return run_schedule(o, scenario);
    return run_evaluate(o);
  } catch (const pimdse::Error& e) {
    std::cerr << pimdse::error_record(e.kind(), e.what()) << '\n';
  } catch (const std::exception& e) {
    std::cerr << pimdse::error_record("internal", e.what()) << '\n';
  }
  return 1;
}

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tmlab/harness.hpp"
#include "tmlab/jsonl.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitViolation = 1;
constexpr int kExitBudget = 2;
constexpr int kExitUsage = 3;

uint64_t effective_seed(uint64_t flag_seed) {
  if (const char* env = std::getenv("TMLAB_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw CLI::ValidationError("TMLAB_SEED", "not a valid integer");
    }
  }
  return flag_seed;
}

void write_trace(const tmlab::History& h, const std::string& path, bool debug) {
  if (path.empty() || path == "-") {
    tmlab::serialize_history(h, std::cout, debug);
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  tmlab::serialize_history(h, os, debug);
}

tmlab::History read_trace(const std::string& path) {
  if (path == "-") return tmlab::parse_history(std::cin);
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return tmlab::parse_history(is);
}

nlohmann::json summary_json(const tmlab::WorkloadSpec& spec,
                            const tmlab::RunSummary& s) {
  (void)spec;
  return nlohmann::json{
      {"commits", s.commits},
      {"forced_aborts", s.forced_aborts},
      {"give_ups", s.give_ups},
      {"ghist_high_water", s.ghist_high_water},
      {"k", tmlab::ghist_bound_k},
      {"wall_ms", s.wall_ms},
      {"max_op_latency_ms", s.max_op_latency_ms},
  };
}

int run_cmd(const tmlab::WorkloadSpec& spec, const std::string& out,
            bool debug) {
  auto result = tmlab::run_workload(spec);
  write_trace(result.trace, out, debug);
  std::cerr << summary_json(spec, result.summary).dump(2) << '\n';
  return kExitPass;
}

int check_cmd(const std::string& criterion, const std::string& path,
              size_t max_txns) {
  auto spec = tmlab::parse_check_spec(criterion);
  if (!spec) {
    std::cerr << "unknown criterion: " << criterion << '\n';
    return kExitUsage;
  }
  tmlab::History h;
  try {
    h = read_trace(path);
  } catch (const std::exception& ex) {
    std::cerr << "parse error: " << ex.what() << '\n';
    return kExitUsage;
  }
  tmlab::CheckBudget budget;
  budget.max_txns_for_factorial = max_txns;

  nlohmann::json result;
  result["criterion"] = criterion;
  try {
    bool holds = tmlab::run_check(h, *spec, budget);
    result["holds"] = holds;
    if (spec->wrap == tmlab::CheckSpec::Wrap::Plain) {
      if (holds && spec->crit == tmlab::Criterion::Opacity)
        result["witness"] = *tmlab::opacity_witness(h, budget);
      if (holds && spec->crit == tmlab::Criterion::ConflictOpacity)
        result["witness"] = tmlab::topological_order(tmlab::build_graph(h));
    } else if (spec->wrap == tmlab::CheckSpec::Wrap::NonInterfering && !holds &&
               tmlab::check(h, spec->crit, budget)) {
      if (auto w = tmlab::interference_witness(h, spec->crit, budget)) {
        result["counterexample"] = {
            {"txn", w->txn},
            {"removedSet", w->removed},
            {"variantIndex", w->variant_index},
        };
      }
    }
    std::cout << result.dump(2) << '\n';
    return holds ? kExitPass : kExitViolation;
  } catch (const tmlab::BudgetExceeded& ex) {
    result["error"] = ex.what();
    std::cout << result.dump(2) << '\n';
    return kExitBudget;
  }
}

int demo_cmd(const std::string& name, const std::string& out) {
  tmlab::History h = tmlab::demo_scenario(name);
  write_trace(h, out, false);
  return kExitPass;
}

int fuzz_cmd(tmlab::WorkloadSpec spec, uint64_t iters,
             std::vector<std::string> criteria, const std::string& repro_dir,
             bool skip_read_check) {
  if (criteria.empty()) criteria = {"clo"};
  std::vector<tmlab::CheckSpec> specs;
  for (const std::string& c : criteria) {
    auto s = tmlab::parse_check_spec(c);
    if (!s) {
      std::cerr << "unknown criterion: " << c << '\n';
      return kExitUsage;
    }
    specs.push_back(*s);
  }
  auto report = tmlab::fuzz(spec, iters, specs, {}, skip_read_check);
  nlohmann::json j{
      {"iterations", report.iterations},
      {"checks_run", report.checks_run},
      {"checks_skipped", report.checks_skipped},
      {"failures", nlohmann::json::array()},
  };
  for (size_t i = 0; i < report.failures.size(); ++i) {
    const auto& f = report.failures[i];
    nlohmann::json fj{
        {"iteration", f.iteration},
        {"criterion", tmlab::check_spec_name(f.spec)},
    };
    if (!repro_dir.empty()) {
      std::string path = repro_dir + "/repro-" + std::to_string(i) + ".jsonl";
      write_trace(f.minimized, path, false);
      fj["repro"] = path;
    }
    j["failures"].push_back(fj);
  }
  std::cout << j.dump(2) << '\n';
  return report.failures.empty() ? kExitPass : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transactional-memory laboratory"};
  app.require_subcommand(1);

  tmlab::WorkloadSpec spec;
  std::string mode = "sgt";
  auto add_workload_flags = [&](CLI::App* cmd) {
    cmd->add_option("--threads", spec.threads, "worker threads");
    cmd->add_option("--objects", spec.objects, "shared objects");
    cmd->add_option("--txns", spec.txns_per_thread, "transactions per thread");
    cmd->add_option("--ops-min", spec.ops_min, "min operations per txn");
    cmd->add_option("--ops-max", spec.ops_max, "max operations per txn");
    cmd->add_option("--read-frac", spec.read_fraction, "read probability");
    cmd->add_option("--seed", spec.seed, "workload seed");
    cmd->add_option("--retries", spec.retry_limit, "retries after forced abort");
    cmd->add_option("--mode", mode, "sgt | sgt-gc")
        ->check(CLI::IsMember({"sgt", "sgt-gc"}));
  };

  auto* run = app.add_subcommand("run", "run a workload, emit its trace");
  add_workload_flags(run);
  std::string out;
  bool debug = false;
  run->add_option("--out", out, "trace output path (default stdout)");
  run->add_flag("--debug", debug, "annotate events with sequence numbers");

  auto* chk = app.add_subcommand("check", "check a trace against a criterion");
  std::string criterion, trace_path;
  size_t max_txns = 8;
  chk->add_option("--criterion", criterion,
                  "opacity|sser|co-opacity|lo|clo|vwc|permissive:<c>|ni:<c>")
      ->required();
  chk->add_option("--max-txns", max_txns, "permutation-search budget");
  chk->add_option("trace", trace_path, "trace file (JSONL), - for stdin")
      ->required();

  auto* demo = app.add_subcommand("demo", "emit a built-in scenario trace");
  std::string demo_name, demo_out;
  demo->add_option("name", demo_name, "fig1 | fig3")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig3"}));
  demo->add_option("--out", demo_out, "output path (default stdout)");

  auto* fz = app.add_subcommand("fuzz", "fuzz workloads against criteria");
  add_workload_flags(fz);
  uint64_t iters = 100;
  std::vector<std::string> criteria;
  std::string repro_dir;
  bool skip_read_check = false;
  fz->add_option("--iters", iters, "iterations");
  fz->add_option("--criteria", criteria, "criteria to check (default clo)");
  fz->add_option("--repro-dir", repro_dir, "directory for minimized repros");
  fz->add_flag("--unsafe-skip-read-check", skip_read_check,
               "disable the read-path cycle check (bug-injection testing)");

  try {
    app.parse(argc, argv);
    spec.seed = effective_seed(spec.seed);
    spec.mode = mode == "sgt-gc" ? tmlab::Mode::SgtGc : tmlab::Mode::Sgt;
    if (*run) return run_cmd(spec, out, debug);
    if (*chk) return check_cmd(criterion, trace_path, max_txns);
    if (*demo) return demo_cmd(demo_name, demo_out);
    if (*fz) return fuzz_cmd(spec, iters, criteria, repro_dir, skip_read_check);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

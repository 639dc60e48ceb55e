// ehmac: batch analysis and simulation of TDMA / framed-ALOHA / dynamic-FA
// medium access for energy-harvesting sensor populations.
//
// Subcommands: analyze, simulate, compare, tradeoff. Results land in a CSV
// with a fixed schema plus a JSON run manifest; comparison gates the exit
// code so sweeps can back CI checks.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ehmac/sweep.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ehmac::Error("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicas;
  std::optional<long> n_irs;
  std::optional<long> warmup;
};

ehmac::SweepSpec load_spec(const CommonOpts& opts) {
  ehmac::SweepSpec spec = ehmac::SweepSpec::from_json_text(slurp(opts.config_path));
  if (opts.replicas) spec.replicas = *opts.replicas;
  if (opts.n_irs) spec.n_irs = *opts.n_irs;
  if (opts.warmup) spec.warmup = *opts.warmup;
  if (spec.warmup < 0 || spec.n_irs <= spec.warmup)
    throw ehmac::Error("need n_irs > warmup >= 0");
  return spec;
}

std::uint64_t effective_seed(const CommonOpts& opts, const ehmac::SweepSpec& spec) {
  return opts.seed ? *opts.seed : spec.base.tolerances.rng_seed;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_out) {
  cmd->add_option("--config", opts.config_path, "configuration JSON")->required();
  auto* out = cmd->add_option("--out", opts.out_path, "output CSV path");
  if (needs_out) out->required();
  cmd->add_option("--seed", opts.seed, "master RNG seed (overrides config)");
  cmd->add_option("--replicas", opts.replicas, "simulation replicas per grid point");
  cmd->add_option("--irs", opts.n_irs, "IRs per simulation (including warmup)");
  cmd->add_option("--warmup", opts.warmup, "warmup IRs excluded from statistics");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"energy-harvesting MAC analysis and simulation toolkit"};
  app.require_subcommand(1);

  CommonOpts analyze_opts, simulate_opts, tradeoff_opts;
  CLI::App* analyze = app.add_subcommand("analyze", "closed-form metrics over the sweep grid");
  add_common(analyze, analyze_opts, true);
  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo metrics over the sweep grid");
  add_common(simulate, simulate_opts, true);
  CLI::App* tradeoff = app.add_subcommand("tradeoff", "delivery/time-efficiency envelopes");
  add_common(tradeoff, tradeoff_opts, true);
  double bin_width = 0.005;
  tradeoff->add_option("--bin-width", bin_width, "p_t bin width for the envelope");

  std::string analysis_csv, sim_csv, report_path;
  double tol_p_d = 0.02, tol_p_t = 0.02;
  CLI::App* compare = app.add_subcommand("compare", "gap report: analysis vs simulation CSV");
  compare->add_option("analysis", analysis_csv, "analysis CSV")->required();
  compare->add_option("sim", sim_csv, "simulation CSV")->required();
  compare->add_option("--out", report_path, "write the text report here too");
  compare->add_option("--tol-pd", tol_p_d, "max |p_d gap| (default 0.02)");
  compare->add_option("--tol-pt", tol_p_t, "max |p_t gap| (default 0.02)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      ehmac::SweepSpec spec = load_spec(analyze_opts);
      std::uint64_t seed = effective_seed(analyze_opts, spec);
      std::vector<ehmac::ResultRow> rows = ehmac::run_analysis_sweep(spec, seed);
      ehmac::write_csv(analyze_opts.out_path, rows);
      ehmac::write_manifest(analyze_opts.out_path, "analyze", spec, seed, rows.size());
      std::cout << rows.size() << " rows -> " << analyze_opts.out_path << "\n";
    } else if (*simulate) {
      ehmac::SweepSpec spec = load_spec(simulate_opts);
      std::uint64_t seed = effective_seed(simulate_opts, spec);
      std::vector<ehmac::ResultRow> rows = ehmac::run_simulation_sweep(spec, seed);
      ehmac::write_csv(simulate_opts.out_path, rows);
      ehmac::write_manifest(simulate_opts.out_path, "simulate", spec, seed, rows.size());
      std::cout << rows.size() << " rows -> " << simulate_opts.out_path << "\n";
    } else if (*tradeoff) {
      ehmac::SweepSpec spec = load_spec(tradeoff_opts);
      std::uint64_t seed = effective_seed(tradeoff_opts, spec);
      std::vector<ehmac::ResultRow> rows = ehmac::run_tradeoff_sweep(spec, seed, bin_width);
      ehmac::write_csv(tradeoff_opts.out_path, rows);
      ehmac::write_manifest(tradeoff_opts.out_path, "tradeoff", spec, seed, rows.size());
      std::cout << rows.size() << " envelope rows -> " << tradeoff_opts.out_path << "\n";
    } else if (*compare) {
      std::vector<ehmac::ResultRow> a = ehmac::read_csv(analysis_csv);
      std::vector<ehmac::ResultRow> s = ehmac::read_csv(sim_csv);
      ehmac::CompareReport report = ehmac::compare_results(a, s, tol_p_d, tol_p_t);
      std::string text = report.to_text();
      std::cout << text;
      if (!report_path.empty()) {
        std::ofstream os(report_path, std::ios::binary);
        os << text;
      }
      return report.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

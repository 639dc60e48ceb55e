#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ehmac/config.hpp"
#include "ehmac/metrics.hpp"
#include "ehmac/sim.hpp"

namespace ehmac {

/// Batch description: a base configuration plus axes swept over it. Absent
/// axes default to the base value.
struct SweepSpec {
  SystemConfig base;
  std::vector<double> rho_axis;
  std::vector<double> mu_h_axis;
  std::vector<double> gamma_db_axis;
  std::vector<Protocol> protocol_axis;
  std::vector<BacklogMode> mode_axis;
  int replicas = 1;
  long n_irs = 10000;
  long warmup = 2000;

  /// Parses the config document; the optional "sweep" object carries axes.
  static SweepSpec from_json_text(const std::string& text);

  /// Grid points in deterministic order (protocol, mode, mu_h, gamma, rho).
  std::vector<SystemConfig> expand(bool include_modes) const;
};

struct ResultRow {
  Protocol protocol = Protocol::fa;
  double rho = 1.0;
  double mu_h = 0.0;
  double gamma_th_db = 0.0;
  double alpha = 0.0;
  int sensor_count = 0;
  int f_eps = 0;
  std::string source;  // analysis | sim-known | sim-estimated | tradeoff
  double p_d = 0.0;
  double p_t = 0.0;
  double se_p_d = 0.0;
  double se_p_t = 0.0;
  std::uint64_t seed = 0;

  std::string key() const;  // (protocol, rho, mu_H, gamma_th_db)
};

inline constexpr const char* kCsvHeader =
    "protocol,rho,mu_H,gamma_th_db,alpha,M,F_eps,source,p_d,p_t,se_p_d,se_p_t,seed";

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::string to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(const std::filesystem::path& path);
std::vector<ResultRow> parse_csv(const std::string& text);

/// Caps the worker pool: EHMAC_THREADS, else hardware concurrency.
int worker_pool_size();

/// Analytical metrics for every grid point (axes x 1, modes ignored).
/// Deterministic row order and content for a fixed seed.
std::vector<ResultRow> run_analysis_sweep(const SweepSpec& spec, std::uint64_t seed,
                                          int threads = 0);

/// Simulated metrics for every grid point x backlog mode x replica.
std::vector<ResultRow> run_simulation_sweep(const SweepSpec& spec, std::uint64_t seed,
                                            int threads = 0);

/// Trade-off envelopes per (protocol, mu_h, gamma) group over the rho axis.
std::vector<ResultRow> run_tradeoff_sweep(const SweepSpec& spec, std::uint64_t seed,
                                          double bin_width = 0.005, int threads = 0);

struct ComparePoint {
  std::string key;
  double gap_p_d = 0.0;
  double gap_p_t = 0.0;
  bool ok = true;
};

struct CompareReport {
  std::vector<ComparePoint> points;
  double max_gap_p_d = 0.0;
  double mean_gap_p_d = 0.0;
  double max_gap_p_t = 0.0;
  double mean_gap_p_t = 0.0;
  bool pass = true;

  std::string to_text() const;
};

/// Joins sim rows against analysis rows on (protocol, rho, mu_H, gamma) and
/// reports absolute metric gaps against the tolerances. A sim row without an
/// analysis partner is an error naming the key.
CompareReport compare_results(const std::vector<ResultRow>& analysis,
                              const std::vector<ResultRow>& sim, double tol_p_d,
                              double tol_p_t);

/// Machine-readable run manifest written next to each output CSV.
void write_manifest(const std::filesystem::path& out_csv, const std::string& command,
                    const SweepSpec& spec, std::uint64_t seed, std::size_t rows);

/// FNV-1a hash of the canonical base-config JSON (manifest config_hash).
std::uint64_t config_hash(const SystemConfig& config);

}  // namespace ehmac

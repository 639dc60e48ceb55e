#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ehmac/config.hpp"
#include "ehmac/estimator.hpp"
#include "ehmac/markov.hpp"
#include "ehmac/rng.hpp"

namespace ehmac {

struct SensorState {
  int energy_units = 0;
  bool has_measure = false;
  double gain = 1.0;
  bool delivered = false;
  int attempts = 0;
};

enum class SlotOutcome { empty, collided, success };

struct SlotResolution {
  SlotOutcome outcome = SlotOutcome::empty;
  int winner = -1;  // index into the gain span for a success
};

/// Resolves one slot: empty without transmitters, success for the unique
/// transmitter whose SIR h / (sum - h) clears gamma_th (a lone transmitter
/// always succeeds), collided otherwise.
SlotResolution resolve_slot(std::span<const double> gains, double gamma_th);

struct SensorOutcome {
  bool had_measure = false;
  bool delivered = false;
  int attempts = 0;
  bool shortage = false;  // undelivered for lack of energy
};

struct IrTrace {
  long ir_index = 0;
  std::vector<FrameObservation> frames;
  long slots_allocated = 0;
  long measure_count = 0;
  long delivered_count = 0;
  long successful_slots = 0;
  std::vector<long> true_backlog;         // B_k per frame
  std::vector<double> estimated_backlog;  // FC-side estimate per frame
  std::vector<SensorOutcome> sensors;
};

/// Always-on runtime invariant tallies; every field must stay zero.
struct InvariantCounters {
  long slots_resolved = 0;
  long multi_success_slots = 0;
  long energy_violations = 0;
  long backlog_rule_violations = 0;

  long total_violations() const {
    return multi_success_slots + energy_violations + backlog_rule_violations;
  }
};

struct SimReport {
  double p_d = 0.0;
  double p_t = 0.0;
  double se_p_d = 0.0;
  double se_p_t = 0.0;
  std::vector<double> energy_pmf;  // empirical begin-of-IR distribution
  long irs_measured = 0;
  long warmup = 0;
  std::uint64_t seed = 0;
  long slots_total = 0;
  long successes_total = 0;
  long measures_total = 0;
  long delivered_total = 0;
  InvariantCounters invariants;
  std::string config_json;

  std::string to_json_text(int indent = 2) const;
};

/// Fusion-center model quantities for estimated-backlog operation, derived
/// from the analysis chain (steady-state by default).
struct EstimatorContext {
  double g_eps = 1.0;
  std::vector<double> g_cond;  // entry k-1: G((k+1)eps | k eps); NaN = undefined
  BetaTable betas;
};

EstimatorContext make_estimator_context(const SystemConfig& config, const CaptureTable& table,
                                        const EnergyDistribution& g);
/// Convenience: builds the capture table and steady-state chain internally.
EstimatorContext make_estimator_context(const SystemConfig& config);

/// Independent per-sensor harvest draws, saturating at level N.
void harvest_step(std::vector<SensorState>& population, const HarvestModel& harvest,
                  int levels_n, Rng& rng);

class Simulation {
 public:
  Simulation(const SystemConfig& config, std::uint64_t seed);
  Simulation(const SystemConfig& config, std::uint64_t seed, EstimatorContext ctx);

  /// One inventory round: fresh measure/gain draws, protocol frames. The
  /// harvest boundary is separate (run() applies it after each IR).
  IrTrace run_ir();
  void apply_harvest() { harvest_step(population_, config_.harvest, config_.energy.levels_n, rng_); }

  SimReport run(long n_irs, long warmup, std::ostream* trace_csv = nullptr);

  std::vector<SensorState>& population() { return population_; }
  const SystemConfig& config() const { return config_; }
  const InvariantCounters& invariants() const { return invariants_; }

 private:
  Simulation(const SystemConfig& config, std::uint64_t seed, std::optional<EstimatorContext> ctx);
  void run_frames(IrTrace& trace);

  SystemConfig config_;
  std::uint64_t seed_;
  Rng rng_;
  std::optional<EstimatorContext> ctx_;
  std::vector<SensorState> population_;
  long ir_index_ = 0;
  InvariantCounters invariants_;

  // frame work buffers
  std::vector<int> backlog_;
  std::vector<int> slot_of_;
  std::vector<int> slot_count_;
  std::vector<int> slot_offset_;
  std::vector<int> member_by_slot_;
  std::vector<double> gain_by_slot_;
};

SimReport run_simulation(const SystemConfig& config, long n_irs, long warmup,
                         std::uint64_t seed);

}  // namespace ehmac

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehmac {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by validate() with the name of the first violated parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Protocol { tdma, fa, dfa };
enum class BacklogMode { known, estimated };

std::string to_string(Protocol p);
std::string to_string(BacklogMode m);
Protocol protocol_from_string(const std::string& s);
BacklogMode backlog_mode_from_string(const std::string& s);

/// Quantized energy storage: levels {0, delta, ..., N*delta}; a transmission
/// costs eps = tx_cost_units * delta.
struct EnergyConfig {
  double delta = 1.0;    // energy unit
  int levels_n = 1;      // N
  int tx_cost_units = 1; // eps expressed in delta units

  // F_eps = N / eps_delta: number of transmissions a full storage affords.
  int capacity() const { return levels_n / tx_cost_units; }
  double eps() const { return delta * tx_cost_units; }
};

/// Per-IR harvested energy in delta units. Either the geometric family
/// q_i = xi*(1-xi)^i or an explicit finite pmf table.
class HarvestModel {
 public:
  HarvestModel() = default;

  /// Geometric harvest with mean mu_h * eps per IR (mu_h = harvesting rate,
  /// mean harvested energy normalized by the transmission cost).
  static HarvestModel geometric(double mu_h, const EnergyConfig& energy);
  static HarvestModel from_pmf(std::vector<double> pmf);

  double pmf(int i) const;  // q_i
  /// Exact upper tail Pr[H >= m] in delta units. Complements the partial
  /// sums bitwise, so harvest-driven transition rows sum to one exactly.
  double tail(int m) const;
  /// Exact mean in delta units (uncapped).
  double mean_units() const;
  /// Smallest index T with tail(T) < tail_mass.
  int truncation_index(double tail_mass) const;

  bool is_geometric() const { return geometric_; }
  double xi() const { return xi_; }
  double mu_h() const { return mu_h_; }
  const std::vector<double>& table() const { return table_; }

 private:
  bool geometric_ = true;
  double xi_ = 0.5;
  double mu_h_ = 0.0;
  std::vector<double> table_;         // explicit pmf (table mode)
  std::vector<double> table_prefix_;  // prefix[m] = sum_{i<m} q_i
};

/// Uplink channel gain distribution, unit mean. The deterministic kind fixes
/// h = 1 which, together with gamma_th > 1, disables the capture effect.
struct FadingModel {
  enum class Kind { exponential, deterministic };
  Kind kind = Kind::exponential;

  std::string name() const;
  static FadingModel from_name(const std::string& s);
};

/// Begin-of-process energy distribution presets.
struct InitialEnergy {
  enum class Preset { empty, full, uniform, custom };
  Preset preset = Preset::full;
  std::vector<double> pmf;  // used when preset == custom

  /// Materialize as a pmf over {0..N}.
  std::vector<double> materialize(int levels_n) const;
};

struct NumericTolerances {
  double poisson_tail_mass = 1e-10;  // truncation bound for Poisson sums
  long capture_samples = 1000000;    // Monte-Carlo samples per capture row
  long particle_count = 200000;      // particles representing per-frame gains
  double stationary_residual = 1e-10;
  std::uint64_t rng_seed = 1;
};

struct SystemConfig {
  int sensor_count = 1;      // M
  double alpha = 1.0;        // probability of a new measure per IR
  double gamma_th_db = 3.0;  // SIR threshold at the interface (dB)
  double rho = 1.0;          // frame-sizing factor
  EnergyConfig energy;
  HarvestModel harvest;
  FadingModel fading;
  Protocol protocol = Protocol::fa;
  BacklogMode backlog_mode = BacklogMode::known;
  InitialEnergy initial_energy;
  NumericTolerances tolerances;

  /// Canonical linear-scale threshold.
  double gamma_th() const;

  std::string to_json_text(int indent = 2) const;
  static SystemConfig from_json_text(const std::string& text);
};

/// Checks every invariant and returns the config unchanged; throws
/// ConfigError naming the first violated parameter.
SystemConfig validate(SystemConfig config);

}  // namespace ehmac

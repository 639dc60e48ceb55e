#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ehmac/config.hpp"
#include "ehmac/rng.hpp"

namespace ehmac {

class CaptureError : public Error {
 public:
  using Error::Error;
};

/// Empirical sample set representing the channel-gain distribution of users
/// still backlogged at frame k (frame 1 holds i.i.d. fading draws).
struct GainParticles {
  int frame_index = 1;
  std::vector<double> samples;
};

struct CaptureEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Pr[J = j] for the Poisson(1/rho) interferer count: e^{-1/rho} / (rho^j j!).
double poisson_weight(double rho, int j);

/// Smallest J such that the Poisson(1/rho) mass beyond J is below tail_mass.
int poisson_cutoff(double rho, double tail_mass);

/// Monte-Carlo estimate of the conditional capture probability
/// Pr[h >= gamma_th * (h_1 + ... + h_j)] with gains drawn i.i.d. from the
/// fading law (frame 1) or bootstrapped from a particle set (frame k > 1).
CaptureEstimate capture_cond(const FadingModel& fading, double gamma_th, int j,
                             long mc_samples, Rng& rng);
CaptureEstimate capture_cond(const GainParticles& particles, double gamma_th, int j,
                             long mc_samples, Rng& rng);

/// Conditions the frame-k gain distribution on a failed transmission
/// (SIR below gamma_th against a Poisson(1/rho) crowd drawn from the same
/// particles) and resamples to target_count frame-(k+1) particles.
/// Throws CaptureError when the failure rate is below `acceptance_floor`.
GainParticles propagate_gain_particles(const GainParticles& particles, double rho,
                                       double gamma_th, long target_count, Rng& rng,
                                       double acceptance_floor = 1e-4);

/// Per-frame capture and slot-success probabilities for one (fading, gamma_th,
/// rho) operating point:
///   p_cond[k][j]  capture given j interferers in frame k+1 (0-based storage)
///   p_marg[k]     p_{c,k}:  e^{-1/rho} sum_j p_cond[k][j] / (rho^j j!)
///   p_slot[k]     p_{t,k}:  e^{-1/rho} sum_j p_cond[k][j] / (rho^{j+1} j!)
struct CaptureTable {
  std::string fading_kind;
  double gamma_th = 0.0;
  double rho = 1.0;
  int j_max = 0;
  std::vector<std::vector<double>> p_cond;
  std::vector<double> p_marg;
  std::vector<double> p_slot;
  std::vector<double> max_std_error;  // per frame, 0 for exact rows
  bool mc_flagged = false;            // any row above the std-error bound
  long capture_samples = 0;
  long particle_count = 0;
  std::uint64_t seed = 0;

  int frames() const { return static_cast<int>(p_marg.size()); }

  /// p_cond for 1-based frame k; zero beyond the truncation point.
  double cond(int k, int j) const;

  /// Identifies the inputs the table was built from (used for caching).
  std::string cache_key() const;

  std::string to_json_text(int indent = 2) const;
  static CaptureTable from_json_text(const std::string& text);
};

/// Flag bound for Monte-Carlo rows; estimates above it mark the table.
inline constexpr double kCaptureStdErrorBound = 5e-3;

/// Builds the table for the configured protocol: one trivial row for TDMA,
/// one contention row for FA, F_eps rows with particle propagation for DFA.
CaptureTable build_capture_table(const SystemConfig& config);

}  // namespace ehmac

#pragma once

#include <optional>
#include <vector>

#include "ehmac/capture.hpp"
#include "ehmac/config.hpp"

namespace ehmac {

/// What the fusion center observes after one frame.
struct FrameObservation {
  int frame_index = 1;
  long successes = 0;   // N_D
  long collisions = 0;  // N_C
  long empties = 0;     // N_E
  long frame_length = 0;
};

/// Conditional mean transmitter counts for frame k:
///   beta_d  E[Y | successful slot]  (1 with no capture)
///   beta_c  E[Y | collided slot]    (undefined when collisions cannot occur)
struct BetaMeans {
  double beta_d = 1.0;
  std::optional<double> beta_c;
  double tail_bound = 0.0;  // truncation residual of the defining sums
};

struct BetaTable {
  std::vector<BetaMeans> by_frame;  // indexed by frame - 1
};

/// Bayes inversion of the slot outcome against the Poisson(1/rho) occupancy:
/// Pr[U_k | Y=j] = j p_{c,k}(j-1), Pr[U_k] = p_{t,k},
/// Pr[C_k] = 1 - Pr[U_k] - e^{-1/rho}.
BetaMeans beta_means(const CaptureTable& table, int k);
BetaTable build_beta_table(const CaptureTable& table);

/// First-frame estimate B_1 = M alpha G(eps).
double initial_backlog(int sensor_count, double alpha, double g_eps);

/// Next-frame estimate from the frame-k observation:
/// ((beta_d - 1) N_D + beta_c N_C) * G((k+1) eps | k eps).
double update_backlog(const FrameObservation& obs, const BetaMeans& betas, double g_cond);

/// L = ceil(rho * estimate); 0 only for an empty estimate.
long frame_length(double backlog_estimate, double rho);

/// Per-IR termination rule for estimated-backlog DFA.
inline constexpr double kBacklogStopThreshold = 0.5;

}  // namespace ehmac

#include "ehmac/estimator.hpp"

#include <algorithm>
#include <cmath>

namespace ehmac {

BetaMeans beta_means(const CaptureTable& table, int k) {
  if (k < 1 || k > table.frames()) throw Error("beta_means: frame index out of range");
  const double rho = table.rho;
  const double w0 = std::exp(-1.0 / rho);
  const double p_success = table.p_slot[std::size_t(k) - 1];  // Pr[U_k]
  const double p_collide = 1.0 - p_success - w0;              // Pr[C_k]

  // The defining sums run past the table's truncation point (with the
  // vanished capture terms at zero) until the j^2-weighted Poisson mass is
  // negligible; the remainder is reported as tail_bound.
  BetaMeans out;
  double num_d = 0.0, num_c = 0.0;
  double w = w0;
  int j = 0;
  while (true) {
    ++j;
    w /= rho * j;
    const double p_u_given_j = std::min(double(j) * table.cond(k, j - 1), 1.0);
    num_d += double(j) * p_u_given_j * w;
    if (j >= 2) num_c += double(j) * (1.0 - p_u_given_j) * w;
    if (double(j + 1) * double(j + 1) * w / (rho * (j + 1)) < 1e-18 && j > table.j_max) break;
    if (j > table.j_max + 400) break;
  }
  out.tail_bound = 2.0 * double(j + 1) * double(j + 1) * w / (rho * (j + 1));

  out.beta_d = p_success > 0.0 ? num_d / p_success : 1.0;
  if (p_collide > 1e-15)
    out.beta_c = num_c / p_collide;
  else
    out.beta_c = std::nullopt;
  return out;
}

BetaTable build_beta_table(const CaptureTable& table) {
  BetaTable out;
  out.by_frame.reserve(std::size_t(table.frames()));
  for (int k = 1; k <= table.frames(); ++k) out.by_frame.push_back(beta_means(table, k));
  return out;
}

double initial_backlog(int sensor_count, double alpha, double g_eps) {
  return double(sensor_count) * alpha * g_eps;
}

double update_backlog(const FrameObservation& obs, const BetaMeans& betas, double g_cond) {
  if (!(g_cond >= 0.0) || g_cond > 1.0)
    throw Error("update_backlog: conditional ccdf outside [0, 1]");
  double hidden_in_successes = (betas.beta_d - 1.0) * double(obs.successes);
  double in_collisions =
      betas.beta_c.has_value() ? *betas.beta_c * double(obs.collisions) : 0.0;
  return (hidden_in_successes + in_collisions) * g_cond;
}

long frame_length(double backlog_estimate, double rho) {
  if (backlog_estimate <= 0.0) return 0;
  return static_cast<long>(std::ceil(rho * backlog_estimate));
}

}  // namespace ehmac

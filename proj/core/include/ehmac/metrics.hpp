#pragma once

#include <span>
#include <vector>

#include "ehmac/capture.hpp"
#include "ehmac/config.hpp"
#include "ehmac/markov.hpp"

namespace ehmac {

/// Closed-form performance figures for one operating point.
struct MetricsReport {
  Protocol protocol = Protocol::fa;
  double p_d = 0.0;  // delivery probability
  double p_t = 0.0;  // time efficiency
  // DFA per-frame breakdown (empty for TDMA/FA)
  std::vector<double> p_c_k;
  std::vector<double> p_t_k;
  std::vector<double> backlog_k;  // E[B_k]
  EnergyDistribution::Tag source_tag = EnergyDistribution::Tag::steady_state;
  long ir_index = 0;
};

double delivery_tdma(const EnergyDistribution& g, const EnergyConfig& energy);
double delivery_fa(const EnergyDistribution& g, const CaptureTable& table,
                   const EnergyConfig& energy);

struct DfaDelivery {
  double p_d = 0.0;
  std::vector<double> addends;  // per-frame contributions
};
DfaDelivery delivery_dfa(const EnergyDistribution& g, const CaptureTable& table,
                         const EnergyConfig& energy);

double time_eff_tdma(double alpha, const EnergyDistribution& g, const EnergyConfig& energy);
double time_eff_fa(const CaptureTable& table);

struct DfaTimeEff {
  double p_t = 0.0;
  std::vector<double> backlog;  // E[B_k]
};
DfaTimeEff time_eff_dfa(const CaptureTable& table, const EnergyDistribution& g,
                        int sensor_count, double alpha, const EnergyConfig& energy);

/// Full analysis of one validated configuration: capture table, stationary
/// chain, then the protocol's metrics from the begin-of-IR distribution.
MetricsReport analyze(const SystemConfig& config);

/// Same, reusing an already built table and begin-of-IR distribution.
MetricsReport evaluate_metrics(const SystemConfig& config, const CaptureTable& table,
                               const EnergyDistribution& g);

struct TradeoffPoint {
  Protocol protocol = Protocol::fa;
  double rho = 0.0;
  double p_d = 0.0;
  double p_t = 0.0;
};

/// Upper envelope of achieved (p_t, p_d) pairs: p_t values are binned
/// (width bin_width) and only the best p_d per bin survives, sorted by
/// increasing p_t.
std::vector<TradeoffPoint> tradeoff_envelope(std::vector<TradeoffPoint> achieved,
                                             double bin_width);

/// (p_d, p_t) pairs over the rho grid reduced to the upper envelope.
/// TDMA yields a single point.
std::vector<TradeoffPoint> tradeoff_curve(const SystemConfig& config,
                                          std::span<const double> rho_grid,
                                          double bin_width = 0.005);

}  // namespace ehmac

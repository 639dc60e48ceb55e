#include "ehmac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ehmac {

double delivery_tdma(const EnergyDistribution& g, const EnergyConfig& energy) {
  return g.ccdf_eps(1, energy.tx_cost_units);
}

double delivery_fa(const EnergyDistribution& g, const CaptureTable& table,
                   const EnergyConfig& energy) {
  return g.ccdf_eps(1, energy.tx_cost_units) * table.p_marg[0];
}

DfaDelivery delivery_dfa(const EnergyDistribution& g, const CaptureTable& table,
                         const EnergyConfig& energy) {
  DfaDelivery out;
  double survive = 1.0;  // Prod_{i<k} (1 - p_c,i): collided in every prior frame
  for (int k = 1; k <= table.frames(); ++k) {
    double addend = g.ccdf_eps(k, energy.tx_cost_units) * table.p_marg[std::size_t(k) - 1] * survive;
    out.addends.push_back(addend);
    out.p_d += addend;
    survive *= 1.0 - table.p_marg[std::size_t(k) - 1];
  }
  return out;
}

double time_eff_tdma(double alpha, const EnergyDistribution& g, const EnergyConfig& energy) {
  // measure availability and energy level are independent
  return alpha * g.ccdf_eps(1, energy.tx_cost_units);
}

double time_eff_fa(const CaptureTable& table) { return table.p_slot[0]; }

DfaTimeEff time_eff_dfa(const CaptureTable& table, const EnergyDistribution& g,
                        int sensor_count, double alpha, const EnergyConfig& energy) {
  DfaTimeEff out;
  double survive = 1.0;
  double weighted = 0.0, total = 0.0;
  for (int k = 1; k <= table.frames(); ++k) {
    double backlog = sensor_count * alpha * g.ccdf_eps(k, energy.tx_cost_units) * survive;
    out.backlog.push_back(backlog);
    weighted += table.p_slot[std::size_t(k) - 1] * backlog;
    total += backlog;
    survive *= 1.0 - table.p_marg[std::size_t(k) - 1];
  }
  if (!(total > 0.0))
    throw Error("time_eff_dfa: every expected backlog is zero (degenerate alpha or G)");
  out.p_t = weighted / total;
  return out;
}

MetricsReport evaluate_metrics(const SystemConfig& config, const CaptureTable& table,
                               const EnergyDistribution& g) {
  MetricsReport r;
  r.protocol = config.protocol;
  r.source_tag = g.tag;
  r.ir_index = g.ir_index;
  switch (config.protocol) {
    case Protocol::tdma:
      r.p_d = delivery_tdma(g, config.energy);
      r.p_t = time_eff_tdma(config.alpha, g, config.energy);
      break;
    case Protocol::fa:
      r.p_d = delivery_fa(g, table, config.energy);
      r.p_t = time_eff_fa(table);
      break;
    case Protocol::dfa: {
      DfaDelivery d = delivery_dfa(g, table, config.energy);
      DfaTimeEff t = time_eff_dfa(table, g, config.sensor_count, config.alpha, config.energy);
      r.p_d = d.p_d;
      r.p_t = t.p_t;
      r.p_c_k = table.p_marg;
      r.p_t_k = table.p_slot;
      r.backlog_k = t.backlog;
      break;
    }
  }
  return r;
}

MetricsReport analyze(const SystemConfig& config) {
  CaptureTable table = build_capture_table(config);
  TransitionMatrix chain = build_transition_matrix(config, table);
  StationaryOptions opts;
  opts.residual_target = config.tolerances.stationary_residual;
  std::vector<double> phi = stationary_distribution(chain, opts);
  std::vector<double> phi_plus = begin_ir_distribution(phi, chain);
  EnergyDistribution g = energy_pmf(phi_plus, chain.index);
  return evaluate_metrics(config, table, g);
}

std::vector<TradeoffPoint> tradeoff_envelope(std::vector<TradeoffPoint> achieved,
                                             double bin_width) {
  std::map<long, TradeoffPoint> best;
  for (const TradeoffPoint& p : achieved) {
    long bin = static_cast<long>(std::floor(p.p_t / bin_width));
    auto it = best.find(bin);
    if (it == best.end() || p.p_d > it->second.p_d) best[bin] = p;
  }
  std::vector<TradeoffPoint> envelope;
  envelope.reserve(best.size());
  for (auto& [bin, p] : best) envelope.push_back(p);
  return envelope;
}

std::vector<TradeoffPoint> tradeoff_curve(const SystemConfig& config,
                                          std::span<const double> rho_grid,
                                          double bin_width) {
  if (rho_grid.empty()) throw Error("tradeoff_curve: empty rho grid");

  if (config.protocol == Protocol::tdma) {
    MetricsReport r = analyze(config);  // independent of rho
    return {TradeoffPoint{config.protocol, config.rho, r.p_d, r.p_t}};
  }

  std::vector<TradeoffPoint> achieved;
  achieved.reserve(rho_grid.size());
  for (double rho : rho_grid) {
    SystemConfig point = config;
    point.rho = rho;
    MetricsReport r = analyze(point);
    achieved.push_back({config.protocol, rho, r.p_d, r.p_t});
  }
  return tradeoff_envelope(std::move(achieved), bin_width);
}

}  // namespace ehmac

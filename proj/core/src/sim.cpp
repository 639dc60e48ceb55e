#include "ehmac/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "ehmac/capture.hpp"

namespace ehmac {

SlotResolution resolve_slot(std::span<const double> gains, double gamma_th) {
  if (gains.empty()) return {SlotOutcome::empty, -1};
  if (gains.size() == 1) return {SlotOutcome::success, 0};
  double sum = 0.0, best = -1.0;
  int best_idx = -1;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    sum += gains[i];
    if (gains[i] > best) {
      best = gains[i];
      best_idx = static_cast<int>(i);
    }
  }
  // With gamma_th > 1 only the strongest transmitter can clear the threshold.
  if (best >= gamma_th * (sum - best)) return {SlotOutcome::success, best_idx};
  return {SlotOutcome::collided, -1};
}

std::string SimReport::to_json_text(int indent) const {
  nlohmann::json j;
  j["p_d"] = p_d;
  j["p_t"] = p_t;
  j["se_p_d"] = se_p_d;
  j["se_p_t"] = se_p_t;
  j["energy_pmf"] = energy_pmf;
  j["irs_measured"] = irs_measured;
  j["warmup"] = warmup;
  j["seed"] = seed;
  j["slots_total"] = slots_total;
  j["successes_total"] = successes_total;
  j["measures_total"] = measures_total;
  j["delivered_total"] = delivered_total;
  j["invariant_violations"] = invariants.total_violations();
  j["config"] = nlohmann::json::parse(config_json.empty() ? "{}" : config_json);
  return j.dump(indent);
}

EstimatorContext make_estimator_context(const SystemConfig& config, const CaptureTable& table,
                                        const EnergyDistribution& g) {
  EstimatorContext ctx;
  const int eps = config.energy.tx_cost_units;
  const int f_eps = config.energy.capacity();
  ctx.g_eps = g.ccdf_eps(1, eps);
  for (int k = 1; k < f_eps; ++k) {
    double gk = g.ccdf_eps(k, eps);
    double gk1 = g.ccdf_eps(k + 1, eps);
    ctx.g_cond.push_back(gk > 0.0 ? gk1 / gk : std::nan(""));
  }
  ctx.betas = build_beta_table(table);
  return ctx;
}

EstimatorContext make_estimator_context(const SystemConfig& config) {
  CaptureTable table = build_capture_table(config);
  TransitionMatrix chain = build_transition_matrix(config, table);
  StationaryOptions opts;
  opts.residual_target = config.tolerances.stationary_residual;
  std::vector<double> phi = stationary_distribution(chain, opts);
  EnergyDistribution g = energy_pmf(begin_ir_distribution(phi, chain), chain.index);
  return make_estimator_context(config, table, g);
}

void harvest_step(std::vector<SensorState>& population, const HarvestModel& harvest,
                  int levels_n, Rng& rng) {
  if (harvest.is_geometric()) {
    const double xi = harvest.xi();
    for (SensorState& s : population) {
      long draw = rng.geometric(xi);
      long level = std::min<long>(s.energy_units + draw, levels_n);
      s.energy_units = static_cast<int>(level);
    }
    return;
  }
  // table pmf: inverse-cdf draw
  const std::vector<double>& pmf = harvest.table();
  for (SensorState& s : population) {
    double u = rng.unit();
    double acc = 0.0;
    long draw = static_cast<long>(pmf.size()) - 1;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      acc += pmf[i];
      if (u < acc) {
        draw = static_cast<long>(i);
        break;
      }
    }
    long level = std::min<long>(s.energy_units + draw, levels_n);
    s.energy_units = static_cast<int>(level);
  }
}

Simulation::Simulation(const SystemConfig& config, std::uint64_t seed,
                       std::optional<EstimatorContext> ctx)
    : config_(config), seed_(seed), rng_(Rng::substream(seed, 0)), ctx_(std::move(ctx)) {
  if (!ctx_.has_value() && config_.backlog_mode == BacklogMode::estimated &&
      config_.protocol != Protocol::tdma)
    ctx_ = make_estimator_context(config_);
  population_.resize(std::size_t(config_.sensor_count));

  // initial energies drawn i.i.d. from the configured distribution
  std::vector<double> p1 = config_.initial_energy.materialize(config_.energy.levels_n);
  for (SensorState& s : population_) {
    double u = rng_.unit();
    double acc = 0.0;
    s.energy_units = config_.energy.levels_n;
    for (std::size_t j = 0; j < p1.size(); ++j) {
      acc += p1[j];
      if (u < acc) {
        s.energy_units = static_cast<int>(j);
        break;
      }
    }
  }
}

Simulation::Simulation(const SystemConfig& config, std::uint64_t seed)
    : Simulation(config, seed, std::nullopt) {}

Simulation::Simulation(const SystemConfig& config, std::uint64_t seed, EstimatorContext ctx)
    : Simulation(config, seed, std::optional<EstimatorContext>(std::move(ctx))) {}

IrTrace Simulation::run_ir() {
  IrTrace trace;
  trace.ir_index = ++ir_index_;
  trace.sensors.resize(population_.size());

  const double alpha = config_.alpha;
  const bool exponential = config_.fading.kind == FadingModel::Kind::exponential;
  for (std::size_t m = 0; m < population_.size(); ++m) {
    SensorState& s = population_[m];
    s.has_measure = rng_.bernoulli(alpha);
    s.gain = exponential ? rng_.exponential() : 1.0;
    s.delivered = false;
    s.attempts = 0;
    if (s.has_measure) ++trace.measure_count;
  }

  run_frames(trace);

  const int eps = config_.energy.tx_cost_units;
  for (std::size_t m = 0; m < population_.size(); ++m) {
    const SensorState& s = population_[m];
    SensorOutcome& o = trace.sensors[m];
    o.had_measure = s.has_measure;
    o.delivered = s.delivered;
    o.attempts = s.attempts;
    o.shortage = s.has_measure && !s.delivered && s.energy_units < eps;
    if (s.delivered) ++trace.delivered_count;
  }
  return trace;
}

void Simulation::run_frames(IrTrace& trace) {
  const int eps = config_.energy.tx_cost_units;
  const int f_eps = config_.energy.capacity();
  const double gamma_th = config_.gamma_th();
  const bool estimated =
      config_.backlog_mode == BacklogMode::estimated && config_.protocol != Protocol::tdma;

  if (config_.protocol == Protocol::tdma) {
    // one pre-assigned slot per sensor
    trace.slots_allocated += config_.sensor_count;
    long transmitted = 0;
    for (SensorState& s : population_) {
      if (!s.has_measure || s.energy_units < eps) continue;
      double gain = s.gain;
      SlotResolution res = resolve_slot(std::span<const double>(&gain, 1), gamma_th);
      ++invariants_.slots_resolved;
      s.energy_units -= eps;
      s.attempts = 1;
      if (res.outcome == SlotOutcome::success) {
        s.delivered = true;
        ++trace.successful_slots;
      }
      ++transmitted;
    }
    trace.frames.push_back(FrameObservation{1, transmitted, 0,
                                            config_.sensor_count - transmitted,
                                            config_.sensor_count});
    trace.true_backlog.push_back(transmitted);
    return;
  }

  backlog_.clear();
  for (std::size_t m = 0; m < population_.size(); ++m) {
    const SensorState& s = population_[m];
    if (s.has_measure && s.energy_units >= eps) backlog_.push_back(static_cast<int>(m));
  }

  double estimate = 0.0;
  if (estimated) estimate = initial_backlog(config_.sensor_count, config_.alpha, ctx_->g_eps);

  for (int k = 1;; ++k) {
    long frame_len;
    if (estimated) {
      frame_len = frame_length(estimate, config_.rho);
    } else {
      if (backlog_.empty()) break;
      frame_len = frame_length(double(backlog_.size()), config_.rho);
    }
    if (frame_len == 0) break;

    trace.true_backlog.push_back(static_cast<long>(backlog_.size()));
    if (estimated) trace.estimated_backlog.push_back(estimate);
    trace.slots_allocated += frame_len;

    // uniform slot choices, one energy unit batch per transmission
    slot_of_.resize(backlog_.size());
    slot_count_.assign(std::size_t(frame_len), 0);
    for (std::size_t i = 0; i < backlog_.size(); ++i) {
      slot_of_[i] = static_cast<int>(rng_.uniform_int(frame_len));
      ++slot_count_[std::size_t(slot_of_[i])];
      SensorState& s = population_[std::size_t(backlog_[i])];
      s.energy_units -= eps;
      ++s.attempts;
      if (s.energy_units < 0 || s.attempts > f_eps) ++invariants_.energy_violations;
      if (s.attempts != k) ++invariants_.backlog_rule_violations;
    }

    // group transmitters by slot
    slot_offset_.assign(std::size_t(frame_len) + 1, 0);
    for (long slot = 0; slot < frame_len; ++slot)
      slot_offset_[std::size_t(slot) + 1] = slot_offset_[std::size_t(slot)] + slot_count_[std::size_t(slot)];
    member_by_slot_.resize(backlog_.size());
    gain_by_slot_.resize(backlog_.size());
    {
      std::vector<int> cursor(slot_offset_.begin(), slot_offset_.end() - 1);
      for (std::size_t i = 0; i < backlog_.size(); ++i) {
        int pos = cursor[std::size_t(slot_of_[i])]++;
        member_by_slot_[std::size_t(pos)] = backlog_[i];
        gain_by_slot_[std::size_t(pos)] = population_[std::size_t(backlog_[i])].gain;
      }
    }

    FrameObservation obs;
    obs.frame_index = k;
    obs.frame_length = frame_len;
    long occupied = 0;
    for (long slot = 0; slot < frame_len; ++slot) {
      int begin = slot_offset_[std::size_t(slot)];
      int count = slot_count_[std::size_t(slot)];
      if (count == 0) continue;
      ++occupied;
      std::span<const double> gains(&gain_by_slot_[std::size_t(begin)], std::size_t(count));
      SlotResolution res = resolve_slot(gains, gamma_th);
      ++invariants_.slots_resolved;

      // uniqueness audit: count transmitters individually above threshold
      if (count > 1) {
        double sum = 0.0;
        for (double g : gains) sum += g;
        int qualifiers = 0;
        for (double g : gains)
          if (g >= gamma_th * (sum - g)) ++qualifiers;
        if (qualifiers > 1) ++invariants_.multi_success_slots;
        if ((qualifiers == 1) != (res.outcome == SlotOutcome::success))
          ++invariants_.multi_success_slots;
      }

      if (res.outcome == SlotOutcome::success) {
        ++obs.successes;
        population_[std::size_t(member_by_slot_[std::size_t(begin + res.winner)])].delivered = true;
      } else {
        ++obs.collisions;
      }
    }
    obs.empties = frame_len - occupied;
    trace.successful_slots += obs.successes;
    trace.frames.push_back(obs);

    // next backlog: transmitted, failed, still energized
    std::vector<int> next;
    next.reserve(backlog_.size());
    for (int m : backlog_) {
      SensorState& s = population_[std::size_t(m)];
      if (s.delivered) continue;
      if (s.energy_units >= eps) next.push_back(m);
    }
    backlog_.swap(next);

    if (config_.protocol == Protocol::fa) break;
    if (k >= f_eps) break;
    if (estimated) {
      if (obs.collisions == 0) break;
      double g_cond = ctx_->g_cond[std::size_t(k) - 1];
      if (std::isnan(g_cond))
        throw Error("run_ir: conditional ccdf undefined at frame " + std::to_string(k));
      estimate = update_backlog(obs, ctx_->betas.by_frame[std::size_t(k) - 1], g_cond);
      if (estimate < kBacklogStopThreshold) break;
    } else {
      if (backlog_.empty()) break;
    }
  }
}

SimReport Simulation::run(long n_irs, long warmup, std::ostream* trace_csv) {
  if (warmup < 0 || n_irs <= warmup) throw Error("run: need n_irs > warmup >= 0");
  const int eps = config_.energy.tx_cost_units;
  const int n_levels = config_.energy.levels_n;

  SimReport report;
  report.warmup = warmup;
  report.seed = seed_;
  report.config_json = config_.to_json_text(-1);
  report.energy_pmf.assign(std::size_t(n_levels) + 1, 0.0);

  if (trace_csv != nullptr)
    *trace_csv << "ir,frames,slots,measures,delivered,successes,true_backlog_1,estimate_1\n";

  double sum_dd = 0.0, sum_dt = 0.0;  // linearized variance accumulators
  std::vector<double> begin_energy(population_.size());
  std::vector<long> d_i, w_i, s_i, l_i;
  const long measured = n_irs - warmup;
  d_i.reserve(std::size_t(measured));
  w_i.reserve(std::size_t(measured));
  s_i.reserve(std::size_t(measured));
  l_i.reserve(std::size_t(measured));

  for (long ir = 0; ir < n_irs; ++ir) {
    const bool measure = ir >= warmup;
    if (measure) {
      for (const SensorState& s : population_) ++report.energy_pmf[std::size_t(s.energy_units)];
    }
    for (std::size_t m = 0; m < population_.size(); ++m)
      begin_energy[m] = population_[m].energy_units;

    IrTrace trace = run_ir();

    // conservation audit: energy change equals eps per attempt
    for (std::size_t m = 0; m < population_.size(); ++m) {
      const SensorState& s = population_[m];
      if (s.energy_units != static_cast<int>(begin_energy[m]) - eps * s.attempts)
        ++invariants_.energy_violations;
      if (s.energy_units < 0 || s.energy_units > n_levels) ++invariants_.energy_violations;
    }

    if (measure) {
      report.delivered_total += trace.delivered_count;
      report.measures_total += trace.measure_count;
      report.successes_total += trace.successful_slots;
      report.slots_total += trace.slots_allocated;
      d_i.push_back(trace.delivered_count);
      w_i.push_back(trace.measure_count);
      s_i.push_back(trace.successful_slots);
      l_i.push_back(trace.slots_allocated);
      if (trace_csv != nullptr) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%ld,%zu,%ld,%ld,%ld,%ld,%ld,%.6g\n", trace.ir_index,
                      trace.frames.size(), trace.slots_allocated, trace.measure_count,
                      trace.delivered_count, trace.successful_slots,
                      trace.true_backlog.empty() ? 0 : trace.true_backlog.front(),
                      trace.estimated_backlog.empty() ? 0.0 : trace.estimated_backlog.front());
        *trace_csv << buf;
      }
    }
    apply_harvest();
  }

  report.irs_measured = measured;
  report.invariants = invariants_;

  if (report.slots_total == 0)
    throw Error("run: zero slots allocated over the measurement window");
  report.p_t = double(report.successes_total) / double(report.slots_total);
  report.p_d = report.measures_total > 0
                   ? double(report.delivered_total) / double(report.measures_total)
                   : 0.0;

  // cluster (per-IR) linearized standard errors of the two ratio estimates
  for (long i = 0; i < measured; ++i) {
    double rd = double(d_i[std::size_t(i)]) - report.p_d * double(w_i[std::size_t(i)]);
    double rt = double(s_i[std::size_t(i)]) - report.p_t * double(l_i[std::size_t(i)]);
    sum_dd += rd * rd;
    sum_dt += rt * rt;
  }
  if (measured > 1) {
    if (report.measures_total > 0)
      report.se_p_d = std::sqrt(sum_dd * double(measured) / double(measured - 1)) /
                      double(report.measures_total);
    report.se_p_t =
        std::sqrt(sum_dt * double(measured) / double(measured - 1)) / double(report.slots_total);
  }

  double total = 0.0;
  for (double c : report.energy_pmf) total += c;
  for (double& c : report.energy_pmf) c /= total;
  return report;
}

SimReport run_simulation(const SystemConfig& config, long n_irs, long warmup,
                         std::uint64_t seed) {
  Simulation sim(config, seed);
  return sim.run(n_irs, warmup);
}

}  // namespace ehmac

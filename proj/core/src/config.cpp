#include "ehmac/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace ehmac {

using nlohmann::json;

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::tdma: return "tdma";
    case Protocol::fa: return "fa";
    case Protocol::dfa: return "dfa";
  }
  return "?";
}

std::string to_string(BacklogMode m) {
  return m == BacklogMode::known ? "known" : "estimated";
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "tdma") return Protocol::tdma;
  if (s == "fa") return Protocol::fa;
  if (s == "dfa") return Protocol::dfa;
  throw ConfigError("protocol: unknown value '" + s + "' (expected tdma|fa|dfa)");
}

BacklogMode backlog_mode_from_string(const std::string& s) {
  if (s == "known") return BacklogMode::known;
  if (s == "estimated") return BacklogMode::estimated;
  throw ConfigError("backlog_mode: unknown value '" + s + "' (expected known|estimated)");
}

HarvestModel HarvestModel::geometric(double mu_h, const EnergyConfig& energy) {
  HarvestModel m;
  m.geometric_ = true;
  m.mu_h_ = mu_h;
  // xi = delta / (delta + mu_h * eps); mean is mu_h * eps / delta units.
  m.xi_ = energy.delta / (energy.delta + mu_h * energy.eps());
  return m;
}

HarvestModel HarvestModel::from_pmf(std::vector<double> pmf) {
  HarvestModel m;
  m.geometric_ = false;
  m.xi_ = 0.0;
  m.table_ = std::move(pmf);
  m.table_prefix_.resize(m.table_.size() + 1);
  m.table_prefix_[0] = 0.0;
  for (std::size_t i = 0; i < m.table_.size(); ++i)
    m.table_prefix_[i + 1] = m.table_prefix_[i] + m.table_[i];
  double total = m.table_prefix_.back();
  m.mu_h_ = 0.0;
  for (std::size_t i = 0; i < m.table_.size(); ++i) m.mu_h_ += double(i) * m.table_[i];
  if (total > 0) m.mu_h_ /= total;  // in delta units; rescaled by callers as needed
  return m;
}

double HarvestModel::pmf(int i) const {
  if (i < 0) return 0.0;
  if (geometric_) {
    double t = std::pow(1.0 - xi_, double(i));
    return t - t * (1.0 - xi_);
  }
  return std::size_t(i) < table_.size() ? table_[i] : 0.0;
}

double HarvestModel::tail(int m) const {
  if (m <= 0) return 1.0;
  if (geometric_) return std::pow(1.0 - xi_, double(m));
  if (std::size_t(m) >= table_prefix_.size()) return 1.0 - table_prefix_.back();
  return 1.0 - table_prefix_[m];
}

double HarvestModel::mean_units() const {
  if (geometric_) return (1.0 - xi_) / xi_;
  double mean = 0.0;
  for (std::size_t i = 0; i < table_.size(); ++i) mean += double(i) * table_[i];
  return mean;
}

int HarvestModel::truncation_index(double tail_mass) const {
  if (!geometric_) return static_cast<int>(table_.size());
  // (1-xi)^T < tail_mass
  double t = std::log(tail_mass) / std::log1p(-xi_);
  return static_cast<int>(std::ceil(t)) + 1;
}

std::string FadingModel::name() const {
  return kind == Kind::exponential ? "exponential" : "deterministic";
}

FadingModel FadingModel::from_name(const std::string& s) {
  FadingModel f;
  if (s == "exponential") {
    f.kind = Kind::exponential;
  } else if (s == "deterministic") {
    f.kind = Kind::deterministic;
  } else {
    throw ConfigError("fading.kind: unknown value '" + s +
                      "' (expected exponential|deterministic)");
  }
  return f;
}

std::vector<double> InitialEnergy::materialize(int levels_n) const {
  std::vector<double> p(std::size_t(levels_n) + 1, 0.0);
  switch (preset) {
    case Preset::empty:
      p[0] = 1.0;
      break;
    case Preset::full:
      p.back() = 1.0;
      break;
    case Preset::uniform:
      std::fill(p.begin(), p.end(), 1.0 / double(levels_n + 1));
      break;
    case Preset::custom: {
      if (pmf.size() != p.size())
        throw ConfigError("initial_energy.pmf: expected " + std::to_string(levels_n + 1) +
                          " entries, got " + std::to_string(pmf.size()));
      p = pmf;
      break;
    }
  }
  return p;
}

double SystemConfig::gamma_th() const { return std::pow(10.0, gamma_th_db / 10.0); }

namespace {

json energy_to_json(const EnergyConfig& e) {
  return json{{"delta", e.delta}, {"levels_n", e.levels_n}, {"tx_cost_units", e.tx_cost_units}};
}

json harvest_to_json(const HarvestModel& h) {
  if (h.is_geometric()) return json{{"kind", "geometric"}, {"mu_h", h.mu_h()}};
  return json{{"kind", "table"}, {"pmf", h.table()}};
}

json initial_to_json(const InitialEnergy& i) {
  switch (i.preset) {
    case InitialEnergy::Preset::empty: return json("empty");
    case InitialEnergy::Preset::full: return json("full");
    case InitialEnergy::Preset::uniform: return json("uniform");
    case InitialEnergy::Preset::custom: return json{{"pmf", i.pmf}};
  }
  return json("full");
}

InitialEnergy initial_from_json(const json& j) {
  InitialEnergy out;
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "empty")
      out.preset = InitialEnergy::Preset::empty;
    else if (s == "full")
      out.preset = InitialEnergy::Preset::full;
    else if (s == "uniform")
      out.preset = InitialEnergy::Preset::uniform;
    else
      throw ConfigError("initial_energy: unknown preset '" + s + "'");
  } else if (j.is_object() && j.contains("pmf")) {
    out.preset = InitialEnergy::Preset::custom;
    out.pmf = j.at("pmf").get<std::vector<double>>();
  } else {
    throw ConfigError("initial_energy: expected preset string or {\"pmf\": [...]}");
  }
  return out;
}

}  // namespace

std::string SystemConfig::to_json_text(int indent) const {
  json j;
  j["sensor_count"] = sensor_count;
  j["alpha"] = alpha;
  j["gamma_th_db"] = gamma_th_db;
  j["rho"] = rho;
  j["protocol"] = to_string(protocol);
  j["backlog_mode"] = to_string(backlog_mode);
  j["energy"] = energy_to_json(energy);
  j["harvest"] = harvest_to_json(harvest);
  j["fading"] = json{{"kind", fading.name()}};
  j["initial_energy"] = initial_to_json(initial_energy);
  j["tolerances"] = json{
      {"poisson_tail_mass", tolerances.poisson_tail_mass},
      {"mc_samples", json{{"capture", tolerances.capture_samples},
                          {"particles", tolerances.particle_count}}},
      {"stationary_residual", tolerances.stationary_residual},
      {"rng_seed", tolerances.rng_seed},
  };
  return j.dump(indent);
}

SystemConfig SystemConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  SystemConfig c;
  try {
    c.sensor_count = j.at("sensor_count").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.gamma_th_db = j.at("gamma_th_db").get<double>();
    c.rho = j.at("rho").get<double>();
    c.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    if (j.contains("backlog_mode"))
      c.backlog_mode = backlog_mode_from_string(j.at("backlog_mode").get<std::string>());

    const json& je = j.at("energy");
    c.energy.delta = je.at("delta").get<double>();
    c.energy.levels_n = je.at("levels_n").get<int>();
    c.energy.tx_cost_units = je.at("tx_cost_units").get<int>();

    const json& jh = j.at("harvest");
    std::string hkind = jh.at("kind").get<std::string>();
    if (hkind == "geometric") {
      c.harvest = HarvestModel::geometric(jh.at("mu_h").get<double>(), c.energy);
    } else if (hkind == "table") {
      c.harvest = HarvestModel::from_pmf(jh.at("pmf").get<std::vector<double>>());
    } else {
      throw ConfigError("harvest.kind: unknown value '" + hkind + "'");
    }

    if (j.contains("fading"))
      c.fading = FadingModel::from_name(j.at("fading").at("kind").get<std::string>());
    if (j.contains("initial_energy")) c.initial_energy = initial_from_json(j.at("initial_energy"));

    if (j.contains("tolerances")) {
      const json& jt = j.at("tolerances");
      if (jt.contains("poisson_tail_mass"))
        c.tolerances.poisson_tail_mass = jt.at("poisson_tail_mass").get<double>();
      if (jt.contains("mc_samples")) {
        const json& jm = jt.at("mc_samples");
        if (jm.contains("capture")) c.tolerances.capture_samples = jm.at("capture").get<long>();
        if (jm.contains("particles")) c.tolerances.particle_count = jm.at("particles").get<long>();
      }
      if (jt.contains("stationary_residual"))
        c.tolerances.stationary_residual = jt.at("stationary_residual").get<double>();
      if (jt.contains("rng_seed")) c.tolerances.rng_seed = jt.at("rng_seed").get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

SystemConfig validate(SystemConfig config) {
  const EnergyConfig& e = config.energy;
  if (!(e.delta > 0)) throw ConfigError("energy.delta: must be > 0");
  if (e.levels_n < 1) throw ConfigError("energy.levels_n: N must be >= 1");
  if (e.tx_cost_units < 1) throw ConfigError("energy.tx_cost_units: eps_delta must be >= 1");
  if (e.levels_n % e.tx_cost_units != 0)
    throw ConfigError("energy.levels_n: N (" + std::to_string(e.levels_n) +
                      ") is not an integer multiple of tx_cost_units (" +
                      std::to_string(e.tx_cost_units) + ")");
  if (e.capacity() < 1) throw ConfigError("energy: capacity F_eps must be >= 1");

  if (config.sensor_count < 1) throw ConfigError("sensor_count: M must be >= 1");
  if (!(config.alpha > 0.0) || config.alpha > 1.0)
    throw ConfigError("alpha: must lie in (0, 1]");
  if (!(config.gamma_th() > 1.0))
    throw ConfigError("gamma_th_db: threshold must exceed 0 dB (linear value > 1)");
  if (!(config.rho > 0.0)) throw ConfigError("rho: must be > 0");

  const HarvestModel& h = config.harvest;
  if (h.is_geometric()) {
    if (!(h.mu_h() > 0.0)) throw ConfigError("harvest.mu_h: must be > 0");
  } else {
    double total = 0.0;
    for (double q : h.table()) {
      if (q < 0.0) throw ConfigError("harvest.pmf: entries must be >= 0");
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ConfigError("harvest.pmf: entries must sum to 1 within 1e-12");
  }
  if (!(h.pmf(0) > 0.0)) throw ConfigError("harvest.pmf: q_0 must be > 0");
  if (!(h.pmf(1) > 0.0)) throw ConfigError("harvest.pmf: q_1 must be > 0");

  const NumericTolerances& t = config.tolerances;
  if (!(t.poisson_tail_mass > 0.0) || t.poisson_tail_mass > 1e-6)
    throw ConfigError("tolerances.poisson_tail_mass: must lie in (0, 1e-6]");
  if (t.capture_samples < 1) throw ConfigError("tolerances.mc_samples.capture: must be >= 1");
  if (t.particle_count < 1) throw ConfigError("tolerances.mc_samples.particles: must be >= 1");
  if (!(t.stationary_residual > 0.0))
    throw ConfigError("tolerances.stationary_residual: must be > 0");

  if (config.initial_energy.preset == InitialEnergy::Preset::custom) {
    const std::vector<double>& p = config.initial_energy.pmf;
    if (p.size() != std::size_t(e.levels_n) + 1)
      throw ConfigError("initial_energy.pmf: expected " + std::to_string(e.levels_n + 1) +
                        " entries");
    double total = 0.0;
    for (double v : p) {
      if (v < 0.0) throw ConfigError("initial_energy.pmf: entries must be >= 0");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ConfigError("initial_energy.pmf: entries must sum to 1 within 1e-12");
  }

  return config;
}

}  // namespace ehmac

#include "ehmac/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace ehmac {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTableSeedStream = 0x7AB1E5EEDULL;
constexpr std::uint64_t kSimSeedStream = 0x51D5EED00ULL;

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 0) threads = worker_pool_size();
  threads = static_cast<int>(std::min<std::size_t>(std::size_t(threads), n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

template <typename T>
class KeyedCache {
 public:
  std::shared_ptr<const T> get(const std::string& key, const std::function<T()>& make) {
    std::promise<std::shared_ptr<const T>> promise;
    std::shared_future<std::shared_ptr<const T>> future;
    bool owner = false;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = map_.find(key);
      if (it == map_.end()) {
        future = promise.get_future().share();
        map_.emplace(key, future);
        owner = true;
      } else {
        future = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(std::make_shared<const T>(make()));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return future.get();
  }

 private:
  std::mutex mu_;
  std::unordered_map<std::string, std::shared_future<std::shared_ptr<const T>>> map_;
};

std::string harvest_key(const HarvestModel& h) {
  char buf[64];
  if (h.is_geometric()) {
    std::snprintf(buf, sizeof buf, "geo|xi=%.17g", h.xi());
    return buf;
  }
  std::string k = "table";
  for (double q : h.table()) {
    std::snprintf(buf, sizeof buf, "|%.17g", q);
    k += buf;
  }
  return k;
}

// Shared analysis state for one sweep run: capture tables and solved chains
// are keyed by the inputs that shape them, computed once, and seeded
// independently of thread scheduling.
class AnalysisEngine {
 public:
  explicit AnalysisEngine(std::uint64_t seed) : table_seed_(derive_seed(seed, kTableSeedStream)) {}

  std::shared_ptr<const CaptureTable> table(const SystemConfig& cfg) {
    SystemConfig keyed = cfg;
    keyed.tolerances.rng_seed = table_seed_;
    std::string key;
    if (cfg.protocol == Protocol::tdma) {
      key = "tdma";
    } else {
      char buf[224];
      std::snprintf(buf, sizeof buf, "%s|g=%.17g|rho=%.17g|F=%d|tail=%.6g|n=%ld|p=%ld",
                    cfg.fading.name().c_str(), cfg.gamma_th(), cfg.rho,
                    cfg.protocol == Protocol::dfa ? cfg.energy.capacity() : 1,
                    cfg.tolerances.poisson_tail_mass, cfg.tolerances.capture_samples,
                    cfg.tolerances.particle_count);
      key = buf;
    }
    return tables_.get(key, [keyed] { return build_capture_table(keyed); });
  }

  std::shared_ptr<const EnergyDistribution> steady_energy(const SystemConfig& cfg,
                                                          const CaptureTable& table) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "N=%d|eps=%d|alpha=%.17g|res=%.6g|", cfg.energy.levels_n,
                  cfg.energy.tx_cost_units, cfg.alpha, cfg.tolerances.stationary_residual);
    std::string key = buf;
    key += harvest_key(cfg.harvest);
    if (cfg.protocol == Protocol::dfa) {
      // energy flow depends on the per-frame capture probabilities
      key += "|dfa";
      for (double p : table.p_marg) {
        std::snprintf(buf, sizeof buf, "|%.17g", p);
        key += buf;
      }
    } else {
      key += "|single-frame";  // TDMA and FA share the same energy chain
    }
    SystemConfig cfg_copy = cfg;
    const CaptureTable table_copy = table;
    return chains_.get(key, [cfg_copy, table_copy] {
      TransitionMatrix chain = build_transition_matrix(cfg_copy, table_copy);
      StationaryOptions opts;
      opts.residual_target = cfg_copy.tolerances.stationary_residual;
      std::vector<double> phi = stationary_distribution(chain, opts);
      return energy_pmf(begin_ir_distribution(phi, chain), chain.index);
    });
  }

 private:
  std::uint64_t table_seed_;
  KeyedCache<CaptureTable> tables_;
  KeyedCache<EnergyDistribution> chains_;
};

double harvest_rate(const SystemConfig& cfg) {
  if (cfg.harvest.is_geometric()) return cfg.harvest.mu_h();
  return cfg.harvest.mean_units() / double(cfg.energy.tx_cost_units);
}

ResultRow make_row(const SystemConfig& cfg, std::string source, double p_d, double p_t,
                   double se_p_d, double se_p_t, std::uint64_t seed) {
  ResultRow r;
  r.protocol = cfg.protocol;
  r.rho = cfg.rho;
  r.mu_h = harvest_rate(cfg);
  r.gamma_th_db = cfg.gamma_th_db;
  r.alpha = cfg.alpha;
  r.sensor_count = cfg.sensor_count;
  r.f_eps = cfg.energy.capacity();
  r.source = std::move(source);
  r.p_d = p_d;
  r.p_t = p_t;
  r.se_p_d = se_p_d;
  r.se_p_t = se_p_t;
  r.seed = seed;
  return r;
}

}  // namespace

SweepSpec SweepSpec::from_json_text(const std::string& text) {
  SweepSpec spec;
  spec.base = validate(SystemConfig::from_json_text(text));

  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.contains("sweep")) return spec;
  const json& js = j.at("sweep");
  try {
    if (js.contains("rho")) spec.rho_axis = js.at("rho").get<std::vector<double>>();
    if (js.contains("mu_h")) spec.mu_h_axis = js.at("mu_h").get<std::vector<double>>();
    if (js.contains("gamma_th_db"))
      spec.gamma_db_axis = js.at("gamma_th_db").get<std::vector<double>>();
    if (js.contains("protocol")) {
      for (const auto& s : js.at("protocol").get<std::vector<std::string>>())
        spec.protocol_axis.push_back(protocol_from_string(s));
    }
    if (js.contains("backlog_mode")) {
      for (const auto& s : js.at("backlog_mode").get<std::vector<std::string>>())
        spec.mode_axis.push_back(backlog_mode_from_string(s));
    }
    if (js.contains("replicas")) spec.replicas = js.at("replicas").get<int>();
    if (js.contains("n_irs")) spec.n_irs = js.at("n_irs").get<long>();
    if (js.contains("warmup")) spec.warmup = js.at("warmup").get<long>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config.sweep: ") + e.what());
  }
  if (spec.replicas < 1) throw ConfigError("sweep.replicas: must be >= 1");
  if (spec.warmup < 0 || spec.n_irs <= spec.warmup)
    throw ConfigError("sweep: need n_irs > warmup >= 0");
  return spec;
}

std::vector<SystemConfig> SweepSpec::expand(bool include_modes) const {
  std::vector<double> rhos = rho_axis.empty() ? std::vector<double>{base.rho} : rho_axis;
  std::vector<double> gammas =
      gamma_db_axis.empty() ? std::vector<double>{base.gamma_th_db} : gamma_db_axis;
  std::vector<Protocol> protocols =
      protocol_axis.empty() ? std::vector<Protocol>{base.protocol} : protocol_axis;
  std::vector<BacklogMode> modes =
      include_modes
          ? (mode_axis.empty() ? std::vector<BacklogMode>{base.backlog_mode} : mode_axis)
          : std::vector<BacklogMode>{base.backlog_mode};

  if (!mu_h_axis.empty() && !base.harvest.is_geometric())
    throw ConfigError("sweep.mu_h: harvesting-rate axis requires the geometric harvest model");

  std::vector<SystemConfig> points;
  for (Protocol p : protocols) {
    for (BacklogMode mode : modes) {
      std::vector<double> mus =
          mu_h_axis.empty() ? std::vector<double>{harvest_rate(base)} : mu_h_axis;
      for (double mu : mus) {
        for (double gamma : gammas) {
          for (double rho : rhos) {
            SystemConfig cfg = base;
            cfg.protocol = p;
            cfg.backlog_mode = mode;
            cfg.gamma_th_db = gamma;
            cfg.rho = rho;
            if (!mu_h_axis.empty()) cfg.harvest = HarvestModel::geometric(mu, cfg.energy);
            points.push_back(validate(cfg));
          }
        }
      }
    }
  }
  return points;
}

std::string ResultRow::key() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "protocol=%s rho=%.10g mu_H=%.10g gamma_th_db=%.10g",
                to_string(protocol).c_str(), rho, mu_h, gamma_th_db);
  return buf;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = kCsvHeader;
  out += '\n';
  char buf[352];
  for (const ResultRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%d,%d,%s,%.12g,%.12g,%.6g,%.6g,%llu\n",
                  to_string(r.protocol).c_str(), r.rho, r.mu_h, r.gamma_th_db, r.alpha,
                  r.sensor_count, r.f_eps, r.source.c_str(), r.p_d, r.p_t, r.se_p_d, r.se_p_t,
                  static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("write_csv: cannot open " + path.string());
  os << to_csv(rows);
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error("parse_csv: empty input");
  if (line != kCsvHeader) throw Error("parse_csv: unexpected header: " + line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 13) throw Error("parse_csv: malformed row: " + line);
    ResultRow r;
    r.protocol = protocol_from_string(fields[0]);
    r.rho = std::stod(fields[1]);
    r.mu_h = std::stod(fields[2]);
    r.gamma_th_db = std::stod(fields[3]);
    r.alpha = std::stod(fields[4]);
    r.sensor_count = std::stoi(fields[5]);
    r.f_eps = std::stoi(fields[6]);
    r.source = fields[7];
    r.p_d = std::stod(fields[8]);
    r.p_t = std::stod(fields[9]);
    r.se_p_d = std::stod(fields[10]);
    r.se_p_t = std::stod(fields[11]);
    r.seed = std::stoull(fields[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("read_csv: cannot open " + path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_csv(buffer.str());
}

int worker_pool_size() {
  if (const char* env = std::getenv("EHMAC_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<ResultRow> run_analysis_sweep(const SweepSpec& spec, std::uint64_t seed,
                                          int threads) {
  std::vector<SystemConfig> points = spec.expand(false);
  std::vector<ResultRow> rows(points.size());
  AnalysisEngine engine(seed);
  parallel_for(points.size(), threads, [&](std::size_t i) {
    const SystemConfig& cfg = points[i];
    std::shared_ptr<const CaptureTable> table = engine.table(cfg);
    std::shared_ptr<const EnergyDistribution> g = engine.steady_energy(cfg, *table);
    MetricsReport r = evaluate_metrics(cfg, *table, *g);
    rows[i] = make_row(cfg, "analysis", r.p_d, r.p_t, 0.0, 0.0, seed);
  });
  return rows;
}

std::vector<ResultRow> run_simulation_sweep(const SweepSpec& spec, std::uint64_t seed,
                                            int threads) {
  std::vector<SystemConfig> points = spec.expand(true);
  const std::size_t replicas = std::size_t(spec.replicas);
  std::vector<ResultRow> rows(points.size() * replicas);
  AnalysisEngine engine(seed);
  parallel_for(rows.size(), threads, [&](std::size_t idx) {
    const SystemConfig& cfg = points[idx / replicas];
    std::uint64_t sim_seed = derive_seed(seed, kSimSeedStream + idx);
    std::unique_ptr<Simulation> sim;
    if (cfg.backlog_mode == BacklogMode::estimated && cfg.protocol != Protocol::tdma) {
      std::shared_ptr<const CaptureTable> table = engine.table(cfg);
      std::shared_ptr<const EnergyDistribution> g = engine.steady_energy(cfg, *table);
      sim = std::make_unique<Simulation>(cfg, sim_seed,
                                         make_estimator_context(cfg, *table, *g));
    } else {
      sim = std::make_unique<Simulation>(cfg, sim_seed);
    }
    SimReport report = sim->run(spec.n_irs, spec.warmup);
    std::string source =
        cfg.backlog_mode == BacklogMode::known ? "sim-known" : "sim-estimated";
    rows[idx] = make_row(cfg, source, report.p_d, report.p_t, report.se_p_d, report.se_p_t,
                         sim_seed);
  });
  return rows;
}

std::vector<ResultRow> run_tradeoff_sweep(const SweepSpec& spec, std::uint64_t seed,
                                          double bin_width, int threads) {
  if (spec.rho_axis.empty()) throw Error("run_tradeoff_sweep: empty rho axis");
  SweepSpec grid = spec;
  std::vector<ResultRow> analysis = run_analysis_sweep(grid, seed, threads);

  // group rows by (protocol, mu_h, gamma); envelope each group over rho
  std::vector<ResultRow> out;
  std::vector<std::string> group_order;
  std::unordered_map<std::string, std::vector<ResultRow>> groups;
  for (const ResultRow& r : analysis) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s|%.10g|%.10g", to_string(r.protocol).c_str(), r.mu_h,
                  r.gamma_th_db);
    std::string gkey = buf;
    if (groups.find(gkey) == groups.end()) group_order.push_back(gkey);
    groups[gkey].push_back(r);
  }
  for (const std::string& gkey : group_order) {
    std::vector<ResultRow>& members = groups[gkey];
    if (members.front().protocol == Protocol::tdma) {
      ResultRow row = members.front();
      row.source = "tradeoff";
      out.push_back(row);
      continue;
    }
    std::vector<TradeoffPoint> achieved;
    achieved.reserve(members.size());
    for (const ResultRow& r : members)
      achieved.push_back({r.protocol, r.rho, r.p_d, r.p_t});
    for (const TradeoffPoint& p : tradeoff_envelope(std::move(achieved), bin_width)) {
      ResultRow row = members.front();
      row.rho = p.rho;
      row.p_d = p.p_d;
      row.p_t = p.p_t;
      row.source = "tradeoff";
      out.push_back(row);
    }
  }
  return out;
}

CompareReport compare_results(const std::vector<ResultRow>& analysis,
                              const std::vector<ResultRow>& sim, double tol_p_d,
                              double tol_p_t) {
  std::unordered_map<std::string, const ResultRow*> by_key;
  for (const ResultRow& r : analysis) by_key.emplace(r.key(), &r);

  CompareReport report;
  double sum_d = 0.0, sum_t = 0.0;
  for (const ResultRow& s : sim) {
    auto it = by_key.find(s.key());
    if (it == by_key.end())
      throw Error("compare: no analysis row for key (" + s.key() + ")");
    const ResultRow& a = *it->second;
    ComparePoint p;
    p.key = s.key() + " source=" + s.source;
    p.gap_p_d = std::abs(s.p_d - a.p_d);
    p.gap_p_t = std::abs(s.p_t - a.p_t);
    p.ok = p.gap_p_d <= tol_p_d && p.gap_p_t <= tol_p_t;
    report.max_gap_p_d = std::max(report.max_gap_p_d, p.gap_p_d);
    report.max_gap_p_t = std::max(report.max_gap_p_t, p.gap_p_t);
    sum_d += p.gap_p_d;
    sum_t += p.gap_p_t;
    report.pass = report.pass && p.ok;
    report.points.push_back(std::move(p));
  }
  if (!report.points.empty()) {
    report.mean_gap_p_d = sum_d / double(report.points.size());
    report.mean_gap_p_t = sum_t / double(report.points.size());
  }
  return report;
}

std::string CompareReport::to_text() const {
  std::string out;
  char buf[288];
  for (const ComparePoint& p : points) {
    std::snprintf(buf, sizeof buf, "%-96s |dp_d|=%.5f |dp_t|=%.5f %s\n", p.key.c_str(),
                  p.gap_p_d, p.gap_p_t, p.ok ? "[ok]" : "[FAIL]");
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "max |dp_d| = %.5f (mean %.5f); max |dp_t| = %.5f (mean %.5f); %zu points: %s\n",
                max_gap_p_d, mean_gap_p_d, max_gap_p_t, mean_gap_p_t, points.size(),
                pass ? "PASS" : "FAIL");
  out += buf;
  return out;
}

std::uint64_t config_hash(const SystemConfig& config) {
  std::string text = config.to_json_text(-1);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_manifest(const std::filesystem::path& out_csv, const std::string& command,
                    const SweepSpec& spec, std::uint64_t seed, std::size_t rows) {
  json j;
  j["command"] = command;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(config_hash(spec.base)));
  j["config_hash"] = hash;
  j["seed"] = seed;
  j["rows"] = rows;
  j["output"] = out_csv.filename().string();
  j["csv_schema"] = kCsvHeader;
  json axes;
  axes["rho"] = spec.rho_axis;
  axes["mu_h"] = spec.mu_h_axis;
  axes["gamma_th_db"] = spec.gamma_db_axis;
  std::vector<std::string> protos, modes;
  for (Protocol p : spec.protocol_axis) protos.push_back(to_string(p));
  for (BacklogMode m : spec.mode_axis) modes.push_back(to_string(m));
  axes["protocol"] = protos;
  axes["backlog_mode"] = modes;
  j["axes"] = axes;
  j["replicas"] = spec.replicas;
  j["n_irs"] = spec.n_irs;
  j["warmup"] = spec.warmup;

  std::filesystem::path path = out_csv;
  path += ".manifest.json";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("write_manifest: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace ehmac

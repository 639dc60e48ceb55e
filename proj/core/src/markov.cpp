#include "ehmac/markov.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <Eigen/Dense>

#include "json.hpp"

namespace ehmac {

StateIndex::StateIndex(int levels_n, int tx_cost_units, int active_frames)
    : levels_n_(levels_n), tx_cost_(tx_cost_units), frames_(active_frames) {
  size_ = levels_n_ + 1 + frames_ * active_levels();
}

std::pair<int, int> StateIndex::active_state(int state) const {
  int rel = state - (levels_n_ + 1);
  int k = rel / active_levels() + 1;
  int j = rel % active_levels() + tx_cost_;
  return {k, j};
}

std::string StateIndex::label(int state) const {
  char buf[32];
  if (is_idle(state)) {
    std::snprintf(buf, sizeof buf, "I_%d", idle_level(state));
  } else {
    auto [k, j] = active_state(state);
    std::snprintf(buf, sizeof buf, "A_%d^%d", j, k);
  }
  return buf;
}

double TransitionMatrix::row_sum(int row) const {
  double s = 0.0;
  for (int nz = row_offsets[row]; nz < row_offsets[row + 1]; ++nz) s += vals[nz];
  return s;
}

void TransitionMatrix::apply(const std::vector<double>& x, std::vector<double>& y) const {
  y.assign(x.size(), 0.0);
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (int nz = row_offsets[i]; nz < row_offsets[i + 1]; ++nz) y[cols[nz]] += xi * vals[nz];
  }
}

void TransitionMatrix::write_csv(std::ostream& os) const {
  os << "from_index,from_label,to_index,to_label,probability\n";
  for (int i = 0; i < size(); ++i) {
    for (int nz = row_offsets[i]; nz < row_offsets[i + 1]; ++nz) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%d,%s,%d,%s,%.17g\n", i, index.label(i).c_str(),
                    cols[nz], index.label(cols[nz]).c_str(), vals[nz]);
      os << buf;
    }
  }
}

std::string TransitionMatrix::to_json_text(int indent) const {
  nlohmann::json j;
  j["protocol"] = to_string(protocol);
  j["size"] = size();
  std::vector<std::string> labels(static_cast<std::size_t>(size()));
  for (int i = 0; i < size(); ++i) labels[i] = index.label(i);
  j["labels"] = labels;
  j["row_offsets"] = row_offsets;
  j["cols"] = cols;
  j["vals"] = vals;
  return j.dump(indent);
}

double EnergyDistribution::ccdf_units(int j) const {
  if (j <= 0) return 1.0;
  if (j > levels()) return 0.0;
  double s = 0.0;
  for (std::size_t i = std::size_t(j); i < pmf.size(); ++i) s += pmf[i];
  return s;
}

std::vector<double> EnergyDistribution::ccdf() const {
  std::vector<double> g(pmf.size());
  double acc = 0.0;
  for (std::size_t i = pmf.size(); i-- > 0;) {
    acc += pmf[i];
    g[i] = acc;
  }
  if (!g.empty()) g[0] = 1.0;
  return g;
}

void EnergyDistribution::write_csv(std::ostream& os) const {
  os << "level,pmf,ccdf\n";
  std::vector<double> g = ccdf();
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, pmf[i], g[i]);
    os << buf;
  }
}

namespace {

class RowBuilder {
 public:
  explicit RowBuilder(int size) {
    offsets_.reserve(std::size_t(size) + 1);
    offsets_.push_back(0);
  }
  void entry(int col, double p) {
    if (p == 0.0) return;
    cols_.push_back(col);
    vals_.push_back(p);
  }
  void finish_row() { offsets_.push_back(static_cast<int>(cols_.size())); }
  void move_into(TransitionMatrix& m) {
    m.row_offsets = std::move(offsets_);
    m.cols = std::move(cols_);
    m.vals = std::move(vals_);
  }

 private:
  std::vector<int> offsets_;
  std::vector<int> cols_;
  std::vector<double> vals_;
};

}  // namespace

TransitionMatrix build_transition_matrix(const SystemConfig& config,
                                         const CaptureTable& table) {
  const int n_levels = config.energy.levels_n;
  const int eps = config.energy.tx_cost_units;
  const int f_eps = config.energy.capacity();
  const bool dfa = config.protocol == Protocol::dfa;
  const int frames = dfa ? f_eps : 1;

  if (dfa && table.frames() != f_eps)
    throw Error("build_transition_matrix: capture table has " +
                std::to_string(table.frames()) + " frames, chain needs " +
                std::to_string(f_eps));

  TransitionMatrix m{StateIndex(n_levels, eps, frames), config.protocol, {}, {}, {}};
  const StateIndex& ix = m.index;
  RowBuilder rows(ix.size());

  // Harvest pmf over {0..N-1} plus exact aggregated tails; partial sums
  // telescope so every idle row sums to one bitwise.
  const HarvestModel& h = config.harvest;
  std::vector<double> q(std::size_t(n_levels), 0.0);
  std::vector<double> tail(std::size_t(n_levels) + 1, 0.0);
  for (int i = 0; i <= n_levels; ++i) tail[i] = h.tail(i);
  for (int i = 0; i < n_levels; ++i) q[i] = tail[i] - tail[i + 1];

  const double alpha = config.alpha;

  // Idle rows: the IR boundary adds the harvested energy. Post-harvest level
  // l below eps stays idle; otherwise the sensor becomes active in frame 1.
  // All saturating mass aggregates on level N.
  for (int j = 0; j <= n_levels; ++j) {
    for (int l = j; l < n_levels; ++l) {
      int target = l < eps ? ix.idle(l) : ix.active(1, l);
      rows.entry(target, q[l - j]);
    }
    rows.entry(ix.active(1, n_levels), tail[n_levels - j]);
    rows.finish_row();
  }

  // Active rows. Frame 1 settles the measure draw: with probability
  // 1 - alpha the sensor goes idle untouched. A transmission always costs
  // eps; under TDMA/FA the outcome does not alter the energy flow, under DFA
  // a collision with energy left moves the sensor to the next frame.
  for (int k = 1; k <= frames; ++k) {
    for (int j = eps; j <= n_levels; ++j) {
      double transmit_mass = 1.0;
      if (k == 1 && alpha < 1.0) {
        rows.entry(ix.idle(j), 1.0 - alpha);
        transmit_mass = alpha;
      }
      if (transmit_mass > 0.0) {
        if (!dfa) {
          rows.entry(ix.idle(j - eps), transmit_mass);
        } else {
          const double p_c = table.p_marg[std::size_t(k) - 1];
          if (j >= 2 * eps && k < f_eps) {
            rows.entry(ix.idle(j - eps), transmit_mass * p_c);
            rows.entry(ix.active(k + 1, j - eps), transmit_mass * (1.0 - p_c));
          } else {
            // shortage after the attempt, or no frame left to retry in
            rows.entry(ix.idle(j - eps), transmit_mass);
          }
        }
      }
      rows.finish_row();
    }
  }

  rows.move_into(m);
  return m;
}

double stationary_residual(const TransitionMatrix& P, const std::vector<double>& phi) {
  std::vector<double> next;
  P.apply(phi, next);
  double r = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) r = std::max(r, std::abs(next[i] - phi[i]));
  return r;
}

namespace {

std::vector<double> stationary_dense(const TransitionMatrix& P) {
  const int n = P.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int nz = P.row_offsets[i]; nz < P.row_offsets[i + 1]; ++nz)
      a(P.cols[nz], i) += P.vals[nz];  // transpose of P
  a -= Eigen::MatrixXd::Identity(n, n);
  a.row(0).setOnes();  // replace one balance equation with normalization
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(0) = 1.0;
  Eigen::VectorXd phi = a.partialPivLu().solve(b);

  std::vector<double> out(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::max(phi(i), 0.0);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> stationary_power(const TransitionMatrix& P, double target,
                                     long max_iterations,
                                     const std::optional<std::vector<double>>& initial) {
  const int n = P.size();
  std::vector<double> x;
  if (initial.has_value()) {
    x = *initial;
    if (static_cast<int>(x.size()) != n)
      throw Error("stationary_distribution: initial vector size mismatch");
  } else {
    x.assign(std::size_t(n), 1.0 / double(n));
  }
  std::vector<double> next(x.size());

  double residual = 1.0;
  for (long it = 0; it < max_iterations; ++it) {
    P.apply(x, next);
    residual = 0.0;
    for (int i = 0; i < n; ++i) residual = std::max(residual, std::abs(next[i] - x[i]));
    x.swap(next);
    if (residual <= target) {
      double total = std::accumulate(x.begin(), x.end(), 0.0);
      for (double& v : x) v /= total;
      return x;
    }
    if ((it & 0x3FF) == 0x3FF) {
      double total = std::accumulate(x.begin(), x.end(), 0.0);
      for (double& v : x) v /= total;
    }
  }
  throw SolverError("stationary_distribution: power iteration did not reach residual " +
                        std::to_string(target) + " within " +
                        std::to_string(max_iterations) + " iterations",
                    residual);
}

}  // namespace

std::vector<double> stationary_distribution(const TransitionMatrix& P,
                                            const StationaryOptions& options) {
  StationaryOptions::Method method = options.method;
  if (method == StationaryOptions::Method::automatic) {
    method = P.size() <= options.dense_size_threshold ? StationaryOptions::Method::dense
                                                      : StationaryOptions::Method::power;
  }
  if (method == StationaryOptions::Method::dense) {
    std::vector<double> phi = stationary_dense(P);
    double r = stationary_residual(P, phi);
    if (r > 1e-12)
      throw SolverError("stationary_distribution: dense solve residual " +
                            std::to_string(r) + " above 1e-12",
                        r);
    return phi;
  }
  double target = options.residual_target > 0.0 ? options.residual_target : 1e-10;
  return stationary_power(P, target, options.max_iterations, options.initial);
}

std::vector<double> begin_ir_distribution(const std::vector<double>& phi,
                                          const TransitionMatrix& P) {
  const StateIndex& ix = P.index;
  std::vector<double> idle(phi.size(), 0.0);
  double idle_mass = 0.0;
  for (int j = 0; j <= ix.levels(); ++j) idle_mass += phi[std::size_t(ix.idle(j))];
  if (!(idle_mass > 0.0))
    throw Error("begin_ir_distribution: stationary idle mass is zero");
  for (int j = 0; j <= ix.levels(); ++j)
    idle[std::size_t(ix.idle(j))] = phi[std::size_t(ix.idle(j))] / idle_mass;

  std::vector<double> plus;
  P.apply(idle, plus);

  // Only shortage idle states and frame-1 active states are reachable
  // across the boundary.
  for (int j = ix.tx_cost(); j <= ix.levels(); ++j)
    assert(plus[std::size_t(ix.idle(j))] < 1e-12);
  for (int k = 2; k <= ix.frames(); ++k)
    for (int j = ix.tx_cost(); j <= ix.levels(); ++j)
      assert(plus[std::size_t(ix.active(k, j))] < 1e-12);

  return plus;
}

EnergyDistribution energy_pmf(const std::vector<double>& phi_plus, const StateIndex& index) {
  EnergyDistribution d;
  d.pmf.assign(std::size_t(index.levels()) + 1, 0.0);
  for (int j = 0; j < index.tx_cost(); ++j) d.pmf[std::size_t(j)] = phi_plus[std::size_t(index.idle(j))];
  for (int j = index.tx_cost(); j <= index.levels(); ++j)
    d.pmf[std::size_t(j)] = phi_plus[std::size_t(index.active(1, j))];
  return d;
}

namespace {

// Applies idle rows only; active states keep their mass.
void apply_boundary(const TransitionMatrix& P, const std::vector<double>& x,
                    std::vector<double>& y) {
  const StateIndex& ix = P.index;
  y.assign(x.size(), 0.0);
  for (int s = 0; s < P.size(); ++s) {
    const double xs = x[std::size_t(s)];
    if (xs == 0.0) continue;
    if (!ix.is_idle(s)) {
      y[std::size_t(s)] += xs;
      continue;
    }
    for (int nz = P.row_offsets[s]; nz < P.row_offsets[s + 1]; ++nz)
      y[std::size_t(P.cols[nz])] += xs * P.vals[nz];
  }
}

// Applies active rows only; idle states absorb until the next boundary.
void apply_frames(const TransitionMatrix& P, std::vector<double>& x,
                  std::vector<double>& scratch) {
  const StateIndex& ix = P.index;
  for (int step = 0; step < ix.frames(); ++step) {
    scratch.assign(x.size(), 0.0);
    double active_mass = 0.0;
    for (int s = 0; s < P.size(); ++s) {
      const double xs = x[std::size_t(s)];
      if (xs == 0.0) continue;
      if (ix.is_idle(s)) {
        scratch[std::size_t(s)] += xs;
        continue;
      }
      active_mass += xs;
      for (int nz = P.row_offsets[s]; nz < P.row_offsets[s + 1]; ++nz)
        scratch[std::size_t(P.cols[nz])] += xs * P.vals[nz];
    }
    x.swap(scratch);
    if (active_mass == 0.0) break;
  }
}

}  // namespace

EnergyDistribution transient_evolution(const std::vector<double>& p1, long n,
                                       const TransitionMatrix& P) {
  const StateIndex& ix = P.index;
  if (static_cast<int>(p1.size()) != ix.levels() + 1)
    throw Error("transient_evolution: initial pmf must have N+1 entries");
  if (n < 1) throw Error("transient_evolution: IR index must be >= 1");

  // The sensor idles with its initial energy until the first IR begins.
  std::vector<double> v(std::size_t(ix.size()), 0.0);
  for (int j = 0; j <= ix.levels(); ++j) v[std::size_t(ix.idle(j))] = p1[std::size_t(j)];

  std::vector<double> scratch(v.size());
  for (long ir = 1; ir <= n; ++ir) {
    apply_boundary(P, v, scratch);
    v.swap(scratch);
    if (ir < n) apply_frames(P, v, scratch);
  }

  EnergyDistribution d = energy_pmf(v, ix);
  d.tag = EnergyDistribution::Tag::transient;
  d.ir_index = n;
  return d;
}

}  // namespace ehmac

#include "ehmac/capture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace ehmac {

using nlohmann::json;

namespace {

constexpr std::uint64_t kRowStreamBase = 0x43415054'00010000ULL;
constexpr std::uint64_t kParticleStreamBase = 0x43415054'00020000ULL;
constexpr std::uint64_t kInitialParticleStream = 0x43415054'00030000ULL;

// Draws gains either fresh from the fading law or bootstrapped from the
// particle set of the current frame.
struct GainSource {
  const FadingModel* fading = nullptr;
  const std::vector<double>* particles = nullptr;

  double draw(Rng& rng) const {
    if (fading != nullptr) {
      return fading->kind == FadingModel::Kind::exponential ? rng.exponential() : 1.0;
    }
    return (*particles)[rng.uniform_int(static_cast<long>(particles->size()))];
  }
};

std::vector<double> poisson_weights(double rho, int j_max) {
  std::vector<double> w(static_cast<std::size_t>(j_max) + 1);
  w[0] = std::exp(-1.0 / rho);
  for (int j = 1; j <= j_max; ++j) w[j] = w[j - 1] / (rho * j);
  return w;
}

struct RowEstimate {
  std::vector<CaptureEstimate> p_cond;
  double p_marg = 0.0, p_marg_se = 0.0;
  double p_slot = 0.0, p_slot_se = 0.0;
};

// One pass over mc_samples estimates every p_cond[j] simultaneously: the
// interference sum grows with j, so the capture indicator is non-increasing
// in j within a sample and the scan can stop at the first failure.
RowEstimate estimate_row_mc(const GainSource& src, double gamma_th, double rho, int j_max,
                            long n, Rng& rng) {
  const std::vector<double> w = poisson_weights(rho, j_max);
  std::vector<double> w_slot(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) w_slot[j] = w[j] / rho;

  std::vector<long> hits(static_cast<std::size_t>(j_max) + 1, 0);
  double sum_x = 0.0, sum_x2 = 0.0;       // per-sample weighted capture mass
  double sum_y = 0.0, sum_y2 = 0.0;       // same with the slot weights
  for (long i = 0; i < n; ++i) {
    const double h = src.draw(rng);
    double x = w[0], y = w_slot[0];
    ++hits[0];
    double interference = 0.0;
    for (int j = 1; j <= j_max; ++j) {
      interference += src.draw(rng);
      if (h < gamma_th * interference) break;
      ++hits[j];
      x += w[j];
      y += w_slot[j];
    }
    sum_x += x;
    sum_x2 += x * x;
    sum_y += y;
    sum_y2 += y * y;
  }

  RowEstimate out;
  out.p_cond.resize(hits.size());
  for (std::size_t j = 0; j < hits.size(); ++j) {
    double p = double(hits[j]) / double(n);
    out.p_cond[j] = {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / double(n))};
  }
  out.p_cond[0] = {1.0, 0.0};
  auto mean_se = [n](double s, double s2) {
    double mean = s / double(n);
    double var = std::max(s2 / double(n) - mean * mean, 0.0);
    return std::pair<double, double>(mean, std::sqrt(var / double(n - 1)));
  };
  std::tie(out.p_marg, out.p_marg_se) = mean_se(sum_x, sum_x2);
  std::tie(out.p_slot, out.p_slot_se) = mean_se(sum_y, sum_y2);
  return out;
}

RowEstimate exact_row(const std::vector<double>& p_cond_exact, double rho, int j_max) {
  const std::vector<double> w = poisson_weights(rho, j_max);
  RowEstimate out;
  out.p_cond.resize(static_cast<std::size_t>(j_max) + 1);
  for (int j = 0; j <= j_max; ++j) {
    out.p_cond[j] = {p_cond_exact[j], 0.0};
    out.p_marg += w[j] * p_cond_exact[j];
    out.p_slot += (w[j] / rho) * p_cond_exact[j];
  }
  return out;
}

std::vector<double> exponential_cond_row(double gamma_th, int j_max) {
  std::vector<double> p(static_cast<std::size_t>(j_max) + 1);
  // Pr[h >= gamma * sum_{l<=j} h_l] = (1 + gamma)^{-j} for unit-mean
  // exponential gains.
  double term = 1.0;
  for (int j = 0; j <= j_max; ++j) {
    p[j] = term;
    term /= (1.0 + gamma_th);
  }
  return p;
}

std::vector<double> deterministic_cond_row(int j_max) {
  std::vector<double> p(static_cast<std::size_t>(j_max) + 1, 0.0);
  p[0] = 1.0;  // any interferer drops the SIR to 1/j < 1 < gamma_th
  return p;
}

}  // namespace

double poisson_weight(double rho, int j) {
  double w = std::exp(-1.0 / rho);
  for (int i = 1; i <= j; ++i) w /= rho * i;
  return w;
}

int poisson_cutoff(double rho, double tail_mass) {
  double w = std::exp(-1.0 / rho);
  double cum = w;
  int j = 0;
  while (1.0 - cum >= tail_mass) {
    ++j;
    if (j > 4000) throw CaptureError("poisson_cutoff: no cutoff below 4000 terms");
    w /= rho * j;
    cum += w;
  }
  return j;
}

namespace {

CaptureEstimate capture_cond_impl(const GainSource& src, double gamma_th, int j,
                                  long mc_samples, Rng& rng) {
  if (j < 0) throw CaptureError("capture_cond: interferer count must be >= 0");
  if (j == 0) return {1.0, 0.0};  // empty interference sum, gains positive
  long hits = 0;
  for (long i = 0; i < mc_samples; ++i) {
    const double h = src.draw(rng);
    double interference = 0.0;
    for (int l = 0; l < j; ++l) interference += src.draw(rng);
    if (h >= gamma_th * interference) ++hits;
  }
  double p = double(hits) / double(mc_samples);
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / double(mc_samples))};
}

}  // namespace

CaptureEstimate capture_cond(const FadingModel& fading, double gamma_th, int j,
                             long mc_samples, Rng& rng) {
  GainSource src{&fading, nullptr};
  return capture_cond_impl(src, gamma_th, j, mc_samples, rng);
}

CaptureEstimate capture_cond(const GainParticles& particles, double gamma_th, int j,
                             long mc_samples, Rng& rng) {
  if (particles.samples.empty()) throw CaptureError("capture_cond: empty particle set");
  GainSource src{nullptr, &particles.samples};
  return capture_cond_impl(src, gamma_th, j, mc_samples, rng);
}

GainParticles propagate_gain_particles(const GainParticles& particles, double rho,
                                       double gamma_th, long target_count, Rng& rng,
                                       double acceptance_floor) {
  if (particles.samples.empty())
    throw CaptureError("propagate_gain_particles: empty particle set");
  const std::vector<double>& src = particles.samples;
  const long src_size = static_cast<long>(src.size());
  const double lambda = 1.0 / rho;

  GainParticles out;
  out.frame_index = particles.frame_index + 1;
  out.samples.reserve(static_cast<std::size_t>(target_count));

  long attempts = 0;
  while (static_cast<long>(out.samples.size()) < target_count) {
    ++attempts;
    const double h = src[rng.uniform_int(src_size)];
    const long j = rng.poisson(lambda);
    if (j == 0) continue;  // a lone transmitter always succeeds
    double interference = 0.0;
    for (long l = 0; l < j; ++l) interference += src[rng.uniform_int(src_size)];
    if (h < gamma_th * interference) out.samples.push_back(h);

    if ((attempts & 0xFFFFF) == 0) {
      double rate = double(out.samples.size()) / double(attempts);
      if (attempts >= 1000000 && rate < acceptance_floor) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "propagate_gain_particles: failure rate %.3g below floor %.3g "
                      "after %ld attempts (frame %d)",
                      rate, acceptance_floor, attempts, particles.frame_index);
        throw CaptureError(buf);
      }
    }
  }
  return out;
}

double CaptureTable::cond(int k, int j) const {
  if (k < 1 || k > frames()) throw CaptureError("CaptureTable::cond: frame out of range");
  const std::vector<double>& row = p_cond[static_cast<std::size_t>(k) - 1];
  if (j < 0) return 0.0;
  return std::size_t(j) < row.size() ? row[std::size_t(j)] : 0.0;
}

std::string CaptureTable::cache_key() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s|g=%.17g|rho=%.17g|F=%d|n=%ld|p=%ld|seed=%llu",
                fading_kind.c_str(), gamma_th, rho, frames(), capture_samples,
                particle_count, static_cast<unsigned long long>(seed));
  return buf;
}

std::string CaptureTable::to_json_text(int indent) const {
  json j;
  j["fading_kind"] = fading_kind;
  j["gamma_th"] = gamma_th;
  j["rho"] = rho;
  j["j_max"] = j_max;
  j["p_cond"] = p_cond;
  j["p_marg"] = p_marg;
  j["p_slot"] = p_slot;
  j["max_std_error"] = max_std_error;
  j["mc_flagged"] = mc_flagged;
  j["capture_samples"] = capture_samples;
  j["particle_count"] = particle_count;
  j["seed"] = seed;
  return j.dump(indent);
}

CaptureTable CaptureTable::from_json_text(const std::string& text) {
  json j = json::parse(text);
  CaptureTable t;
  t.fading_kind = j.at("fading_kind").get<std::string>();
  t.gamma_th = j.at("gamma_th").get<double>();
  t.rho = j.at("rho").get<double>();
  t.j_max = j.at("j_max").get<int>();
  t.p_cond = j.at("p_cond").get<std::vector<std::vector<double>>>();
  t.p_marg = j.at("p_marg").get<std::vector<double>>();
  t.p_slot = j.at("p_slot").get<std::vector<double>>();
  t.max_std_error = j.at("max_std_error").get<std::vector<double>>();
  t.mc_flagged = j.at("mc_flagged").get<bool>();
  t.capture_samples = j.at("capture_samples").get<long>();
  t.particle_count = j.at("particle_count").get<long>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

CaptureTable build_capture_table(const SystemConfig& config) {
  const double gamma_th = config.gamma_th();
  const NumericTolerances& tol = config.tolerances;

  CaptureTable table;
  table.gamma_th = gamma_th;
  table.rho = config.rho;
  table.capture_samples = tol.capture_samples;
  table.particle_count = tol.particle_count;
  table.seed = tol.rng_seed;

  if (config.protocol == Protocol::tdma) {
    // Pre-assigned slots: the lone transmitter always captures. p_slot is
    // the success probability given a transmission, not used by metrics.
    table.fading_kind = "tdma";
    table.j_max = 0;
    table.p_cond = {{1.0}};
    table.p_marg = {1.0};
    table.p_slot = {1.0};
    table.max_std_error = {0.0};
    return table;
  }

  table.fading_kind = config.fading.name();
  table.j_max = poisson_cutoff(config.rho, tol.poisson_tail_mass);
  const int frames = config.protocol == Protocol::dfa ? config.energy.capacity() : 1;

  auto push_row = [&table](const RowEstimate& row) {
    std::vector<double> cond(row.p_cond.size());
    double max_se = std::max(row.p_marg_se, row.p_slot_se);
    for (std::size_t j = 0; j < row.p_cond.size(); ++j) {
      cond[j] = row.p_cond[j].value;
      max_se = std::max(max_se, row.p_cond[j].std_error);
    }
    table.p_cond.push_back(std::move(cond));
    table.p_marg.push_back(row.p_marg);
    table.p_slot.push_back(row.p_slot);
    table.max_std_error.push_back(max_se);
    if (max_se > kCaptureStdErrorBound) table.mc_flagged = true;
  };

  const bool deterministic = config.fading.kind == FadingModel::Kind::deterministic;

  // Frame 1: i.i.d. fading gains have closed-form conditional captures.
  if (deterministic) {
    push_row(exact_row(deterministic_cond_row(table.j_max), config.rho, table.j_max));
  } else {
    push_row(exact_row(exponential_cond_row(gamma_th, table.j_max), config.rho, table.j_max));
  }

  if (frames == 1) return table;

  if (deterministic) {
    // Conditioning on failure never reshapes a point mass.
    for (int k = 2; k <= frames; ++k)
      push_row(exact_row(deterministic_cond_row(table.j_max), config.rho, table.j_max));
    return table;
  }

  // Frames 2..F: propagate the gain distribution through collision
  // conditioning and estimate each row from the particles.
  GainParticles particles;
  particles.frame_index = 1;
  particles.samples.resize(static_cast<std::size_t>(tol.particle_count));
  {
    Rng init = Rng::substream(tol.rng_seed, kInitialParticleStream);
    for (double& g : particles.samples) g = init.exponential();
  }
  for (int k = 2; k <= frames; ++k) {
    Rng prop = Rng::substream(tol.rng_seed, kParticleStreamBase + std::uint64_t(k));
    particles = propagate_gain_particles(particles, config.rho, gamma_th,
                                         tol.particle_count, prop);
    Rng row_rng = Rng::substream(tol.rng_seed, kRowStreamBase + std::uint64_t(k));
    GainSource src{nullptr, &particles.samples};
    push_row(estimate_row_mc(src, gamma_th, config.rho, table.j_max,
                             tol.capture_samples, row_rng));
  }
  return table;
}

}  // namespace ehmac

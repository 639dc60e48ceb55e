#include <cmath>

#include "doctest.h"

#include "ehmac/metrics.hpp"
#include "test_util.hpp"

using namespace ehmac;

namespace {

EnergyDistribution flat_g(std::vector<double> pmf) {
  EnergyDistribution d;
  d.pmf = std::move(pmf);
  return d;
}

// hand-built contention table with one frame
CaptureTable one_frame_table(double rho, double p_marg, double p_slot) {
  CaptureTable t;
  t.fading_kind = "synthetic";
  t.rho = rho;
  t.j_max = 0;
  t.p_cond = {{1.0}};
  t.p_marg = {p_marg};
  t.p_slot = {p_slot};
  t.max_std_error = {0.0};
  return t;
}

CaptureTable uniform_table(int frames, double rho, double p_marg, double p_slot) {
  CaptureTable t = one_frame_table(rho, p_marg, p_slot);
  for (int k = 2; k <= frames; ++k) {
    t.p_cond.push_back({1.0});
    t.p_marg.push_back(p_marg);
    t.p_slot.push_back(p_slot);
    t.max_std_error.push_back(0.0);
  }
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("TDMA delivery is the energy availability") {
  EnergyConfig energy{1.0, 1, 1};
  CHECK(delivery_tdma(flat_g({0.5, 0.5}), energy) == doctest::Approx(0.5));
  CHECK(delivery_tdma(flat_g({0.0, 1.0}), energy) == doctest::Approx(1.0));
  CHECK(delivery_tdma(flat_g({1.0, 0.0}), energy) == doctest::Approx(0.0));
}

TEST_CASE("FA delivery multiplies availability and capture") {
  EnergyConfig energy{1.0, 1, 1};
  CaptureTable aloha = one_frame_table(1.0, std::exp(-1.0), std::exp(-1.0));
  CHECK(delivery_fa(flat_g({0.0, 1.0}), aloha, energy) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(delivery_fa(flat_g({1.0, 0.0}), aloha, energy) == 0.0);

  double g = std::pow(10.0, 0.3);
  double p_c = std::exp(-g / (1.0 + g));
  CaptureTable exp_t = one_frame_table(1.0, p_c, p_c);
  CHECK(delivery_fa(flat_g({0.0, 1.0}), exp_t, energy) ==
        doctest::Approx(0.5137).epsilon(1e-3));
}

TEST_CASE("DFA delivery degenerates and telescopes") {
  EnergyConfig energy{1.0, 1, 1};
  CaptureTable t1 = one_frame_table(1.0, 0.4, 0.4);
  EnergyDistribution g = flat_g({0.25, 0.75});
  CHECK(delivery_dfa(g, t1, energy).p_d ==
        doctest::Approx(delivery_fa(g, t1, energy)).epsilon(1e-15));

  EnergyConfig e10{1.0, 10, 1};
  CaptureTable sure = uniform_table(10, 1.0, 1.0, 1.0);
  EnergyDistribution g10 = flat_g([] {
    std::vector<double> p(11, 0.0);
    p[3] = 1.0;  // G(eps) = 1
    return p;
  }());
  CHECK(delivery_dfa(g10, sure, e10).p_d == doctest::Approx(g10.ccdf_eps(1, 1)).epsilon(1e-15));

  // G == 1 everywhere, constant p: oracle 1 - (1-p)^10 by direct product
  EnergyDistribution full = flat_g([] {
    std::vector<double> p(11, 0.0);
    p[10] = 1.0;
    return p;
  }());
  double p = 0.3;
  CaptureTable tp = uniform_table(10, 1.0, p, p);
  double oracle = 1.0;
  for (int k = 0; k < 10; ++k) oracle *= 1.0 - p;
  oracle = 1.0 - oracle;
  DfaDelivery d = delivery_dfa(full, tp, e10);
  CHECK(d.p_d == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(d.addends.size() == 10);
}

TEST_CASE("time efficiencies") {
  EnergyConfig energy{1.0, 1, 1};
  CHECK(time_eff_tdma(0.3, flat_g({0.5, 0.5}), energy) == doctest::Approx(0.15));
  CHECK(time_eff_tdma(1.0, flat_g({0.5, 0.5}), energy) == doctest::Approx(0.5));
  CHECK(time_eff_tdma(0.0, flat_g({0.5, 0.5}), energy) == 0.0);

  CaptureTable aloha = one_frame_table(1.0, std::exp(-1.0), std::exp(-1.0));
  CHECK(time_eff_fa(aloha) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CaptureTable half = one_frame_table(2.0, std::exp(-0.5), 0.5 * std::exp(-0.5));
  CHECK(time_eff_fa(half) == doctest::Approx(0.3033).epsilon(1e-3));
}

TEST_CASE("DFA time efficiency weights frames by expected backlog") {
  EnergyConfig energy{1.0, 4, 1};
  EnergyDistribution g = flat_g({0.1, 0.2, 0.3, 0.2, 0.2});

  SUBCASE("single frame equals FA") {
    CaptureTable t = one_frame_table(1.0, 0.4, 0.37);
    DfaTimeEff r = time_eff_dfa(t, g, 100, 0.5, energy);
    CHECK(r.p_t == doctest::Approx(time_eff_fa(t)).epsilon(1e-15));
    CHECK(r.backlog[0] == doctest::Approx(100 * 0.5 * g.ccdf_eps(1, 1)).epsilon(1e-12));
  }

  SUBCASE("constant per-frame efficiency is a fixed point") {
    CaptureTable t = uniform_table(4, 1.0, 0.4, 0.1234);
    DfaTimeEff r = time_eff_dfa(t, g, 100, 0.5, energy);
    CHECK(r.p_t == doctest::Approx(0.1234).epsilon(1e-12));
  }

  SUBCASE("degenerate backlog errors out") {
    CaptureTable t = uniform_table(4, 1.0, 0.4, 0.1);
    CHECK_THROWS_AS(time_eff_dfa(t, g, 100, 0.0, energy), Error);
  }
}

TEST_CASE("TDMA ties efficiency and delivery through alpha") {
  SystemConfig cfg = ehmac_test::medium_config(Protocol::tdma);
  MetricsReport r = analyze(cfg);
  CHECK(r.p_t / r.p_d == doctest::Approx(cfg.alpha).epsilon(1e-12));
}

TEST_CASE("results are invariant to the Poisson truncation point") {
  SystemConfig a = ehmac_test::medium_config(Protocol::fa);
  SystemConfig b = a;
  b.tolerances.poisson_tail_mass = 1e-13;  // pushes J_max up by >= 5
  MetricsReport ra = analyze(a);
  MetricsReport rb = analyze(b);
  CHECK(std::abs(ra.p_d - rb.p_d) < 1e-9);
  CHECK(std::abs(ra.p_t - rb.p_t) < 1e-9);
}

TEST_CASE("DFA report carries the per-frame breakdown") {
  SystemConfig cfg = ehmac_test::medium_config(Protocol::dfa);
  MetricsReport r = analyze(cfg);
  REQUIRE(r.backlog_k.size() == std::size_t(cfg.energy.capacity()));
  // E[B_1] = M alpha G(eps) <= M alpha, and later frames shrink
  CHECK(r.backlog_k[0] > 0.0);
  CHECK(r.backlog_k[0] <= cfg.sensor_count * cfg.alpha + 1e-12);
  for (std::size_t k = 1; k < r.backlog_k.size(); ++k)
    CHECK(r.backlog_k[k] <= r.backlog_k[k - 1] + 1e-12);
}

TEST_CASE("tradeoff curves") {
  SUBCASE("TDMA collapses to a single point") {
    SystemConfig cfg = ehmac_test::medium_config(Protocol::tdma);
    std::vector<double> grid{0.5, 1.0, 2.0};
    std::vector<TradeoffPoint> pts = tradeoff_curve(cfg, grid);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].protocol == Protocol::tdma);
  }

  SUBCASE("grid of one yields one point") {
    SystemConfig cfg = ehmac_test::medium_config(Protocol::fa);
    std::vector<double> grid{1.0};
    CHECK(tradeoff_curve(cfg, grid).size() == 1);
  }

  SUBCASE("empty grid is an error") {
    SystemConfig cfg = ehmac_test::medium_config(Protocol::fa);
    CHECK_THROWS_AS(tradeoff_curve(cfg, {}), Error);
  }

  SUBCASE("envelope is Pareto: p_d non-increasing in p_t") {
    SystemConfig cfg = ehmac_test::medium_config(Protocol::fa);
    std::vector<double> grid{0.4, 0.6, 0.8, 1.0, 1.4, 2.0, 3.0};
    std::vector<TradeoffPoint> pts = tradeoff_curve(cfg, grid);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      CHECK(pts[i].p_t >= pts[i - 1].p_t);
      CHECK(pts[i].p_d <= pts[i - 1].p_d + 1e-9);
    }
  }
}

TEST_SUITE_END();

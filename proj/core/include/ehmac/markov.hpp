#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ehmac/capture.hpp"
#include "ehmac/config.hpp"

namespace ehmac {

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_ = 0.0;
};

/// Dense indexing of the per-sensor chain states: idle states I_j for
/// j = 0..N followed by active states A_j^k for k = 1..frames, j = eps..N.
/// TDMA and FA restrict the active set to the single frame k = 1.
class StateIndex {
 public:
  StateIndex(int levels_n, int tx_cost_units, int active_frames);

  int size() const { return size_; }
  int levels() const { return levels_n_; }
  int tx_cost() const { return tx_cost_; }
  int frames() const { return frames_; }
  int active_levels() const { return levels_n_ - tx_cost_ + 1; }

  int idle(int j) const { return j; }
  int active(int k, int j) const {
    return levels_n_ + 1 + (k - 1) * active_levels() + (j - tx_cost_);
  }
  bool is_idle(int state) const { return state <= levels_n_; }
  int idle_level(int state) const { return state; }
  /// (frame k, level j) of an active state.
  std::pair<int, int> active_state(int state) const;
  std::string label(int state) const;

 private:
  int levels_n_, tx_cost_, frames_, size_;
};

/// Row-compressed stochastic matrix over a StateIndex.
struct TransitionMatrix {
  StateIndex index;
  Protocol protocol;
  std::vector<int> row_offsets;  // size() + 1 entries
  std::vector<int> cols;
  std::vector<double> vals;

  int size() const { return index.size(); }
  double row_sum(int row) const;
  /// y = x P (left multiplication by a row vector).
  void apply(const std::vector<double>& x, std::vector<double>& y) const;

  void write_csv(std::ostream& os) const;
  std::string to_json_text(int indent = 2) const;
};

/// pmf over the energy levels {0..N} in delta units, with its ccdf.
struct EnergyDistribution {
  enum class Tag { steady_state, transient };

  std::vector<double> pmf;
  Tag tag = Tag::steady_state;
  long ir_index = 0;  // meaningful for transient distributions

  int levels() const { return static_cast<int>(pmf.size()) - 1; }
  /// G(j) = Pr[E >= j delta].
  double ccdf_units(int j) const;
  /// G(k eps) = Pr[E >= k eps].
  double ccdf_eps(int k, int tx_cost_units) const { return ccdf_units(k * tx_cost_units); }
  std::vector<double> ccdf() const;

  void write_csv(std::ostream& os) const;
};

/// Encodes the harvest boundary (idle rows) and the per-frame measure /
/// transmission events (active rows). For DFA the capture table must carry
/// exactly F_eps frames.
TransitionMatrix build_transition_matrix(const SystemConfig& config,
                                         const CaptureTable& table);

struct StationaryOptions {
  enum class Method { automatic, dense, power };
  Method method = Method::automatic;
  /// Dense solves verify to 1e-12; power iteration targets this residual
  /// (<= 0 means use the default 1e-10).
  double residual_target = 0.0;
  long max_iterations = 500000;
  int dense_size_threshold = 1500;
  std::optional<std::vector<double>> initial;  // power-iteration start
};

/// Stationary distribution phi with ||phi P - phi||_inf below the target.
/// Throws SolverError (carrying the residual) on non-convergence.
std::vector<double> stationary_distribution(const TransitionMatrix& P,
                                            const StationaryOptions& options = {});

/// ||phi P - phi||_inf.
double stationary_residual(const TransitionMatrix& P, const std::vector<double>& phi);

/// phi restricted and renormalized to idle states, advanced one harvest
/// boundary: the state distribution at the beginning of an IR. Only I_j with
/// j < eps_delta and A_j^1 entries can be non-zero.
std::vector<double> begin_ir_distribution(const std::vector<double>& phi,
                                          const TransitionMatrix& P);

/// Maps a begin-of-IR state distribution onto the energy level set.
EnergyDistribution energy_pmf(const std::vector<double>& phi_plus, const StateIndex& index);

/// Begin-of-IR energy pmf at IR n starting from the pre-process energy
/// distribution p1: one harvest boundary enters IR 1, then each further IR
/// is at most F_eps frame events followed by the next boundary.
EnergyDistribution transient_evolution(const std::vector<double>& p1, long n,
                                       const TransitionMatrix& P);

}  // namespace ehmac

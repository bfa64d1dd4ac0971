#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qemc/chain.hpp"
#include "qemc/common.hpp"
#include "qemc/instances.hpp"
#include "qemc/rng.hpp"

namespace qemc {

using Gate1 = Eigen::Matrix2cd;
/// Two-site gate on |a b>, row/column index 2a + b with a the left site bit.
using Gate2 = Eigen::Matrix4cd;

/// Open-boundary MPS of spin-1/2 sites in mixed canonical form.
///
/// Site k holds two matrices A_k[bit] of shape (chi_{k-1}, chi_k). Sites left
/// of center() are left-isometric, sites right of it right-isometric.
class MpsState {
 public:
  static MpsState product_state(int n, StateIndex index);

  int size() const { return static_cast<int>(sites_.size()); }
  int center() const { return center_; }
  std::vector<int> bond_dimensions() const;
  int max_bond() const;

  /// Sum of discarded squared singular values, each relative to the norm at
  /// the time of truncation.
  double truncation_weight() const { return truncation_weight_; }
  /// 1 - prod(retained norm^2) accumulated over all normalizations.
  double norm_loss() const { return 1.0 - retained_norm_; }

  double norm() const;
  void normalize();

  Complex amplitude(StateIndex index) const;
  /// All 2^n amplitudes, index-ordered.
  ComplexVector to_statevector() const;

  void move_center(int site);

  void apply_one_site(int site, const Gate1& gate);
  /// Gate on sites (site, site + 1) followed by an SVD truncated to
  /// min(chi_max, numerical rank). The orthogonality center ends on the left
  /// site when `center_left`, else on the right one.
  void apply_adjacent(int site, const Gate2& gate, int chi_max, bool center_left = false);
  /// Routes site j next to i with SWAP gates, applies the gate, routes back.
  /// Returns the number of SWAPs performed.
  int apply_two_site(int i, int j, const Gate2& gate, int chi_max);
  /// Applies a diagonal two-site gate diag(g00, g01, g10, g11) as a bond-2
  /// operator string without SWAPs. Bonds above chi_max are then truncated.
  void apply_diagonal_long_range(int i, int j, const Gate2& gate, int chi_max);

  /// Exact sequential sampling from |<s|psi>|^2.
  StateIndex sample(Rng& rng) const;

 private:
  using Site = std::array<ComplexMatrix, 2>;

  void shift_center_right();
  void shift_center_left();
  void truncate_sweep(int chi_max);

  std::vector<Site> sites_;
  int center_ = 0;
  double truncation_weight_ = 0.0;
  double retained_norm_ = 1.0;
};

/// Trotter-step gates for H = (1-gamma) alpha H_c + gamma sum X.
struct GateSet {
  double dt = 0.0;
  double gamma = 0.0;
  std::vector<Gate1> z_gates;
  std::vector<Gate1> x_gates;
  /// Lexicographic (i, j), i < j.
  std::vector<std::pair<int, int>> zz_pairs;
  std::vector<Gate2> zz_gates;

  static GateSet build(const IsingInstance& inst, double gamma, double dt);
};

struct TebdOptions {
  /// Applies ZZ gates as diagonal operator strings instead of SWAP routing.
  bool diagonal_fast_path = false;
};

struct TebdResult {
  MpsState state;
  int trotter_steps = 0;
  int swaps = 0;
  std::vector<std::pair<int, int>> gate_order;
};

/// m = t/dt sweeps of: Z gates, ZZ gates in lexicographic order, X gates,
/// then normalization.
TebdResult tebd_evolve(const IsingInstance& inst, StateIndex s0, double gamma, double t,
                       double dt, int chi_max, const TebdOptions& options = {});

struct MpsProposal {
  ProposalMatrix q;
  /// Per-row norm deficit before the final renormalization.
  std::vector<double> norm_loss;
  double max_truncation_weight = 0.0;
};

/// Column-by-column proposal: evolve every basis state and enumerate all
/// amplitudes. Tagged symmetric only when chi_max >= 2^{floor(n/2)}.
MpsProposal mps_proposal_matrix(const IsingInstance& inst, double gamma, double t, double dt,
                                int chi_max, const TebdOptions& options = {});

/// Proposal sampler that evolves the MPS from the current state every step.
class MpsSampler final : public ProposalSampler {
 public:
  MpsSampler(const IsingInstance& inst, double gamma, double t, double dt, int chi_max);
  StateIndex propose(StateIndex current, Rng& rng) override;
  double hastings_ratio(StateIndex current, StateIndex proposed) override;

 private:
  double probability(StateIndex from, StateIndex to);

  const IsingInstance* inst_;
  double gamma_, t_, dt_;
  int chi_max_;
};

inline constexpr double kPhiFloor = 1e-12;

struct PhiHistogram {
  double lo = -8.0;
  double hi = 8.0;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;
};

struct PhiStats {
  /// log2 Q(s|s')/Q(s'|s) over ordered pairs s != s' with both directions
  /// above the floor.
  std::vector<double> log2_ratios;
  PhiHistogram histogram;
  double mean = 0.0;
  double sigma = 0.0;
  std::uint64_t unresolved = 0;
};

PhiStats phi_statistics(const ProposalMatrix& q, double floor = kPhiFloor, int bins = 64,
                        double lo = -8.0, double hi = 8.0);

/// Total SWAP gates per Trotter step on the complete graph,
/// 2 sum_{a=1}^{n-1} (n-a)(a-1), by direct summation.
long long swap_count(int n);
/// n^3/3 - n^2 + 2n/3, which agrees with swap_count().
double swap_count_closed_form(int n);
/// n^3/3 + n^2 + 2n/3 as printed alongside the sum in the cost derivation;
/// kept for reporting, it does not match the summation.
double swap_count_printed_form(int n);

enum class CostProposal { kLocal, kUniform, kMps };

std::string_view to_string(CostProposal proposal);

struct CostEstimate {
  double memory = 0.0;
  double time = 0.0;
};

/// Operation-count proxies: local (n, 1), uniform (n, n),
/// MPS (2 n chi^2 + 16 n^2, 8 m n^3 chi^3).
CostEstimate cost_model(CostProposal proposal, int n, int chi = 1, int m = 1);

struct ThresholdResult {
  double n_threshold = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// n > log2(t_q/t_c) / (k_c - k_q). Throws std::invalid_argument when
/// k_c <= k_q.
ThresholdResult threshold_size(double k_c, double k_q, double runtime_ratio);

/// Fixed point of n = log2(m n^3 chi^3) / (k_c - k_qi) iterated from n = 2.
ThresholdResult quantum_inspired_threshold(double k_c, double k_qi, int m, int chi,
                                           int max_iterations = 1000);

}  // namespace qemc

#include "qemc/mps.hpp"
#include "qemc/unitary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/QR>
#include <lapacke.h>

namespace qemc {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kRankCutoff = 1e-14;

Gate2 swap_gate() {
  Gate2 g = Gate2::Zero();
  g(0, 0) = 1.0;
  g(1, 2) = 1.0;
  g(2, 1) = 1.0;
  g(3, 3) = 1.0;
  return g;
}

struct ThinSvd {
  ComplexMatrix u;
  RealVector s;
  ComplexMatrix vh;
};

// LAPACK divide-and-conquer; several times faster than Eigen's SVDs at the
// 4..32 sizes TEBD produces.
ThinSvd thin_svd(ComplexMatrix a) {
  const auto rows = a.rows();
  const auto cols = a.cols();
  const auto k = std::min(rows, cols);
  ThinSvd out{ComplexMatrix(rows, k), RealVector(k), ComplexMatrix(k, cols)};
  const lapack_int info = LAPACKE_zgesdd(
      LAPACK_COL_MAJOR, 'S', static_cast<lapack_int>(rows), static_cast<lapack_int>(cols),
      reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<lapack_int>(rows),
      out.s.data(), reinterpret_cast<lapack_complex_double*>(out.u.data()),
      static_cast<lapack_int>(rows), reinterpret_cast<lapack_complex_double*>(out.vh.data()),
      static_cast<lapack_int>(k));
  if (info != 0) throw NumericalError("SVD failed (zgesdd info " + std::to_string(info) + ")");
  return out;
}

int bit_of(StateIndex index, int site) { return static_cast<int>((index >> site) & 1u); }

double z_of(int bit) { return bit == 0 ? 1.0 : -1.0; }

}  // namespace

MpsState MpsState::product_state(int n, StateIndex index) {
  if (n < 1 || n > kMaxSpins || index >= dimension_of(n)) {
    throw std::invalid_argument("product_state: bad size or index");
  }
  MpsState state;
  state.sites_.resize(n);
  for (int k = 0; k < n; ++k) {
    state.sites_[k][0] = ComplexMatrix::Zero(1, 1);
    state.sites_[k][1] = ComplexMatrix::Zero(1, 1);
    state.sites_[k][bit_of(index, k)](0, 0) = 1.0;
  }
  state.center_ = 0;
  return state;
}

std::vector<int> MpsState::bond_dimensions() const {
  std::vector<int> out;
  for (int k = 0; k + 1 < size(); ++k) out.push_back(static_cast<int>(sites_[k][0].cols()));
  return out;
}

int MpsState::max_bond() const {
  const auto bonds = bond_dimensions();
  return bonds.empty() ? 1 : *std::max_element(bonds.begin(), bonds.end());
}

double MpsState::norm() const {
  ComplexMatrix env = ComplexMatrix::Identity(1, 1);
  for (const auto& site : sites_) {
    env = site[0].adjoint() * env * site[0] + site[1].adjoint() * env * site[1];
  }
  return std::sqrt(std::max(env(0, 0).real(), 0.0));
}

void MpsState::normalize() {
  const double nrm = norm();
  if (!(nrm > 0.0)) throw NumericalError("MpsState: zero norm");
  retained_norm_ *= nrm * nrm;
  sites_[center_][0] /= nrm;
  sites_[center_][1] /= nrm;
}

Complex MpsState::amplitude(StateIndex index) const {
  ComplexMatrix row = ComplexMatrix::Identity(1, 1);
  for (int k = 0; k < size(); ++k) row = row * sites_[k][bit_of(index, k)];
  return row(0, 0);
}

ComplexVector MpsState::to_statevector() const {
  // Breadth-first prefix contraction; prefixes[idx] is the row vector for the
  // bits fixed so far.
  std::vector<ComplexMatrix> prefixes{ComplexMatrix::Identity(1, 1)};
  for (int k = 0; k < size(); ++k) {
    std::vector<ComplexMatrix> next(prefixes.size() * 2);
    for (std::size_t idx = 0; idx < prefixes.size(); ++idx) {
      next[idx] = prefixes[idx] * sites_[k][0];
      next[idx | (std::size_t{1} << k)] = prefixes[idx] * sites_[k][1];
    }
    prefixes = std::move(next);
  }
  ComplexVector out(prefixes.size());
  for (std::size_t idx = 0; idx < prefixes.size(); ++idx) out(idx) = prefixes[idx](0, 0);
  return out;
}

void MpsState::shift_center_right() {
  const int c = center_;
  auto& site = sites_[c];
  const auto dl = site[0].rows();
  const auto dr = site[0].cols();
  ComplexMatrix stacked(2 * dl, dr);
  stacked << site[0], site[1];
  Eigen::HouseholderQR<ComplexMatrix> qr(stacked);
  const auto r = std::min<Eigen::Index>(2 * dl, dr);
  const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(2 * dl, r);
  const ComplexMatrix rmat = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  site[0] = q.topRows(dl);
  site[1] = q.bottomRows(dl);
  auto& next = sites_[c + 1];
  next[0] = rmat * next[0];
  next[1] = rmat * next[1];
  center_ = c + 1;
}

void MpsState::shift_center_left() {
  const int c = center_;
  auto& site = sites_[c];
  const auto dl = site[0].rows();
  const auto dr = site[0].cols();
  ComplexMatrix stacked(2 * dr, dl);
  stacked << site[0].adjoint(), site[1].adjoint();
  Eigen::HouseholderQR<ComplexMatrix> qr(stacked);
  const auto r = std::min<Eigen::Index>(2 * dr, dl);
  const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(2 * dr, r);
  const ComplexMatrix rmat = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  site[0] = q.topRows(dr).adjoint();
  site[1] = q.bottomRows(dr).adjoint();
  auto& prev = sites_[c - 1];
  prev[0] = prev[0] * rmat.adjoint();
  prev[1] = prev[1] * rmat.adjoint();
  center_ = c - 1;
}

void MpsState::move_center(int site) {
  if (site < 0 || site >= size()) throw std::out_of_range("move_center: bad site");
  while (center_ < site) shift_center_right();
  while (center_ > site) shift_center_left();
}

void MpsState::apply_one_site(int site, const Gate1& gate) {
  auto& a = sites_.at(site);
  const ComplexMatrix a0 = a[0];
  const ComplexMatrix a1 = a[1];
  a[0] = gate(0, 0) * a0 + gate(0, 1) * a1;
  a[1] = gate(1, 0) * a0 + gate(1, 1) * a1;
}

void MpsState::apply_adjacent(int site, const Gate2& gate, int chi_max, bool center_left) {
  if (site < 0 || site + 1 >= size()) throw std::out_of_range("apply_adjacent: bad site");
  if (chi_max < 1) throw std::invalid_argument("apply_adjacent: chi_max must be positive");
  if (center_ != site && center_ != site + 1) move_center(site);

  auto& left = sites_[site];
  auto& right = sites_[site + 1];
  const auto dl = left[0].rows();
  const auto dr = right[0].cols();

  ComplexMatrix pair[2][2];
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) pair[a][b] = left[a] * right[b];
  }
  ComplexMatrix theta = ComplexMatrix::Zero(2 * dl, 2 * dr);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      auto block = theta.block(a * dl, b * dr, dl, dr);
      for (int ap = 0; ap < 2; ++ap) {
        for (int bp = 0; bp < 2; ++bp) {
          const Complex g = gate(2 * a + b, 2 * ap + bp);
          if (g != Complex{}) block += g * pair[ap][bp];
        }
      }
    }
  }

  const ThinSvd svd = thin_svd(std::move(theta));
  const RealVector& s = svd.s;
  const double total = s.squaredNorm();
  if (!(total > 0.0)) throw NumericalError("apply_adjacent: zero state");
  Eigen::Index keep = 0;
  while (keep < s.size() && keep < chi_max && s(keep) > kRankCutoff * s(0)) ++keep;
  keep = std::max<Eigen::Index>(keep, 1);
  const double discarded = s.tail(s.size() - keep).squaredNorm();
  truncation_weight_ += discarded / total;

  ComplexMatrix u = svd.u.leftCols(keep);
  ComplexMatrix vh = svd.vh.topRows(keep);
  const RealVector kept = s.head(keep);
  if (center_left) {
    u = u * kept.asDiagonal();
  } else {
    vh = kept.asDiagonal() * vh;
  }
  left[0] = u.topRows(dl);
  left[1] = u.bottomRows(dl);
  right[0] = vh.leftCols(dr);
  right[1] = vh.rightCols(dr);
  center_ = center_left ? site : site + 1;
}

int MpsState::apply_two_site(int i, int j, const Gate2& gate, int chi_max) {
  if (!(0 <= i && i < j && j < size())) throw std::out_of_range("apply_two_site: need i < j");
  static const Gate2 kSwap = swap_gate();
  int swaps = 0;
  for (int k = j - 1; k > i; --k, ++swaps) apply_adjacent(k, kSwap, chi_max, true);
  apply_adjacent(i, gate, chi_max, false);
  for (int k = i + 1; k < j; ++k, ++swaps) apply_adjacent(k, kSwap, chi_max, false);
  normalize();
  return swaps;
}

void MpsState::apply_diagonal_long_range(int i, int j, const Gate2& gate, int chi_max) {
  if (!(0 <= i && i < j && j < size())) throw std::out_of_range("apply_diagonal_long_range");
  // diag gate = sum_m |m><m|_i (x) diag(g(m,0), g(m,1))_j; the operator
  // string carries m through a bond of dimension 2. Combined bond index is
  // r * 2 + m.
  auto widen_right = [](const ComplexMatrix& a, int m) {
    ComplexMatrix out = ComplexMatrix::Zero(a.rows(), a.cols() * 2);
    for (Eigen::Index r = 0; r < a.cols(); ++r) out.col(r * 2 + m) = a.col(r);
    return out;
  };
  for (int a = 0; a < 2; ++a) sites_[i][a] = widen_right(sites_[i][a], a);
  for (int k = i + 1; k < j; ++k) {
    for (int b = 0; b < 2; ++b) {
      const ComplexMatrix& a = sites_[k][b];
      ComplexMatrix out = ComplexMatrix::Zero(a.rows() * 2, a.cols() * 2);
      for (Eigen::Index l = 0; l < a.rows(); ++l) {
        for (Eigen::Index r = 0; r < a.cols(); ++r) {
          out(l * 2 + 0, r * 2 + 0) = a(l, r);
          out(l * 2 + 1, r * 2 + 1) = a(l, r);
        }
      }
      sites_[k][b] = std::move(out);
    }
  }
  for (int b = 0; b < 2; ++b) {
    const ComplexMatrix& a = sites_[j][b];
    ComplexMatrix out(a.rows() * 2, a.cols());
    for (Eigen::Index l = 0; l < a.rows(); ++l) {
      for (int m = 0; m < 2; ++m) out.row(l * 2 + m) = gate(2 * m + b, 2 * m + b) * a.row(l);
    }
    sites_[j][b] = std::move(out);
  }
  truncate_sweep(chi_max);
  normalize();
}

void MpsState::truncate_sweep(int chi_max) {
  // Left-orthonormalize everything, then truncate right to left.
  center_ = 0;
  while (center_ < size() - 1) shift_center_right();
  for (int c = size() - 1; c > 0; --c) {
    auto& site = sites_[c];
    const auto dl = site[0].rows();
    const auto dr = site[0].cols();
    ComplexMatrix wide(dl, 2 * dr);
    wide << site[0], site[1];
    const ThinSvd svd = thin_svd(std::move(wide));
    const RealVector& s = svd.s;
    const double total = s.squaredNorm();
    Eigen::Index keep = 0;
    while (keep < s.size() && keep < chi_max && s(keep) > kRankCutoff * s(0)) ++keep;
    keep = std::max<Eigen::Index>(keep, 1);
    if (total > 0.0) truncation_weight_ += s.tail(s.size() - keep).squaredNorm() / total;
    const ComplexMatrix vh = svd.vh.topRows(keep);
    const ComplexMatrix us = svd.u.leftCols(keep) * s.head(keep).asDiagonal();
    site[0] = vh.leftCols(dr);
    site[1] = vh.rightCols(dr);
    auto& prev = sites_[c - 1];
    prev[0] = prev[0] * us;
    prev[1] = prev[1] * us;
    center_ = c - 1;
  }
}

StateIndex MpsState::sample(Rng& rng) const {
  MpsState work = *this;
  work.move_center(0);
  ComplexMatrix env = ComplexMatrix::Identity(1, 1);
  StateIndex out = 0;
  for (int k = 0; k < size(); ++k) {
    const ComplexMatrix w0 = env * work.sites_[k][0];
    const ComplexMatrix w1 = env * work.sites_[k][1];
    const double p0 = w0.squaredNorm();
    const double p1 = w1.squaredNorm();
    const double total = p0 + p1;
    if (!(total > 0.0)) throw NumericalError("MpsState::sample: zero conditional norm");
    const bool one = rng.uniform() * total >= p0;
    if (one) {
      out |= StateIndex{1} << k;
      env = w1 / std::sqrt(p1);
    } else {
      env = w0 / std::sqrt(p0);
    }
  }
  return out;
}

GateSet GateSet::build(const IsingInstance& inst, double gamma, double dt) {
  const int n = inst.n();
  const double weight = (1.0 - gamma) * scale_factor_alpha(inst);
  GateSet set;
  set.dt = dt;
  set.gamma = gamma;
  for (int k = 0; k < n; ++k) {
    // Term -(1-gamma) alpha h_k Z_k.
    const double c = -weight * inst.fields()(k);
    Gate1 z = Gate1::Zero();
    z(0, 0) = std::exp(-kI * dt * c);
    z(1, 1) = std::exp(kI * dt * c);
    set.z_gates.push_back(z);

    Gate1 x;
    x << std::cos(gamma * dt), -kI * std::sin(gamma * dt), -kI * std::sin(gamma * dt),
        std::cos(gamma * dt);
    set.x_gates.push_back(x);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      // Term -(1-gamma) alpha J_ij Z_i Z_j.
      const double c = -weight * inst.couplings()(i, j);
      Gate2 g = Gate2::Zero();
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) g(2 * a + b, 2 * a + b) = std::exp(-kI * dt * c * z_of(a) * z_of(b));
      }
      set.zz_pairs.emplace_back(i, j);
      set.zz_gates.push_back(g);
    }
  }
  return set;
}

TebdResult tebd_evolve(const IsingInstance& inst, StateIndex s0, double gamma, double t,
                       double dt, int chi_max, const TebdOptions& options) {
  if (chi_max < 1) throw std::invalid_argument("tebd_evolve: chi_max must be positive");
  const int m = trotter_steps(t, dt);
  const GateSet gates = GateSet::build(inst, gamma, dt);
  TebdResult result{MpsState::product_state(inst.n(), s0), m, 0, gates.zz_pairs};
  MpsState& state = result.state;
  for (int step = 0; step < m; ++step) {
    for (int k = 0; k < inst.n(); ++k) state.apply_one_site(k, gates.z_gates[k]);
    for (std::size_t g = 0; g < gates.zz_pairs.size(); ++g) {
      const auto [i, j] = gates.zz_pairs[g];
      if (options.diagonal_fast_path) {
        state.apply_diagonal_long_range(i, j, gates.zz_gates[g], chi_max);
      } else {
        result.swaps += state.apply_two_site(i, j, gates.zz_gates[g], chi_max);
      }
    }
    for (int k = 0; k < inst.n(); ++k) state.apply_one_site(k, gates.x_gates[k]);
    state.normalize();
  }
  return result;
}

MpsProposal mps_proposal_matrix(const IsingInstance& inst, double gamma, double t, double dt,
                                int chi_max, const TebdOptions& options) {
  const int n = inst.n();
  if (n > 10) throw std::invalid_argument("mps_proposal_matrix: enumeration limited to n <= 10");
  const auto dim = dimension_of(n);
  RealMatrix q(dim, dim);
  std::vector<double> loss(dim);
  double max_weight = 0.0;
  for (StateIndex s0 = 0; s0 < dim; ++s0) {
    const TebdResult evolved = tebd_evolve(inst, s0, gamma, t, dt, chi_max, options);
    q.row(s0) = evolved.state.to_statevector().cwiseAbs2().transpose();
    loss[s0] = evolved.state.norm_loss();
    max_weight = std::max(max_weight, evolved.state.truncation_weight());
  }
  const bool exact = chi_max >= (1 << (n / 2));
  return MpsProposal{ProposalMatrix(n, std::move(q), ProposalKind::kMps, exact), std::move(loss),
                     max_weight};
}

MpsSampler::MpsSampler(const IsingInstance& inst, double gamma, double t, double dt, int chi_max)
    : inst_(&inst), gamma_(gamma), t_(t), dt_(dt), chi_max_(chi_max) {}

StateIndex MpsSampler::propose(StateIndex current, Rng& rng) {
  return tebd_evolve(*inst_, current, gamma_, t_, dt_, chi_max_).state.sample(rng);
}

double MpsSampler::probability(StateIndex from, StateIndex to) {
  return std::norm(tebd_evolve(*inst_, from, gamma_, t_, dt_, chi_max_).state.amplitude(to));
}

double MpsSampler::hastings_ratio(StateIndex current, StateIndex proposed) {
  const double forward = probability(current, proposed);
  return forward > 0.0 ? probability(proposed, current) / forward : 0.0;
}

PhiStats phi_statistics(const ProposalMatrix& q, double floor, int bins, double lo, double hi) {
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("phi_statistics: bad histogram range");
  const RealMatrix& m = q.matrix();
  const auto dim = m.rows();
  PhiStats stats;
  stats.histogram.lo = lo;
  stats.histogram.hi = hi;
  stats.histogram.counts.assign(bins, 0);
  for (Eigen::Index s = 0; s < dim; ++s) {
    for (Eigen::Index sp = 0; sp < dim; ++sp) {
      if (s == sp) continue;
      const double forward = m(sp, s);   // Q(s|s')
      const double backward = m(s, sp);  // Q(s'|s)
      if (forward < floor || backward < floor) {
        ++stats.unresolved;
        continue;
      }
      const double value = std::log2(forward / backward);
      stats.log2_ratios.push_back(value);
      if (value < lo) {
        ++stats.histogram.underflow;
      } else if (value >= hi) {
        ++stats.histogram.overflow;
      } else {
        const auto bin = static_cast<std::size_t>((value - lo) / (hi - lo) * bins);
        ++stats.histogram.counts[std::min<std::size_t>(bin, bins - 1)];
      }
    }
  }
  if (!stats.log2_ratios.empty()) {
    const double count = static_cast<double>(stats.log2_ratios.size());
    stats.mean = std::accumulate(stats.log2_ratios.begin(), stats.log2_ratios.end(), 0.0) / count;
    double var = 0.0;
    for (double v : stats.log2_ratios) var += (v - stats.mean) * (v - stats.mean);
    stats.sigma = std::sqrt(var / count);
  }
  return stats;
}

long long swap_count(int n) {
  if (n < 2) throw std::invalid_argument("swap_count: n must be at least 2");
  long long total = 0;
  for (long long a = 1; a <= n - 1; ++a) total += 2 * (n - a) * (a - 1);
  return total;
}

double swap_count_closed_form(int n) {
  const double x = n;
  return x * x * x / 3.0 - x * x + 2.0 * x / 3.0;
}

double swap_count_printed_form(int n) {
  const double x = n;
  return x * x * x / 3.0 + x * x + 2.0 * x / 3.0;
}

std::string_view to_string(CostProposal proposal) {
  switch (proposal) {
    case CostProposal::kLocal: return "local";
    case CostProposal::kUniform: return "uniform";
    case CostProposal::kMps: return "mps";
  }
  return "unknown";
}

CostEstimate cost_model(CostProposal proposal, int n, int chi, int m) {
  const double x = n;
  switch (proposal) {
    case CostProposal::kLocal: return {x, 1.0};
    case CostProposal::kUniform: return {x, x};
    case CostProposal::kMps: {
      const double c = chi;
      return {2.0 * x * c * c + 16.0 * x * x, 8.0 * m * x * x * x * c * c * c};
    }
  }
  throw std::invalid_argument("cost_model: unknown proposal");
}

ThresholdResult threshold_size(double k_c, double k_q, double runtime_ratio) {
  if (!(k_c > k_q)) throw std::invalid_argument("threshold_size: no crossover when k_c <= k_q");
  if (!(runtime_ratio > 0.0)) throw std::invalid_argument("threshold_size: ratio must be positive");
  return {std::max(0.0, std::log2(runtime_ratio) / (k_c - k_q)), 0, true};
}

ThresholdResult quantum_inspired_threshold(double k_c, double k_qi, int m, int chi,
                                           int max_iterations) {
  if (!(k_c > k_qi)) throw std::invalid_argument("threshold: no crossover when k_c <= k_qi");
  const double scale = 1.0 / (k_c - k_qi);
  auto rhs = [&](double n) {
    return scale * std::log2(static_cast<double>(m) * n * n * n * std::pow(chi, 3));
  };
  ThresholdResult out;
  double n = 2.0;
  for (int it = 1; it <= max_iterations; ++it) {
    const double next = rhs(n);
    out.iterations = it;
    if (!std::isfinite(next) || next > 1e12) {
      out.n_threshold = next;
      out.converged = false;
      return out;
    }
    if (std::abs(next - n) < 1e-10) {
      out.n_threshold = next;
      out.converged = true;
      return out;
    }
    n = next;
  }
  out.n_threshold = n;
  out.converged = false;
  return out;
}

}  // namespace qemc

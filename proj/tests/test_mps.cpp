#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qemc/mps.hpp"
#include "qemc/unitary.hpp"

using namespace qemc;

namespace {

/// Dense action of a two-site gate on sites (i, j); gate index 2a + b with a
/// the bit of site i.
ComplexVector apply_dense(const ComplexVector& psi, int i, int j, const Gate2& g) {
  ComplexVector out = ComplexVector::Zero(psi.size());
  for (Eigen::Index s = 0; s < psi.size(); ++s) {
    const int a = (s >> i) & 1, b = (s >> j) & 1;
    const Eigen::Index base = s & ~((Eigen::Index{1} << i) | (Eigen::Index{1} << j));
    for (int a2 = 0; a2 < 2; ++a2) {
      for (int b2 = 0; b2 < 2; ++b2) {
        const Eigen::Index t = base | (Eigen::Index{a2} << i) | (Eigen::Index{b2} << j);
        out(t) += g(2 * a2 + b2, 2 * a + b) * psi(s);
      }
    }
  }
  return out;
}

Gate2 random_unitary_gate(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::Matrix4cd m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = Complex(rng.normal(), rng.normal());
  }
  Eigen::HouseholderQR<Eigen::Matrix4cd> qr(m);
  return qr.householderQ();
}

/// One first-order step with the diagonal part applied first.
ComplexVector dense_tebd(const IsingInstance& inst, StateIndex s0, double gamma, double t, double dt) {
  const RealMatrix hz = (1.0 - gamma) * oracle::dense_alpha(inst) * oracle::dense_classical_operator(inst);
  const RealMatrix hx = gamma * oracle::dense_mixer(inst.n());
  const ComplexMatrix step = oracle::expm_i(hx, dt) * oracle::expm_i(hz, dt);
  ComplexVector psi = ComplexVector::Zero(hz.rows());
  psi(s0) = 1.0;
  for (int k = 0; k < static_cast<int>(std::lround(t / dt)); ++k) psi = step * psi;
  return psi;
}

double fidelity(const ComplexVector& a, const ComplexVector& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("product states") {
  const MpsState s = MpsState::product_state(5, 0b10110);
  CHECK(s.max_bond() == 1);
  CHECK(s.norm() == doctest::Approx(1.0));
  const ComplexVector v = s.to_statevector();
  for (StateIndex k = 0; k < 32; ++k) {
    CHECK(std::abs(v(k) - (k == 0b10110 ? 1.0 : 0.0)) < 1e-15);
    CHECK(std::abs(s.amplitude(k) - v(k)) < 1e-15);
  }
}

TEST_CASE("two-site gates against dense application") {
  SUBCASE("identity leaves the state unchanged") {
    MpsState s = MpsState::product_state(4, 5);
    s.apply_two_site(0, 3, Gate2::Identity(), 4);
    CHECK(std::abs(s.amplitude(5) - 1.0) < 1e-12);
    CHECK(s.max_bond() == 1);
  }
  SUBCASE("random gates at full bond dimension") {
    MpsState s = MpsState::product_state(4, 0);
    ComplexVector dense = s.to_statevector();
    const std::vector<std::pair<int, int>> pairs{{0, 1}, {1, 3}, {0, 2}, {2, 3}, {0, 3}, {1, 2}};
    std::uint64_t seed = 1;
    for (auto [i, j] : pairs) {
      const Gate2 g = random_unitary_gate(seed++);
      s.apply_two_site(i, j, g, 4);
      dense = apply_dense(dense, i, j, g);
      CHECK((s.to_statevector() - dense).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK(s.max_bond() <= 4);
  }
  SUBCASE("an adjacent gate on a product state raises the bond to at most 2") {
    MpsState s = MpsState::product_state(5, 0);
    s.apply_adjacent(2, random_unitary_gate(9), 16);
    CHECK(s.max_bond() <= 2);
  }
  SUBCASE("single-site gate") {
    MpsState s = MpsState::product_state(3, 0);
    Gate1 x;
    x << 0, 1, 1, 0;
    s.apply_one_site(1, x);
    CHECK(std::abs(s.amplitude(2) - 1.0) < 1e-14);
  }
}

TEST_CASE("TEBD evolution") {
  const IsingInstance inst = generate_instance(6, 31);
  SUBCASE("chi = 8 at n = 6 equals the dense Trotter product") {
    for (StateIndex s0 : {0u, 13u, 63u}) {
      const TebdResult r = tebd_evolve(inst, s0, 0.45, 4.0, 0.8, 8);
      const ComplexVector dense = dense_tebd(inst, s0, 0.45, 4.0, 0.8);
      CHECK(1.0 - fidelity(r.state.to_statevector(), dense) < 1e-8);
      CHECK((r.state.to_statevector().cwiseAbs2() - dense.cwiseAbs2()).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(r.state.truncation_weight() < 1e-12);
    }
  }
  SUBCASE("full Trotter proposal at n = 6, chi = 8") {
    const ProposalMatrix mps = mps_proposal_matrix(inst, 0.45, 4.0, 0.8, 8).q;
    const ComplexMatrix u = [&] {
      const RealMatrix hz = (1.0 - 0.45) * oracle::dense_alpha(inst) * oracle::dense_classical_operator(inst);
      const ComplexMatrix step = oracle::expm_i(0.45 * oracle::dense_mixer(6), 0.8) * oracle::expm_i(hz, 0.8);
      ComplexMatrix acc = ComplexMatrix::Identity(64, 64);
      for (int k = 0; k < 5; ++k) acc = step * acc;
      return acc;
    }();
    CHECK((mps.matrix() - oracle::born(u)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(mps.symmetric());
  }
  SUBCASE("gamma = 0 only changes phases") {
    const TebdResult r = tebd_evolve(inst, 21, 0.0, 6.0, 0.5, 2);
    CHECK(std::norm(r.state.amplitude(21)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("chi = 2 truncates") {
    const ComplexVector a = tebd_evolve(inst, 3, 0.45, 6.0, 0.8, 2).state.to_statevector();
    const ComplexVector b = tebd_evolve(inst, 3, 0.45, 6.0, 0.8, 8).state.to_statevector();
    CHECK((a.cwiseAbs2() - b.cwiseAbs2()).cwiseAbs().maxCoeff() > 1e-3);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("truncated states stay normalized in amplitude sum") {
    const TebdResult r = tebd_evolve(inst, 7, 0.6, 8.0, 0.8, 2);
    double total = 0.0;
    for (StateIndex s = 0; s < 64; ++s) total += std::norm(r.state.amplitude(s));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.state.truncation_weight() > 0.0);
    CHECK(r.state.max_bond() <= 2);
  }
}

TEST_CASE("no truncation when chi reaches 2^{floor(n/2)}") {
  for (int n : {4, 5}) {
    const IsingInstance inst = generate_instance(n, 8 + n);
    const int chi = 1 << (n / 2);
    const TebdResult r = tebd_evolve(inst, 1, 0.45, 6.0, 0.8, chi);
    CHECK(r.state.truncation_weight() < 1e-20);
    CHECK(1.0 - fidelity(r.state.to_statevector(), dense_tebd(inst, 1, 0.45, 6.0, 0.8)) < 1e-10);
  }
}

TEST_CASE("diagonal fast path equals SWAP routing") {
  const IsingInstance inst = generate_instance(5, 12);
  TebdOptions fast;
  fast.diagonal_fast_path = true;
  for (StateIndex s0 : {0u, 9u, 30u}) {
    const TebdResult routed = tebd_evolve(inst, s0, 0.45, 4.0, 0.8, 4);
    const TebdResult direct = tebd_evolve(inst, s0, 0.45, 4.0, 0.8, 4, fast);
    CHECK(1.0 - fidelity(routed.state.to_statevector(), direct.state.to_statevector()) < 1e-10);
    CHECK(direct.swaps == 0);
    CHECK(routed.swaps == 5 * swap_count(5));
  }
}

TEST_CASE("sequential sampling follows the Born distribution") {
  const IsingInstance inst = generate_instance(4, 77);
  const MpsState state = tebd_evolve(inst, 2, 0.5, 3.2, 0.8, 4).state;
  const RealVector p = state.to_statevector().cwiseAbs2();
  Rng rng(5);
  const int draws = 20000;
  RealVector hist = RealVector::Zero(16);
  for (int k = 0; k < draws; ++k) hist(state.sample(rng)) += 1.0;
  for (int s = 0; s < 16; ++s) {
    const double sd = std::sqrt(draws * p(s) * (1.0 - p(s)));
    CHECK(std::abs(hist(s) - draws * p(s)) <= 4.0 * sd + 1.0);
  }
}

TEST_CASE("MPS sampler uses the enumerated proposal") {
  const IsingInstance inst = generate_instance(4, 3);
  const ProposalMatrix q = mps_proposal_matrix(inst, 0.45, 4.0, 0.8, 1).q;
  MpsSampler sampler(inst, 0.45, 4.0, 0.8, 1);
  for (auto [a, b] : {std::pair<StateIndex, StateIndex>{0, 5}, {3, 12}, {7, 8}}) {
    if (q.matrix()(a, b) > 1e-12 && q.matrix()(b, a) > 1e-12) {
      CHECK(sampler.hastings_ratio(a, b) == doctest::Approx(q.matrix()(b, a) / q.matrix()(a, b)).epsilon(1e-8));
    }
  }
}

TEST_CASE("asymmetry statistics") {
  SUBCASE("symmetric proposals give zero spread") {
    const PhiStats u = phi_statistics(uniform_proposal(4));
    CHECK(u.sigma == 0.0);
    CHECK(u.mean == 0.0);
    CHECK(u.log2_ratios.size() == 16u * 15u);
  }
  SUBCASE("untruncated MPS proposals are symmetric to 1e-6") {
    const IsingInstance inst = generate_instance(6, 4);
    const PhiStats s = phi_statistics(mps_proposal_matrix(inst, 0.45, 4.0, 0.8, 8).q);
    CHECK(s.sigma <= 1e-6);
  }
  SUBCASE("hand-built two-state ratio") {
    RealMatrix q(2, 2);
    q << 0.5, 0.5, 0.125, 0.875;
    const PhiStats s = phi_statistics(ProposalMatrix(1, q, ProposalKind::kCustom, false));
    REQUIRE(s.log2_ratios.size() == 2u);
    CHECK(std::abs(s.log2_ratios[0]) == doctest::Approx(2.0));
    CHECK(s.mean == doctest::Approx(0.0));
    CHECK(s.sigma == doctest::Approx(2.0));
  }
}

TEST_CASE("SWAP counts") {
  CHECK(swap_count(2) == 0);
  CHECK(swap_count(3) == 2);
  CHECK(swap_count(4) == 8);
  for (int n = 2; n <= 40; ++n) {
    long long brute = 0;
    // Route site j to i + 1 and back: 2 (j - i - 1) swaps per pair.
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) brute += 2 * (j - i - 1);
    }
    CHECK(swap_count(n) == brute);
    CHECK(swap_count(n) % 2 == 0);
    CHECK(swap_count_closed_form(n) == doctest::Approx(static_cast<double>(brute)));
  }
  const double r = static_cast<double>(swap_count(400)) / std::pow(400.0, 3);
  CHECK(r == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("cost model") {
  CHECK(cost_model(CostProposal::kLocal, 9).memory == 9.0);
  CHECK(cost_model(CostProposal::kUniform, 9).time == 9.0);
  const CostEstimate c4 = cost_model(CostProposal::kMps, 9, 4, 15);
  const CostEstimate c8 = cost_model(CostProposal::kMps, 9, 8, 15);
  CHECK(c8.time / c4.time == doctest::Approx(8.0));
  CHECK(c4.time == doctest::Approx(8.0 * 15 * 729 * 64));
  CHECK(c4.memory == doctest::Approx(2 * 9 * 16 + 16 * 81));
}

TEST_CASE("threshold sizes") {
  CHECK(threshold_size(0.94, 0.264, 1.0).n_threshold == doctest::Approx(0.0));
  CHECK(threshold_size(0.94, 0.264, 1e6).n_threshold ==
        doctest::Approx(std::log2(1e6) / 0.676));
  CHECK_THROWS_AS(threshold_size(0.5, 0.5, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(threshold_size(0.3, 0.5, 10.0), std::invalid_argument);
  CHECK(0.94 / 0.264 == doctest::Approx(3.56).epsilon(0.002));

  SUBCASE("quantum-inspired fixed point against bisection") {
    for (int chi : {2, 4, 8}) {
      const ThresholdResult r = quantum_inspired_threshold(0.94, 0.264, 15, chi);
      REQUIRE(r.converged);
      auto f = [&](double n) { return n - std::log2(15.0 * n * n * n * chi * chi * chi) / 0.676; };
      double lo = 2.0, hi = 1000.0;
      REQUIRE(f(lo) < 0.0);
      for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
      }
      CHECK(r.n_threshold == doctest::Approx(lo).epsilon(1e-8));
    }
  }
}

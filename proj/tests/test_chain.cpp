#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qemc/chain.hpp"
#include "qemc/mps.hpp"
#include "qemc/rng.hpp"
#include "qemc/unitary.hpp"

using namespace qemc;

namespace {

double stationarity_error(const TransitionMatrix& t) {
  const Eigen::RowVectorXd pi = t.target.probabilities.transpose();
  return (pi * t.p - pi).cwiseAbs().maxCoeff();
}

double detailed_balance_error(const TransitionMatrix& t) {
  const RealVector& pi = t.target.probabilities;
  const RealMatrix flow = pi.asDiagonal() * t.p;
  return (flow - flow.transpose()).cwiseAbs().maxCoeff();
}

ProposalMatrix random_stochastic(int n, std::uint64_t seed) {
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dimension_of(n));
  RealMatrix q(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) q(a, b) = rng.uniform(0.05, 1.0);
    q.row(a) /= q.row(a).sum();
  }
  return ProposalMatrix(n, q, ProposalKind::kCustom, false);
}

}  // namespace

TEST_CASE("local proposal") {
  RealMatrix expected(4, 4);
  expected << 0, .5, .5, 0, .5, 0, 0, .5, .5, 0, 0, .5, 0, .5, .5, 0;
  CHECK(local_proposal(2).matrix() == expected);
  for (int n = 1; n <= 6; ++n) {
    const ProposalMatrix q = local_proposal(n);
    CHECK(q.symmetric());
    CHECK(q.matrix() == q.matrix().transpose());
    for (Eigen::Index r = 0; r < q.matrix().rows(); ++r) {
      int nonzero = 0;
      for (Eigen::Index c = 0; c < q.matrix().cols(); ++c) {
        if (q.matrix()(r, c) != 0.0) {
          ++nonzero;
          CHECK(q.matrix()(r, c) == doctest::Approx(1.0 / n));
          CHECK(hamming_distance(static_cast<StateIndex>(r), static_cast<StateIndex>(c)) == 1);
        }
      }
      CHECK(nonzero == n);
    }
  }
}

TEST_CASE("uniform proposal and its brute-force gap") {
  const ProposalMatrix q = uniform_proposal(3);
  CHECK((q.matrix().array() - 0.125).abs().maxCoeff() == 0.0);
  CHECK(q.matrix() == q.matrix().transpose());
  const IsingInstance inst = generate_instance(3, 5);
  const RealMatrix p = oracle::mh_matrix(q.matrix(), oracle::boltzmann(inst, 1.0), false);
  const double delta = proposal_gap(q, energy_table(inst), 1.0).delta;
  CHECK(std::abs(delta - oracle::general_gap(p)) < 1e-10);
}

TEST_CASE("Metropolis-Hastings transition matrix") {
  const IsingInstance inst = generate_instance(3, 17);
  SUBCASE("infinite temperature accepts every move") {
    const ProposalMatrix q = local_proposal(3);
    const TransitionMatrix t = mh_transition(q, boltzmann_target(inst, 1e12), false);
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        if (a != b) CHECK(std::abs(t.p(a, b) - q.matrix()(a, b)) < 1e-9);
      }
    }
  }
  SUBCASE("matches a loop-built chain") {
    for (bool hastings : {false, true}) {
      const ProposalMatrix q = random_stochastic(3, 3);
      const TransitionMatrix t = mh_transition(q, boltzmann_target(inst, 0.8), hastings);
      CHECK((t.p - oracle::mh_matrix(q.matrix(), oracle::boltzmann(inst, 0.8), hastings)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("local chain is stationary") {
    const TransitionMatrix t = mh_transition(local_proposal(3), boltzmann_target(inst, 1.0), false);
    CHECK(stationarity_error(t) < 1e-10);
    CHECK(t.detailed_balance);
  }
  SUBCASE("Hastings correction restores detailed balance for asymmetric Q") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const TransitionMatrix t = mh_transition(random_stochastic(3, seed), boltzmann_target(inst, 1.0), true);
      CHECK(t.detailed_balance);
      CHECK(detailed_balance_error(t) < 1e-9);
      CHECK(stationarity_error(t) < 1e-10);
    }
  }
  SUBCASE("one-way moves are always rejected under the Hastings rule") {
    RealMatrix q = RealMatrix::Zero(2, 2);
    q << 0.5, 0.5, 0.0, 1.0;
    const IsingInstance one(RealMatrix::Zero(1, 1), RealVector::Ones(1));
    const TransitionMatrix t = mh_transition(ProposalMatrix(1, q, ProposalKind::kCustom, false),
                                             boltzmann_target(one, 1.0), true);
    CHECK(t.p(0, 1) == 0.0);
    CHECK(t.p(0, 0) == 1.0);
  }
}

TEST_CASE("every built chain is stationary; corrected ones balance") {
  for (int n = 3; n <= 5; ++n) {
    const IsingInstance inst = generate_instance(n, 70 + n);
    const BoltzmannTarget target = boltzmann_target(inst, 1.0);
    const std::vector<ProposalMatrix> qs = {
        local_proposal(n), uniform_proposal(n), exact_unitary_proposal(inst, 0.45, 12.0),
        trotter_unitary_proposal(inst, 0.45, 12.0, 0.8), qaoa_proposal(inst, 0.3, 5),
        mps_proposal_matrix(inst, 0.45, 12.0, 0.8, 2).q};
    for (const auto& q : qs) {
      if (q.symmetric()) CHECK(q.asymmetry() <= 1e-10);
      for (bool hastings : {false, true}) {
        const TransitionMatrix t = mh_transition(q, target, hastings);
        if (t.detailed_balance) {
          CHECK(stationarity_error(t) < 1e-10);
          CHECK(detailed_balance_error(t) < 1e-9);
        }
        const GapResult g = spectral_gap(t);
        CHECK(g.delta >= 0.0);
        CHECK(g.delta <= 1.0);
        CHECK(std::abs(g.lambda1 - 1.0) < 1e-10);
      }
    }
  }
}

TEST_CASE("spectral gap limits and method agreement") {
  const IsingInstance inst = generate_instance(3, 2);
  const BoltzmannTarget target = boltzmann_target(inst, 1.0);
  SUBCASE("identity chain has zero gap") {
    const TransitionMatrix t{RealMatrix::Identity(8, 8), target, true};
    CHECK(spectral_gap(t).delta == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("rank-one chain has unit gap") {
    const TransitionMatrix t{RealVector::Ones(8) * target.probabilities.transpose(), target, true};
    CHECK(spectral_gap(t).delta == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("similarity and general eigensolvers agree") {
    const TransitionMatrix t = mh_transition(local_proposal(3), target, false);
    const GapResult sym = spectral_gap(t, GapMethod::kSymmetricSimilarity);
    const GapResult gen = spectral_gap(t, GapMethod::kGeneralEigen);
    CHECK(std::abs(sym.delta - gen.delta) < 1e-10);
    CHECK(std::abs(sym.delta - oracle::general_gap(t.p)) < 1e-10);
  }
}

TEST_CASE("mixing-time bounds") {
  const IsingInstance zero(RealMatrix::Zero(3, 3), RealVector::Zero(3));
  const BoltzmannTarget uniform = boltzmann_target(zero, 1.0);
  const MixingBounds b = mixing_time_bounds(1.0, uniform, 0.25);
  CHECK(b.lower == doctest::Approx(0.0));
  CHECK(b.upper == doctest::Approx(std::log(32.0)));
  CHECK_THROWS_AS(mixing_time_bounds(0.0, uniform), std::domain_error);

  const double l1 = mixing_time_bounds(0.2, uniform).lower;
  const double l2 = mixing_time_bounds(0.1, uniform).lower;
  CHECK(l2 > 2.0 * l1);

  SUBCASE("brute-force mixing time lies inside the bounds") {
    for (std::uint64_t seed : {3u, 4u, 5u}) {
      const IsingInstance inst = generate_instance(3, seed);
      const BoltzmannTarget target = boltzmann_target(inst, 1.0);
      const TransitionMatrix t = mh_transition(local_proposal(3), target, false);
      const double eps = 0.01;
      RealMatrix pt = RealMatrix::Identity(8, 8);
      int tmix = 0;
      for (;; ++tmix) {
        double worst = 0.0;
        for (int r = 0; r < 8; ++r) {
          worst = std::max(worst, 0.5 * (pt.row(r).transpose() - target.probabilities).cwiseAbs().sum());
        }
        if (worst <= eps) break;
        pt = pt * t.p;
        REQUIRE(tmix < 100000);
      }
      const MixingBounds mb = mixing_time_bounds(spectral_gap(t).delta, target, eps);
      CHECK(mb.lower <= tmix);
      CHECK(tmix <= mb.upper);
    }
  }
}

TEST_CASE("run_chain") {
  const IsingInstance inst = generate_instance(3, 23);
  SUBCASE("uniform proposal at infinite temperature accepts everything") {
    UniformSampler s(3);
    CHECK(run_chain(inst, s, 1e12, 2000, 1).acceptance_rate == 1.0);
  }
  SUBCASE("deterministic per seed") {
    LocalSampler a(3), b(3);
    const ChainTrace ta = run_chain(inst, a, 1.0, 500, 42);
    const ChainTrace tb = run_chain(inst, b, 1.0, 500, 42);
    CHECK(ta.states == tb.states);
    CHECK(ta.accepted == tb.accepted);
  }
  SUBCASE("local chain histogram within multinomial bands") {
    // Thinned by 10 so successive samples are close to independent.
    LocalSampler s(3);
    const ChainTrace tr = run_chain(inst, s, 1.0, 100000, 7);
    const RealVector pi = oracle::boltzmann(inst, 1.0);
    RealVector hist = RealVector::Zero(8);
    int kept = 0;
    for (std::size_t k = 1000; k < tr.states.size(); k += 10, ++kept) hist(tr.states[k]) += 1.0;
    for (int s0 = 0; s0 < 8; ++s0) {
      const double sd = std::sqrt(kept * pi(s0) * (1.0 - pi(s0)));
      CHECK(std::abs(hist(s0) - kept * pi(s0)) <= 3.0 * sd + 1.0);
    }
  }
  SUBCASE("matrix sampler Hastings ratio") {
    const ProposalMatrix q = random_stochastic(3, 9);
    MatrixSampler s(q);
    CHECK(s.hastings_ratio(1, 6) == doctest::Approx(q.matrix()(6, 1) / q.matrix()(1, 6)));
  }
}

TEST_CASE("proposal matrix validation") {
  RealMatrix q = RealMatrix::Constant(4, 4, 0.25);
  q(0, 0) = -1e-15;
  q(0, 1) = 0.5 + 1e-15;
  q(0, 2) = 0.5;
  q(0, 3) = 0.0;
  CHECK_NOTHROW(ProposalMatrix(2, q, ProposalKind::kCustom, false));
  q(0, 0) = -1e-6;
  CHECK_THROWS_AS(ProposalMatrix(2, q, ProposalKind::kCustom, false), NumericalError);
  RealMatrix drift = RealMatrix::Constant(4, 4, 0.3);
  CHECK_THROWS_AS(ProposalMatrix(2, drift, ProposalKind::kCustom, false), NumericalError);
}

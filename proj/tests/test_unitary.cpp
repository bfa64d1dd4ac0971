#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qemc/chain.hpp"
#include "qemc/rng.hpp"
#include "qemc/schedule.hpp"
#include "qemc/unitary.hpp"

using namespace qemc;

namespace {

double max_abs(const RealMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("Hamiltonian assembly") {
  const IsingInstance inst = generate_instance(3, 31);
  SUBCASE("gamma = 0 is diagonal alpha H_c") {
    const RealMatrix h = build_hamiltonian(inst, 0.0).dense();
    const RealVector e = energy_table(inst);
    CHECK(max_abs(h - RealMatrix((scale_factor_alpha(inst) * e).asDiagonal())) < 1e-12);
  }
  SUBCASE("gamma = 1 is the transverse field") {
    const RealMatrix h = build_hamiltonian(inst, 1.0).dense();
    CHECK(max_abs(h - oracle::dense_mixer(3)) == 0.0);
    for (int r = 0; r < 8; ++r) CHECK((h.row(r).array() == 1.0).count() == 3);
  }
  SUBCASE("Kronecker-product construction") {
    CHECK(max_abs(build_hamiltonian(inst, 0.45).dense() - oracle::dense_hamiltonian(inst, 0.45)) < 1e-12);
    const RealMatrix h = build_hamiltonian(inst, 0.45).dense();
    CHECK(max_abs(h - h.transpose()) == 0.0);
  }
  CHECK_THROWS_AS(build_hamiltonian(inst, 1.2), std::invalid_argument);
  CHECK_NOTHROW(build_hamiltonian(inst, 1.05));
}

TEST_CASE("exact unitary proposal") {
  SUBCASE("Pade exponential oracle") {
    for (int n = 3; n <= 5; ++n) {
      const IsingInstance inst = generate_instance(n, 90 + n);
      const RealMatrix q = exact_unitary_proposal(inst, 0.45, 12.0).matrix();
      const RealMatrix ref = oracle::born(oracle::expm_i(oracle::dense_hamiltonian(inst, 0.45), 12.0));
      CHECK(max_abs(q - ref) < 1e-9);
    }
  }
  SUBCASE("gamma = 1 at t = pi/4 is the uniform proposal") {
    for (int n = 3; n <= 6; ++n) {
      const RealMatrix q = exact_unitary_proposal(generate_instance(n, 1), 1.0, std::numbers::pi / 4).matrix();
      CHECK((q.array() - std::ldexp(1.0, -n)).abs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("gamma = 1 flips each spin with probability sin^2 t") {
    for (int n = 3; n <= 6; ++n) {
      for (double t : {0.3, 1.1, 2.7}) {
        const RealMatrix q = exact_unitary_proposal(generate_instance(n, 2), 1.0, t).matrix();
        const double s2 = std::pow(std::sin(t), 2), c2 = std::pow(std::cos(t), 2);
        for (StateIndex a = 0; a < dimension_of(n); ++a) {
          for (StateIndex b = 0; b < dimension_of(n); ++b) {
            const int d = hamming_distance(a, b);
            REQUIRE(std::abs(q(a, b) - std::pow(s2, d) * std::pow(c2, n - d)) < 1e-9);
          }
        }
      }
    }
  }
  SUBCASE("gamma = 0 keeps the state") {
    const RealMatrix q = exact_unitary_proposal(generate_instance(4, 3), 0.0, 7.0).matrix();
    CHECK(max_abs(q - RealMatrix::Identity(16, 16)) < 1e-12);
  }
}

TEST_CASE("unitarity of every construction") {
  const IsingInstance inst = generate_instance(5, 12);
  const SpectralPropagator prop(build_hamiltonian(inst, 0.45));
  const std::vector<ComplexMatrix> us = {
      prop.unitary(12.0), trotter_unitary(inst, 0.45, 12.0, 0.8, TrotterOrder::kFirst),
      trotter_unitary(inst, 0.45, 12.0, 0.8, TrotterOrder::kSecond), qaoa_unitary(inst, 0.4, 5),
      time_dependent_unitary(inst, Schedule(10.0, std::vector<double>{0.2, 0.4, 0.5, 0.6, 0.55}), 100)};
  for (const auto& u : us) {
    CHECK((u.adjoint() * u - ComplexMatrix::Identity(32, 32)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("Trotter proposals") {
  SUBCASE("first and second order differ only by a phase") {
    for (int n = 3; n <= 5; ++n) {
      for (int k = 0; k < 5; ++k) {
        const IsingInstance inst = generate_instance(n, 200 + k);
        const RealMatrix q1 = trotter_unitary_proposal(inst, 0.45, 12.0, 0.8, TrotterOrder::kFirst).matrix();
        const RealMatrix q2 = trotter_unitary_proposal(inst, 0.45, 12.0, 0.8, TrotterOrder::kSecond).matrix();
        CHECK(max_abs(q1 - q2) <= 1e-12);
      }
    }
  }
  SUBCASE("first-order product oracle") {
    const IsingInstance inst = generate_instance(4, 6);
    const RealMatrix q = trotter_unitary_proposal(inst, 0.45, 12.0, 0.8, TrotterOrder::kFirst).matrix();
    CHECK(max_abs(q - oracle::born(oracle::trotter_first_order(inst, 0.45, 12.0, 0.8))) < 1e-9);
  }
  SUBCASE("single step of pure mixing is exact") {
    const IsingInstance inst = generate_instance(4, 6);
    CHECK(max_abs(trotter_unitary_proposal(inst, 1.0, 1.3, 1.3).matrix() -
                  exact_unitary_proposal(inst, 1.0, 1.3).matrix()) < 1e-12);
  }
  SUBCASE("small steps converge to the exact proposal") {
    const IsingInstance inst = generate_instance(4, 8);
    const double t = 12.0;
    CHECK(max_abs(trotter_unitary_proposal(inst, 0.45, t, t / 256).matrix() -
                  exact_unitary_proposal(inst, 0.45, t).matrix()) <= 1e-3);
  }
  CHECK(trotter_steps(12.0, 0.8) == 15);
  CHECK_THROWS_AS(trotter_steps(1.0, 3.0), std::invalid_argument);
}

TEST_CASE("symmetry of exact, Trotter and QAOA proposals") {
  for (int n = 3; n <= 6; ++n) {
    for (int k = 0; k < 5; ++k) {
      const IsingInstance inst = generate_instance(n, 300 + k);
      CHECK(exact_unitary_proposal(inst, 0.45, 12.0).asymmetry() <= 1e-10);
      CHECK(trotter_unitary_proposal(inst, 0.45, 12.0, 0.8).asymmetry() <= 1e-10);
      CHECK(qaoa_proposal(inst, 0.37, 7).asymmetry() <= 1e-10);
    }
  }
}

TEST_CASE("perturbative locality at weak mixing") {
  const IsingInstance inst = generate_instance(4, 44);
  auto masses = [&](double gamma) {
    const RealMatrix q = exact_unitary_proposal(inst, gamma, 12.0).matrix();
    double d1 = 0.0, dmore = 0.0;
    for (StateIndex a = 0; a < 16; ++a) {
      for (StateIndex b = 0; b < 16; ++b) {
        const int d = hamming_distance(a, b);
        if (d == 1) d1 += q(a, b);
        if (d > 1) dmore += q(a, b);
      }
    }
    return std::pair{d1, dmore};
  };
  const auto [d1, dmore] = masses(1e-3);
  CHECK(dmore <= 1e-3 * d1);
  const double ratio = d1 / masses(5e-4).first;
  CHECK(ratio > 2.0);
  CHECK(ratio < 8.0);
}

TEST_CASE("schedules") {
  const Schedule s(10.0, std::vector<double>{0.3, 0.9, 0.2, 1.0, 0.6});
  CHECK(s(0.0) == 0.0);
  CHECK(s(1.0) == 0.0);
  for (int k = 0; k <= 1000; ++k) {
    const double x = k / 1000.0;
    CHECK(std::abs(s(x) - s(1.0 - x)) <= 1e-12);
    CHECK(s(x) >= 0.0);
    CHECK(s(x) <= Schedule::kMaxValue);
  }
  CHECK(s(0.3) == doctest::Approx(0.2));
  const Schedule back = Schedule::from_json(s.to_json());
  for (double x : {0.05, 0.37, 0.5, 0.81}) CHECK(back(x) == doctest::Approx(s(x)).epsilon(1e-14));
}

TEST_CASE("time-dependent proposals") {
  const IsingInstance inst = generate_instance(4, 10);
  SUBCASE("constant schedule equals fixed-gamma evolution") {
    const RealMatrix q = time_dependent_proposal(inst, Schedule::constant(10.0, 0.45), 512).matrix();
    CHECK(max_abs(q - exact_unitary_proposal(inst, 0.45, 10.0).matrix()) < 1e-8);
  }
  SUBCASE("zero schedule is the identity") {
    const RealMatrix q = time_dependent_proposal(inst, Schedule(10.0, std::vector<double>(5, 0.0)), 64).matrix();
    CHECK(max_abs(q - RealMatrix::Identity(16, 16)) < 1e-12);
  }
  SUBCASE("symmetric schedules give symmetric proposals") {
    const ProposalMatrix q = time_dependent_proposal(inst, Schedule(10.0, std::vector<double>{0.1, 0.7, 0.3, 0.9, 0.5}), 200);
    CHECK(q.symmetric());
    CHECK(q.asymmetry() <= 1e-6);
  }
  CHECK_THROWS_AS(time_dependent_proposal(inst, Schedule::constant(10.0, 0.4), 7), std::invalid_argument);
}

TEST_CASE("QAOA proposals") {
  const IsingInstance inst = generate_instance(4, 15);
  CHECK(max_abs(qaoa_proposal(inst, 0.0, 5).matrix() - RealMatrix::Identity(16, 16)) < 1e-12);
  for (int p : {1, 5, 20}) CHECK(qaoa_proposal(inst, 0.8, p).asymmetry() <= 1e-12);

  SUBCASE("layered product oracle") {
    const double theta = 0.37;
    const double alpha = oracle::dense_alpha(inst);
    const ComplexMatrix layer = oracle::expm_i(alpha * oracle::dense_classical_operator(inst), theta) *
                                oracle::expm_i(oracle::dense_mixer(4), theta);
    ComplexMatrix v = ComplexMatrix::Identity(16, 16);
    for (int k = 0; k < 3; ++k) v = layer * v;
    const ComplexMatrix u = v.transpose() * v;
    CHECK(max_abs(qaoa_proposal(inst, theta, 3).matrix() - oracle::born(u)) < 1e-10);
  }

  SUBCASE("coarse theta grid lands within one step of the fine optimum") {
    const std::vector<IsingInstance> one{generate_instance(3, 4)};
    QaoaScanOptions coarse, fine;
    coarse.grid = ThetaGrid{0.01, 1.5, 16};
    fine.grid = ThetaGrid{0.01, 1.5, 1501};
    const ThetaScan c = optimize_qaoa_theta(one, 5, QaoaObjective::kGap, coarse);
    const ThetaScan f = optimize_qaoa_theta(one, 5, QaoaObjective::kGap, fine);
    CHECK(std::abs(c.best_theta - f.best_theta) <= (1.5 - 0.01) / 15 + 1e-12);
    CHECK(f.objective[f.best_index] >= c.objective[c.best_index]);
  }
  SUBCASE("gap objective dominates acceptance-rate objective") {
    const auto ensemble = generate_ensemble(3, 4, 50);
    QaoaScanOptions opts;
    opts.grid = ThetaGrid{0.01, 1.5, 31};
    opts.acceptance_steps = 2000;
    const ThetaScan g = optimize_qaoa_theta(ensemble, 5, QaoaObjective::kGap, opts);
    const ThetaScan a = optimize_qaoa_theta(ensemble, 5, QaoaObjective::kAcceptanceRate, opts);
    CHECK(g.mean_gap[g.best_index] >= a.mean_gap[a.best_index]);
    CHECK(a.objective[a.best_index] <= *std::min_element(a.objective.begin(), a.objective.end()) + 1e-15);
  }
}

TEST_CASE("Trotter objective") {
  CHECK(trotter_objective(0.0, 0.8, 12.0) == 0.0);
  CHECK(trotter_objective(0.05, 1.6, 12.0) == doctest::Approx(2.0 * trotter_objective(0.05, 0.8, 12.0)));
}

TEST_CASE("randomized strategy") {
  const IsingInstance inst = generate_instance(4, 77);
  Rng r1(5), r2(5);
  const RandomizedProposal a = randomized_expected_proposal(inst, r1);
  const RandomizedProposal b = randomized_expected_proposal(inst, r2);
  REQUIRE(a.draws.size() == 32);
  for (std::size_t k = 0; k < a.draws.size(); ++k) {
    CHECK(a.draws[k].gamma == b.draws[k].gamma);
    CHECK(a.draws[k].t == b.draws[k].t);
    CHECK(a.draws[k].gamma >= 0.25);
    CHECK(a.draws[k].gamma <= 0.6);
    CHECK(a.draws[k].t >= 2.0);
    CHECK(a.draws[k].t <= 20.0);
  }
  CHECK(a.q.symmetric());
  CHECK(a.q.asymmetry() <= 1e-10);
  CHECK((a.q.matrix().rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);

  // Mean of the individual exact proposals.
  RealMatrix mean = RealMatrix::Zero(16, 16);
  for (const auto& d : a.draws) mean += exact_unitary_proposal(inst, d.gamma, d.t).matrix();
  mean /= static_cast<double>(a.draws.size());
  CHECK(max_abs(mean - a.q.matrix()) < 1e-12);
}

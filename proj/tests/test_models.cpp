#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "blochfiber/blochfiber.hpp"
#include "oracles.hpp"

using namespace blochfiber;
using Catch::Approx;

TEST_CASE("mathieu_model", "[models][mathieu]") {
  SECTION("p=1 q=3 passes the wandering check with three fibers") {
    auto m = mathieu_model(1, 3, 12);
    CHECK(m.decomposition.report().passed);
    CHECK(m.q() == 3);
    CHECK(m.lattice_dim() == 1);
    CHECK(m.hamiltonian().is_hermitian());
  }

  SECTION("p=1 q=2 fiber eigenvalues") {
    auto m = mathieu_model(1, 2, 12);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    for (int s = 0; s < 16; ++s) {
      const double t = s == 0 ? 0.0 : u(rng);
      auto e = oracle::eigenvalues(fiber_operator(m.hamiltonian(), {t}));
      const double r = std::sqrt(6.0 + 2.0 * std::cos(t));
      CHECK(e(0) == Approx(-r).margin(1e-12));
      CHECK(e(1) == Approx(r).margin(1e-12));
    }
    auto e0 = oracle::eigenvalues(fiber_operator(m.hamiltonian(), {0.0}));
    CHECK(e0(1) == Approx(2.0 * std::sqrt(2.0)).margin(1e-12));
  }

  SECTION("invalid inputs") {
    CHECK_THROWS_AS(mathieu_model(2, 4), InvalidFlux);
    CHECK_THROWS_AS(mathieu_model(1, 0), InvalidFlux);
    CHECK_THROWS_AS(mathieu_model(1, 3, 2), std::invalid_argument);
  }

  SECTION("torus relation and commutant") {
    auto lat = mathieu_lattice(1, 3, 12);
    const auto& u = lat.observables.at("u");
    const auto& v = lat.observables.at("v");
    const auto& w = lat.generators.front();
    CHECK(commutator_norm(u, v, std::polar(1.0, kTwoPi / 3.0)) <= 1e-12);
    CHECK(commutator_norm(w, u, 1.0) <= 1e-12);
    CHECK(commutator_norm(w, v, 1.0) <= 1e-12);
  }
}

TEST_CASE("mathieu_fiber_closed_form", "[models][mathieu]") {
  SECTION("q = 1") {
    auto [u, v] = mathieu_fiber_closed_form(0, 1, 0.7);
    CHECK(std::abs(u(0, 0) - std::polar(1.0, 0.7)) == 0.0);
    CHECK(v(0, 0) == Complex(1.0));
  }
  SECTION("q = 3 at t = 0 is the cyclic permutation") {
    auto [u, v] = mathieu_fiber_closed_form(1, 3, 0.0);
    Matrix cyc = Matrix::Zero(3, 3);
    cyc(1, 0) = cyc(2, 1) = cyc(0, 2) = 1.0;
    CHECK((u - cyc).norm() == 0.0);
  }
  SECTION("agrees with the generic fibering") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> d(0.0, kTwoPi);
    for (auto [p, q] : {std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}, std::pair{1, 5}}) {
      auto m = mathieu_model(p, q, 12);
      for (int s = 0; s < 8; ++s) {
        const double t = d(rng);
        auto [u, v] = mathieu_fiber_closed_form(p, q, t);
        REQUIRE((fiber_operator(m.observables.at("u"), {t}) - u).cwiseAbs().maxCoeff() <= 1e-12);
        REQUIRE((fiber_operator(m.observables.at("v"), {t}) - v).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
  }
}

TEST_CASE("hofstadter_model", "[models][hofstadter]") {
  auto lat = hofstadter_lattice(1, 3, 6);
  const auto& U = lat.observables.at("U");
  const auto& V = lat.observables.at("V");
  const auto& S1 = lat.generators[0];
  const auto& S2 = lat.generators[1];

  SECTION("symmetries commute with the magnetic translations") {
    CHECK(commutator_norm(S1, U, 1.0) <= 1e-12);
    CHECK(commutator_norm(S1, V, 1.0) <= 1e-12);
    CHECK(commutator_norm(S2, U, 1.0) <= 1e-12);
    CHECK(commutator_norm(S2, V, 1.0) <= 1e-12);
    CHECK(commutator_norm(S1, S2, 1.0) <= 1e-12);
    CHECK(commutator_norm(U, V, std::polar(1.0, kTwoPi / 3.0)) <= 1e-12);
  }

  SECTION("[S1, V] by direct dense evaluation on a box") {
    // Sites (m, n), m in [-9, 11], n in [-3, 3], m fastest.
    const int m0 = -9, m1 = 11, n0 = -3, n1 = 3;
    const int W = m1 - m0 + 1, H = n1 - n0 + 1;
    auto idx = [&](int m, int n) { return (n - n0) * W + (m - m0); };
    oracle::Matrix s1 = oracle::Matrix::Zero(W * H, W * H), v = s1;
    for (int n = n0; n <= n1; ++n)
      for (int m = m0; m <= m1; ++m) {
        if (m + 3 <= m1) s1(idx(m + 3, n), idx(m, n)) = 1.0;
        if (n + 1 <= n1) v(idx(m, n + 1), idx(m, n)) = std::polar(1.0, -2.0 * oracle::kPi * m / 3.0);
      }
    const oracle::Matrix c = s1 * v - v * s1;
    double worst = 0.0;
    for (int n = n0 + 1; n < n1; ++n)
      for (int m = m0; m + 3 <= m1; ++m) worst = std::max(worst, c.col(idx(m, n)).norm());
    CHECK(worst <= 1e-12);
  }

  SECTION("wandering check passes over T^2") {
    auto m = assemble_model(lat);
    CHECK(m.decomposition.report().passed);
    CHECK(m.q() == 3);
    CHECK(m.lattice_dim() == 2);
  }

  SECTION("fibered V + V^dagger is diag(2 cos(t2 - 2 pi beta j)) and H is a Harper matrix") {
    auto m = assemble_model(lat);
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> d(0.0, kTwoPi);
    for (int s = 0; s < 8; ++s) {
      const double t1 = d(rng), t2 = d(rng);
      const Matrix fv = fiber_operator(m.observables.at("V"), {t1, t2});
      const Matrix sum = fv + fv.adjoint();
      for (int j = 0; j < 3; ++j) CHECK(std::abs(sum(j, j) - 2.0 * std::cos(t2 - kTwoPi * j / 3.0)) <= 1e-12);
      CHECK((sum - Matrix(sum.diagonal().asDiagonal())).norm() <= 1e-12);
      const Matrix h = fiber_operator(m.hamiltonian(), {t1, t2});
      CHECK((h - oracle::harper(1, 3, t1, t2)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  SECTION("invalid flux") { CHECK_THROWS_AS(hofstadter_model(3, 6), InvalidFlux); }
}

TEST_CASE("periodic_chain_model", "[models][chain]") {
  SECTION("free chain q = 1") {
    auto m = periodic_chain_model(1, {0.0});
    for (double t : {0.0, 0.4, 2.0, 5.5}) {
      const Matrix f = fiber_operator(m.hamiltonian(), {t});
      REQUIRE(f.rows() == 1);
      CHECK(f(0, 0).real() == Approx(2.0 * std::cos(t)).margin(1e-12));
      CHECK(std::abs(f(0, 0).imag()) <= 1e-12);
    }
  }

  SECTION("q = 2 with potential +1, -1") {
    auto m = periodic_chain_model(2, {1.0, -1.0});
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> d(0.0, kTwoPi);
    for (int s = 0; s < 16; ++s) {
      const double t = d(rng);
      // Direct 2 x 2 diagonalization of [[1, 1 + e^{-it}], [1 + e^{it}, -1]].
      oracle::Matrix h(2, 2);
      h << 1.0, 1.0 + std::polar(1.0, -t), 1.0 + std::polar(1.0, t), -1.0;
      const auto expected = oracle::eigenvalues(h);
      const auto got = oracle::eigenvalues(fiber_operator(m.hamiltonian(), {t}));
      CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(got(1) == Approx(std::sqrt(3.0 + 2.0 * std::cos(t))).margin(1e-12));
    }
  }

  SECTION("weighted trace vanishes for zero-sum potentials") {
    for (const auto& pot : {std::vector<double>{1.0, -1.0}, std::vector<double>{0.5, 1.5, -2.0}, std::vector<double>{0.0}}) {
      const int q = static_cast<int>(pot.size());
      auto m = periodic_chain_model(q, pot);
      TorusGrid grid(1, 32);
      Complex total = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) total += grid.weight() * fiber_operator(m.hamiltonian(), grid.node(i)).trace();
      CHECK(std::abs(total) <= 1e-12);
    }
  }

  SECTION("invalid inputs") {
    CHECK_THROWS_AS(periodic_chain_model(0, {}), std::invalid_argument);
    CHECK_THROWS_AS(periodic_chain_model(2, {1.0}), std::invalid_argument);
  }
}

TEST_CASE("every model hamiltonian is Hermitian and covariant", "[models][property]") {
  CHECK(mathieu_model(2, 5).hamiltonian().hermiticity_defect() <= 1e-12);
  CHECK(hofstadter_model(1, 4).hamiltonian().hermiticity_defect() <= 1e-12);
  CHECK(periodic_chain_model(3, {0.2, -0.1, 0.7}).hamiltonian().hermiticity_defect() <= 1e-12);
}

TEST_CASE("finite_group_model", "[models][finite]") {
  CHECK(finite_group_model({2}).dim == 2);
  CHECK(finite_group_model({3}).dim == 3);
  auto rep = finite_group_model({2, 3});
  CHECK(rep.dim == 6);
  CHECK_FALSE(check_finite_rep(rep).has_value());
  CHECK_THROWS_AS(finite_group_model({1}), std::invalid_argument);
}

#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "blochfiber/blochfiber.hpp"
#include "oracles.hpp"

using namespace blochfiber;
using Catch::Approx;

namespace {

std::vector<double> random_node(std::mt19937_64& rng, int N) {
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  std::vector<double> t;
  for (int j = 0; j < N; ++j) t.push_back(u(rng));
  return t;
}

Coefficients random_vector(std::mt19937_64& rng, int q, int N, int radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Coefficients c;
  for (int k = 0; k < q; ++k)
    for (const auto& b : cube_indices(N, radius)) c[{k, b}] = Complex(u(rng), u(rng));
  return c;
}

CovariantOperator random_table(std::mt19937_64& rng, int q, int N, int radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CovariantOperator op(q, N);
  for (int h = 0; h < q; ++h)
    for (int k = 0; k < q; ++k)
      for (const auto& b : cube_indices(N, radius)) op.add(h, k, b, Complex(u(rng), u(rng)));
  return op;
}

double table_distance(const CovariantOperator& a, const CovariantOperator& b) {
  double d = 0.0;
  for (const auto& [key, v] : a.table()) d = std::max(d, std::abs(v - b.coefficient(std::get<0>(key), std::get<1>(key), std::get<2>(key))));
  for (const auto& [key, v] : b.table()) d = std::max(d, std::abs(v - a.coefficient(std::get<0>(key), std::get<1>(key), std::get<2>(key))));
  return d;
}

}  // namespace

TEST_CASE("covariant_from_lattice reads hopping tables", "[transform][covariant]") {
  SECTION("Mathieu q=2 u, against a brute-force read-off") {
    auto m = mathieu_model(1, 2, 12);
    const auto& table = m.observables.at("u");
    // Brute force: u e_k = e_{k+1}; site n = h + 2 b.
    oracle::DenseMathieu d(-4, 5, 0.5);
    CovariantOperator expected(2, 1);
    for (int k = 0; k < 2; ++k) {
      oracle::Matrix e = oracle::Matrix::Zero(10, 1);
      e(k + 4, 0) = 1.0;
      oracle::Matrix img = d.u * e;
      for (int i = 0; i < 10; ++i)
        if (img(i, 0) != 0.0) {
          const int n = i - 4;
          expected.add(((n % 2) + 2) % 2, k, {(n - ((n % 2) + 2) % 2) / 2}, img(i, 0));
        }
    }
    CHECK(table.table().size() == 2);
    CHECK(table.coefficient(1, 0, {0}) == Complex(1.0));
    CHECK(table.coefficient(0, 1, {1}) == Complex(1.0));
    CHECK(table_distance(table, expected) == 0.0);
  }

  SECTION("a symmetry generator maps to delta_hk delta_{b,e_1}") {
    auto m = mathieu_model(1, 3, 12);
    auto cov = covariant_from_lattice(m.decomposition.generators().front(), m.decomposition);
    CHECK(table_distance(cov, CovariantOperator::symmetry_generator(3, 1, 0)) <= 1e-15);
  }

  SECTION("v is not covariant under w = u^2 at beta = 1/3") {
    TruncatedBasis basis(2, 1, 8);
    auto w = blochfiber::detail::chain_operator(basis, 2, [](int) { return Complex(1.0); });
    auto v = blochfiber::detail::chain_operator(basis, 0, [](int n) { return blochfiber::detail::flux_phase({1, 3}, n); });
    auto dec = make_decomposition({w}, blochfiber::detail::canonical_candidates(basis), 4);
    // Brute-force commutator [v, u^2] on a dense block.
    oracle::DenseMathieu d(-20, 20, 1.0 / 3.0);
    const oracle::Matrix u2 = d.u * d.u;
    const double brute = oracle::column_block_norm(d.v * u2 - u2 * d.v, 10, 30);
    CHECK(brute > 1.0);
    try {
      (void)covariant_from_lattice(v, dec);
      FAIL("expected NotCovariant");
    } catch (const NotCovariant& e) {
      CHECK(e.commutator_norm == Approx(brute).margin(1e-10));
    }
  }

  SECTION("hop range beyond the truncation") {
    auto lat = mathieu_lattice(1, 3, 12);
    auto m = assemble_model(lat);
    auto u = lat.observables.at("u");
    auto big = u;
    for (int s = 1; s < 12; ++s) big = big * u;  // u^12: 4 cells
    CHECK_THROWS_AS(covariant_from_lattice(big, m.decomposition), HopRangeExceeded);
  }
}

TEST_CASE("fiber_operator conventions", "[transform][fiber]") {
  auto m = mathieu_model(1, 3, 12);
  std::mt19937_64 rng(3);
  for (int n = 0; n < 8; ++n) {
    auto t = random_node(rng, 1);
    const Complex z = std::polar(1.0, t[0]);
    Matrix u_expected = Matrix::Zero(3, 3);
    u_expected(1, 0) = u_expected(2, 1) = 1.0;
    u_expected(0, 2) = z;
    CHECK((fiber_operator(m.observables.at("u"), t) - u_expected).norm() <= 1e-12);
    Matrix v_expected = Matrix::Zero(3, 3);
    for (int j = 0; j < 3; ++j) v_expected(j, j) = std::polar(1.0, -kTwoPi * j / 3.0);
    CHECK((fiber_operator(m.observables.at("v"), t) - v_expected).norm() <= 1e-12);
    CHECK((fiber_operator(CovariantOperator::symmetry_generator(3, 1, 0), t) - z * Matrix::Identity(3, 3)).norm() == 0.0);
  }
  auto hof = hofstadter_model(1, 3, 6);
  for (int n = 0; n < 8; ++n) {
    auto t = random_node(rng, 2);
    for (int j = 0; j < 2; ++j) {
      auto g = covariant_from_lattice(hof.decomposition.generators()[static_cast<std::size_t>(j)], hof.decomposition);
      CHECK((fiber_operator(g, t) - std::polar(1.0, t[static_cast<std::size_t>(j)]) * Matrix::Identity(3, 3)).norm() <= 1e-15);
    }
  }
}

TEST_CASE("compose_covariant realizes operator products", "[transform][compose]") {
  auto m = mathieu_model(1, 3, 12);
  const auto& u = m.observables.at("u");

  SECTION("u * u at t = 0") {
    const Matrix u0 = fiber_operator(u, {0.0});
    CHECK((fiber_operator(compose_covariant(u, u), {0.0}) - u0 * u0).norm() <= 1e-12);
  }

  SECTION("u * u^dagger is the identity table") {
    CHECK(table_distance(compose_covariant(u, u.adjoint()), CovariantOperator::identity(3, 1)) <= 1e-12);
  }

  SECTION("h * h against direct matrix squaring") {
    const auto& h = m.hamiltonian();
    auto h2 = compose_covariant(h, h);
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int n = 0; n < 8; ++n) {
      auto t = random_node(rng, 1);
      const Matrix f = fiber_operator(h, t);
      worst = std::max(worst, (fiber_operator(h2, t) - f * f).norm());
    }
    CHECK(worst <= 1e-12);
  }

  SECTION("hop range overflow") {
    std::mt19937_64 rng(9);
    CovariantOperator a = random_table(rng, 2, 1, 1);
    CovariantOperator capped(2, 1, 1);
    capped = capped + a;
    CHECK_THROWS_AS(compose_covariant(capped, capped), HopRangeExceeded);
  }
}

TEST_CASE("fibering is a *-homomorphism", "[transform][property]") {
  std::mt19937_64 rng(17);
  for (int N : {1, 2}) {
    for (int trial = 0; trial < 10; ++trial) {
      auto A = random_table(rng, 3, N, 1);
      auto B = random_table(rng, 3, N, 2);
      auto AB = compose_covariant(A, B);
      auto Ad = A.adjoint();
      for (int n = 0; n < 8; ++n) {
        auto t = random_node(rng, N);
        const Matrix fa = fiber_operator(A, t);
        REQUIRE((fiber_operator(AB, t) - fa * fiber_operator(B, t)).norm() <= 1e-12);
        REQUIRE((fiber_operator(Ad, t) - fa.adjoint()).norm() <= 1e-12);
      }
    }
  }
  CHECK(mathieu_model(1, 3, 12).hamiltonian().is_hermitian());
}

TEST_CASE("TorusGrid nodes and weights", "[transform][grid]") {
  TorusGrid g(2, 4);
  CHECK(g.size() == 16);
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) total += g.weight();
  CHECK(total == 1.0);
  CHECK(g.node(0) == std::vector<double>{0.0, 0.0});
  CHECK(g.node(1)[1] == Approx(kTwoPi / 4));
  CHECK(g.neighbour(3, 1) == 0);  // (0,3) -> (0,0)
  CHECK(g.neighbour(12, 0) == 0); // (3,0) -> (0,0)
  for (std::size_t i = 0; i < g.size(); ++i)
    for (double t : g.node(i)) CHECK(t < kTwoPi);
}

TEST_CASE("transform_vector examples", "[transform][vector]") {
  TorusGrid grid(1, 16);
  SECTION("psi_k is a constant unit field") {
    auto f = transform_vector({{{1, {0}}, 1.0}}, 3, grid);
    for (const auto& v : f.values) CHECK((v - Vector::Unit(3, 1)).norm() == 0.0);
  }
  SECTION("U^b psi_k carries e^{i b t}") {
    auto f = transform_vector({{{2, {3}}, 1.0}}, 3, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(std::abs(f.values[i](2) - std::polar(1.0, 3 * grid.node(i)[0])) <= 1e-15);
      CHECK(f.values[i](0) == Complex(0.0));
    }
  }
}

TEST_CASE("Parseval is exact for bandlimited vectors", "[transform][parseval][property]") {
  std::mt19937_64 rng(23);
  for (auto [N, L, radius] : {std::tuple{1, 16, 3}, std::tuple{1, 7, 3}, std::tuple{2, 8, 2}}) {
    TorusGrid grid(N, L);
    for (int s = 0; s < 100; ++s) {
      auto phi = random_vector(rng, 3, N, radius);
      double norm2 = 0.0;  // dense summation of |alpha|^2
      for (const auto& [key, v] : phi) norm2 += std::norm(v);
      auto field = transform_vector(phi, 3, grid);
      double quad = 0.0;
      for (const auto& v : field.values) quad += grid.weight() * v.squaredNorm();
      REQUIRE(std::abs(quad - norm2) <= 1e-12 * norm2);
    }
  }
}

TEST_CASE("inverse_transform", "[transform][inverse]") {
  SECTION("psi_0 round trip") {
    TorusGrid grid(1, 8);
    auto back = inverse_transform(transform_vector({{{0, {0}}, 1.0}}, 2, grid));
    REQUIRE(back.coeffs.size() == 1);
    CHECK(std::abs(back.coeffs.at({0, {0}}) - 1.0) <= 1e-15);
    CHECK_FALSE(back.aliasing_warning);
  }
  SECTION("random vectors of radius 3 on L = 16") {
    std::mt19937_64 rng(29);
    TorusGrid grid(1, 16);
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      auto phi = random_vector(rng, 3, 1, 3);
      auto back = inverse_transform(transform_vector(phi, 3, grid));
      CHECK_FALSE(back.aliasing_warning);
      for (const auto& [key, v] : phi) worst = std::max(worst, std::abs(v - back.coeffs[key]));
      for (const auto& [key, v] : back.coeffs)
        if (!phi.count(key)) worst = std::max(worst, std::abs(v));
    }
    CHECK(worst <= 1e-12);
  }
  SECTION("radius 9 on L = 8 aliases") {
    std::mt19937_64 rng(31);
    auto phi = random_vector(rng, 1, 1, 9);
    auto back = inverse_transform(transform_vector(phi, 1, TorusGrid(1, 8)));
    CHECK(back.aliasing_warning);
    CHECK(back.residual > 1e-8);
  }
}

TEST_CASE("module_norm", "[transform][module]") {
  SECTION("psi_0") {
    auto n = module_norm({{{0, {0}}, 1.0}}, 1, TorusGrid(1, 8));
    CHECK(n.sup == Approx(1.0));
    CHECK(n.hilbert == Approx(1.0));
  }
  SECTION("psi_0 + U psi_0 peaks at t = 0") {
    Coefficients c{{{0, {0}}, 1.0}, {{0, {1}}, 1.0}};
    CHECK(module_norm(c, 1, TorusGrid(1, 8)).sup == Approx(2.0).margin(1e-15));
    CHECK(module_norm(c, 1, TorusGrid(1, 10)).sup == Approx(2.0).margin(1e-15));
    // Fine scan of |1 + e^{it}| never exceeds the closed-form maximum.
    double scan = 0.0;
    for (int i = 0; i < 10000; ++i) scan = std::max(scan, std::abs(1.0 + std::polar(1.0, kTwoPi * i / 10000)));
    CHECK(scan == Approx(2.0));
    // psi_0 - U psi_0 peaks at t = pi, which an odd grid misses.
    Coefficients d{{{0, {0}}, 1.0}, {{0, {1}}, -1.0}};
    CHECK(module_norm(d, 1, TorusGrid(1, 8)).sup == Approx(2.0).margin(1e-15));
    CHECK(module_norm(d, 1, TorusGrid(1, 7)).sup < 2.0);
  }
  SECTION("Hilbert norm is a lower bound and refinement does not decrease the sup") {
    std::mt19937_64 rng(37);
    for (int s = 0; s < 100; ++s) {
      auto phi = random_vector(rng, 2, 1, 2);
      auto coarse = module_norm(phi, 2, TorusGrid(1, 8));
      auto fine = module_norm(phi, 2, TorusGrid(1, 16));
      REQUIRE(coarse.hilbert <= fine.sup + 1e-12);
      REQUIRE(coarse.sup <= fine.sup + 1e-12);
    }
  }
}

TEST_CASE("haar_moment_check", "[transform][haar]") {
  auto m = mathieu_model(1, 3, 12);
  CHECK(haar_moment_check(m.decomposition, 0, {0}) == 0.0);
  for (int k = 0; k < 3; ++k) CHECK(haar_moment_check(m.decomposition, k, {1}) <= 1e-12);
  auto h = hofstadter_model(1, 3, 6);
  // Direct inner product on the truncation: (delta_{(0,0)}, S1 S2 delta_{(0,0)}) = 0.
  CHECK(h.decomposition.wandering_vectors()[0].dot(h.decomposition.orbit(0, {1, 1})) == Complex(0.0));
  CHECK(haar_moment_check(h.decomposition, 0, {1, 1}) <= 1e-12);
  CHECK_THROWS_AS(haar_moment_check(h.decomposition, 0, {7, 0}), WindowTooLarge);
}

TEST_CASE("fiber spectra do not depend on the wandering frame", "[transform][frame]") {
  auto lat = mathieu_lattice(1, 3, 12);
  auto canonical = assemble_model(lat);
  std::vector<Vector> shifted{lat.basis.unit_vector(1, {0}), lat.basis.unit_vector(2, {0}), lat.basis.unit_vector(0, {1})};
  auto dec = make_decomposition(lat.generators, shifted, 6);
  auto h_shifted = covariant_from_lattice(lat.observables.at("hamiltonian"), dec);
  TorusGrid grid(1, 32);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto t = grid.node(i);
    auto a = oracle::eigenvalues(fiber_operator(canonical.hamiltonian(), t));
    auto b = oracle::eigenvalues(fiber_operator(h_shifted, t));
    REQUIRE((a - b).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

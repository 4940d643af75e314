#pragma once

// Concrete physical frames: each model is a lattice realization (generators,
// wandering candidates, observables as lattice operators) that is verified and
// fibered into a ModelInstance.

#include <numeric>
#include <optional>
#include <string>

#include "blochfiber/finite_bf.hpp"
#include "blochfiber/transform.hpp"

namespace blochfiber {

struct Flux {
  int p = 0;
  int q = 1;
  double beta() const { return static_cast<double>(p) / q; }
};

inline Flux checked_flux(int p, int q) {
  if (q < 1) throw InvalidFlux("flux denominator q must be >= 1, got " + std::to_string(q));
  if (std::gcd(p, q) != 1)
    throw InvalidFlux("flux " + std::to_string(p) + "/" + std::to_string(q) + " is not reduced (gcd = " +
                      std::to_string(std::gcd(p, q)) + ")");
  return {p, q};
}

/// Unverified lattice data of a model.
struct ModelLattice {
  std::string name;
  TruncatedBasis basis;
  std::vector<LatticeOperator> generators;
  std::vector<Vector> candidates;
  std::map<std::string, LatticeOperator> observables;
  std::optional<Flux> flux;
  std::string metadata;
};

struct ModelInstance {
  std::string name;
  WanderingDecomposition decomposition;
  std::map<std::string, CovariantOperator> observables;
  std::map<std::string, LatticeOperator> lattice_observables;
  std::optional<Flux> flux;
  std::string metadata;

  const CovariantOperator& hamiltonian() const { return observables.at("hamiltonian"); }
  int q() const { return decomposition.q(); }
  int lattice_dim() const { return decomposition.lattice_dim(); }
};

/// Default verification window: half the truncation radius.
inline int default_window(const TruncatedBasis& basis) { return basis.radius() / 2; }

inline ModelInstance assemble_model(ModelLattice lat) {
  const int window = default_window(lat.basis);
  WanderingDecomposition dec = make_decomposition(lat.generators, lat.candidates, window);
  std::map<std::string, CovariantOperator> cov;
  for (const auto& [name, op] : lat.observables) cov.emplace(name, covariant_from_lattice(op, dec));
  return ModelInstance{std::move(lat.name), std::move(dec),        std::move(cov),
                       std::move(lat.observables), lat.flux, std::move(lat.metadata)};
}

namespace detail {

inline int floor_div(int n, int q) { return (n >= 0) ? n / q : -((-n + q - 1) / q); }
inline int floor_mod(int n, int q) { return n - q * floor_div(n, q); }

/// Site n of a period-q chain <-> basis label (n mod q, floor(n / q)).
struct ChainSites {
  const TruncatedBasis& basis;
  int site(std::size_t i) const {
    auto [k, a] = basis.label(i);
    return k + basis.q() * a[0];
  }
  std::optional<std::size_t> index(int n) const {
    const int q = basis.q();
    MultiIndex a{floor_div(n, q)};
    if (!basis.contains(a)) return std::nullopt;
    return basis.index(floor_mod(n, q), a);
  }
};

/// Operator e_n -> amp(n) e_{n + step}; amplitudes leaving the box are dropped.
template <class Amp>
LatticeOperator chain_operator(const TruncatedBasis& basis, int step, Amp&& amp) {
  ChainSites sites{basis};
  std::vector<LatticeOperator::Triplet> t;
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const int n = sites.site(i);
    if (auto j = sites.index(n + step))
      t.emplace_back(static_cast<Eigen::Index>(*j), static_cast<Eigen::Index>(i), amp(n));
  }
  return LatticeOperator::from_triplets(basis, t);
}

inline std::vector<Vector> canonical_candidates(const TruncatedBasis& basis) {
  std::vector<Vector> c;
  for (int k = 0; k < basis.q(); ++k) c.push_back(basis.unit_vector(k, MultiIndex(static_cast<std::size_t>(basis.lattice_dim()), 0)));
  return c;
}

// e^{-i 2 pi p n / q} evaluated on the reduced residue so equal phases are bit-identical.
inline Complex flux_phase(const Flux& f, int n) {
  return std::polar(1.0, -kTwoPi * floor_mod(f.p * n, f.q) / f.q);
}

}  // namespace detail

/// Mathieu algebra on l^2(Z) (Fourier basis): u e_n = e_{n+1},
/// v e_n = e^{-i 2 pi n p/q} e_n, symmetry w = u^q, wandering {e_0..e_{q-1}},
/// h = u + u^dag + v + v^dag.
inline ModelLattice mathieu_lattice(int p, int q, int M) {
  Flux flux = checked_flux(p, q);
  if (M < 3) throw std::invalid_argument("mathieu_model: truncation M must be >= 3");
  TruncatedBasis basis(q, 1, M);
  auto u = detail::chain_operator(basis, 1, [](int) { return Complex(1.0); });
  auto v = detail::chain_operator(basis, 0, [&](int n) { return detail::flux_phase(flux, n); });
  auto w = detail::chain_operator(basis, q, [](int) { return Complex(1.0); });
  auto h = u + u.adjoint() + v + v.adjoint();
  return ModelLattice{"mathieu",
                      basis,
                      {w},
                      detail::canonical_candidates(basis),
                      {{"u", u}, {"v", v}, {"hamiltonian", h}},
                      flux,
                      "Fourier basis e_n = U^a psi_k with n = k + q a; symmetry w = u^q"};
}

inline ModelInstance mathieu_model(int p, int q, int M = 12) { return assemble_model(mathieu_lattice(p, q, M)); }

/// The q x q matrices u(t), v(t) in closed form: ones on the subdiagonal with
/// e^{it} in the top-right corner, and diag(e^{-i 2 pi p j / q}).
inline std::pair<Matrix, Matrix> mathieu_fiber_closed_form(int p, int q, double t) {
  Flux flux = checked_flux(p, q);
  Matrix u = Matrix::Zero(q, q);
  Matrix v = Matrix::Zero(q, q);
  for (int j = 0; j + 1 < q; ++j) u(j + 1, j) = 1.0;
  u(0, q - 1) += std::polar(1.0, t);
  for (int j = 0; j < q; ++j) v(j, j) = detail::flux_phase(flux, j);
  return {u, v};
}

/// Hofstadter representation on l^2(Z^2), Landau gauge:
///   (U psi)(m,n) = psi(m-1,n),  (V psi)(m,n) = e^{-i 2 pi beta m} psi(m,n-1),
///   S_1 = shift by (q,0), S_2 = shift by (0,1), wandering delta_{(j,0)}.
inline ModelLattice hofstadter_lattice(int p, int q, int M) {
  Flux flux = checked_flux(p, q);
  if (M < 3) throw std::invalid_argument("hofstadter_model: truncation M must be >= 3");
  TruncatedBasis basis(q, 2, M);
  // Site (m, n) <-> label (m mod q, (floor(m/q), n)).
  auto build = [&](int dm, int dn, auto amp) {
    std::vector<LatticeOperator::Triplet> t;
    for (std::size_t i = 0; i < basis.dim(); ++i) {
      auto [k, a] = basis.label(i);
      const int m = k + q * a[0];
      const int n = a[1];
      MultiIndex target{detail::floor_div(m + dm, q), n + dn};
      if (!basis.contains(target)) continue;
      t.emplace_back(static_cast<Eigen::Index>(basis.index(detail::floor_mod(m + dm, q), target)),
                     static_cast<Eigen::Index>(i), amp(m));
    }
    return LatticeOperator::from_triplets(basis, t);
  };
  auto one = [](int) { return Complex(1.0); };
  auto U = build(1, 0, one);
  auto V = build(0, 1, [&](int m) { return detail::flux_phase(flux, m); });
  auto S1 = build(q, 0, one);
  auto S2 = build(0, 1, one);
  auto H = U + U.adjoint() + V + V.adjoint();
  return ModelLattice{"hofstadter",
                      basis,
                      {S1, S2},
                      detail::canonical_candidates(basis),
                      {{"U", U}, {"V", V}, {"hamiltonian", H}},
                      flux,
                      "Landau gauge, phase on the y-hop; site (m,n) = (k + q a_1, a_2)"};
}

inline ModelInstance hofstadter_model(int p, int q, int M = 6) {
  return assemble_model(hofstadter_lattice(p, q, M));
}

/// Nearest-neighbour chain with a period-q on-site potential; symmetry is
/// translation by q sites.
inline ModelLattice periodic_chain_lattice(int q, const std::vector<double>& potential, int M) {
  if (q < 1) throw std::invalid_argument("periodic_chain_model: q must be >= 1");
  if (static_cast<int>(potential.size()) != q)
    throw std::invalid_argument("periodic_chain_model: potential must have q entries");
  if (M < 3) throw std::invalid_argument("periodic_chain_model: truncation M must be >= 3");
  TruncatedBasis basis(q, 1, M);
  auto shift = detail::chain_operator(basis, 1, [](int) { return Complex(1.0); });
  auto pot = detail::chain_operator(basis, 0, [&](int n) {
    return Complex(potential[static_cast<std::size_t>(detail::floor_mod(n, q))]);
  });
  auto translation = detail::chain_operator(basis, q, [](int) { return Complex(1.0); });
  auto h = shift + shift.adjoint() + pot;
  return ModelLattice{"chain",
                      basis,
                      {translation},
                      detail::canonical_candidates(basis),
                      {{"shift", shift}, {"hamiltonian", h}},
                      std::nullopt,
                      "site n = k + q a; symmetry = translation by q sites"};
}

inline ModelInstance periodic_chain_model(int q, const std::vector<double>& potential, int M = 12) {
  return assemble_model(periodic_chain_lattice(q, potential, M));
}

/// Regular representation of Z_{p_1} x ... x Z_{p_N} on C^{|F|}.
inline FiniteGroupRep finite_group_model(const std::vector<int>& orders) {
  if (orders.empty()) throw std::invalid_argument("finite_group_model: no group factors");
  for (int p : orders)
    if (p < 2) throw std::invalid_argument("finite_group_model: every order must be >= 2");
  const auto elements = detail::dual_labels(orders);
  FiniteGroupRep rep{orders, static_cast<int>(elements.size()), {}};
  auto position = [&](const std::vector<int>& g) {
    std::size_t i = 0;
    for (std::size_t j = 0; j < g.size(); ++j) i = i * static_cast<std::size_t>(orders[j]) + static_cast<std::size_t>(g[j]);
    return static_cast<Eigen::Index>(i);
  };
  for (std::size_t j = 0; j < orders.size(); ++j) {
    Matrix u = Matrix::Zero(rep.dim, rep.dim);
    for (const auto& g : elements) {
      auto next = g;
      next[j] = (next[j] + 1) % orders[j];
      u(position(next), position(g)) = 1.0;
    }
    rep.generators.push_back(std::move(u));
  }
  return rep;
}

}  // namespace blochfiber

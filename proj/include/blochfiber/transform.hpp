#pragma once

// Generalized Bloch-Floquet transform for Z^N-algebras with a finite
// wandering system {psi_0 .. psi_{q-1}}.
//
// Conventions: a vector phi = sum alpha_{k,b} U^b psi_k is sent to the
// q-vector field f_k(t) = sum_b alpha_{k,b} e^{i b.t}, and a covariant
// operator with O psi_k = sum_{h,b} alpha^{(k)}_{h,b} U^b psi_h is sent to
// the fiber matrix pi_t(O)_{hk} = sum_b alpha^{(k)}_{h,b} e^{i b.t}.
// Torus nodes are t = 2 pi l / L, l = 0..L-1, with weight L^{-N}.

#include <climits>
#include <map>
#include <tuple>

#include "blochfiber/hilbert.hpp"

namespace blochfiber {

class WanderingDecomposition {
 public:
  WanderingDecomposition(MonomialAction action, std::vector<Vector> wandering, WanderingReport report)
      : action_(std::move(action)), wandering_(std::move(wandering)), report_(std::move(report)) {
    for (const auto& v : wandering_) spread_ = std::max(spread_, support_radius(basis(), v));
  }

  const TruncatedBasis& basis() const { return action_.basis(); }
  const MonomialAction& action() const { return action_; }
  const std::vector<LatticeOperator>& generators() const { return action_.generators(); }
  const std::vector<Vector>& wandering_vectors() const { return wandering_; }
  const WanderingReport& report() const { return report_; }
  int q() const { return static_cast<int>(wandering_.size()); }
  int lattice_dim() const { return static_cast<int>(action_.count()); }
  int window() const { return report_.window; }
  /// Largest |a| such that U^a psi_k stays inside the truncation.
  int safe_window() const {
    int hop = std::max(1, action_.hop_range());
    return (basis().radius() - spread_) / hop;
  }

  /// U^a psi_k
  Vector orbit(int k, const MultiIndex& a) const {
    return action_.apply(a, wandering_.at(static_cast<std::size_t>(k)));
  }

 private:
  MonomialAction action_;
  std::vector<Vector> wandering_;
  WanderingReport report_;
  int spread_ = 0;
};

/// Verifies the wandering property and pairwise commutation of the generators.
inline WanderingDecomposition make_decomposition(std::vector<LatticeOperator> generators,
                                                 std::vector<Vector> wandering, int window,
                                                 double tol = kExactTol) {
  for (std::size_t i = 0; i < generators.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double c = commutator_norm(generators[i], generators[j]);
      if (c > tol)
        throw InvariantViolation("generators U_" + std::to_string(j + 1) + ", U_" + std::to_string(i + 1) +
                                 " do not commute (norm " + std::to_string(c) + ")");
    }
  WanderingReport rep = verify_wandering(generators, wandering, window, tol);
  if (!rep.passed)
    throw InvariantViolation("wandering check failed: max violation " + std::to_string(rep.max_violation) +
                             ", cyclic defect " + std::to_string(rep.cyclic_defect));
  return WanderingDecomposition(MonomialAction(std::move(generators)), std::move(wandering), std::move(rep));
}

/// Hopping table alpha^{(k)}_{h,b} of an operator commuting with the symmetry.
class CovariantOperator {
 public:
  using Key = std::tuple<int, int, MultiIndex>;  // (h, k, b)

  CovariantOperator(int q, int N, int radius_cap = INT_MAX) : q_(q), n_(N), cap_(radius_cap) {
    if (q < 1 || N < 1) throw std::invalid_argument("CovariantOperator: q, N must be >= 1");
  }

  static CovariantOperator identity(int q, int N, int radius_cap = INT_MAX) {
    CovariantOperator op(q, N, radius_cap);
    for (int k = 0; k < q; ++k) op.add(k, k, MultiIndex(static_cast<std::size_t>(N), 0), 1.0);
    return op;
  }

  /// Table of the symmetry generator U_j: alpha^{(k)}_{h,b} = delta_hk delta_{b,e_j}.
  static CovariantOperator symmetry_generator(int q, int N, int j, int radius_cap = INT_MAX) {
    CovariantOperator op(q, N, radius_cap);
    for (int k = 0; k < q; ++k) op.add(k, k, unit_index(N, j), 1.0);
    return op;
  }

  int q() const { return q_; }
  int lattice_dim() const { return n_; }
  int radius_cap() const { return cap_; }
  const std::map<Key, Complex>& table() const { return table_; }

  int hop_range() const {
    int r = 0;
    for (const auto& [key, v] : table_) r = std::max(r, sup_norm(std::get<2>(key)));
    return r;
  }

  Complex coefficient(int h, int k, const MultiIndex& b) const {
    auto it = table_.find({h, k, b});
    return it == table_.end() ? Complex(0.0) : it->second;
  }

  void add(int h, int k, MultiIndex b, Complex value) {
    if (h < 0 || h >= q_ || k < 0 || k >= q_ || static_cast<int>(b.size()) != n_)
      throw std::out_of_range("CovariantOperator::add: index out of range");
    Key key{h, k, std::move(b)};
    Complex& slot = table_[key];
    slot += value;
    if (slot == Complex(0.0)) table_.erase(key);
  }

  /// alpha^dagger{(k)}_{h,b} = conj(alpha^{(h)}_{k,-b})
  CovariantOperator adjoint() const {
    CovariantOperator out(q_, n_, cap_);
    for (const auto& [key, v] : table_) {
      const auto& [h, k, b] = key;
      out.add(k, h, -b, std::conj(v));
    }
    return out;
  }

  /// Largest entrywise deviation between the table and its adjoint.
  double hermiticity_defect() const {
    double d = 0.0;
    CovariantOperator adj = adjoint();
    for (const auto& [key, v] : table_) d = std::max(d, std::abs(v - adj.coefficient(std::get<0>(key), std::get<1>(key), std::get<2>(key))));
    for (const auto& [key, v] : adj.table_) d = std::max(d, std::abs(v - coefficient(std::get<0>(key), std::get<1>(key), std::get<2>(key))));
    return d;
  }

  bool is_hermitian(double tol = kExactTol) const { return hermiticity_defect() <= tol; }

  friend CovariantOperator operator+(const CovariantOperator& a, const CovariantOperator& b) {
    require_compatible(a, b);
    CovariantOperator out = a;
    out.cap_ = std::min(a.cap_, b.cap_);
    for (const auto& [key, v] : b.table_) out.add(std::get<0>(key), std::get<1>(key), std::get<2>(key), v);
    return out;
  }

  friend CovariantOperator operator*(Complex c, const CovariantOperator& a) {
    CovariantOperator out(a.q_, a.n_, a.cap_);
    for (const auto& [key, v] : a.table_) out.add(std::get<0>(key), std::get<1>(key), std::get<2>(key), c * v);
    return out;
  }

  static void require_compatible(const CovariantOperator& a, const CovariantOperator& b) {
    if (a.q_ != b.q_ || a.n_ != b.n_) throw BasisMismatch("covariant operators have different (q, N)");
  }

 private:
  int q_, n_, cap_;
  std::map<Key, Complex> table_;
};

/// Table of the product AB: alpha^{(k)}_{h,b} = sum_{m,c} A^{(m)}_{h,c} B^{(k)}_{m,b-c}.
inline CovariantOperator compose_covariant(const CovariantOperator& a, const CovariantOperator& b) {
  CovariantOperator::require_compatible(a, b);
  CovariantOperator out(a.q(), a.lattice_dim(), std::min(a.radius_cap(), b.radius_cap()));
  for (const auto& [kb, vb] : b.table()) {
    const auto& [m, k, d] = kb;
    for (const auto& [ka, va] : a.table()) {
      const auto& [h, m2, c] = ka;
      if (m2 != m) continue;
      out.add(h, k, c + d, va * vb);
    }
  }
  if (out.hop_range() > out.radius_cap())
    throw HopRangeExceeded("compose_covariant: hop range " + std::to_string(out.hop_range()) +
                           " exceeds truncation radius " + std::to_string(out.radius_cap()));
  return out;
}

/// Extracts alpha^{(k)}_{h,b} = (U^b psi_h ; O psi_k) for an operator O
/// commuting with every symmetry generator.
inline CovariantOperator covariant_from_lattice(const LatticeOperator& op, const WanderingDecomposition& dec) {
  LatticeOperator::require_same_basis(op, dec.generators().front());
  const int M = dec.basis().radius();
  const int window = dec.window();
  if (2 * op.hop_range() > M - window)
    throw HopRangeExceeded("covariant_from_lattice: hop range " + std::to_string(op.hop_range()) +
                           " too large for truncation M=" + std::to_string(M) + " and window " +
                           std::to_string(window));
  for (std::size_t j = 0; j < dec.generators().size(); ++j) {
    double c = commutator_norm(op, dec.generators()[j]);
    if (c > kNumericTol)
      throw NotCovariant("operator does not commute with symmetry generator U_" + std::to_string(j + 1) +
                             " (commutator norm " + std::to_string(c) + ")",
                         c);
  }
  const int q = dec.q();
  const int N = dec.lattice_dim();
  CovariantOperator out(q, N, M);
  const auto shifts = cube_indices(N, window);
  std::vector<Vector> orbit;
  orbit.reserve(static_cast<std::size_t>(q) * shifts.size());
  for (int h = 0; h < q; ++h)
    for (const auto& b : shifts) orbit.push_back(dec.orbit(h, b));
  for (int k = 0; k < q; ++k) {
    const Vector image = op.apply(dec.wandering_vectors()[static_cast<std::size_t>(k)]);
    double captured = 0.0;
    for (int h = 0; h < q; ++h)
      for (std::size_t s = 0; s < shifts.size(); ++s) {
        Complex alpha = orbit[static_cast<std::size_t>(h) * shifts.size() + s].dot(image);
        captured += std::norm(alpha);
        if (std::abs(alpha) > 1e-13) out.add(h, k, shifts[s], alpha);
      }
    if (std::abs(captured - image.squaredNorm()) > kNumericTol * std::max(1.0, image.squaredNorm()))
      throw HopRangeExceeded("covariant_from_lattice: image of psi_" + std::to_string(k) +
                             " is not resolved inside the window");
  }
  return out;
}

/// pi_t(O)_{hk} = sum_b alpha^{(k)}_{h,b} e^{i b.t}
inline Matrix fiber_operator(const CovariantOperator& cov, const std::vector<double>& t) {
  if (static_cast<int>(t.size()) != cov.lattice_dim())
    throw std::invalid_argument("fiber_operator: torus point has wrong dimension");
  Matrix f = Matrix::Zero(cov.q(), cov.q());
  for (const auto& [key, v] : cov.table()) {
    const auto& [h, k, b] = key;
    f(h, k) += v * plane_wave(b, t);
  }
  return f;
}

class TorusGrid {
 public:
  TorusGrid(int N, int L) : n_(N), l_(L) {
    if (N < 1 || L < 1) throw std::invalid_argument("TorusGrid: N, L must be >= 1");
    size_ = 1;
    for (int j = 0; j < N; ++j) size_ *= static_cast<std::size_t>(L);
  }

  int lattice_dim() const { return n_; }
  int points() const { return l_; }
  std::size_t size() const { return size_; }
  double weight() const { return 1.0 / static_cast<double>(size_); }

  /// Integer coordinates l of node i (last coordinate fastest).
  std::vector<int> coords(std::size_t i) const {
    std::vector<int> l(static_cast<std::size_t>(n_));
    for (int j = n_ - 1; j >= 0; --j) {
      l[static_cast<std::size_t>(j)] = static_cast<int>(i % static_cast<std::size_t>(l_));
      i /= static_cast<std::size_t>(l_);
    }
    return l;
  }

  std::size_t index(const std::vector<int>& l) const {
    std::size_t i = 0;
    for (int x : l) i = i * static_cast<std::size_t>(l_) + static_cast<std::size_t>(((x % l_) + l_) % l_);
    return i;
  }

  std::vector<double> node(std::size_t i) const {
    std::vector<double> t;
    for (int x : coords(i)) t.push_back(kTwoPi * x / l_);
    return t;
  }

  /// Periodic neighbour of node i one step along direction j.
  std::size_t neighbour(std::size_t i, int j, int step = 1) const {
    auto l = coords(i);
    l[static_cast<std::size_t>(j)] += step;
    return index(l);
  }

 private:
  int n_, l_;
  std::size_t size_ = 1;
};

/// One value per grid node, in node order.
template <class Value>
struct FiberedSamples {
  TorusGrid grid;
  std::vector<Value> values;
};

template <class Field>
auto sample_field(const TorusGrid& grid, Field&& field) {
  using Value = std::decay_t<decltype(field(std::vector<double>{}))>;
  FiberedSamples<Value> s{grid, std::vector<Value>(grid.size())};
  parallel_for(grid.size(), [&](std::size_t i) { s.values[i] = field(grid.node(i)); });
  return s;
}

inline FiberedSamples<Matrix> fiber_field(const CovariantOperator& cov, const TorusGrid& grid) {
  return sample_field(grid, [&](const std::vector<double>& t) { return fiber_operator(cov, t); });
}

/// f_k(t) = sum_b alpha_{k,b} e^{i b.t}
inline Vector transform_at(const Coefficients& coeffs, int q, const std::vector<double>& t) {
  Vector f = Vector::Zero(q);
  for (const auto& [key, alpha] : coeffs) {
    if (key.first < 0 || key.first >= q) throw std::out_of_range("transform: wandering index out of range");
    f(key.first) += alpha * plane_wave(key.second, t);
  }
  return f;
}

inline FiberedSamples<Vector> transform_vector(const Coefficients& coeffs, int q, const TorusGrid& grid) {
  return sample_field(grid, [&](const std::vector<double>& t) { return transform_at(coeffs, q, t); });
}

struct InverseTransform {
  Coefficients coeffs;
  double residual = 0.0;
  bool aliasing_warning = false;
};

/// Discrete Fourier inversion of each component keeping |b_j| < L/2; the
/// residual is the max deviation after re-sampling the recovered vector.
inline InverseTransform inverse_transform(const FiberedSamples<Vector>& samples) {
  const auto& grid = samples.grid;
  if (samples.values.size() != grid.size())
    throw std::invalid_argument("inverse_transform: sample count does not match grid");
  const int q = samples.values.empty() ? 0 : static_cast<int>(samples.values.front().size());
  const auto freqs = cube_indices(grid.lattice_dim(), (grid.points() - 1) / 2);
  std::vector<Vector> amp(freqs.size(), Vector::Zero(q));
  parallel_for(freqs.size(), [&](std::size_t f) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      amp[f] += std::conj(plane_wave(freqs[f], grid.node(i))) * samples.values[i];
    amp[f] *= grid.weight();
  });
  InverseTransform out;
  for (std::size_t f = 0; f < freqs.size(); ++f)
    for (int k = 0; k < q; ++k)
      if (std::abs(amp[f](k)) > 1e-13) out.coeffs[{k, freqs[f]}] = amp[f](k);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Vector back = transform_at(out.coeffs, q, grid.node(i));
    out.residual = std::max(out.residual, (back - samples.values[i]).cwiseAbs().maxCoeff());
  }
  out.aliasing_warning = out.residual > kNumericTol;
  return out;
}

struct ModuleNorm {
  double sup = 0.0;      // max over grid nodes of ||phi(t)||
  double hilbert = 0.0;  // ||phi||_H, a lower bound for the exact module norm
};

inline ModuleNorm module_norm(const Coefficients& coeffs, int q, const TorusGrid& grid) {
  ModuleNorm n;
  for (const auto& [key, alpha] : coeffs) n.hilbert += std::norm(alpha);
  n.hilbert = std::sqrt(n.hilbert);
  auto field = transform_vector(coeffs, q, grid);
  for (const auto& v : field.values) n.sup = std::max(n.sup, v.norm());
  return n;
}

/// |(psi_k ; U^a psi_k) - delta_{a,0}|
inline double haar_moment_check(const WanderingDecomposition& dec, int k, const MultiIndex& a) {
  if (k < 0 || k >= dec.q()) throw std::out_of_range("haar_moment_check: wandering index out of range");
  if (sup_norm(a) > dec.safe_window())
    throw WindowTooLarge("haar_moment_check: |a| = " + std::to_string(sup_norm(a)) + " exceeds safe window " +
                         std::to_string(dec.safe_window()));
  const Complex moment = dec.wandering_vectors()[static_cast<std::size_t>(k)].dot(dec.orbit(k, a));
  const double expected = sup_norm(a) == 0 ? 1.0 : 0.0;
  return std::abs(moment - expected);
}

}  // namespace blochfiber

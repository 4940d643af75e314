#pragma once

// Truncated lattice Hilbert spaces, sparse operators on them, and the
// algebraic checks (commutators, wandering property, filtration seminorms).
//
// The computational space is spanned by vectors indexed by (k, a) with
// k in {0..q-1} and a in Z^N, max_j |a_j| <= M. For a model with wandering
// system {psi_k} the basis vector (k, a) is U^a psi_k.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "blochfiber/core.hpp"

namespace blochfiber {

class TruncatedBasis {
 public:
  static constexpr std::size_t kDefaultDimensionCap = 1'000'000;

  TruncatedBasis(int q, int N, int M, std::size_t dimension_cap = kDefaultDimensionCap)
      : q_(q), n_(N), m_(M) {
    if (q < 1 || N < 1 || M < 1)
      throw std::invalid_argument("TruncatedBasis: q, N, M must all be >= 1");
    side_ = static_cast<std::size_t>(2 * M + 1);
    cells_ = 1;
    // Checked multiplication: (2M+1)^N can overflow long before the cap matters.
    for (int j = 0; j < N; ++j) {
      if (cells_ > dimension_cap / side_) throw dimension_error(dimension_cap);
      cells_ *= side_;
    }
    if (cells_ > dimension_cap / static_cast<std::size_t>(q)) throw dimension_error(dimension_cap);
    dim_ = cells_ * static_cast<std::size_t>(q);
  }

  int q() const { return q_; }
  int lattice_dim() const { return n_; }
  int radius() const { return m_; }
  std::size_t dim() const { return dim_; }
  std::size_t cells() const { return cells_; }

  bool contains(const MultiIndex& a) const {
    return static_cast<int>(a.size()) == n_ && sup_norm(a) <= m_;
  }

  std::size_t index(int k, const MultiIndex& a) const {
    if (k < 0 || k >= q_ || !contains(a))
      throw std::out_of_range("TruncatedBasis::index: (" + std::to_string(k) + ", " +
                              blochfiber::to_string(a) + ") outside truncation");
    std::size_t cell = 0;
    for (int x : a) cell = cell * side_ + static_cast<std::size_t>(x + m_);
    return static_cast<std::size_t>(k) * cells_ + cell;
  }

  std::pair<int, MultiIndex> label(std::size_t i) const {
    if (i >= dim_) throw std::out_of_range("TruncatedBasis::label: index out of range");
    int k = static_cast<int>(i / cells_);
    std::size_t cell = i % cells_;
    MultiIndex a(static_cast<std::size_t>(n_));
    for (int j = n_ - 1; j >= 0; --j) {
      a[static_cast<std::size_t>(j)] = static_cast<int>(cell % side_) - m_;
      cell /= side_;
    }
    return {k, std::move(a)};
  }

  /// Lattice offset sup-norm |a| of basis index i.
  int offset_norm(std::size_t i) const { return sup_norm(label(i).second); }

  Vector unit_vector(int k, const MultiIndex& a) const {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
    v(static_cast<Eigen::Index>(index(k, a))) = 1.0;
    return v;
  }

  /// Indices whose offset satisfies |a| <= radius, ascending.
  std::vector<std::size_t> interior(int radius) const {
    std::vector<std::size_t> out;
    if (radius < 0) return out;
    for (int k = 0; k < q_; ++k)
      for (const auto& a : cube_indices(n_, std::min(radius, m_))) out.push_back(index(k, a));
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const TruncatedBasis& x, const TruncatedBasis& y) {
    return x.q_ == y.q_ && x.n_ == y.n_ && x.m_ == y.m_;
  }

 private:
  DimensionOverflow dimension_error(std::size_t cap) const {
    return DimensionOverflow("TruncatedBasis: q*(2M+1)^N exceeds dimension cap " +
                             std::to_string(cap));
  }

  int q_, n_, m_;
  std::size_t side_ = 0, cells_ = 0, dim_ = 0;
};

inline TruncatedBasis make_basis(int q, int N, int M,
                                 std::size_t dimension_cap = TruncatedBasis::kDefaultDimensionCap) {
  return TruncatedBasis(q, N, M, dimension_cap);
}

/// Sparse complex operator on a truncated basis.
class LatticeOperator {
 public:
  using Sparse = Eigen::SparseMatrix<Complex>;
  using Triplet = Eigen::Triplet<Complex>;

  explicit LatticeOperator(TruncatedBasis basis)
      : basis_(std::move(basis)), mat_(dim_of(basis_), dim_of(basis_)) {}

  LatticeOperator(TruncatedBasis basis, Sparse mat) : basis_(std::move(basis)), mat_(std::move(mat)) {
    if (mat_.rows() != dim_of(basis_) || mat_.cols() != dim_of(basis_))
      throw BasisMismatch("LatticeOperator: matrix shape does not match basis");
    normalize();
  }

  /// Builds from (row, col, amplitude) triplets; duplicates are summed.
  static LatticeOperator from_triplets(const TruncatedBasis& basis, const std::vector<Triplet>& t) {
    Sparse m(dim_of(basis), dim_of(basis));
    m.setFromTriplets(t.begin(), t.end());
    return LatticeOperator(basis, std::move(m));
  }

  static LatticeOperator identity(const TruncatedBasis& basis) {
    Sparse m(dim_of(basis), dim_of(basis));
    m.setIdentity();
    return LatticeOperator(basis, std::move(m));
  }

  const TruncatedBasis& basis() const { return basis_; }
  const Sparse& matrix() const { return mat_; }
  int hop_range() const { return hop_range_; }
  Eigen::Index nonzeros() const { return mat_.nonZeros(); }

  LatticeOperator adjoint() const { return LatticeOperator(basis_, Sparse(mat_.adjoint())); }

  Vector apply(const Vector& v) const {
    if (v.size() != mat_.cols()) throw BasisMismatch("LatticeOperator::apply: vector dimension mismatch");
    return mat_ * v;
  }

  Matrix dense() const { return Matrix(mat_); }

  friend LatticeOperator operator*(const LatticeOperator& a, const LatticeOperator& b) {
    require_same_basis(a, b);
    return LatticeOperator(a.basis_, Sparse(a.mat_ * b.mat_));
  }
  friend LatticeOperator operator+(const LatticeOperator& a, const LatticeOperator& b) {
    require_same_basis(a, b);
    return LatticeOperator(a.basis_, Sparse(a.mat_ + b.mat_));
  }
  friend LatticeOperator operator-(const LatticeOperator& a, const LatticeOperator& b) {
    require_same_basis(a, b);
    return LatticeOperator(a.basis_, Sparse(a.mat_ - b.mat_));
  }
  friend LatticeOperator operator*(Complex c, const LatticeOperator& a) {
    return LatticeOperator(a.basis_, Sparse(c * a.mat_));
  }

  static void require_same_basis(const LatticeOperator& a, const LatticeOperator& b) {
    if (!(a.basis_ == b.basis_)) throw BasisMismatch("operators live on different truncated bases");
  }

 private:
  static Eigen::Index dim_of(const TruncatedBasis& b) { return static_cast<Eigen::Index>(b.dim()); }

  void normalize() {
    mat_.prune(Complex(0.0));
    mat_.makeCompressed();
    hop_range_ = 0;
    for (Eigen::Index c = 0; c < mat_.outerSize(); ++c) {
      auto col = basis_.label(static_cast<std::size_t>(c)).second;
      for (Sparse::InnerIterator it(mat_, c); it; ++it) {
        if (!std::isfinite(it.value().real()) || !std::isfinite(it.value().imag()))
          throw InvariantViolation("LatticeOperator: non-finite amplitude");
        auto row = basis_.label(static_cast<std::size_t>(it.row())).second;
        hop_range_ = std::max(hop_range_, sup_norm(row - col));
      }
    }
  }

  TruncatedBasis basis_;
  Sparse mat_;
  int hop_range_ = 0;
};

/// Largest singular value of the columns of `op` selected by `cols`.
inline double masked_operator_norm(const LatticeOperator& op, const std::vector<std::size_t>& cols) {
  if (cols.empty()) return 0.0;
  Matrix block(op.matrix().rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    block.col(static_cast<Eigen::Index>(j)) = op.matrix().col(static_cast<Eigen::Index>(cols[j]));
  if (block.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(block);
  return svd.singularValues()(0);
}

/// Safe-interior radius for an expression with `depth` operator applications
/// of hop range at most `hop`.
inline int safe_radius(const TruncatedBasis& basis, int hop, int depth) {
  return basis.radius() - hop * depth;
}

/// Masked-interior operator norm of AB - phase*BA.
inline double commutator_norm(const LatticeOperator& a, const LatticeOperator& b, Complex phase = 1.0) {
  LatticeOperator::require_same_basis(a, b);
  if (std::abs(std::abs(phase) - 1.0) > kExactTol)
    throw std::invalid_argument("commutator_norm: phase must have modulus 1");
  int hop = std::max(a.hop_range(), b.hop_range());
  int radius = safe_radius(a.basis(), hop, 2);
  if (radius < 0)
    throw WindowTooLarge("commutator_norm: hop range " + std::to_string(hop) +
                         " leaves no safe interior in truncation M=" + std::to_string(a.basis().radius()));
  LatticeOperator c = a * b - phase * (b * a);
  return masked_operator_norm(c, a.basis().interior(radius));
}

/// Largest deviation of U^dagger U and U U^dagger from the identity on the
/// depth-2 safe interior.
inline double unitarity_defect(const LatticeOperator& u) {
  int radius = safe_radius(u.basis(), u.hop_range(), 2);
  if (radius < 0) throw WindowTooLarge("unitarity_defect: no safe interior");
  auto cols = u.basis().interior(radius);
  LatticeOperator id = LatticeOperator::identity(u.basis());
  return std::max(masked_operator_norm(u.adjoint() * u - id, cols),
                  masked_operator_norm(u * u.adjoint() - id, cols));
}

/// Max |x_i| support radius of a vector (largest |a| among nonzero entries).
inline int support_radius(const TruncatedBasis& basis, const Vector& v) {
  int r = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) != Complex(0.0)) r = std::max(r, basis.offset_norm(static_cast<std::size_t>(i)));
  return r;
}

/// Applies U^a = U_1^{a_1} ... U_N^{a_N}; negative exponents use the adjoint.
class MonomialAction {
 public:
  explicit MonomialAction(std::vector<LatticeOperator> generators) : gens_(std::move(generators)) {
    if (gens_.empty()) throw std::invalid_argument("MonomialAction: no generators");
    for (const auto& g : gens_) {
      LatticeOperator::require_same_basis(gens_.front(), g);
      adjs_.push_back(g.adjoint());
    }
  }

  std::size_t count() const { return gens_.size(); }
  const TruncatedBasis& basis() const { return gens_.front().basis(); }
  const std::vector<LatticeOperator>& generators() const { return gens_; }
  int hop_range() const {
    int r = 0;
    for (const auto& g : gens_) r = std::max(r, g.hop_range());
    return r;
  }

  Vector apply(const MultiIndex& a, Vector v) const {
    if (a.size() != gens_.size()) throw std::invalid_argument("MonomialAction: multi-index arity mismatch");
    for (std::size_t j = gens_.size(); j-- > 0;) {
      const auto& op = a[j] >= 0 ? gens_[j] : adjs_[j];
      for (int s = 0; s < std::abs(a[j]); ++s) v = op.apply(v);
    }
    return v;
  }

 private:
  std::vector<LatticeOperator> gens_;
  std::vector<LatticeOperator> adjs_;
};

struct WanderingWitness {
  int k;
  int h;
  MultiIndex a;
  MultiIndex b;
  Complex value;
};

struct WanderingReport {
  bool passed = false;
  double max_violation = 0.0;
  double cyclic_defect = 0.0;
  int window = 0;
  std::vector<WanderingWitness> failures;
};

/// Checks orthogonality of the orbit {U^a psi_k : |a| <= window} in the form
/// (U^b psi_k ; U^a psi_h) = ||U^a psi_k||^2 delta_kh delta_ab together with
/// ||psi_k|| = 1, and that the orbit spans every basis vector with
/// |a| <= window - (support radius of the candidates).
inline WanderingReport verify_wandering(const std::vector<LatticeOperator>& generators,
                                        const std::vector<Vector>& candidates, int window,
                                        double tol = kExactTol, std::size_t max_witnesses = 64) {
  MonomialAction act(generators);
  const auto& basis = act.basis();
  const int N = static_cast<int>(act.count());
  if (N != basis.lattice_dim())
    throw std::invalid_argument("verify_wandering: need one generator per lattice dimension");
  if (candidates.empty()) throw std::invalid_argument("verify_wandering: no candidate vectors");
  if (window < 0) throw std::invalid_argument("verify_wandering: negative window");

  int spread = 0;
  for (const auto& c : candidates) {
    if (c.size() != static_cast<Eigen::Index>(basis.dim()))
      throw BasisMismatch("verify_wandering: candidate dimension mismatch");
    spread = std::max(spread, support_radius(basis, c));
  }
  const int hop = act.hop_range();
  if (spread + window * hop > basis.radius() - hop)
    throw WindowTooLarge("verify_wandering: window " + std::to_string(window) + " with hop range " +
                         std::to_string(hop) + " exceeds truncation M=" + std::to_string(basis.radius()));

  const auto shifts = cube_indices(N, window);
  const auto q = static_cast<int>(candidates.size());
  const auto n_shift = static_cast<Eigen::Index>(shifts.size());
  Matrix orbit(static_cast<Eigen::Index>(basis.dim()), q * n_shift);
  for (int k = 0; k < q; ++k)
    for (Eigen::Index s = 0; s < n_shift; ++s)
      orbit.col(k * n_shift + s) = act.apply(shifts[static_cast<std::size_t>(s)], candidates[static_cast<std::size_t>(k)]);
  const Matrix gram = orbit.adjoint() * orbit;

  WanderingReport rep;
  rep.window = window;
  auto record = [&](int k, int h, const MultiIndex& a, const MultiIndex& b, Complex value, double dev) {
    rep.max_violation = std::max(rep.max_violation, dev);
    if (dev > tol && rep.failures.size() < max_witnesses) rep.failures.push_back({k, h, a, b, value});
  };
  const MultiIndex zero(static_cast<std::size_t>(N), 0);
  for (int k = 0; k < q; ++k) {
    const double norm2 = candidates[static_cast<std::size_t>(k)].squaredNorm();
    record(k, k, zero, zero, norm2, std::abs(norm2 - 1.0));
  }
  for (int k = 0; k < q; ++k)
    for (int h = 0; h < q; ++h)
      for (Eigen::Index ia = 0; ia < n_shift; ++ia)
        for (Eigen::Index ib = 0; ib < n_shift; ++ib) {
          if (k == h && ia == ib) continue;
          const Complex g = gram(k * n_shift + ib, h * n_shift + ia);
          record(k, h, shifts[static_cast<std::size_t>(ia)], shifts[static_cast<std::size_t>(ib)], g, std::abs(g));
        }

  // Span completeness on the interior block.
  Eigen::BDCSVD<Matrix> svd(orbit, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-10 * sv(0)) ++rank;
  const Matrix range = svd.matrixU().leftCols(rank);
  for (std::size_t i : basis.interior(window - spread)) {
    Vector e = Vector::Zero(orbit.rows());
    e(static_cast<Eigen::Index>(i)) = 1.0;
    const double defect = (e - range * (range.adjoint() * e)).norm();
    rep.cyclic_defect = std::max(rep.cyclic_defect, defect);
  }
  rep.passed = rep.max_violation <= tol && rep.cyclic_defect <= tol;
  return rep;
}

/// Expansion coefficients alpha_{k,a} of a vector sum alpha_{k,a} U^a psi_k.
using Coefficients = std::map<std::pair<int, MultiIndex>, Complex>;

/// Number of a in Z^N with |a|_1 <= m.
inline long long l1_ball_size(int N, int m) {
  // sum_i 2^i C(N,i) C(m,i)
  long long total = 0;
  for (int i = 0; i <= std::min(N, m); ++i) {
    long long cn = 1, cm = 1;
    for (int j = 0; j < i; ++j) {
      cn = cn * (N - j) / (j + 1);
      cm = cm * (m - j) / (j + 1);
    }
    total += (1LL << i) * cn * cm;
  }
  return total;
}

/// Filtration seminorm p_m. D_m is the dimension of span{U^a psi_k :
/// 0 <= k <= m, |a|_1 <= m} where only q wandering vectors exist.
inline double seminorm_pm(const Coefficients& coeffs, int m, int N,
                          int q = std::numeric_limits<int>::max()) {
  if (m < 0) throw std::invalid_argument("seminorm_pm: m must be >= 0");
  const long long k_count = std::min<long long>(m, static_cast<long long>(q) - 1) + 1;
  const double d_m = static_cast<double>(k_count * l1_ball_size(N, m));
  double sum = 0.0;
  for (const auto& [key, alpha] : coeffs)
    if (key.first >= 0 && key.first <= m && l1_norm(key.second) <= m) sum += std::norm(alpha);
  return std::sqrt(d_m * sum);
}

}  // namespace blochfiber

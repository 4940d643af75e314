#pragma once

// Discrete Bloch-Floquet decomposition for finite abelian groups
// F = Z_{p_1} x ... x Z_{p_N} acting unitarily on C^d.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blochfiber/core.hpp"

namespace blochfiber {

struct FiniteGroupRep {
  std::vector<int> orders;
  int dim = 0;
  std::vector<Matrix> generators;

  std::size_t group_order() const {
    std::size_t n = 1;
    for (int p : orders) n *= static_cast<std::size_t>(p);
    return n;
  }
};

struct FiniteDecomposition {
  std::vector<std::vector<int>> labels;
  std::vector<Matrix> projectors;
  std::vector<Matrix> subspace_bases;

  std::vector<int> ranks() const {
    std::vector<int> r;
    for (const auto& b : subspace_bases) r.push_back(static_cast<int>(b.cols()));
    return r;
  }
};

namespace detail {

/// All t in prod_j {0..p_j-1}, lexicographic.
inline std::vector<std::vector<int>> dual_labels(const std::vector<int>& orders) {
  std::vector<std::vector<int>> out;
  std::vector<int> t(orders.size(), 0);
  while (true) {
    out.push_back(t);
    int j = static_cast<int>(orders.size()) - 1;
    while (j >= 0 && t[static_cast<std::size_t>(j)] == orders[static_cast<std::size_t>(j)] - 1) {
      t[static_cast<std::size_t>(j)] = 0;
      --j;
    }
    if (j < 0) break;
    ++t[static_cast<std::size_t>(j)];
  }
  return out;
}

inline Matrix group_element(const FiniteGroupRep& rep, const std::vector<int>& n) {
  Matrix g = Matrix::Identity(rep.dim, rep.dim);
  for (std::size_t j = 0; j < n.size(); ++j)
    for (int s = 0; s < n[j]; ++s) g = g * rep.generators[j];
  return g;
}

// Phase fix: first entry with non-negligible modulus made real positive.
inline void fix_column_phase(Matrix& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
      if (std::abs(basis(r, c)) > 1e-8) {
        basis.col(c) *= std::conj(basis(r, c)) / std::abs(basis(r, c));
        break;
      }
    }
  }
}

}  // namespace detail

/// Returns the first failed invariant of `rep`, or nullopt when all hold.
inline std::optional<std::string> check_finite_rep(const FiniteGroupRep& rep, double tol = kExactTol) {
  if (rep.orders.empty()) return "no group factors";
  if (rep.generators.size() != rep.orders.size()) return "one generator per group factor required";
  for (int p : rep.orders)
    if (p < 2) return "group orders must be >= 2";
  const Matrix id = Matrix::Identity(rep.dim, rep.dim);
  for (std::size_t j = 0; j < rep.generators.size(); ++j) {
    const Matrix& u = rep.generators[j];
    const std::string name = "U_" + std::to_string(j + 1);
    if (u.rows() != rep.dim || u.cols() != rep.dim) return name + " has wrong shape";
    if ((u.adjoint() * u - id).norm() > tol) return name + " is not unitary";
    Matrix power = id;
    for (int s = 0; s < rep.orders[j]; ++s) power = power * u;
    if ((power - id).norm() > tol) return name + "^p != 1";
    for (std::size_t i = 0; i < j; ++i)
      if ((u * rep.generators[i] - rep.generators[i] * u).norm() > tol)
        return name + " does not commute with U_" + std::to_string(i + 1);
  }
  // Algebraic compatibility: the |F| matrices U^g are linearly independent.
  const auto elements = detail::dual_labels(rep.orders);
  const auto n = static_cast<Eigen::Index>(elements.size());
  Matrix stacked(static_cast<Eigen::Index>(rep.dim) * rep.dim, n);
  for (Eigen::Index g = 0; g < n; ++g) {
    Matrix m = detail::group_element(rep, elements[static_cast<std::size_t>(g)]);
    stacked.col(g) = Eigen::Map<const Vector>(m.data(), m.size());
  }
  Eigen::BDCSVD<Matrix> svd(stacked);
  const auto& sv = svd.singularValues();
  if (sv.size() < n || sv(n - 1) <= 1e-10 * sv(0)) return "representation is not algebraically compatible";
  return std::nullopt;
}

/// P_t = |F|^{-1} sum_n prod_j e^{-i 2 pi t_j n_j / p_j} U^n.
inline Matrix bf_projector(const FiniteGroupRep& rep, const std::vector<int>& t) {
  if (t.size() != rep.orders.size()) throw std::out_of_range("bf_projector: label arity mismatch");
  for (std::size_t j = 0; j < t.size(); ++j)
    if (t[j] < 0 || t[j] >= rep.orders[j])
      throw std::out_of_range("bf_projector: label component t_" + std::to_string(j + 1) + " out of range");
  Matrix p = Matrix::Zero(rep.dim, rep.dim);
  for (const auto& n : detail::dual_labels(rep.orders)) {
    double phase = 0.0;
    for (std::size_t j = 0; j < n.size(); ++j) phase -= kTwoPi * t[j] * n[j] / rep.orders[j];
    p += std::polar(1.0, phase) * detail::group_element(rep, n);
  }
  return p / static_cast<double>(rep.group_order());
}

/// Orthogonal decomposition C^d = (+)_t Ran P_t, verified by Parseval on
/// random probe vectors.
inline FiniteDecomposition decompose_finite(const FiniteGroupRep& rep, int probes = 16,
                                            unsigned seed = 1234) {
  if (auto bad = check_finite_rep(rep)) throw InvariantViolation("decompose_finite: " + *bad);
  FiniteDecomposition dec;
  dec.labels = detail::dual_labels(rep.orders);
  dec.projectors.resize(dec.labels.size());
  dec.subspace_bases.resize(dec.labels.size());
  parallel_for(dec.labels.size(), [&](std::size_t i) {
    Matrix p = bf_projector(rep, dec.labels[i]);
    Eigen::JacobiSVD<Matrix> svd(p, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(0) > 0.0 && sv(rank) > 1e-10 * sv(0)) ++rank;
    Matrix basis = svd.matrixU().leftCols(rank);
    detail::fix_column_phase(basis);
    dec.projectors[i] = std::move(p);
    dec.subspace_bases[i] = std::move(basis);
  });

  int total_rank = 0;
  for (const auto& b : dec.subspace_bases) total_rank += static_cast<int>(b.cols());
  if (total_rank != rep.dim)
    throw InvariantViolation("decompose_finite: ranks sum to " + std::to_string(total_rank) +
                             ", expected " + std::to_string(rep.dim));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int s = 0; s < probes; ++s) {
    Vector phi(rep.dim);
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = Complex(gauss(rng), gauss(rng));
    double split = 0.0;
    for (const auto& p : dec.projectors) split += (p * phi).squaredNorm();
    if (std::abs(split - phi.squaredNorm()) > kExactTol * std::max(1.0, phi.squaredNorm()))
      throw InvariantViolation("decompose_finite: Parseval identity fails on probe vector");
  }
  return dec;
}

}  // namespace blochfiber

#pragma once

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace blochfiber {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Lattice multi-index a in Z^N.
using MultiIndex = std::vector<int>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Tolerance for identities that are exact in the model (phases, Gram matrices).
inline constexpr double kExactTol = 1e-12;
/// Tolerance for anything passing through quadrature or eigensolvers.
inline constexpr double kNumericTol = 1e-8;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionOverflow : Error {
  using Error::Error;
};
struct BasisMismatch : Error {
  using Error::Error;
};
struct WindowTooLarge : Error {
  using Error::Error;
};
struct InvariantViolation : Error {
  using Error::Error;
};
struct NotCovariant : Error {
  NotCovariant(const std::string& what, double norm) : Error(what), commutator_norm(norm) {}
  double commutator_norm;
};
struct HopRangeExceeded : Error {
  using Error::Error;
};
struct InvalidFlux : Error {
  using Error::Error;
};
struct NonHermitian : Error {
  using Error::Error;
};
struct GapTooSmall : Error {
  GapTooSmall(const std::string& what, std::vector<double> at, double g)
      : Error(what), node(std::move(at)), gap(g) {}
  std::vector<double> node;
  double gap;
};
struct InadmissiblePlaquette : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Multi-index helpers
// ---------------------------------------------------------------------------

inline int sup_norm(const MultiIndex& a) {
  int r = 0;
  for (int x : a) r = std::max(r, std::abs(x));
  return r;
}

inline int l1_norm(const MultiIndex& a) {
  int r = 0;
  for (int x : a) r += std::abs(x);
  return r;
}

inline MultiIndex operator+(MultiIndex a, const MultiIndex& b) {
  for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  return a;
}

inline MultiIndex operator-(MultiIndex a, const MultiIndex& b) {
  for (std::size_t j = 0; j < a.size(); ++j) a[j] -= b[j];
  return a;
}

inline MultiIndex operator-(MultiIndex a) {
  for (int& x : a) x = -x;
  return a;
}

inline MultiIndex unit_index(int N, int j) {
  MultiIndex e(static_cast<std::size_t>(N), 0);
  e[static_cast<std::size_t>(j)] = 1;
  return e;
}

/// All a in Z^N with max_j |a_j| <= radius, lexicographic (a_1 slowest).
inline std::vector<MultiIndex> cube_indices(int N, int radius) {
  std::vector<MultiIndex> out;
  if (radius < 0) return out;
  MultiIndex a(static_cast<std::size_t>(N), -radius);
  while (true) {
    out.push_back(a);
    int j = N - 1;
    while (j >= 0 && a[static_cast<std::size_t>(j)] == radius) {
      a[static_cast<std::size_t>(j)] = -radius;
      --j;
    }
    if (j < 0) break;
    ++a[static_cast<std::size_t>(j)];
  }
  return out;
}

/// e^{i b.t}
inline Complex plane_wave(const MultiIndex& b, const std::vector<double>& t) {
  double phase = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) phase += b[j] * t[j];
  return std::polar(1.0, phase);
}

inline std::string to_string(const MultiIndex& a) {
  std::string s = "(";
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (j) s += ",";
    s += std::to_string(a[j]);
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

/// Worker count, capped by BLOCH_FIBER_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BLOCH_FIBER_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs body(i) for i in [0, count). Results must be written by index so the
/// output does not depend on scheduling. If several iterations throw, the
/// exception from the lowest index is rethrown.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(count);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace blochfiber

#pragma once

// Band spectra over the torus, gap detection, Fermi projectors and Chern
// numbers of Bloch sub-bundles (overlap-determinant link variables).

#include <cmath>
#include <limits>
#include <sstream>

#include "blochfiber/models.hpp"

namespace blochfiber {

struct BandData {
  TorusGrid grid;
  std::vector<std::vector<double>> energies;  // per node, ascending
  int band_count = 0;
};

inline BandData band_spectrum(const CovariantOperator& hamiltonian, const TorusGrid& grid) {
  if (hamiltonian.lattice_dim() != grid.lattice_dim())
    throw std::invalid_argument("band_spectrum: grid dimension does not match the model");
  if (double d = hamiltonian.hermiticity_defect(); d > kExactTol)
    throw NonHermitian("band_spectrum: hamiltonian is not Hermitian (defect " + std::to_string(d) + ")");
  BandData bands{grid, std::vector<std::vector<double>>(grid.size()), hamiltonian.q()};
  parallel_for(grid.size(), [&](std::size_t i) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(fiber_operator(hamiltonian, grid.node(i)), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    bands.energies[i].assign(ev.data(), ev.data() + ev.size());
  });
  return bands;
}

inline BandData band_spectrum(const ModelInstance& model, const TorusGrid& grid) {
  return band_spectrum(model.hamiltonian(), grid);
}

/// min over nodes of E_{r+1}(t) - E_r(t), bands counted from 1.
inline double gap_check(const BandData& bands, int r) {
  if (r < 1 || r > bands.band_count - 1)
    throw std::out_of_range("gap_check: band index " + std::to_string(r) + " outside 1.." +
                            std::to_string(bands.band_count - 1));
  double g = std::numeric_limits<double>::infinity();
  for (const auto& e : bands.energies)
    g = std::min(g, e[static_cast<std::size_t>(r)] - e[static_cast<std::size_t>(r - 1)]);
  return std::max(0.0, g);
}

inline constexpr double kDefaultGapFloor = 1e-6;

namespace detail {

inline std::vector<int> normalized_band_set(std::vector<int> set, int q) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  for (int r : set)
    if (r < 0 || r >= q) throw std::out_of_range("band index " + std::to_string(r) + " outside 0.." + std::to_string(q - 1));
  return set;
}

/// Smallest |E_r - E_s| with r selected and s not; +inf if either side is empty.
inline double boundary_gap(const Eigen::VectorXd& energies, const std::vector<int>& set) {
  std::vector<bool> in(static_cast<std::size_t>(energies.size()), false);
  for (int r : set) in[static_cast<std::size_t>(r)] = true;
  double g = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < energies.size(); ++r)
    for (Eigen::Index s = 0; s < energies.size(); ++s)
      if (in[static_cast<std::size_t>(r)] && !in[static_cast<std::size_t>(s)])
        g = std::min(g, std::abs(energies(r) - energies(s)));
  return g;
}

inline std::string describe_node(const std::vector<double>& t) {
  std::ostringstream os;
  os.precision(17);
  os << "t = (";
  for (std::size_t j = 0; j < t.size(); ++j) os << (j ? ", " : "") << t[j];
  os << ")";
  return os.str();
}

/// Eigenvectors of the selected bands (energy order), checked against the gap floor.
inline Matrix band_frame(const Matrix& h, const std::vector<int>& set, double gap_floor,
                         const std::vector<double>& node, double* gap_out = nullptr) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const double gap = boundary_gap(es.eigenvalues(), set);
  if (gap_out) *gap_out = gap;
  if (gap < gap_floor)
    throw GapTooSmall("spectral gap " + std::to_string(gap) + " below floor " + std::to_string(gap_floor) +
                          (node.empty() ? std::string() : " at " + describe_node(node)),
                      node, gap);
  Matrix frame(h.rows(), static_cast<Eigen::Index>(set.size()));
  for (std::size_t c = 0; c < set.size(); ++c) frame.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(set[c]);
  return frame;
}

}  // namespace detail

/// P = sum_{r in band_set} |v_r><v_r| for the energy-ordered eigenvectors of a
/// Hermitian fiber.
inline Matrix spectral_projector(const Matrix& fiber, std::vector<int> band_set,
                                 double gap_floor = kDefaultGapFloor, const std::vector<double>& node = {}) {
  if ((fiber - fiber.adjoint()).norm() > kExactTol * std::max(1.0, fiber.norm()))
    throw NonHermitian("spectral_projector: fiber is not Hermitian");
  band_set = detail::normalized_band_set(std::move(band_set), static_cast<int>(fiber.rows()));
  Matrix frame = detail::band_frame(fiber, band_set, gap_floor, node);
  return frame * frame.adjoint();
}

struct BerryData {
  TorusGrid grid;
  std::vector<int> band_set;
  std::vector<double> plaquette_fluxes;  // Berry flux through the plaquette with corner at each node
  double flux_sum = 0.0;
  int chern = 0;
  double min_gap = std::numeric_limits<double>::infinity();
};

/// Plaquettes whose flux comes within this distance of +-pi are rejected.
inline constexpr double kAdmissibilityMargin = 1e-6;

/// Chern number from orthonormal frames of the sub-bundle sampled on a 2-D grid.
///
/// Links are U_mu(t) = det(F(t)^dag F(t + e_mu)) / |det|. The plaquette flux
/// is the Berry flux -arg(U_1(t) U_2(t+e_1) U_1(t+e_2)^* U_2(t)^*) on the
/// principal branch, so the flux sum / 2 pi is the first Chern class
/// (i / 2 pi) int tr F of the sub-bundle.
inline BerryData chern_from_frames(const TorusGrid& grid, const std::vector<Matrix>& frames,
                                   std::vector<int> band_set = {}) {
  if (grid.lattice_dim() != 2) throw std::invalid_argument("chern_number: grid must be two-dimensional");
  if (frames.size() != grid.size()) throw std::invalid_argument("chern_number: one frame per node required");
  const std::size_t n = grid.size();
  // links[2*i + mu]
  std::vector<Complex> links(2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int mu = 0; mu < 2; ++mu) {
      const Matrix overlap = frames[i].adjoint() * frames[grid.neighbour(i, mu)];
      const Complex det = overlap.size() == 0 ? Complex(1.0) : overlap.determinant();
      if (std::abs(det) < 1e-10)
        throw InadmissiblePlaquette("chern_number: vanishing link overlap at " + detail::describe_node(grid.node(i)) +
                                    "; refine the grid (increase L)");
      links[2 * i + static_cast<std::size_t>(mu)] = det / std::abs(det);
    }
  BerryData data{grid, std::move(band_set), std::vector<double>(n), 0.0, 0,
                 std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < n; ++i) {
    const Complex loop = links[2 * i] * links[2 * grid.neighbour(i, 0) + 1] *
                         std::conj(links[2 * grid.neighbour(i, 1)]) * std::conj(links[2 * i + 1]);
    const double flux = -std::arg(loop);
    if (std::numbers::pi - std::abs(flux) < kAdmissibilityMargin)
      throw InadmissiblePlaquette("chern_number: plaquette flux at " + detail::describe_node(grid.node(i)) +
                                  " reaches the branch cut; refine the grid (increase L)");
    data.plaquette_fluxes[i] = flux;
    data.flux_sum += flux;
  }
  const double c = data.flux_sum / kTwoPi;
  data.chern = static_cast<int>(std::lround(c));
  if (std::abs(c - data.chern) > 1e-6)
    throw InadmissiblePlaquette("chern_number: flux sum is not an integer multiple of 2 pi");
  return data;
}

/// Chern number of the energy-ordered bands `band_set` of a fiber family
/// t -> H(t) on an L x L grid.
template <class Fiber>
BerryData chern_number(Fiber&& fiber, int q, std::vector<int> band_set, int L,
                       double gap_floor = kDefaultGapFloor) {
  band_set = detail::normalized_band_set(std::move(band_set), q);
  TorusGrid grid(2, L);
  std::vector<Matrix> frames(grid.size());
  std::vector<double> gaps(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const auto t = grid.node(i);
    frames[i] = detail::band_frame(fiber(t), band_set, gap_floor, t, &gaps[i]);
  });
  BerryData data = chern_from_frames(grid, frames, band_set);
  for (double g : gaps) data.min_gap = std::min(data.min_gap, g);
  return data;
}

inline BerryData chern_number(const ModelInstance& model, std::vector<int> band_set, int L,
                              double gap_floor = kDefaultGapFloor) {
  if (model.lattice_dim() != 2) throw std::invalid_argument("chern_number: model must live on a 2-torus");
  const auto& h = model.hamiltonian();
  if (!h.is_hermitian()) throw NonHermitian("chern_number: hamiltonian is not Hermitian");
  return chern_number([&](const std::vector<double>& t) { return fiber_operator(h, t); }, model.q(),
                      std::move(band_set), L, gap_floor);
}

/// Chern number from precomputed projector samples on a 2-D grid.
inline BerryData chern_number(const FiberedSamples<Matrix>& projectors) {
  std::vector<Matrix> frames(projectors.values.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    const Matrix& p = projectors.values[i];
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    const auto rank = static_cast<Eigen::Index>(std::lround(p.trace().real()));
    frames[i] = es.eigenvectors().rightCols(rank);
  });
  return chern_from_frames(projectors.grid, frames);
}

struct ButterflyRow {
  int p = 0;
  int q = 1;
  std::vector<std::pair<double, double>> bands;  // [emin, emax] per band
};

/// Reduced fractions p/q with 0 <= p < q <= q_max, gcd(p, q) = 1, ordered (q, p).
inline std::vector<Flux> reduced_fractions(int q_max) {
  std::vector<Flux> out;
  for (int q = 1; q <= q_max; ++q)
    for (int p = 0; p < q; ++p)
      if (std::gcd(p, q) == 1) out.push_back({p, q});
  return out;
}

inline ButterflyRow band_intervals(const BandData& bands, Flux f) {
  ButterflyRow row{f.p, f.q, {}};
  for (int r = 0; r < bands.band_count; ++r) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& e : bands.energies) {
      lo = std::min(lo, e[static_cast<std::size_t>(r)]);
      hi = std::max(hi, e[static_cast<std::size_t>(r)]);
    }
    row.bands.emplace_back(lo, hi);
  }
  return row;
}

/// Band intervals of the Mathieu Hamiltonian for every reduced flux p/q, q <= q_max.
inline std::vector<ButterflyRow> butterfly(int q_max, int L, int M = 12) {
  if (q_max < 2) throw std::invalid_argument("butterfly: q_max must be >= 2");
  std::vector<ButterflyRow> rows;
  TorusGrid grid(1, L);
  for (const Flux& f : reduced_fractions(q_max)) rows.push_back(band_intervals(band_spectrum(mathieu_model(f.p, f.q, M), grid), f));
  return rows;
}

/// Max Frobenius increment between periodic neighbours on the grid.
template <class Value>
double frame_continuity_check(const FiberedSamples<Value>& samples) {
  double inc = 0.0;
  const auto& grid = samples.grid;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.lattice_dim(); ++j)
      inc = std::max(inc, (samples.values[i] - samples.values[grid.neighbour(i, j)]).norm());
  return inc;
}

struct ContinuityRefinement {
  double coarse = 0.0;  // increment on the L grid
  double fine = 0.0;    // increment on the 2L grid
  double ratio = 0.0;   // fine / coarse (0.5 for a smooth section)
};

template <class Field>
ContinuityRefinement continuity_refinement(Field&& field, int N, int L) {
  ContinuityRefinement r;
  r.coarse = frame_continuity_check(sample_field(TorusGrid(N, L), field));
  r.fine = frame_continuity_check(sample_field(TorusGrid(N, 2 * L), field));
  r.ratio = r.coarse > 0.0 ? r.fine / r.coarse : 0.0;
  return r;
}

}  // namespace blochfiber

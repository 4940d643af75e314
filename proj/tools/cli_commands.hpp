#pragma once

// Command implementations for the bloch_fiber executable. Each command reads a
// validated RunConfig and writes exactly one output file into output_dir.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "blochfiber/blochfiber.hpp"

namespace blochfiber::cli {

using json = nlohmann::json;

/// Exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Exit code 1.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelKind { mathieu, hofstadter, chain, finite_group };

struct RunConfig {
  ModelKind model = ModelKind::mathieu;
  int p = 1;
  int q = 3;
  std::vector<double> potential;              // chain; defaults to q zeros
  std::vector<int> orders{2};                 // finite_group
  int M = 0;                                  // 0 -> 12 for 1-D models, 6 for 2-D
  int L = 64;
  std::optional<std::vector<int>> band_set;   // absent -> every band, then all bands
  std::filesystem::path output_dir = ".";
  double exact_tol = kExactTol;
  double numeric_tol = kNumericTol;
  int q_max = 8;
  std::optional<std::vector<int>> candidates; // wandering-vector override (indices k)
  bool corrupt_generator = false;             // test hook for decompose
  std::uint64_t seed = 0;
  int probes = 100;
};

inline const char* model_name(ModelKind k) {
  switch (k) {
    case ModelKind::mathieu: return "mathieu";
    case ModelKind::hofstadter: return "hofstadter";
    case ModelKind::chain: return "chain";
    case ModelKind::finite_group: return "finite_group";
  }
  return "?";
}

inline RunConfig parse_config(const json& j) {
  static const std::set<std::string> known{"model",     "p",          "q",     "potential", "orders",
                                           "M",         "L",          "band_set", "output_dir", "tolerances",
                                           "q_max",     "candidates", "corrupt_generator", "seed", "probes"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig c;
  try {
    if (j.contains("model")) {
      const auto name = j.at("model").get<std::string>();
      if (name == "mathieu") c.model = ModelKind::mathieu;
      else if (name == "hofstadter") c.model = ModelKind::hofstadter;
      else if (name == "chain") c.model = ModelKind::chain;
      else if (name == "finite_group") c.model = ModelKind::finite_group;
      else throw ConfigError("unknown model '" + name + "'");
    }
    if (j.contains("p")) c.p = j.at("p").get<int>();
    if (j.contains("q")) c.q = j.at("q").get<int>();
    if (j.contains("potential")) c.potential = j.at("potential").get<std::vector<double>>();
    if (j.contains("orders")) c.orders = j.at("orders").get<std::vector<int>>();
    if (j.contains("M")) c.M = j.at("M").get<int>();
    if (j.contains("L")) c.L = j.at("L").get<int>();
    if (j.contains("band_set")) c.band_set = j.at("band_set").get<std::vector<int>>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      for (const auto& [key, _] : t.items())
        if (key != "exact" && key != "numeric") throw ConfigError("unknown tolerance '" + key + "'");
      if (t.contains("exact")) c.exact_tol = t.at("exact").get<double>();
      if (t.contains("numeric")) c.numeric_tol = t.at("numeric").get<double>();
    }
    if (j.contains("q_max")) c.q_max = j.at("q_max").get<int>();
    if (j.contains("candidates")) c.candidates = j.at("candidates").get<std::vector<int>>();
    if (j.contains("corrupt_generator")) c.corrupt_generator = j.at("corrupt_generator").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("probes")) c.probes = j.at("probes").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  if (c.model == ModelKind::chain && !j.contains("potential")) c.potential.assign(static_cast<std::size_t>(std::max(c.q, 0)), 0.0);
  if (c.M == 0) c.M = c.model == ModelKind::hofstadter ? 6 : 12;

  if (c.q < 1) throw ConfigError("q must be >= 1");
  if (c.M < 3) throw ConfigError("M must be >= 3");
  if (c.L < 1) throw ConfigError("L must be >= 1");
  if (c.probes < 1) throw ConfigError("probes must be >= 1");
  if (!(c.exact_tol > 0) || !(c.numeric_tol > 0)) throw ConfigError("tolerances must be positive");
  if ((c.model == ModelKind::mathieu || c.model == ModelKind::hofstadter) && std::gcd(c.p, c.q) != 1)
    throw ConfigError("flux p/q must be reduced (gcd(p, q) = 1)");
  if (c.model == ModelKind::chain && static_cast<int>(c.potential.size()) != c.q)
    throw ConfigError("potential must have q entries");
  if (c.model == ModelKind::finite_group) {
    if (c.orders.empty()) throw ConfigError("orders must be non-empty");
    for (int p : c.orders)
      if (p < 2) throw ConfigError("every group order must be >= 2");
  }
  if (c.band_set)
    for (int r : *c.band_set)
      if (r < 0 || r >= c.q) throw ConfigError("band index " + std::to_string(r) + " outside 0..q-1");
  if (c.candidates) {
    if (c.candidates->empty()) throw ConfigError("candidates must be non-empty");
    for (int k : *c.candidates)
      if (k < 0 || k >= c.q) throw ConfigError("candidate index outside 0..q-1");
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// Locale-independent shortest form with up to 17 significant digits.
inline std::string format_real(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, end);
}

/// Writes through a temporary file in the same directory, then renames.
inline void write_atomic(const std::filesystem::path& target, const std::string& content) {
  std::filesystem::create_directories(target.parent_path().empty() ? "." : target.parent_path());
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, target);
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

inline ModelLattice build_lattice(const RunConfig& c) {
  switch (c.model) {
    case ModelKind::mathieu: return mathieu_lattice(c.p, c.q, c.M);
    case ModelKind::hofstadter: return hofstadter_lattice(c.p, c.q, c.M);
    case ModelKind::chain: return periodic_chain_lattice(c.q, c.potential, c.M);
    case ModelKind::finite_group: break;
  }
  throw ConfigError("model 'finite_group' has no lattice realization; use the decompose command");
}

inline ModelInstance build_model(const RunConfig& c) { return assemble_model(build_lattice(c)); }

inline FiniteGroupRep build_finite_rep(const RunConfig& c) {
  if (c.model != ModelKind::finite_group) throw ConfigError("this command requires model 'finite_group'");
  FiniteGroupRep rep = finite_group_model(c.orders);
  if (c.corrupt_generator) rep.generators.front() *= 1.01;
  return rep;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckRecord {
  std::string name;
  double value;
  double tolerance;
  bool passed;
};

class CheckLog {
 public:
  void add(std::string name, double value, double tol) {
    records_.push_back({std::move(name), value, tol, std::isfinite(value) && value <= tol});
  }
  bool all_passed() const {
    return std::all_of(records_.begin(), records_.end(), [](const CheckRecord& r) { return r.passed; });
  }
  std::vector<std::string> failed() const {
    std::vector<std::string> out;
    for (const auto& r : records_)
      if (!r.passed) out.push_back(r.name);
    return out;
  }
  json to_json() const {
    json checks = json::array();
    for (const auto& r : records_)
      checks.push_back({{"name", r.name}, {"value", r.value}, {"tolerance", r.tolerance}, {"passed", r.passed}});
    return checks;
  }

 private:
  std::vector<CheckRecord> records_;
};

namespace detail {

inline Complex random_complex(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double re = u(rng);
  return {re, u(rng)};
}

inline std::vector<double> random_node(std::mt19937_64& rng, int N) {
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  std::vector<double> t;
  for (int j = 0; j < N; ++j) t.push_back(u(rng));
  return t;
}

inline Coefficients random_coefficients(std::mt19937_64& rng, int q, int N, int radius) {
  Coefficients c;
  for (int k = 0; k < q; ++k)
    for (const auto& b : cube_indices(N, radius)) c[{k, b}] = random_complex(rng);
  return c;
}

inline CovariantOperator random_covariant(std::mt19937_64& rng, int q, int N, int radius, int cap) {
  CovariantOperator op(q, N, cap);
  for (int h = 0; h < q; ++h)
    for (int k = 0; k < q; ++k)
      for (const auto& b : cube_indices(N, radius)) op.add(h, k, b, random_complex(rng));
  return op;
}

inline void verify_finite(const RunConfig& c, CheckLog& log) {
  FiniteGroupRep rep = build_finite_rep(c);
  auto bad = check_finite_rep(rep, c.exact_tol);
  log.add("representation_invariants", bad ? 1.0 : 0.0, 0.0);
  if (bad) return;
  const Matrix id = Matrix::Identity(rep.dim, rep.dim);
  double herm = 0, orth = 0, sum = 0, eig = 0;
  const auto labels = blochfiber::detail::dual_labels(rep.orders);
  std::vector<Matrix> proj;
  for (const auto& t : labels) proj.push_back(bf_projector(rep, t));
  Matrix total = Matrix::Zero(rep.dim, rep.dim);
  for (std::size_t a = 0; a < labels.size(); ++a) {
    herm = std::max(herm, (proj[a].adjoint() - proj[a]).norm());
    for (std::size_t b = 0; b < labels.size(); ++b)
      orth = std::max(orth, (proj[a] * proj[b] - (a == b ? proj[a] : Matrix::Zero(rep.dim, rep.dim))).norm());
    for (std::size_t j = 0; j < rep.orders.size(); ++j) {
      const Complex z = std::polar(1.0, kTwoPi * labels[a][j] / rep.orders[j]);
      eig = std::max(eig, (rep.generators[j] * proj[a] - z * proj[a]).norm());
    }
    total += proj[a];
  }
  sum = (total - id).norm();
  int nonzero = 0;
  for (const auto& p : proj) nonzero += p.norm() > 0.5 ? 1 : 0;
  log.add("projector_selfadjoint", herm, c.exact_tol);
  log.add("projector_orthogonality", orth, c.exact_tol);
  log.add("projector_nonzero_defect", static_cast<double>(static_cast<int>(labels.size()) - nonzero), 0.0);
  log.add("projector_resolution_of_identity", sum, c.exact_tol);
  log.add("projector_eigenvalue_relation", eig, c.exact_tol);
  std::mt19937_64 rng(c.seed);
  double parseval = 0.0;
  for (int s = 0; s < c.probes; ++s) {
    Vector phi(rep.dim);
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = random_complex(rng);
    phi.normalize();
    double split = 0.0;
    for (const auto& p : proj) split += (p * phi).squaredNorm();
    parseval = std::max(parseval, std::abs(split - 1.0));
  }
  log.add("parseval", parseval, c.exact_tol);
}

inline void verify_lattice(const RunConfig& c, CheckLog& log) {
  ModelLattice lat = build_lattice(c);
  double unit = 0.0;
  for (const auto& g : lat.generators) unit = std::max(unit, unitarity_defect(g));
  log.add("generator_unitarity", unit, c.exact_tol);
  double comm = 0.0;
  for (std::size_t i = 0; i < lat.generators.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) comm = std::max(comm, commutator_norm(lat.generators[i], lat.generators[j]));
  log.add("generator_commutation", comm, c.exact_tol);
  if (lat.flux) {
    const char* a = c.model == ModelKind::mathieu ? "u" : "U";
    const char* b = c.model == ModelKind::mathieu ? "v" : "V";
    const Complex phase = std::polar(1.0, kTwoPi * lat.flux->beta());
    log.add("noncommutative_torus_relation",
            commutator_norm(lat.observables.at(a), lat.observables.at(b), phase), c.exact_tol);
  }
  double cov = 0.0;
  for (const auto& [name, op] : lat.observables)
    for (const auto& g : lat.generators) cov = std::max(cov, commutator_norm(op, g));
  log.add("observable_covariance", cov, c.numeric_tol);

  std::vector<Vector> candidates = lat.candidates;
  if (c.candidates) {
    candidates.clear();
    for (int k : *c.candidates) candidates.push_back(lat.candidates[static_cast<std::size_t>(k)]);
  }
  const int window = default_window(lat.basis);
  WanderingReport rep = verify_wandering(lat.generators, candidates, window, c.exact_tol);
  log.add("wandering_orthogonality", rep.max_violation, c.exact_tol);
  log.add("wandering_cyclicity", rep.cyclic_defect, c.exact_tol);
  if (!rep.passed) return;

  WanderingDecomposition dec(MonomialAction(lat.generators), candidates, rep);
  std::map<std::string, CovariantOperator> cov_ops;
  for (const auto& [name, op] : lat.observables) cov_ops.emplace(name, covariant_from_lattice(op, dec));
  const auto& h = cov_ops.at("hamiltonian");
  const int N = dec.lattice_dim();
  const int q = dec.q();
  log.add("hamiltonian_hermitian", h.hermiticity_defect(), c.exact_tol);

  std::mt19937_64 rng(c.seed);
  // Parseval and inverse round-trip on bandlimited vectors.
  const int radius = std::min(3, (c.L - 1) / 2);
  TorusGrid grid(N, c.L);
  double parseval = 0.0, roundtrip = 0.0;
  for (int s = 0; s < c.probes; ++s) {
    Coefficients phi = random_coefficients(rng, q, N, radius);
    double norm2 = 0.0;
    for (const auto& [key, v] : phi) norm2 += std::norm(v);
    auto field = transform_vector(phi, q, grid);
    double quad = 0.0;
    for (const auto& v : field.values) quad += grid.weight() * v.squaredNorm();
    parseval = std::max(parseval, std::abs(quad - norm2) / norm2);
    auto back = inverse_transform(field);
    for (const auto& [key, v] : phi) {
      auto it = back.coeffs.find(key);
      roundtrip = std::max(roundtrip, std::abs(v - (it == back.coeffs.end() ? Complex(0.0) : it->second)));
    }
  }
  log.add("parseval", parseval, c.exact_tol);
  log.add("inverse_roundtrip", roundtrip, c.exact_tol);

  double haar = 0.0;
  const int moment_window = std::min(6, dec.safe_window());
  for (int k = 0; k < q; ++k)
    for (const auto& a : cube_indices(N, moment_window)) haar = std::max(haar, haar_moment_check(dec, k, a));
  log.add("haar_moments", haar, c.exact_tol);

  double hom = 0.0, inv = 0.0;
  for (int s = 0; s < 20; ++s) {
    auto A = random_covariant(rng, q, N, 1, c.M);
    auto B = random_covariant(rng, q, N, 1, c.M);
    auto AB = compose_covariant(A, B);
    auto Adag = A.adjoint();
    for (int n = 0; n < 8; ++n) {
      auto t = random_node(rng, N);
      const Matrix fa = fiber_operator(A, t);
      hom = std::max(hom, (fiber_operator(AB, t) - fa * fiber_operator(B, t)).norm());
      inv = std::max(inv, (fiber_operator(Adag, t) - fa.adjoint()).norm());
    }
  }
  log.add("fiber_homomorphism", hom, c.exact_tol);
  log.add("fiber_involution", inv, c.exact_tol);

  double gen = 0.0;
  for (int j = 0; j < N; ++j) {
    auto Uj = CovariantOperator::symmetry_generator(q, N, j);
    for (int n = 0; n < 8; ++n) {
      auto t = random_node(rng, N);
      gen = std::max(gen, (fiber_operator(Uj, t) - std::polar(1.0, t[static_cast<std::size_t>(j)]) * Matrix::Identity(q, q)).norm());
    }
  }
  log.add("generator_fiber_eigenvalue", gen, c.exact_tol);

  if (c.model == ModelKind::mathieu && !c.candidates) {
    double closed = 0.0;
    for (int n = 0; n < 16; ++n) {
      auto t = random_node(rng, 1);
      auto [u, v] = mathieu_fiber_closed_form(c.p, c.q, t[0]);
      closed = std::max(closed, (fiber_operator(cov_ops.at("u"), t) - u).cwiseAbs().maxCoeff());
      closed = std::max(closed, (fiber_operator(cov_ops.at("v"), t) - v).cwiseAbs().maxCoeff());
    }
    log.add("fiber_closed_form", closed, c.exact_tol);
  }
}

}  // namespace detail

/// Returns the process exit code (0 all checks pass, 1 otherwise).
inline int cmd_verify(const RunConfig& c) {
  CheckLog log;
  if (c.model == ModelKind::finite_group)
    detail::verify_finite(c, log);
  else
    detail::verify_lattice(c, log);
  json report{{"model", model_name(c.model)}, {"seed", c.seed}, {"checks", log.to_json()}, {"passed", log.all_passed()}};
  write_atomic(c.output_dir / "report.json", dump(report));
  if (!log.all_passed()) {
    std::string names;
    for (const auto& n : log.failed()) names += (names.empty() ? "" : ", ") + n;
    throw CheckFailure("verification failed: " + names);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bands / chern / butterfly / decompose
// ---------------------------------------------------------------------------

inline int cmd_bands(const RunConfig& c) {
  ModelInstance model = build_model(c);
  const int N = model.lattice_dim();
  BandData bands = band_spectrum(model, TorusGrid(N, c.L));
  std::ostringstream csv;
  csv << (N == 1 ? "t1" : "t1,t2") << ",band_index,energy\n";
  for (std::size_t i = 0; i < bands.grid.size(); ++i) {
    std::string node;
    for (double t : bands.grid.node(i)) node += format_real(t) + ",";
    for (int r = 0; r < bands.band_count; ++r)
      csv << node << r << "," << format_real(bands.energies[i][static_cast<std::size_t>(r)]) << "\n";
  }
  write_atomic(c.output_dir / "bands.csv", csv.str());
  return 0;
}

inline std::vector<std::vector<int>> requested_band_sets(const RunConfig& c, int q) {
  if (c.band_set) return {*c.band_set};
  std::vector<std::vector<int>> sets;
  for (int r = 0; r < q; ++r) sets.push_back({r});
  std::vector<int> all(static_cast<std::size_t>(q));
  std::iota(all.begin(), all.end(), 0);
  sets.push_back(all);
  return sets;
}

inline int cmd_chern(const RunConfig& c) {
  ModelInstance model = build_model(c);
  const int N = model.lattice_dim();
  const auto sets = requested_band_sets(c, model.q());
  // Gap hypothesis first, on the model's own torus.
  TorusGrid grid(N, c.L);
  for (const auto& set : sets)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto t = grid.node(i);
      try {
        (void)blochfiber::detail::band_frame(fiber_operator(model.hamiltonian(), t), set, kDefaultGapFloor, t);
      } catch (const GapTooSmall& e) {
        throw CheckFailure(std::string("gap failure: ") + e.what());
      }
    }
  if (N != 2) throw ConfigError("chern requires a model on the 2-torus (hofstadter)");
  json bands = json::array();
  for (const auto& set : sets) {
    BerryData d = chern_number(model, set, c.L);
    json entry{{"band_set", set}, {"chern", d.chern}};
    entry["min_gap"] = std::isfinite(d.min_gap) ? json(d.min_gap) : json(nullptr);
    bands.push_back(entry);
  }
  json out{{"model", model_name(c.model)}, {"grid", c.L}, {"bands", bands}};
  out["p"] = model.flux ? json(model.flux->p) : json(nullptr);
  out["q"] = model.q();
  write_atomic(c.output_dir / "chern.json", dump(out));
  return 0;
}

inline int cmd_butterfly(const RunConfig& c) {
  if (c.q_max < 2) throw ConfigError("q_max must be >= 2");
  std::ostringstream csv;
  csv << "p,q,band_index,emin,emax\n";
  for (const auto& row : butterfly(c.q_max, c.L, c.M))
    for (std::size_t r = 0; r < row.bands.size(); ++r)
      csv << row.p << "," << row.q << "," << r << "," << format_real(row.bands[r].first) << ","
          << format_real(row.bands[r].second) << "\n";
  write_atomic(c.output_dir / "butterfly.csv", csv.str());
  return 0;
}

inline int cmd_decompose(const RunConfig& c) {
  FiniteGroupRep rep = build_finite_rep(c);
  FiniteDecomposition dec;
  try {
    dec = decompose_finite(rep, c.probes, static_cast<unsigned>(c.seed));
  } catch (const InvariantViolation& e) {
    throw CheckFailure(e.what());
  }
  json subspaces = json::array();
  for (std::size_t i = 0; i < dec.labels.size(); ++i) {
    const Matrix& b = dec.subspace_bases[i];
    json re = json::array(), im = json::array();
    for (Eigen::Index col = 0; col < b.cols(); ++col) {
      std::vector<double> r, m;
      for (Eigen::Index row = 0; row < b.rows(); ++row) {
        r.push_back(b(row, col).real());
        m.push_back(b(row, col).imag());
      }
      re.push_back(r);
      im.push_back(m);
    }
    subspaces.push_back({{"label", dec.labels[i]}, {"rank", b.cols()}, {"basis_real", re}, {"basis_imag", im}});
  }
  json out{{"orders", rep.orders}, {"labels", dec.labels}, {"ranks", dec.ranks()}, {"subspaces", subspaces}};
  write_atomic(c.output_dir / "decomposition.json", dump(out));
  return 0;
}

/// Dispatches a command and maps failures to exit codes 0/1/2.
inline int run(const std::string& command, const RunConfig& c, std::ostream& err) {
  try {
    if (command == "verify") return cmd_verify(c);
    if (command == "bands") return cmd_bands(c);
    if (command == "chern") return cmd_chern(c);
    if (command == "butterfly") return cmd_butterfly(c);
    if (command == "decompose") return cmd_decompose(c);
    throw ConfigError("unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidFlux& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionOverflow& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CheckFailure& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace blochfiber::cli

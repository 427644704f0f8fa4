#pragma once

// Lie algebra rank condition for single systems, structural obstructions to
// ensemble controllability, and monomial reachability certificates.

#include <ensctl/detail/orthonormal_set.hpp>
#include <ensctl/lie_core.hpp>
#include <ensctl/system.hpp>

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ensctl {

enum class Obstruction { rank_deficit, nontrivial_center, so2_nilpotent, no_translation_channel, sphere_intransitive };

inline const char* to_string(Obstruction o) {
  switch (o) {
    case Obstruction::rank_deficit: return "rank-deficit";
    case Obstruction::nontrivial_center: return "nontrivial-center";
    case Obstruction::so2_nilpotent: return "so2-nilpotent";
    case Obstruction::no_translation_channel: return "no-translation-channel";
    case Obstruction::sphere_intransitive: return "sphere-intransitive";
  }
  return "unknown";
}

struct ClosureResult {
  std::vector<AlgebraElement> basis;  // orthonormal under the algebra's inner product
  int dimension = 0;
  int rounds = 0;
};

/// Smallest bracket-closed subspace containing the generators.
///
/// Each round brackets every pair of basis elements in which at least one
/// member is new, and keeps the components whose residual after projection
/// exceeds `tol` relative to the candidate's norm. The basis is
/// orthonormalised under `algebra`'s inner product as it grows.
inline ClosureResult lie_closure(std::span<const AlgebraElement> generators, GroupKind algebra, int ambient_dim,
                                 double tol = 1e-9) {
  if (!(tol > 0.0)) throw Error(ErrorCode::spec, "closure tolerance must be positive");
  ClosureResult out;
  if (generators.empty()) return out;
  const Matrix& proto = generators.front().matrix;
  std::vector<Eigen::VectorXd> qs;
  std::vector<Matrix> mats;

  // Two-pass Gram-Schmidt carried out on vectors and matrices side by side.
  auto add = [&](const Matrix& m) {
    Eigen::VectorXd rv = vectorize(algebra, m);
    const double vn = rv.norm();
    if (vn <= 1e-13) return false;
    Matrix r = m;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < qs.size(); ++k) {
        const double p = qs[k].dot(rv);
        rv -= p * qs[k];
        r -= p * mats[k];
      }
    const double rn = rv.norm();
    if (rn <= tol * vn) return false;
    qs.push_back(rv / rn);
    mats.push_back(r / rn);
    return true;
  };

  std::size_t first_new = 0;
  for (const auto& g : generators) {
    if (g.matrix.rows() != proto.rows()) throw Error(ErrorCode::shape, "generators of different sizes");
    add(g.matrix);
  }
  const int limit = std::max(ambient_dim, 1) + 1;
  while (first_new < mats.size()) {
    if (++out.rounds > limit) throw Error(ErrorCode::invariant_violation, "lie_closure failed to converge");
    const std::size_t end = mats.size();
    for (std::size_t a = 0; a < end; ++a) {
      for (std::size_t b = std::max(a + 1, first_new); b < end; ++b) add(commutator(mats[a], mats[b]));
    }
    first_new = end;
    if (static_cast<int>(mats.size()) > ambient_dim && ambient_dim > 0)
      throw Error(ErrorCode::invariant_violation, "closure exceeded the ambient dimension");
  }
  for (auto& m : mats) out.basis.push_back({m, algebra, std::nullopt});
  out.dimension = static_cast<int>(out.basis.size());
  return out;
}

/// Basis of the center of the span of `closure` (elements commuting with all of it).
inline std::vector<AlgebraElement> center_of_closure(const std::vector<AlgebraElement>& closure) {
  std::vector<AlgebraElement> out;
  if (closure.empty()) return out;
  const GroupKind g = closure.front().algebra;
  const auto d = static_cast<Eigen::Index>(closure.size());
  const auto len = vectorize(g, closure.front().matrix).size();
  Eigen::MatrixXd ad(len * d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      ad.block(j * len, i, len, 1) = vectorize(g, commutator(closure[i].matrix, closure[j].matrix));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ad, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = 1e-9 * std::max(1.0, s.size() ? s(0) : 0.0);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double sk = k < s.size() ? s(k) : 0.0;
    if (sk > cutoff) continue;
    const Eigen::VectorXd c = svd.matrixV().col(k);
    Matrix z = Matrix::Zero(closure.front().matrix.rows(), closure.front().matrix.cols());
    for (Eigen::Index i = 0; i < d; ++i) z += c(i) * closure[i].matrix;
    out.push_back({z, g, c});
  }
  return out;
}

struct ControllabilityReport {
  bool controllable = false;
  bool ensemble = false;
  int closure_dimension = 0;
  int algebra_dimension = 0;
  std::vector<AlgebraElement> closure_basis;
  std::optional<Obstruction> obstruction;
  std::vector<AlgebraElement> center;
  // SE(n) diagnostics
  std::optional<bool> sphere_transitive;
  std::optional<int> translational_reach;
  // Parameter labels enter through positive functions whose embedding
  // property is taken on trust.
  bool embedding_assumed = false;
};

namespace detail {

inline int matrix_rank(const Eigen::MatrixXd& m, double rel = 1e-9) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > rel * std::max(1.0, s(0))) ++r;
  return r;
}

// Rotation blocks (n x n real) of an se(n)/so(n) closure basis.
inline std::vector<RealMatrix> rotation_blocks(const std::vector<AlgebraElement>& basis, int n) {
  std::vector<RealMatrix> out;
  for (const auto& b : basis) out.push_back(b.matrix.real().topLeftCorner(n, n));
  return out;
}

// Sample points where the orbit dimension of the rotational closure is tested.
inline std::vector<Eigen::VectorXd> sphere_samples(int n) {
  std::vector<Eigen::VectorXd> pts;
  for (int k = 0; k < n; ++k) pts.push_back(Eigen::VectorXd::Unit(n, k));
  pts.push_back(Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n)));
  return pts;
}

inline bool sphere_transitive(const std::vector<RealMatrix>& rot, int n) {
  for (const auto& x : sphere_samples(n)) {
    Eigen::MatrixXd tangent(n, static_cast<Eigen::Index>(rot.size()));
    for (std::size_t k = 0; k < rot.size(); ++k) tangent.col(static_cast<Eigen::Index>(k)) = rot[k] * x;
    if (matrix_rank(tangent) != n - 1) return false;
  }
  return true;
}

// Dimension of the smallest subspace containing the channels e_k and
// invariant under every rotation block.
inline int invariant_reach(const std::vector<RealMatrix>& rot, const std::vector<int>& channels, int n) {
  OrthonormalSet w(n);
  std::deque<Eigen::VectorXd> queue;
  for (int k : channels)
    if (w.try_add(Eigen::VectorXd::Unit(n, k), 1e-9)) queue.push_back(w.vectors().back());
  while (!queue.empty()) {
    const Eigen::VectorXd v = queue.front();
    queue.pop_front();
    for (const auto& a : rot)
      if (w.try_add(a * v, 1e-9)) queue.push_back(w.vectors().back());
  }
  return static_cast<int>(w.size());
}

}  // namespace detail

/// Classical controllability (LARC). SE(n) additionally reports the
/// rotational sphere-transitivity and translational reach decomposition.
inline ControllabilityReport check_classical(const SystemSpec& spec) {
  validate(spec);
  ControllabilityReport rep;
  rep.embedding_assumed = spec.has_labels();
  rep.algebra_dimension = spec.algebra_dim();
  const auto gens = spec.nominal_generators();
  const ClosureResult cl = lie_closure(gens, spec.group, rep.algebra_dimension);
  rep.closure_basis = cl.basis;
  rep.closure_dimension = cl.dimension;

  if (spec.group == GroupKind::SE) {
    std::vector<AlgebraElement> rot_gens;
    for (const auto& g : spec.generators) rot_gens.push_back({g.element.matrix, GroupKind::SE, std::nullopt});
    const ClosureResult rot = lie_closure(rot_gens, GroupKind::SE, rep.algebra_dimension);
    const auto blocks = detail::rotation_blocks(rot.basis, spec.n);
    rep.sphere_transitive = detail::sphere_transitive(blocks, spec.n);
    rep.translational_reach = detail::invariant_reach(blocks, spec.translations, spec.n);
    if (spec.translations.empty()) {
      rep.obstruction = Obstruction::no_translation_channel;
    } else if (!*rep.sphere_transitive) {
      rep.obstruction = Obstruction::sphere_intransitive;
    } else if (*rep.translational_reach != spec.n) {
      rep.obstruction = Obstruction::rank_deficit;
    }
  }
  if (!rep.obstruction && rep.closure_dimension != rep.algebra_dimension) rep.obstruction = Obstruction::rank_deficit;
  rep.controllable = !rep.obstruction && rep.closure_dimension == rep.algebra_dimension;
  return rep;
}

/// Ensemble controllability through the ensemble/classical equivalence,
/// overridden by the center and SO(2) obstructions.
inline ControllabilityReport check_ensemble(const SystemSpec& spec) {
  validate(spec);
  ControllabilityReport rep = check_classical(spec);
  rep.ensemble = true;
  rep.center = center_of_closure(rep.closure_basis);
  const bool trivial_box = [&] {
    if (!spec.has_labels()) return true;
    for (const auto& p : spec.parameters)
      if (p.max > p.min && p.samples > 1) return false;
    return true;
  }();
  if (trivial_box) return rep;  // a single system: ensemble == classical
  if ((spec.group == GroupKind::SO || spec.group == GroupKind::SE) && spec.n == 2) {
    rep.obstruction = Obstruction::so2_nilpotent;
  } else if (!rep.center.empty()) {
    rep.obstruction = Obstruction::nontrivial_center;
  }
  rep.controllable = !rep.obstruction && rep.closure_dimension == rep.algebra_dimension;
  return rep;
}

// ---------------------------------------------------------------------------
// Monomial certificates
// ---------------------------------------------------------------------------

struct MonomialCertificate {
  std::vector<int> exponents;  // one exponent per parameter label
  int sign = 1;                // witness bracket equals sign * monomial * basis element
  int depth = 1;               // bracket depth of the witness word
};

namespace detail {

// Locate +/- basis element for a standard-basis generator matrix.
inline std::pair<int, int> signed_basis_index(const std::vector<BasisElement>& basis, GroupKind g, const Matrix& m) {
  const Eigen::VectorXd c = coordinates(g, basis, m);
  int hit = -1;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    if (std::abs(c(k)) <= tol::construction) continue;
    if (hit >= 0) return {-1, 0};
    hit = static_cast<int>(k);
  }
  if (hit < 0 || max_abs(m - c(hit) * basis[static_cast<std::size_t>(hit)].matrix) > tol::construction) return {-1, 0};
  return {hit, c(hit) > 0 ? 1 : -1};
}

}  // namespace detail

/// Breadth-first search over (basis element, monomial) pairs using
/// [m1 A, m2 B] = m1 m2 [A, B]. Each reached basis element is mapped to the
/// first witness monomial found (depth first, then generator order).
inline std::map<int, MonomialCertificate> monomial_certificates(const SystemSpec& spec) {
  validate(spec);
  if (spec.group == GroupKind::Generic) throw Error(ErrorCode::spec, "certificates need a standard basis");
  const auto basis = standard_basis(spec.group, spec.n);
  const StructureTable table = structure_table(basis);
  const std::size_t labels = spec.parameters.size();

  struct Node {
    int index;
    MonomialCertificate cert;
  };
  std::vector<Node> gens;
  for (const auto& g : spec.generators) {
    auto [idx, sign] = detail::signed_basis_index(basis, spec.group, g.element.matrix);
    if (idx < 0) throw Error(ErrorCode::non_closed_basis, g.element.label + " is not a signed basis element");
    MonomialCertificate c{std::vector<int>(labels, 0), sign, 1};
    if (const auto* label = std::get_if<std::string>(&g.coefficient))
      c.exponents[static_cast<std::size_t>(spec.parameter_index(*label))] = 1;
    gens.push_back({idx, c});
  }
  for (int k : spec.translations) {
    const int idx = algebra_dimension(GroupKind::SO, spec.n) + k;
    gens.push_back({idx, MonomialCertificate{std::vector<int>(labels, 0), 1, 1}});
  }

  std::map<int, MonomialCertificate> out;
  std::vector<Node> level;
  for (const auto& g : gens)
    if (out.emplace(g.index, g.cert).second) level.push_back(g);
  while (!level.empty()) {
    std::vector<Node> next;
    for (const auto& e : level) {
      for (const auto& g : gens) {
        const int entry = table.at(g.index, e.index);
        if (entry == 0) continue;
        const int idx = std::abs(entry) - 1;
        if (out.count(idx)) continue;
        MonomialCertificate c{std::vector<int>(labels, 0), g.cert.sign * e.cert.sign * (entry > 0 ? 1 : -1),
                              e.cert.depth + 1};
        for (std::size_t l = 0; l < labels; ++l) c.exponents[l] = g.cert.exponents[l] + e.cert.exponents[l];
        out.emplace(idx, c);
        next.push_back({idx, c});
      }
    }
    level = std::move(next);
  }
  return out;
}

}  // namespace ensctl

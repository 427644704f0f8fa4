#pragma once

// Covers of so(n) by so(3)-isomorphic coordinate triples, spin-triple
// certificates, and su(2) triples built from root data.

#include <ensctl/detail/orthonormal_set.hpp>
#include <ensctl/lie_core.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ensctl {

/// Outcome of checking [B1,B2] = B3, [B2,B3] = B1, [B3,B1] = B2.
struct SpinCertificate {
  bool passed = false;
  std::array<double, 3> residuals{};  // max-abs residual of each relation
  std::optional<std::string> violated;
};

inline SpinCertificate spin_triple_check(const Matrix& b1, const Matrix& b2, const Matrix& b3, double tol = 1e-12) {
  if (b1.rows() != b2.rows() || b1.rows() != b3.rows() || b1.cols() != b2.cols() || b1.cols() != b3.cols())
    throw Error(ErrorCode::shape, "spin triple members differ in shape");
  SpinCertificate c;
  c.residuals = {max_abs(commutator(b1, b2) - b3), max_abs(commutator(b2, b3) - b1), max_abs(commutator(b3, b1) - b2)};
  static constexpr const char* names[] = {"[B1,B2] != B3", "[B2,B3] != B1", "[B3,B1] != B2"};
  for (int k = 0; k < 3; ++k)
    if (!(c.residuals[static_cast<std::size_t>(k)] <= tol)) {
      c.violated = names[k];
      break;
    }
  c.passed = !c.violated;
  return c;
}

/// A triple of basis directions with the signs that make the bracket table
/// cyclic: [s0 b0, s1 b1] = s2 b2 and so on.
struct CoverTriple {
  std::array<int, 3> index{};
  std::array<int, 3> sign{1, 1, 1};
  std::array<Matrix, 3> matrices;
  SpinCertificate certificate;
};

struct Cover {
  GroupKind algebra = GroupKind::SO;
  std::vector<BasisElement> basis;
  std::vector<CoverTriple> triples;
};

namespace detail {

// Picks the first of the eight sign patterns (fewest flips first) that turns
// the triple into a spin triple.
inline std::optional<CoverTriple> normalise_triple(const std::vector<BasisElement>& basis, std::array<int, 3> idx,
                                                   double tol) {
  static constexpr std::array<std::array<int, 3>, 8> patterns{{{1, 1, 1},
                                                                {1, 1, -1},
                                                                {1, -1, 1},
                                                                {-1, 1, 1},
                                                                {1, -1, -1},
                                                                {-1, 1, -1},
                                                                {-1, -1, 1},
                                                                {-1, -1, -1}}};
  for (const auto& s : patterns) {
    CoverTriple t;
    t.index = idx;
    t.sign = s;
    for (int k = 0; k < 3; ++k)
      t.matrices[static_cast<std::size_t>(k)] =
          static_cast<double>(s[static_cast<std::size_t>(k)]) * basis[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].matrix;
    t.certificate = spin_triple_check(t.matrices[0], t.matrices[1], t.matrices[2], tol);
    if (t.certificate.passed) return t;
  }
  return std::nullopt;
}

// First basis direction outside the span of the triples, if any.
inline std::optional<int> first_unspanned(GroupKind g, const std::vector<BasisElement>& basis,
                                          const std::vector<CoverTriple>& triples) {
  if (basis.empty()) return std::nullopt;
  OrthonormalSet span(vectorize(g, basis.front().matrix).size());
  for (const auto& t : triples)
    for (const auto& m : t.matrices) span.try_add(vectorize(g, m), 1e-9);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const Eigen::VectorXd v = vectorize(g, basis[k].matrix);
    if (span.residual(v).norm() > 1e-9 * v.norm()) return static_cast<int>(k);
  }
  return std::nullopt;
}

}  // namespace detail

/// Validates user-supplied triples (0-based indices into `basis`) and checks
/// that their union spans the algebra.
inline Cover cover_from_triples(std::vector<BasisElement> basis, const std::vector<std::array<int, 3>>& triples,
                                double tol = 1e-12) {
  if (basis.empty()) throw Error(ErrorCode::spec, "cover needs a nonempty basis");
  Cover c;
  c.algebra = algebra_of(basis.front().kind);
  for (const auto& idx : triples) {
    for (int k : idx)
      if (k < 0 || k >= static_cast<int>(basis.size())) throw Error(ErrorCode::spec, "triple index out of range");
    auto t = detail::normalise_triple(basis, idx, tol);
    if (!t)
      throw Error(ErrorCode::non_closed_basis, "{" + basis[static_cast<std::size_t>(idx[0])].label + ", " +
                                                   basis[static_cast<std::size_t>(idx[1])].label + ", " +
                                                   basis[static_cast<std::size_t>(idx[2])].label +
                                                   "} is not a spin triple under any sign choice");
    c.triples.push_back(std::move(*t));
  }
  if (const auto miss = detail::first_unspanned(c.algebra, basis, c.triples))
    throw Error(ErrorCode::cover_incomplete,
                "direction " + basis[static_cast<std::size_t>(*miss)].label + " is not spanned by the triples");
  c.basis = std::move(basis);
  return c;
}

enum class CoverMode { full, minimal };

/// Coordinate-triangle covers of so(n).
///
/// minimal: one triple {Omega_ij, Omega_ik, Omega_jk} per i<j<k, in
/// lexicographic order. full: for each plane (i,j) and each k outside it, the
/// triple {Omega_ij, Omega_ik, Omega_kj}; every triangle then appears once
/// per edge.
inline Cover cover_so_n(int n, CoverMode mode) {
  if (n < 3) throw Error(ErrorCode::invalid_dimension, "so(n) contains no so(3) subalgebra for n < 3");
  const auto basis = standard_basis(GroupKind::SO, n);
  std::vector<std::array<int, 3>> triples;
  auto ix = [n](int a, int b) { return a < b ? so_index(n, a, b) : so_index(n, b, a); };
  if (mode == CoverMode::minimal) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) triples.push_back({ix(i, j), ix(i, k), ix(j, k)});
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (k != i && k != j) triples.push_back({ix(i, j), ix(i, k), ix(k, j)});
  }
  return cover_from_triples(basis, triples);
}

/// A coroot H and root vector X with [H,X] = 2X. The negative root vector is
/// Y = X^dag, the conjugate of X with respect to the compact real form.
struct RootDatum {
  Matrix H;
  Matrix X;
};

struct SpinTriple {
  Matrix b1, b2, b3;
  SpinCertificate certificate;
};

inline SpinTriple su2_triple_from_root(const RootDatum& d, double tol = 1e-10) {
  if (d.H.rows() != d.X.rows() || d.H.cols() != d.X.cols() || d.H.rows() != d.H.cols())
    throw Error(ErrorCode::shape, "root datum members differ in shape");
  const Matrix Y = d.X.adjoint();
  auto rel = [](const Matrix& m) { return std::max(1.0, max_abs(m)); };
  if (max_abs(commutator(d.H, d.X) - 2.0 * d.X) > tol * rel(d.X))
    throw Error(ErrorCode::root_data, "[H,X] != 2X");
  if (max_abs(commutator(d.H, Y) + 2.0 * Y) > tol * rel(Y)) throw Error(ErrorCode::root_data, "[H,Y] != -2Y");
  if (max_abs(commutator(d.X, Y) - d.H) > tol * rel(d.H)) throw Error(ErrorCode::root_data, "[X,Y] != H");
  const Complex I(0.0, 1.0);
  SpinTriple t{I * d.H / 2.0, I * (d.X + Y) / 2.0, (Y - d.X) / 2.0, {}};
  t.certificate = spin_triple_check(t.b1, t.b2, t.b3, tol);
  return t;
}

}  // namespace ensctl

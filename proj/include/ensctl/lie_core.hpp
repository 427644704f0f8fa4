#pragma once

// Bases, brackets, inner products, exponential/logarithm and the
// bi-invariant metric for so(n), se(n), su(2) and generic matrix algebras.

#include <ensctl/error.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace ensctl {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using ParamPoint = std::vector<double>;

namespace tol {
inline constexpr double construction = 1e-12;
inline constexpr double group = 1e-10;
inline constexpr double round_trip = 1e-9;
inline constexpr double cut_locus = 1e-8;
}  // namespace tol

enum class GroupKind { SO, SE, SU2, Generic };

inline const char* to_string(GroupKind g) {
  switch (g) {
    case GroupKind::SO: return "SO";
    case GroupKind::SE: return "SE";
    case GroupKind::SU2: return "SU2";
    case GroupKind::Generic: return "generic";
  }
  return "generic";
}

enum class BasisKind { so_rotation, se_rotation, se_translation, su2_spin, generic };

inline GroupKind algebra_of(BasisKind k) {
  switch (k) {
    case BasisKind::so_rotation: return GroupKind::SO;
    case BasisKind::se_rotation:
    case BasisKind::se_translation: return GroupKind::SE;
    case BasisKind::su2_spin: return GroupKind::SU2;
    case BasisKind::generic: return GroupKind::Generic;
  }
  return GroupKind::Generic;
}

/// One element of a standard basis. Indices are 0-based; labels are 1-based
/// (Omega_12, R_12, T_1, B_1) to match the usual notation.
struct BasisElement {
  BasisKind kind = BasisKind::generic;
  int i = 0;  // first plane index, translation index, or spin index (0..2)
  int j = 0;
  Matrix matrix;
  std::string label;
};

/// Algebra element: a matrix tagged with the algebra it belongs to.
struct AlgebraElement {
  Matrix matrix;
  GroupKind algebra = GroupKind::Generic;
  std::optional<Eigen::VectorXd> coords;
};

struct GroupElement {
  Matrix matrix;
  GroupKind group = GroupKind::Generic;
};

inline int matrix_size(GroupKind g, int n) {
  switch (g) {
    case GroupKind::SO: return n;
    case GroupKind::SE: return n + 1;
    case GroupKind::SU2: return 2;
    case GroupKind::Generic: return n;
  }
  return n;
}

inline int algebra_dimension(GroupKind g, int n) {
  switch (g) {
    case GroupKind::SO: return n * (n - 1) / 2;
    case GroupKind::SE: return n * (n - 1) / 2 + n;
    case GroupKind::SU2: return 3;
    case GroupKind::Generic: break;
  }
  throw Error(ErrorCode::spec, "generic algebras have no implied dimension");
}

// ---------------------------------------------------------------------------
// Standard bases
// ---------------------------------------------------------------------------

/// E_ij - E_ji as an n x n matrix (0-based, either index order).
inline Matrix omega(int n, int i, int j) {
  Matrix m = Matrix::Zero(n, n);
  m(i, j) = 1.0;
  m(j, i) = -1.0;
  return m;
}

inline BasisElement so_rotation(int n, int i, int j) {
  if (n < 2) throw Error(ErrorCode::invalid_dimension, "so(n) needs n >= 2");
  if (!(0 <= i && i < j && j < n))
    throw Error(ErrorCode::invalid_dimension, "so_rotation requires 1 <= i < j <= n");
  return {BasisKind::so_rotation, i, j, omega(n, i, j),
          "Omega_" + std::to_string(i + 1) + std::to_string(j + 1)};
}

inline BasisElement se_rotation(int n, int i, int j) {
  if (n < 2) throw Error(ErrorCode::invalid_dimension, "se(n) needs n >= 2");
  if (!(0 <= i && i < j && j < n))
    throw Error(ErrorCode::invalid_dimension, "se_rotation requires 1 <= i < j <= n");
  Matrix m = Matrix::Zero(n + 1, n + 1);
  m.topLeftCorner(n, n) = omega(n, i, j);
  return {BasisElement{BasisKind::se_rotation, i, j, m,
                       "R_" + std::to_string(i + 1) + std::to_string(j + 1)}};
}

inline BasisElement se_translation(int n, int k) {
  if (n < 2) throw Error(ErrorCode::invalid_dimension, "se(n) needs n >= 2");
  if (k < 0 || k >= n) throw Error(ErrorCode::invalid_dimension, "translation index out of range");
  Matrix m = Matrix::Zero(n + 1, n + 1);
  m(k, n) = 1.0;
  return {BasisKind::se_translation, k, 0, m, "T_" + std::to_string(k + 1)};
}

/// Spin basis of su(2): Pauli matrices times i/2, so that
/// [B1,B2] = B3, [B2,B3] = B1, [B3,B1] = B2 hold exactly.
inline BasisElement su2_spin(int k) {
  const Complex I(0.0, 1.0);
  Matrix m(2, 2);
  switch (k) {
    case 0: m << 0.0, 0.5 * I, 0.5 * I, 0.0; break;
    case 1: m << 0.0, -0.5, 0.5, 0.0; break;
    case 2: m << 0.5 * I, 0.0, 0.0, -0.5 * I; break;
    default: throw Error(ErrorCode::invalid_dimension, "spin index must be 1, 2 or 3");
  }
  return {BasisKind::su2_spin, k, 0, m, "B_" + std::to_string(k + 1)};
}

inline std::vector<BasisElement> standard_basis(GroupKind g, int n) {
  std::vector<BasisElement> out;
  switch (g) {
    case GroupKind::SO:
      if (n < 2) throw Error(ErrorCode::invalid_dimension, "so(n) needs n >= 2");
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) out.push_back(so_rotation(n, i, j));
      return out;
    case GroupKind::SE:
      if (n < 2) throw Error(ErrorCode::invalid_dimension, "se(n) needs n >= 2");
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) out.push_back(se_rotation(n, i, j));
      for (int k = 0; k < n; ++k) out.push_back(se_translation(n, k));
      return out;
    case GroupKind::SU2:
      if (n != 2) throw Error(ErrorCode::invalid_dimension, "su(2) acts on 2x2 matrices");
      for (int k = 0; k < 3; ++k) out.push_back(su2_spin(k));
      return out;
    case GroupKind::Generic: break;
  }
  throw Error(ErrorCode::spec, "generic algebras have no standard basis");
}

/// Index of so_rotation(i,j) in the lexicographic so(n) basis (0-based, i<j).
inline int so_index(int n, int i, int j) {
  int idx = 0;
  for (int a = 0; a < i; ++a) idx += n - 1 - a;
  return idx + (j - i - 1);
}

// ---------------------------------------------------------------------------
// Membership checks
// ---------------------------------------------------------------------------

inline bool is_real(const Matrix& m) { return m.imag().cwiseAbs().maxCoeff() == 0.0; }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool in_algebra(GroupKind g, const Matrix& m, double eps = tol::construction) {
  if (m.rows() != m.cols()) return false;
  const auto n = m.rows();
  switch (g) {
    case GroupKind::SO:
      return max_abs(m.imag()) <= eps && max_abs(m + m.transpose()) <= eps;
    case GroupKind::SE: {
      if (n < 3 || max_abs(m.imag()) > eps) return false;
      const Matrix rot = m.topLeftCorner(n - 1, n - 1);
      return max_abs(rot + rot.transpose()) <= eps && max_abs(m.bottomRows(1)) <= eps;
    }
    case GroupKind::SU2:
      return n == 2 && max_abs(m + m.adjoint()) <= eps && std::abs(m.trace()) <= eps;
    case GroupKind::Generic: return true;
  }
  return false;
}

inline AlgebraElement make_algebra_element(GroupKind g, Matrix m) {
  if (!m.allFinite()) throw Error(ErrorCode::numeric, "non-finite algebra element");
  if (!in_algebra(g, m, 1e-10))
    throw Error(ErrorCode::shape, std::string("matrix is not an element of ") + to_string(g));
  return {std::move(m), g, std::nullopt};
}

inline void check_group_element(const GroupElement& x, double eps = tol::group) {
  const Matrix& m = x.matrix;
  if (m.rows() != m.cols()) throw Error(ErrorCode::shape, "group element must be square");
  if (!m.allFinite()) throw Error(ErrorCode::numeric, "non-finite group element");
  const auto n = m.rows();
  auto fail = [&](const char* what) {
    throw Error(ErrorCode::invariant_violation, std::string(to_string(x.group)) + ": " + what);
  };
  switch (x.group) {
    case GroupKind::SO:
      if (max_abs(m.imag()) > eps) fail("complex entries");
      if (max_abs(m.adjoint() * m - Matrix::Identity(n, n)) > eps) fail("not orthogonal");
      if (std::abs(m.determinant() - 1.0) > eps) fail("determinant != 1");
      return;
    case GroupKind::SE: {
      if (max_abs(m.imag()) > eps) fail("complex entries");
      const Matrix r = m.topLeftCorner(n - 1, n - 1);
      if (max_abs(r.adjoint() * r - Matrix::Identity(n - 1, n - 1)) > eps) fail("rotation block not orthogonal");
      if (std::abs(r.determinant() - 1.0) > eps) fail("rotation block determinant != 1");
      for (Eigen::Index c = 0; c + 1 < n; ++c)
        if (m(n - 1, c) != 0.0) fail("last row must be (0,...,0,1)");
      if (m(n - 1, n - 1) != 1.0) fail("last row must be (0,...,0,1)");
      return;
    }
    case GroupKind::SU2:
      if (max_abs(m.adjoint() * m - Matrix::Identity(n, n)) > eps) fail("not unitary");
      if (std::abs(m.determinant() - 1.0) > eps) fail("determinant != 1");
      return;
    case GroupKind::Generic: return;
  }
}

// ---------------------------------------------------------------------------
// Bracket and inner product
// ---------------------------------------------------------------------------

inline Matrix commutator(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw Error(ErrorCode::shape, "bracket of matrices with different shapes");
  return a * b - b * a;
}

inline AlgebraElement bracket(const AlgebraElement& a, const AlgebraElement& b) {
  const GroupKind g = a.algebra == b.algebra ? a.algebra : GroupKind::Generic;
  return {commutator(a.matrix, b.matrix), g, std::nullopt};
}

/// Real flattening whose Euclidean inner product equals the algebra's inner
/// product:
///   so(n): tr(A^T B)/2;  se(n): tr(Ra^T Rb)/2 + <ta, tb>;
///   su(2): 2 Re tr(A^dag B);  generic: Re tr(A^dag B)/2.
inline Eigen::VectorXd vectorize(GroupKind g, const Matrix& m) {
  const auto n = m.rows();
  switch (g) {
    case GroupKind::SO: {
      Eigen::VectorXd v(n * n);
      const double w = std::sqrt(0.5);
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) v(c * n + r) = w * m(r, c).real();
      return v;
    }
    case GroupKind::SE: {
      const auto k = n - 1;
      Eigen::VectorXd v(k * k + k);
      const double w = std::sqrt(0.5);
      for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index r = 0; r < k; ++r) v(c * k + r) = w * m(r, c).real();
      for (Eigen::Index r = 0; r < k; ++r) v(k * k + r) = m(r, k).real();
      return v;
    }
    case GroupKind::SU2:
    case GroupKind::Generic: {
      const double w = g == GroupKind::SU2 ? std::sqrt(2.0) : std::sqrt(0.5);
      Eigen::VectorXd v(2 * n * n);
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) {
          v(2 * (c * n + r)) = w * m(r, c).real();
          v(2 * (c * n + r) + 1) = w * m(r, c).imag();
        }
      return v;
    }
  }
  return {};
}

inline double inner_product(GroupKind g, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::shape, "inner product of matrices with different shapes");
  // Evaluated directly rather than through vectorize() so integer bases give
  // exact results.
  const auto n = a.rows();
  switch (g) {
    case GroupKind::SO: return 0.5 * a.real().cwiseProduct(b.real()).sum();
    case GroupKind::SE: {
      const auto k = n - 1;
      return 0.5 * a.real().topLeftCorner(k, k).cwiseProduct(b.real().topLeftCorner(k, k)).sum() +
             a.real().col(k).head(k).dot(b.real().col(k).head(k));
    }
    case GroupKind::SU2: return 2.0 * a.conjugate().cwiseProduct(b).sum().real();
    case GroupKind::Generic: break;
  }
  return 0.5 * a.conjugate().cwiseProduct(b).sum().real();
}

inline double inner_product(const AlgebraElement& a, const AlgebraElement& b) {
  const GroupKind g = a.algebra == b.algebra ? a.algebra : GroupKind::Generic;
  return inner_product(g, a.matrix, b.matrix);
}

inline double norm(GroupKind g, const Matrix& m) { return vectorize(g, m).norm(); }

/// Coordinates over an orthonormal basis (projection by the inner product).
inline Eigen::VectorXd coordinates(GroupKind g, const std::vector<BasisElement>& basis, const Matrix& m) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(basis.size()));
  const Eigen::VectorXd v = vectorize(g, m);
  for (std::size_t k = 0; k < basis.size(); ++k)
    c(static_cast<Eigen::Index>(k)) = vectorize(g, basis[k].matrix).dot(v);
  return c;
}

inline Matrix combine(const std::vector<BasisElement>& basis, const Eigen::VectorXd& coords) {
  Matrix m = Matrix::Zero(basis.front().matrix.rows(), basis.front().matrix.cols());
  for (std::size_t k = 0; k < basis.size(); ++k) m += coords(static_cast<Eigen::Index>(k)) * basis[k].matrix;
  return m;
}

// ---------------------------------------------------------------------------
// Structure constants
// ---------------------------------------------------------------------------

/// Entry (a,b) holds +/-(c+1) when [b_a, b_b] = +/- b_c, and 0 when the
/// bracket vanishes.
struct StructureTable {
  int size = 0;
  std::vector<int> entries;

  int at(int a, int b) const { return entries[static_cast<std::size_t>(a * size + b)]; }
};

inline StructureTable structure_table(const std::vector<BasisElement>& basis) {
  StructureTable t;
  t.size = static_cast<int>(basis.size());
  t.entries.assign(static_cast<std::size_t>(t.size * t.size), 0);
  if (basis.empty()) return t;
  const GroupKind g = algebra_of(basis.front().kind);
  for (int a = 0; a < t.size; ++a) {
    for (int b = 0; b < t.size; ++b) {
      const Matrix br = commutator(basis[a].matrix, basis[b].matrix);
      if (max_abs(br) <= tol::construction) continue;
      const Eigen::VectorXd c = coordinates(g, basis, br);
      int hit = -1;
      for (int k = 0; k < t.size; ++k) {
        if (std::abs(c(k)) <= tol::construction) continue;
        if (hit >= 0 || std::abs(std::abs(c(k)) - 1.0) > tol::construction) {
          hit = -2;
          break;
        }
        hit = k;
      }
      if (hit < 0 || max_abs(br - c(hit) * basis[hit].matrix) > tol::construction)
        throw Error(ErrorCode::non_closed_basis,
                    "[" + basis[a].label + ", " + basis[b].label + "] is not a signed basis element");
      t.entries[static_cast<std::size_t>(a * t.size + b)] = c(hit) > 0 ? hit + 1 : -(hit + 1);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Exponential and logarithm
// ---------------------------------------------------------------------------

namespace detail {

inline RealMatrix expm_so3(const RealMatrix& w) {
  const Eigen::Vector3d v(w(2, 1), w(0, 2), w(1, 0));
  const double theta = v.norm();
  const RealMatrix w2 = w * w;
  double a, b;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return RealMatrix::Identity(3, 3) + a * w + b * w2;
}

inline bool is_skew(const RealMatrix& w) { return (w + w.transpose()).cwiseAbs().maxCoeff() == 0.0; }

}  // namespace detail

/// Real matrix exponential with closed forms for 2x2 and 3x3 skew matrices.
inline RealMatrix expm_real(const RealMatrix& a) {
  if (!a.allFinite()) throw Error(ErrorCode::numeric, "non-finite input to expm");
  if (a.rows() == 2 && detail::is_skew(a)) {
    const double t = a(0, 1);
    RealMatrix r(2, 2);
    r << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    return r;
  }
  if (a.rows() == 3 && detail::is_skew(a)) return detail::expm_so3(a);
  return a.exp();
}

inline Matrix expm(const Matrix& a) {
  if (!a.allFinite()) throw Error(ErrorCode::numeric, "non-finite input to expm");
  if (is_real(a)) return expm_real(a.real()).cast<Complex>();
  return a.exp();
}

inline GroupKind group_of(GroupKind algebra) { return algebra; }

inline GroupElement expm(const AlgebraElement& a) {
  Matrix m = expm(a.matrix);
  if (a.algebra == GroupKind::SE) {
    const auto n = m.rows();
    m.row(n - 1).setZero();
    m(n - 1, n - 1) = 1.0;
  }
  return {std::move(m), group_of(a.algebra)};
}

inline GroupElement identity(GroupKind g, int n) {
  const int s = matrix_size(g, n);
  return {Matrix::Identity(s, s), g};
}

/// Principal logarithm; throws cut_locus when an eigenvalue sits at -1.
inline AlgebraElement logm(const GroupElement& x) {
  const Matrix& m = x.matrix;
  if (!m.allFinite()) throw Error(ErrorCode::numeric, "non-finite input to logm");
  const auto n = m.rows();
  const Matrix core = x.group == GroupKind::SE ? Matrix(m.topLeftCorner(n - 1, n - 1)) : m;
  Eigen::ComplexEigenSolver<Matrix> es(core, false);
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    if (std::abs(es.eigenvalues()(k) + 1.0) < tol::cut_locus)
      throw Error(ErrorCode::cut_locus, "eigenvalue -1: principal logarithm undefined");
  Matrix w;
  if (is_real(m)) {
    w = RealMatrix(m.real()).log().cast<Complex>();
  } else {
    w = m.log();
  }
  switch (x.group) {
    case GroupKind::SO: {
      RealMatrix r = w.real();
      w = (0.5 * (r - r.transpose())).cast<Complex>();
      break;
    }
    case GroupKind::SE: {
      RealMatrix r = w.real();
      const auto k = n - 1;
      RealMatrix rot = r.topLeftCorner(k, k);
      r.topLeftCorner(k, k) = 0.5 * (rot - rot.transpose());
      r.row(k).setZero();
      w = r.cast<Complex>();
      break;
    }
    case GroupKind::SU2: {
      w = 0.5 * (w - w.adjoint());
      w -= (w.trace() / 2.0) * Matrix::Identity(2, 2);
      break;
    }
    case GroupKind::Generic: break;
  }
  return {std::move(w), x.group, std::nullopt};
}

// ---------------------------------------------------------------------------
// Metric
// ---------------------------------------------------------------------------

namespace detail {

// Norm of the principal log of a unitary matrix from its eigenvalue angles.
inline double spectral_log_norm(GroupKind g, const Matrix& d) {
  Eigen::ComplexEigenSolver<Matrix> es(d, false);
  double s = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double phi = std::min(std::abs(std::arg(es.eigenvalues()(k))), M_PI);
    s += phi * phi;
  }
  const double scale = g == GroupKind::SU2 ? 2.0 : 0.5;
  return std::sqrt(scale * s);
}

}  // namespace detail

/// Bi-invariant distance ||log(X^dag Y)||. At the cut locus falls back to the
/// eigenvalue-angle formula (same value, defined everywhere).
inline double geodesic_distance(const GroupElement& x, const GroupElement& y) {
  if (x.group != y.group) throw Error(ErrorCode::shape, "distance between different groups");
  if (x.matrix.rows() != y.matrix.rows()) throw Error(ErrorCode::shape, "distance between different dimensions");
  if (x.group == GroupKind::SE)
    throw Error(ErrorCode::spec, "SE(n) has no bi-invariant metric; compare rotation and translation separately");
  const Matrix d = x.matrix.adjoint() * y.matrix;
  if (x.group == GroupKind::SO && d.rows() == 2) {
    return std::abs(std::atan2(d(0, 1).real(), d(0, 0).real()));
  }
  if (x.group == GroupKind::SO && d.rows() == 3) {
    const RealMatrix r = d.real();
    const Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return std::atan2(0.5 * v.norm(), 0.5 * (r.trace() - 1.0));
  }
  try {
    const AlgebraElement w = logm({d, x.group});
    return norm(x.group, w.matrix);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::cut_locus) throw;
    return detail::spectral_log_norm(x.group, d);
  }
}

/// Rotation and translation parts of two SE(n) elements.
struct SeDistance {
  double rotation = 0.0;
  double translation = 0.0;
  double max() const { return std::max(rotation, translation); }
};

inline SeDistance se_distance(const GroupElement& x, const GroupElement& y) {
  if (x.group != GroupKind::SE || y.group != GroupKind::SE)
    throw Error(ErrorCode::shape, "se_distance needs SE(n) elements");
  const auto n = x.matrix.rows() - 1;
  const GroupElement rx{x.matrix.topLeftCorner(n, n), GroupKind::SO};
  const GroupElement ry{y.matrix.topLeftCorner(n, n), GroupKind::SO};
  return {geodesic_distance(rx, ry), (x.matrix.col(n).head(n) - y.matrix.col(n).head(n)).norm()};
}

/// A map from parameter grid points to group elements.
struct EnsembleState {
  std::vector<ParamPoint> grid;
  std::vector<GroupElement> states;
};

inline bool same_grid(const std::vector<ParamPoint>& a, const std::vector<ParamPoint>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    for (std::size_t k = 0; k < a[i].size(); ++k)
      if (std::abs(a[i][k] - b[i][k]) > 1e-12 * std::max(1.0, std::abs(a[i][k]))) return false;
  }
  return true;
}

inline double pointwise_distance(const GroupElement& x, const GroupElement& y) {
  return x.group == GroupKind::SE ? se_distance(x, y).max() : geodesic_distance(x, y);
}

/// sup over the grid of the pointwise distance.
inline double ensemble_distance(const EnsembleState& f, const EnsembleState& g) {
  if (!same_grid(f.grid, g.grid) || f.states.size() != g.states.size() || f.states.size() != f.grid.size())
    throw Error(ErrorCode::grid, "ensemble states live on different grids");
  double sup = 0.0;
  for (std::size_t i = 0; i < f.states.size(); ++i) sup = std::max(sup, pointwise_distance(f.states[i], g.states[i]));
  return sup;
}

}  // namespace ensctl

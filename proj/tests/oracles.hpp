#pragma once

// Reference computations used by the tests. Nothing here calls into the
// library's bracket, closure or exponential code.

#include <Eigen/Dense>

#include <boost/rational.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXcd;
using Rational = boost::rational<long long>;

// Lexicographic (i,j), i<j, 0-based.
inline std::vector<std::pair<int, int>> so_pairs(int n) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.emplace_back(i, j);
  return out;
}

// Accumulates c * Omega_ab into a sparse map keyed by the ordered pair.
inline void add_omega(std::map<std::pair<int, int>, int>& acc, int a, int b, int c) {
  if (c == 0 || a == b) return;
  if (a < b) acc[{a, b}] += c;
  else acc[{b, a}] -= c;
}

// [Omega_ij, Omega_kl] = d_jk Omega_il + d_il Omega_jk + d_jl Omega_ki + d_ik Omega_lj
inline std::map<std::pair<int, int>, int> so_bracket_formula(int i, int j, int k, int l) {
  std::map<std::pair<int, int>, int> acc;
  add_omega(acc, i, l, j == k);
  add_omega(acc, j, k, i == l);
  add_omega(acc, k, i, j == l);
  add_omega(acc, l, j, i == k);
  return acc;
}

// Signed 1-based index of a single-term result, 0 for an empty result.
inline int single_term(const std::map<std::pair<int, int>, int>& acc, const std::vector<std::pair<int, int>>& pairs) {
  int out = 0, terms = 0;
  for (const auto& [key, c] : acc) {
    if (c == 0) continue;
    ++terms;
    int idx = 0;
    while (pairs[static_cast<std::size_t>(idx)] != key) ++idx;
    out = c > 0 ? idx + 1 : -(idx + 1);
    if (std::abs(c) != 1) return 1000000;
  }
  return terms > 1 ? 1000000 : out;
}

inline std::vector<int> so_table_closed_form(int n) {
  const auto pairs = so_pairs(n);
  const int d = static_cast<int>(pairs.size());
  std::vector<int> t(static_cast<std::size_t>(d * d), 0);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      const auto [i, j] = pairs[static_cast<std::size_t>(a)];
      const auto [k, l] = pairs[static_cast<std::size_t>(b)];
      t[static_cast<std::size_t>(a * d + b)] = single_term(so_bracket_formula(i, j, k, l), pairs);
    }
  return t;
}

// Rotations R_ij first, then T_1..T_n.
inline std::vector<int> se_table_closed_form(int n) {
  const auto pairs = so_pairs(n);
  const int r = static_cast<int>(pairs.size());
  const int d = r + n;
  std::vector<int> t(static_cast<std::size_t>(d * d), 0);
  auto rt = [&](int i, int j, int k) {  // [R_ij, T_k] = d_jk T_i - d_ik T_j
    if (j == k) return r + i + 1;
    if (i == k) return -(r + j + 1);
    return 0;
  };
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      int v = 0;
      if (a < r && b < r) {
        const auto [i, j] = pairs[static_cast<std::size_t>(a)];
        const auto [k, l] = pairs[static_cast<std::size_t>(b)];
        v = single_term(so_bracket_formula(i, j, k, l), pairs);
      } else if (a < r) {
        const auto [i, j] = pairs[static_cast<std::size_t>(a)];
        v = rt(i, j, b - r);
      } else if (b < r) {
        const auto [i, j] = pairs[static_cast<std::size_t>(b)];
        v = -rt(i, j, a - r);
      }
      t[static_cast<std::size_t>(a * d + b)] = v;
    }
  return t;
}

// ---------------------------------------------------------------------------
// Exact rational closure over the standard basis: brackets of rational
// coordinate vectors through integer structure constants, rank by fraction-
// exact row reduction.
// ---------------------------------------------------------------------------

using RVec = std::vector<Rational>;

inline RVec bracket_coords(const RVec& x, const RVec& y, const std::vector<int>& table, int d) {
  RVec out(static_cast<std::size_t>(d), Rational(0));
  for (int a = 0; a < d; ++a) {
    if (x[static_cast<std::size_t>(a)] == Rational(0)) continue;
    for (int b = 0; b < d; ++b) {
      if (y[static_cast<std::size_t>(b)] == Rational(0)) continue;
      const int e = table[static_cast<std::size_t>(a * d + b)];
      if (e == 0) continue;
      const Rational c = x[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(b)];
      out[static_cast<std::size_t>(std::abs(e) - 1)] += e > 0 ? c : -c;
    }
  }
  return out;
}

// Row-echelon set with exact pivots.
class RationalSpan {
 public:
  explicit RationalSpan(int d) : d_(d) {}
  bool add(RVec v) {
    for (const auto& [p, row] : rows_) {
      if (v[static_cast<std::size_t>(p)] == Rational(0)) continue;
      const Rational f = v[static_cast<std::size_t>(p)] / row[static_cast<std::size_t>(p)];
      for (int k = 0; k < d_; ++k) v[static_cast<std::size_t>(k)] -= f * row[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < d_; ++k)
      if (v[static_cast<std::size_t>(k)] != Rational(0)) {
        rows_.emplace_back(k, v);
        return true;
      }
    return false;
  }
  int rank() const { return static_cast<int>(rows_.size()); }

 private:
  int d_;
  std::vector<std::pair<int, RVec>> rows_;
};

// Naive closure: keep bracketing every pair of accepted vectors until a full
// sweep adds nothing.
inline int brute_force_closure_dim(const std::vector<int>& table, int d, const std::vector<int>& generator_indices) {
  RationalSpan span(d);
  std::vector<RVec> accepted;
  for (int g : generator_indices) {
    RVec v(static_cast<std::size_t>(d), Rational(0));
    v[static_cast<std::size_t>(g)] = 1;
    if (span.add(v)) accepted.push_back(v);
  }
  bool grew = true;
  while (grew) {
    grew = false;
    const std::size_t count = accepted.size();
    for (std::size_t a = 0; a < count; ++a)
      for (std::size_t b = 0; b < count; ++b) {
        RVec c = bracket_coords(accepted[a], accepted[b], table, d);
        if (span.add(c)) {
          accepted.push_back(std::move(c));
          grew = true;
        }
      }
  }
  return span.rank();
}


// Exact function-closure dimensions on a rational grid. Each generator is a
// list of (basis index, coefficient per grid point). Depth k spans all
// brackets of at most k generators.
struct RationalGenerator {
  int index;
  std::vector<Rational> values;  // one per grid point
};

inline std::vector<int> function_closure_dims(const std::vector<int>& table, int d,
                                              const std::vector<RationalGenerator>& gens, int points, int depth) {
  const int len = d * points;
  auto lift = [&](const RationalGenerator& g) {
    RVec v(static_cast<std::size_t>(len), Rational(0));
    for (int p = 0; p < points; ++p) v[static_cast<std::size_t>(p * d + g.index)] = g.values[static_cast<std::size_t>(p)];
    return v;
  };
  auto pointwise = [&](const RVec& x, const RVec& y) {
    RVec out(static_cast<std::size_t>(len), Rational(0));
    for (int p = 0; p < points; ++p) {
      const RVec xs(x.begin() + p * d, x.begin() + (p + 1) * d), ys(y.begin() + p * d, y.begin() + (p + 1) * d);
      const RVec z = bracket_coords(xs, ys, table, d);
      std::copy(z.begin(), z.end(), out.begin() + p * d);
    }
    return out;
  };
  RationalSpan span(len);
  std::vector<RVec> level, gvec;
  for (const auto& g : gens) {
    gvec.push_back(lift(g));
    if (span.add(gvec.back())) level.push_back(gvec.back());
  }
  std::vector<int> dims{span.rank()};
  std::vector<RVec> all = level;
  for (int k = 2; k <= depth; ++k) {
    std::vector<RVec> fresh;
    for (const auto& e : all)
      for (const auto& g : gvec) {
        RVec c = pointwise(g, e);
        if (span.add(c)) fresh.push_back(std::move(c));
      }
    all.insert(all.end(), fresh.begin(), fresh.end());
    dims.push_back(span.rank());
  }
  return dims;
}

// ---------------------------------------------------------------------------
// Random algebra elements and a reference exponential.
// ---------------------------------------------------------------------------

inline Matrix random_so(int n, std::mt19937& rng, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = scale * g(rng) / std::sqrt(static_cast<double>(n));
      a(i, j) = v;
      a(j, i) = -v;
    }
  return a;
}

inline Matrix random_se(int n, std::mt19937& rng, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a = Matrix::Zero(n + 1, n + 1);
  a.topLeftCorner(n, n) = random_so(n, rng, scale);
  for (int k = 0; k < n; ++k) a(k, n) = scale * g(rng);
  return a;
}

inline Matrix random_su2(std::mt19937& rng, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  const std::complex<double> I(0.0, 1.0);
  const double x = scale * g(rng), y = scale * g(rng), z = scale * g(rng);
  Matrix a(2, 2);
  a << I * z, x + I * y, -x + I * y, -I * z;
  return 0.5 * a;
}

// Scaling and squaring with a long Taylor series.
inline Matrix expm_taylor(const Matrix& a) {
  const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (nrm / std::pow(2.0, s) > 0.25) ++s;
  const Matrix b = a / std::pow(2.0, s);
  Matrix term = Matrix::Identity(a.rows(), a.cols()), sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * b / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

// Least-squares fit over odd monomials by the normal equations in long double.
inline std::vector<double> odd_fit_normal_equations(const std::vector<double>& x, const std::vector<double>& y,
                                                    int degree) {
  const int m = (degree + 1) / 2;
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  LMat g = LMat::Zero(m, m);
  LVec r = LVec::Zero(m);
  for (std::size_t p = 0; p < x.size(); ++p) {
    std::vector<long double> phi(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) phi[static_cast<std::size_t>(k)] = std::pow(static_cast<long double>(x[p]), 2 * k + 1);
    for (int a = 0; a < m; ++a) {
      r(a) += phi[static_cast<std::size_t>(a)] * y[p];
      for (int b = 0; b < m; ++b) g(a, b) += phi[static_cast<std::size_t>(a)] * phi[static_cast<std::size_t>(b)];
    }
  }
  const LVec c = g.fullPivLu().solve(r);
  std::vector<double> out;
  for (int k = 0; k < m; ++k) out.push_back(static_cast<double>(c(k)));
  return out;
}

}  // namespace oracle

#pragma once

// Lie closure of parameter-labelled generators viewed as functions on a
// finite parameter grid. Each element is the stacked basis coordinates of its
// values at the grid points; brackets act pointwise.

#include <ensctl/detail/orthonormal_set.hpp>
#include <ensctl/lie_core.hpp>
#include <ensctl/system.hpp>

#include <optional>
#include <set>
#include <vector>

namespace ensctl {

enum class ClosureVerdict { saturated, stalled, exhausted };

inline const char* to_string(ClosureVerdict v) {
  switch (v) {
    case ClosureVerdict::saturated: return "saturated";
    case ClosureVerdict::stalled: return "stalled";
    case ClosureVerdict::exhausted: return "exhausted";
  }
  return "exhausted";
}

struct FunctionClosureResult {
  std::vector<int> dimensions;  // dimension after depth 1, 2, ...
  ClosureVerdict verdict = ClosureVerdict::exhausted;
  int target = 0;               // |grid| * dim(g)
  double condition = 1.0;       // of the accepted (normalised, unprojected) vectors
  double max_rejected = 0.0;    // largest relative residual among rejected nonzero candidates
};

/// A stall is only certified when every rejected candidate was dependent to
/// this relative accuracy; otherwise the rank decision was borderline and the
/// verdict is "exhausted".
inline constexpr double stall_certificate = 1e-10;

namespace detail {

// Structure constants c[a][b] = coordinates of [b_a, b_b] over the basis.
inline std::vector<Eigen::VectorXd> structure_constants(GroupKind g, const std::vector<BasisElement>& basis) {
  const std::size_t d = basis.size();
  std::vector<Eigen::VectorXd> c(d * d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) c[a * d + b] = coordinates(g, basis, commutator(basis[a].matrix, basis[b].matrix));
  return c;
}

inline void check_grid(const SystemSpec& spec, const std::vector<ParamPoint>& grid) {
  if (grid.empty()) throw Error(ErrorCode::grid, "empty parameter grid");
  std::set<ParamPoint> seen;
  for (const auto& p : grid) {
    if (p.size() != spec.parameters.size()) throw Error(ErrorCode::grid, "grid point has the wrong number of coordinates");
    for (double v : p)
      if (!(v >= 0.5 && v <= 4.0)) throw Error(ErrorCode::grid, "grid coordinates must lie in [0.5, 4]");
    if (!seen.insert(p).second) throw Error(ErrorCode::grid, "duplicate grid point");
  }
}

}  // namespace detail

/// Depth-by-depth closure: depth 1 is the span of the generators; each
/// further depth brackets the elements accepted at the previous depth with
/// every generator. Candidates are accepted when their residual exceeds `tol`
/// relative to their norm.
inline FunctionClosureResult fn_lie_closure(const SystemSpec& spec, const std::vector<ParamPoint>& grid, int max_depth,
                                            double tol = 1e-8) {
  validate(spec);
  if (max_depth < 1) throw Error(ErrorCode::spec, "max_depth must be >= 1");
  if (spec.group == GroupKind::Generic) throw Error(ErrorCode::spec, "function closure needs a standard basis");
  detail::check_grid(spec, grid);
  const auto basis = standard_basis(spec.group, spec.n);
  const auto c = detail::structure_constants(spec.group, basis);
  const Eigen::Index d = static_cast<Eigen::Index>(basis.size());
  const Eigen::Index points = static_cast<Eigen::Index>(grid.size());

  FunctionClosureResult out;
  out.target = static_cast<int>(d * points);

  auto bracket = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index p = 0; p < points; ++p)
      for (Eigen::Index a = 0; a < d; ++a) {
        const double xa = x(p * d + a);
        if (xa == 0.0) continue;
        for (Eigen::Index b = 0; b < d; ++b) {
          const double yb = y(p * d + b);
          if (yb == 0.0) continue;
          z.segment(p * d, d) += xa * yb * c[static_cast<std::size_t>(a * d + b)];
        }
      }
    return z;
  };

  std::vector<Eigen::VectorXd> gens;
  for (int ch = 0; ch < spec.channel_count(); ++ch) {
    Eigen::VectorXd v(d * points);
    for (Eigen::Index p = 0; p < points; ++p)
      v.segment(p * d, d) = coordinates(spec.group, basis, spec.channel_matrix(ch, grid[static_cast<std::size_t>(p)]));
    gens.push_back(v);
  }

  detail::OrthonormalSet span(d * points);
  std::vector<Eigen::VectorXd> accepted;  // normalised raw candidates
  auto offer = [&](const Eigen::VectorXd& v, std::vector<Eigen::VectorXd>& frontier) {
    if (span.try_add(v, tol)) {
      accepted.push_back(v / v.norm());
      frontier.push_back(accepted.back());
    } else if (const double vn = v.norm(); vn > 1e-13) {
      out.max_rejected = std::max(out.max_rejected, span.residual(v).norm() / vn);
    }
  };

  std::vector<Eigen::VectorXd> frontier;
  for (const auto& g : gens) offer(g, frontier);
  out.dimensions.push_back(static_cast<int>(span.size()));
  for (int depth = 2; depth <= max_depth && static_cast<int>(span.size()) < out.target; ++depth) {
    std::vector<Eigen::VectorXd> next;
    for (const auto& e : frontier)
      for (const auto& g : gens) offer(bracket(g, e), next);
    out.dimensions.push_back(static_cast<int>(span.size()));
    frontier = std::move(next);
    if (frontier.empty()) break;
  }

  const int last = out.dimensions.back();
  if (last == out.target) {
    out.verdict = ClosureVerdict::saturated;
  } else if (frontier.empty() && out.max_rejected <= stall_certificate) {
    out.verdict = ClosureVerdict::stalled;
  } else {
    out.verdict = ClosureVerdict::exhausted;
  }
  if (!accepted.empty()) {
    Eigen::MatrixXd m(d * points, static_cast<Eigen::Index>(accepted.size()));
    for (std::size_t k = 0; k < accepted.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = accepted[k];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    out.condition = s(0) / s(s.size() - 1);
  }
  return out;
}

struct SaturationReport {
  std::optional<int> depth_to_saturation;
  int final_dimension = 0;
  int deficiency = 0;
  double condition = 1.0;
  ClosureVerdict verdict = ClosureVerdict::exhausted;
};

inline SaturationReport saturation_report(const FunctionClosureResult& r) {
  if (r.dimensions.empty()) throw Error(ErrorCode::spec, "empty dimension sequence");
  SaturationReport s;
  s.final_dimension = r.dimensions.back();
  s.deficiency = r.target - s.final_dimension;
  s.condition = r.condition;
  s.verdict = r.verdict;
  for (std::size_t k = 0; k < r.dimensions.size(); ++k)
    if (r.dimensions[k] == r.target) {
      s.depth_to_saturation = static_cast<int>(k + 1);
      break;
    }
  return s;
}

}  // namespace ensctl

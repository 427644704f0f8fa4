#pragma once

// Control synthesis: odd-polynomial fits of angle profiles, Euler-angle
// factorisation on SO(3), bracket-flow programs and their compilation into
// broadcast piecewise-constant schedules, and three-step steering on SE(n).

#include <ensctl/larc.hpp>
#include <ensctl/lie_core.hpp>
#include <ensctl/simulator.hpp>
#include <ensctl/system.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ensctl {

// ---------------------------------------------------------------------------
// Polynomial fitting
// ---------------------------------------------------------------------------

/// Least-squares fit over the monomials beta^p, p in `powers`.
struct PolynomialFit {
  std::vector<int> powers;
  std::vector<double> coefficients;
  double domain_min = 0.0;
  double domain_max = 0.0;
  double sup_error = 0.0;  // max residual on the fitting grid
  double condition = 1.0;  // of the column-equilibrated normal matrix at the bound

  double operator()(double beta) const {
    double s = 0.0;
    for (std::size_t k = 0; k < powers.size(); ++k) s += coefficients[k] * std::pow(beta, powers[k]);
    return s;
  }
};

inline constexpr double max_fit_condition = 1e12;

namespace detail {

inline Eigen::MatrixXd monomial_matrix(const std::vector<double>& x, const std::vector<int>& powers) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(powers.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t k = 0; k < powers.size(); ++k)
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::pow(x[i], powers[k]);
  return v;
}

// Condition number of (VD)^T (VD) with D scaling every column to unit norm.
inline double equilibrated_condition(const Eigen::MatrixXd& v) {
  Eigen::MatrixXd s = v;
  for (Eigen::Index k = 0; k < s.cols(); ++k) s.col(k) /= s.col(k).norm();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  const double c = sv(0) / sv(sv.size() - 1);
  return c * c;
}

inline PolynomialFit least_squares(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<int>& powers) {
  Eigen::MatrixXd v = monomial_matrix(x, powers);
  Eigen::VectorXd scale(v.cols());
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    scale(k) = v.col(k).norm();
    v.col(k) /= scale(k);
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd c = v.colPivHouseholderQr().solve(rhs).cwiseQuotient(scale);
  PolynomialFit f;
  f.powers = powers;
  f.coefficients.assign(c.data(), c.data() + c.size());
  f.domain_min = *std::min_element(x.begin(), x.end());
  f.domain_max = *std::max_element(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) f.sup_error = std::max(f.sup_error, std::abs(f(x[i]) - y[i]));
  return f;
}

inline void check_fit_input(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size()) throw Error(ErrorCode::spec, "fit needs matching nonempty samples");
  for (double v : x)
    if (!(v > 0.0)) throw Error(ErrorCode::grid, "fit grid must lie in (0, inf)");
  for (double v : y)
    if (!std::isfinite(v)) throw Error(ErrorCode::numeric, "non-finite fit target");
}

}  // namespace detail

/// Fits `y` over the family {beta^first, beta^(first+2), ..., beta^last}.
///
/// Every prefix of the family is fitted by least squares and the prefix with
/// the smallest sup error is kept (higher coefficients zero), so the error is
/// nonincreasing in the bound. Throws degree_too_high when the full family's
/// equilibrated normal matrix has condition above 1e12.
inline PolynomialFit fit_monomial_family(const std::vector<double>& x, const std::vector<double>& y, int first,
                                         int last) {
  detail::check_fit_input(x, y);
  std::vector<int> powers;
  for (int p = first; p <= last; p += 2) powers.push_back(p);
  if (powers.empty()) throw Error(ErrorCode::spec, "empty monomial family");
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const double cond = detail::equilibrated_condition(detail::monomial_matrix(x, powers));
  if (powers.size() > distinct.size() || !(cond <= max_fit_condition))
    throw Error(ErrorCode::degree_too_high, "degree " + std::to_string(last) + " is ill-conditioned on this grid (condition " +
                                                std::to_string(cond) + "); use a smaller bound");
  std::optional<PolynomialFit> best;
  for (std::size_t m = 1; m <= powers.size(); ++m) {
    PolynomialFit f = detail::least_squares(x, y, std::vector<int>(powers.begin(), powers.begin() + static_cast<long>(m)));
    if (!best || f.sup_error < best->sup_error) best = std::move(f);
  }
  best->coefficients.resize(powers.size(), 0.0);
  best->powers = powers;
  best->condition = cond;
  return *best;
}

/// Least squares over {beta, beta^3, ..., beta^degree_bound}.
inline PolynomialFit fit_odd_polynomial(const std::vector<double>& grid, const std::vector<double>& theta,
                                        int degree_bound) {
  if (degree_bound < 1 || degree_bound % 2 == 0) throw Error(ErrorCode::spec, "degree bound must be odd and >= 1");
  return fit_monomial_family(grid, theta, 1, degree_bound);
}

// ---------------------------------------------------------------------------
// Euler angles on SO(3)
// ---------------------------------------------------------------------------

/// so(3) chart used throughout: Omega_x = -Omega_23, Omega_y = Omega_13,
/// Omega_z = -Omega_12, so that [Omega_x, Omega_y] = Omega_z.
inline Matrix so3_axis(int axis) {
  switch (axis) {
    case 0: return -omega(3, 1, 2);
    case 1: return omega(3, 0, 2);
    case 2: return -omega(3, 0, 1);
    default: throw Error(ErrorCode::invalid_dimension, "axis must be 0, 1 or 2");
  }
}

struct EulerAngles {
  std::vector<double> x, y, z;
  std::vector<bool> gimbal_lock;
};

inline RealMatrix euler_compose(double a, double b, double c) {
  return expm_real((a * so3_axis(0)).real()) * expm_real((b * so3_axis(1)).real()) * expm_real((c * so3_axis(2)).real());
}

/// target = exp(x Omega_x) exp(y Omega_y) exp(z Omega_z) with x, z in
/// (-pi, pi] and y in [-pi/2, pi/2]. At gimbal lock z is set to 0.
inline EulerAngles euler_decompose(const std::vector<GroupElement>& targets) {
  EulerAngles e;
  auto wrap = [](double t) { return t <= -M_PI ? t + 2 * M_PI : t; };
  for (const auto& t : targets) {
    if (t.group != GroupKind::SO || t.matrix.rows() != 3) throw Error(ErrorCode::shape, "Euler angles need SO(3) targets");
    check_group_element(t);
    const RealMatrix r = t.matrix.real();
    const double b = std::atan2(r(0, 2), std::hypot(r(0, 0), r(0, 1)));
    double a, c;
    const bool lock = std::abs(std::abs(b) - M_PI / 2) < 1e-8;
    if (lock) {
      c = 0.0;
      a = std::atan2(r(1, 0) * (b > 0 ? 1.0 : -1.0), r(1, 1));
    } else {
      a = std::atan2(-r(1, 2), r(2, 2));
      c = std::atan2(-r(0, 1), r(0, 0));
    }
    e.x.push_back(wrap(a));
    e.y.push_back(b);
    e.z.push_back(wrap(c));
    e.gimbal_lock.push_back(lock);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Bracket words and flow programs
// ---------------------------------------------------------------------------

/// A bracket expression over the spec's channels (0-based).
struct BracketWord {
  int channel = -1;
  std::vector<BracketWord> children;

  static BracketWord leaf(int c) { return {c, {}}; }
  static BracketWord bracket(BracketWord a, BracketWord b) { return {-1, {std::move(a), std::move(b)}}; }

  bool is_leaf() const { return channel >= 0; }
  int depth() const { return is_leaf() ? 1 : 1 + std::max(children[0].depth(), children[1].depth()); }
  int length() const { return is_leaf() ? 1 : children[0].length() + children[1].length(); }

  std::string to_string() const {
    if (is_leaf()) return "g" + std::to_string(channel + 1);
    return "[" + children[0].to_string() + "," + children[1].to_string() + "]";
  }

  Matrix evaluate(const SystemSpec& spec, const ParamPoint& beta) const {
    if (is_leaf()) {
      if (channel >= spec.channel_count()) throw Error(ErrorCode::spec, "bracket word refers to a missing channel");
      return spec.channel_matrix(channel, beta);
    }
    return commutator(children[0].evaluate(spec, beta), children[1].evaluate(spec, beta));
  }
};

/// exp(duration * word(beta)).
struct PrimitiveFlow {
  BracketWord word;
  double duration = 0.0;
  int axis = -1;  // 0,1,2 for x,y,z in SO(3) plans
  int power = 1;  // beta exponent carried by the word
  double coefficient = 0.0;
};

/// Flows in time order (the first flow acts first).
struct FlowProgram {
  std::vector<PrimitiveFlow> flows;
  std::string chart = "XYZ";
};

inline Matrix program_product(const SystemSpec& spec, const FlowProgram& p, const ParamPoint& beta) {
  const int size = matrix_size(spec.group, spec.n);
  Matrix x = Matrix::Identity(size, size);
  for (const auto& f : p.flows) x = expm(Matrix(f.duration * f.word.evaluate(spec, beta))) * x;
  return x;
}

// ---------------------------------------------------------------------------
// SO(3) ensemble planning
// ---------------------------------------------------------------------------

namespace detail {

// Generators aligned with the chart axes. gain[a] is the factor with
// generator = beta * gain * Omega_a.
struct So3Axes {
  std::array<int, 3> channel{-1, -1, -1};
  std::array<double, 3> gain{0.0, 0.0, 0.0};
  int label = -1;

  bool direct(int a) const { return channel[static_cast<std::size_t>(a)] >= 0; }
};

inline So3Axes so3_axes(const SystemSpec& spec) {
  if (spec.group != GroupKind::SO || spec.n != 3) throw Error(ErrorCode::spec, "SO(3) planning needs an SO(3) spec");
  So3Axes ax;
  std::string shared;
  for (std::size_t g = 0; g < spec.generators.size(); ++g) {
    const auto* label = std::get_if<std::string>(&spec.generators[g].coefficient);
    if (!label) continue;
    if (shared.empty()) shared = *label;
    if (*label != shared) throw Error(ErrorCode::spec, "SO(3) planning needs one shared parameter label");
    const Matrix& m = spec.generators[g].element.matrix;
    for (int a = 0; a < 3; ++a) {
      const Matrix e = so3_axis(a);
      const double c = inner_product(GroupKind::SO, m, e);
      if (std::abs(c) > 1e-12 && max_abs(m - c * e) <= 1e-12 && !ax.direct(a)) {
        ax.channel[static_cast<std::size_t>(a)] = static_cast<int>(g);
        ax.gain[static_cast<std::size_t>(a)] = c;
      }
    }
  }
  if (shared.empty()) throw Error(ErrorCode::spec, "SO(3) planning needs parameter-labelled generators");
  ax.label = spec.parameter_index(shared);
  return ax;
}

inline void unwrap(std::vector<double>& t) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    while (t[i] - t[i - 1] > M_PI) t[i] -= 2 * M_PI;
    while (t[i] - t[i - 1] < -M_PI) t[i] += 2 * M_PI;
  }
}

// Word reaching beta^power * Omega_axis, or nullopt.
inline std::optional<BracketWord> axis_word(const So3Axes& ax, int axis, int power) {
  if (ax.direct(axis)) {
    const BracketWord g = BracketWord::leaf(ax.channel[static_cast<std::size_t>(axis)]);
    if (power == 1) return g;
    int partner = -1;
    for (int b = 0; b < 3; ++b)
      if (b != axis && ax.direct(b)) {
        partner = b;
        break;
      }
    if (partner < 0 || power % 2 == 0) return std::nullopt;
    BracketWord w = g;
    const BracketWord p = BracketWord::leaf(ax.channel[static_cast<std::size_t>(partner)]);
    for (int k = 1; k < power; ++k) w = BracketWord::bracket(p, w);
    return w;
  }
  const int g1 = (axis + 1) % 3, g2 = (axis + 2) % 3;
  const int lo = std::min(g1, g2), hi = std::max(g1, g2);
  if (!ax.direct(lo) || !ax.direct(hi) || power % 2 != 0) return std::nullopt;
  const BracketWord a = BracketWord::leaf(ax.channel[static_cast<std::size_t>(lo)]);
  BracketWord w = BracketWord::bracket(a, BracketWord::leaf(ax.channel[static_cast<std::size_t>(hi)]));
  for (int k = 2; k < power; ++k) w = BracketWord::bracket(a, w);
  return w;
}

}  // namespace detail

struct So3Plan {
  FlowProgram program;
  std::array<PolynomialFit, 3> fits;  // x, y, z angle profiles
  EulerAngles angles;
  std::vector<double> betas;          // shared-label coordinate of each grid point
  double predicted_error = 0.0;
  int label = -1;
};

/// Euler-decomposes the target, fits each angle profile by least squares and
/// emits one primitive flow per surviving monomial. Axes carried by a
/// generator use odd powers (1, 3, ..., degree_bound); an axis reached only
/// through the bracket of the other two uses even powers (2, ...,
/// degree_bound + 1). Flows run z first, then y, then x.
inline So3Plan plan_so3_ensemble(const SystemSpec& spec, const std::vector<ParamPoint>& grid,
                                 const std::vector<GroupElement>& target, int degree_bound, double tol) {
  validate(spec);
  if (!(tol > 0.0)) throw Error(ErrorCode::spec, "tolerance must be positive");
  if (degree_bound < 1 || degree_bound % 2 == 0) throw Error(ErrorCode::spec, "degree bound must be odd and >= 1");
  if (grid.size() != target.size() || grid.empty()) throw Error(ErrorCode::grid, "target and grid sizes differ");
  const detail::So3Axes ax = detail::so3_axes(spec);
  So3Plan plan;
  plan.label = ax.label;
  for (const auto& p : grid) plan.betas.push_back(p.at(static_cast<std::size_t>(ax.label)));
  plan.angles = euler_decompose(target);
  std::array<std::vector<double>, 3> profile{plan.angles.x, plan.angles.y, plan.angles.z};
  detail::unwrap(profile[0]);
  detail::unwrap(profile[2]);
  const double beta_max = *std::max_element(plan.betas.begin(), plan.betas.end());

  std::array<std::vector<PrimitiveFlow>, 3> flows;
  for (int a = 0; a < 3; ++a) {
    auto& fit = plan.fits[static_cast<std::size_t>(a)];
    const auto& th = profile[static_cast<std::size_t>(a)];
    double peak = 0.0;
    for (double v : th) peak = std::max(peak, std::abs(v));
    if (peak <= 1e-14) {
      fit.domain_min = *std::min_element(plan.betas.begin(), plan.betas.end());
      fit.domain_max = beta_max;
      fit.sup_error = peak;
      continue;
    }
    const bool odd = ax.direct(a);
    int last = odd ? degree_bound : degree_bound + 1;
    if (odd && !detail::axis_word(ax, a, 3)) last = 1;  // no partner to raise the power
    if (!detail::axis_word(ax, a, odd ? 1 : 2))
      throw Error(ErrorCode::spec, std::string("axis ") + "xyz"[a] + " is not reachable from the generators");
    fit = fit_monomial_family(plan.betas, th, odd ? 1 : 2, last);
    for (std::size_t k = 0; k < fit.powers.size(); ++k) {
      const double c = fit.coefficients[k];
      if (std::abs(c) * std::pow(beta_max, fit.powers[k]) <= 1e-12) continue;
      const BracketWord w = *detail::axis_word(ax, a, fit.powers[k]);
      const Matrix m = w.evaluate(spec, ParamPoint(spec.parameters.size(), 1.0));
      const double mu = inner_product(GroupKind::SO, m, so3_axis(a));
      if (max_abs(m - mu * so3_axis(a)) > 1e-9 * std::abs(mu))
        throw Error(ErrorCode::invariant_violation, "bracket word left its axis");
      flows[static_cast<std::size_t>(a)].push_back({w, c / mu, a, fit.powers[k], c});
    }
  }
  plan.predicted_error = plan.fits[0].sup_error + plan.fits[1].sup_error + plan.fits[2].sup_error;
  for (int a : {2, 1, 0})
    for (auto& f : flows[static_cast<std::size_t>(a)]) plan.program.flows.push_back(std::move(f));
  if (plan.predicted_error > tol)
    throw Error(ErrorCode::degree_insufficient, "predicted error " + std::to_string(plan.predicted_error) +
                                                    " exceeds tolerance at degree " + std::to_string(degree_bound));
  return plan;
}

// ---------------------------------------------------------------------------
// Compilation into piecewise-constant schedules
// ---------------------------------------------------------------------------

/// One exponential factor exp(amount * channel(beta)).
struct ChannelOp {
  int channel;
  double amount;
};

namespace detail {

inline void push_op(std::vector<ChannelOp>& ops, int channel, double amount) {
  if (amount == 0.0) return;
  if (!ops.empty() && ops.back().channel == channel) {
    ops.back().amount += amount;
    if (ops.back().amount == 0.0) ops.pop_back();
    return;
  }
  ops.push_back({channel, amount});
}

inline void append_ops(std::vector<ChannelOp>& ops, const std::vector<ChannelOp>& more) {
  for (const auto& o : more) push_op(ops, o.channel, o.amount);
}

inline ControlSchedule to_schedule(int channels, const std::vector<ChannelOp>& ops) {
  ControlSchedule s{channels, {0.0}, {}};
  for (const auto& o : ops) s.append_unit(o.channel, o.amount);
  return s;
}

// exp(d * word), time-ordered ops; brackets use m group-commutator cycles.
inline std::vector<ChannelOp> realise_word(const BracketWord& w, double d, int m) {
  std::vector<ChannelOp> ops;
  if (d == 0.0) return ops;
  if (w.is_leaf()) {
    push_op(ops, w.channel, d);
    return ops;
  }
  const BracketWord* a = &w.children[0];
  const BracketWord* b = &w.children[1];
  if (d < 0) {
    std::swap(a, b);
    d = -d;
  }
  const double s = std::sqrt(d / m);
  // exp(sA) exp(sB) exp(-sA) exp(-sB): rightmost factor acts first.
  const auto nb = realise_word(*b, -s, m), na = realise_word(*a, -s, m), pb = realise_word(*b, s, m),
             pa = realise_word(*a, s, m);
  for (int k = 0; k < m; ++k) {
    append_ops(ops, nb);
    append_ops(ops, na);
    append_ops(ops, pb);
    append_ops(ops, pa);
  }
  return ops;
}

}  // namespace detail

/// Group-commutator compilation of exp(duration * word). Each factor becomes
/// one unit-length interval whose control equals the factor's amount.
inline ControlSchedule compile_bracket_flow(const SystemSpec& spec, const BracketWord& word, double duration, int m,
                                            int depth_limit = 6) {
  if (m < 1) throw Error(ErrorCode::spec, "refinement must be >= 1");
  if (word.depth() > depth_limit)
    throw Error(ErrorCode::compile_depth, "bracket depth " + std::to_string(word.depth()) + " exceeds the limit " +
                                              std::to_string(depth_limit));
  if (!std::isfinite(duration)) throw Error(ErrorCode::numeric, "non-finite duration");
  return detail::to_schedule(spec.channel_count(), detail::realise_word(word, duration, m));
}

/// How one SO(3) axis flow is realised.
struct AxisRealisation {
  int axis = -1;
  bool direct = false;          // a single constant-control interval
  bool cosine = true;           // cosine (own generator) or sine (bracket axis) family
  int conjugated = -1;          // channel carrying the flow
  int partner = -1;             // channel used for the conjugations
  std::vector<double> nodes;    // partner amounts t_j
  std::vector<double> weights;  // w_j
  double realisation_error = 0.0;  // sup over the dense box of |beta * sum w phi - F|
};

struct CompiledProgram {
  ControlSchedule schedule;
  int refinement = 1;
  std::vector<AxisRealisation> axes;
  double measured_error = -1.0;  // sup over the grid against the ideal program
};

namespace detail {

inline std::vector<double> dense_box(double lo, double hi, const std::vector<double>& extra) {
  std::vector<double> b = linspace(lo, hi, 201);
  b.insert(b.end(), extra.begin(), extra.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

// Omega_axis component of (Ad_R G + sign * Ad_{R^-1} G) / 2 with R = exp(t P).
inline double conjugation_profile(const RealMatrix& g, const RealMatrix& p, double t, double sign, int axis) {
  const RealMatrix r = expm_real(t * p);
  const RealMatrix m = 0.5 * (r * g * r.transpose() + sign * r.transpose() * g * r);
  return inner_product(GroupKind::SO, m.cast<Complex>(), so3_axis(axis));
}

inline AxisRealisation fit_axis(const SystemSpec& spec, const So3Axes& ax, const So3Plan& plan, int axis,
                                const std::vector<double>& box) {
  AxisRealisation r;
  r.axis = axis;
  const PolynomialFit& f = plan.fits[static_cast<std::size_t>(axis)];
  if (ax.direct(axis)) {
    r.cosine = true;
    r.conjugated = ax.channel[static_cast<std::size_t>(axis)];
    for (int b = 0; b < 3; ++b)
      if (b != axis && ax.direct(b)) {
        r.partner = ax.channel[static_cast<std::size_t>(b)];
        break;
      }
  } else {
    r.cosine = false;
    const int lo = std::min((axis + 1) % 3, (axis + 2) % 3), hi = std::max((axis + 1) % 3, (axis + 2) % 3);
    r.conjugated = ax.channel[static_cast<std::size_t>(lo)];
    r.partner = ax.channel[static_cast<std::size_t>(hi)];
  }
  const double beta_max = box.back();
  const double partner_gain = std::abs(ax.gain[static_cast<std::size_t>(
      std::find(ax.channel.begin(), ax.channel.end(), r.partner) - ax.channel.begin())]);
  const double h = M_PI / (1.5 * beta_max);
  ParamPoint unit(spec.parameters.size(), 1.0);
  double scale = 1.0;
  for (double b : box) scale = std::max(scale, std::abs(f(b)));

  std::optional<AxisRealisation> best;
  for (int J = 4; J <= 16; ++J) {
    AxisRealisation c = r;
    for (int j = 0; j < J; ++j) c.nodes.push_back((r.cosine ? j : j + 1) * h / partner_gain);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(box.size()), J);
    Eigen::VectorXd y(static_cast<Eigen::Index>(box.size()));
    for (std::size_t i = 0; i < box.size(); ++i) {
      ParamPoint p = unit;
      p[static_cast<std::size_t>(ax.label)] = box[i];
      const RealMatrix g = spec.channel_matrix(r.conjugated, p).real();
      const RealMatrix pm = spec.channel_matrix(r.partner, p).real();
      for (int j = 0; j < J; ++j)
        a(static_cast<Eigen::Index>(i), j) = conjugation_profile(g, pm, c.nodes[static_cast<std::size_t>(j)], r.cosine ? 1.0 : -1.0, axis);
      y(static_cast<Eigen::Index>(i)) = f(box[i]);
    }
    const Eigen::VectorXd w = a.colPivHouseholderQr().solve(y);
    c.weights.assign(w.data(), w.data() + w.size());
    c.realisation_error = (a * w - y).cwiseAbs().maxCoeff();
    if (!best || c.realisation_error < best->realisation_error) best = c;
    if (c.realisation_error <= 1e-7 * scale) break;
  }
  return *best;
}

// Time-ordered ops for exp(lambda * (op generator)) of conjugation term j.
inline void conjugation_ops(std::vector<ChannelOp>& ops, const AxisRealisation& r, std::size_t j, int half,
                            double lambda) {
  const double t = r.nodes[j], w = r.weights[j] * lambda;
  if (t == 0.0) {
    push_op(ops, r.conjugated, w);
    return;
  }
  if (half == 0) {  // exp(w/2 Ad_R G), R = exp(t P)
    push_op(ops, r.partner, -t);
    push_op(ops, r.conjugated, 0.5 * w);
    push_op(ops, r.partner, t);
  } else {          // exp(+-w/2 Ad_{R^-1} G)
    push_op(ops, r.partner, t);
    push_op(ops, r.conjugated, (r.cosine ? 0.5 : -0.5) * w);
    push_op(ops, r.partner, -t);
  }
}

inline void strang_ops(std::vector<ChannelOp>& ops, const AxisRealisation& r, int m) {
  std::vector<std::pair<std::size_t, int>> terms;
  for (std::size_t j = 0; j < r.nodes.size(); ++j) {
    terms.emplace_back(j, 0);
    if (r.nodes[j] != 0.0) terms.emplace_back(j, 1);
  }
  const double lambda = 0.5 / m;
  for (int step = 0; step < m; ++step) {
    for (auto it = terms.begin(); it != terms.end(); ++it) conjugation_ops(ops, r, it->first, it->second, lambda);
    for (auto it = terms.rbegin(); it != terms.rend(); ++it) conjugation_ops(ops, r, it->first, it->second, lambda);
  }
}

}  // namespace detail

/// Compiles an SO(3) plan. Axes whose flow is a single generator become one
/// interval. Higher powers are realised through conjugations: with
/// R = exp(t P),
///   Ad_R G + Ad_{R^-1} G = 2 cos(angle) G          (same axis)
///   Ad_R G - Ad_{R^-1} G = 2 sin(angle) [P^, G]    (third axis)
/// so a weighted set of conjugated pulses generates beta * sum w_j phi_j(beta)
/// on the axis, with weights fitted to the plan's polynomial on a dense
/// sample of the box. The non-commuting pulses are combined with m steps of
/// symmetric (Strang) splitting.
inline CompiledProgram compile_program(const SystemSpec& spec, const So3Plan& plan, int m) {
  if (m < 1) throw Error(ErrorCode::spec, "refinement must be >= 1");
  const detail::So3Axes ax = detail::so3_axes(spec);
  const ParameterRange& range = spec.parameters[static_cast<std::size_t>(ax.label)];
  const auto box = detail::dense_box(std::min(range.min, *std::min_element(plan.betas.begin(), plan.betas.end())),
                                     std::max(range.max, *std::max_element(plan.betas.begin(), plan.betas.end())),
                                     plan.betas);
  CompiledProgram out;
  out.refinement = m;
  std::vector<ChannelOp> ops;
  for (int a : {2, 1, 0}) {
    std::vector<const PrimitiveFlow*> mine;
    for (const auto& f : plan.program.flows)
      if (f.axis == a) mine.push_back(&f);
    if (mine.empty()) continue;
    if (mine.size() == 1 && mine.front()->word.is_leaf()) {
      AxisRealisation r;
      r.axis = a;
      r.direct = true;
      r.conjugated = mine.front()->word.channel;
      out.axes.push_back(r);
      detail::push_op(ops, r.conjugated, mine.front()->duration);
      continue;
    }
    AxisRealisation r = detail::fit_axis(spec, ax, plan, a, box);
    detail::strang_ops(ops, r, m);
    out.axes.push_back(std::move(r));
  }
  out.schedule = detail::to_schedule(spec.channel_count(), ops);
  return out;
}

/// sup over the grid of the distance between the simulated schedule and the
/// ideal flow program.
inline double measure_compile_error(const SystemSpec& spec, const std::vector<ParamPoint>& grid,
                                    const FlowProgram& program, const ControlSchedule& schedule, int threads = 0) {
  SimulationOptions opt;
  opt.store = StoreMode::final_only;
  opt.threads = threads;
  const auto tr = integrate_ensemble(spec, grid, schedule, opt);
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GroupElement ideal{program_product(spec, program, grid[i]), spec.group};
    sup = std::max(sup, pointwise_distance(tr.points[i].states.back(), ideal));
  }
  return sup;
}

/// Doubles the refinement from 4 until the measured compile error drops to
/// `target`, stops improving by at least a factor 1.5, or m exceeds m_max.
/// Returns the best compilation seen.
inline CompiledProgram choose_refinement(const SystemSpec& spec, const std::vector<ParamPoint>& grid,
                                         const So3Plan& plan, double target, int m_max = 512, int threads = 0) {
  std::optional<CompiledProgram> best;
  for (int m = 4; m <= m_max; m *= 2) {
    CompiledProgram c = compile_program(spec, plan, m);
    c.measured_error = measure_compile_error(spec, grid, plan.program, c.schedule, threads);
    const bool better = !best || c.measured_error < best->measured_error;
    const bool stalled = best && c.measured_error > best->measured_error / 1.5;
    if (better) best = std::move(c);
    if (best->measured_error <= target || stalled) break;
  }
  return *best;
}

// ---------------------------------------------------------------------------
// SE(n) three-step steering
// ---------------------------------------------------------------------------

namespace detail {

struct PlaneRotation {
  int i, j;  // i < j
  double angle;
};

// R = (product of the returned factors applied in order) for R in SO(n).
inline std::vector<PlaneRotation> givens_factor(const RealMatrix& r) {
  const auto n = static_cast<int>(r.rows());
  RealMatrix m = r;
  std::vector<PlaneRotation> g;
  for (int j = 0; j < n - 1; ++j)
    for (int i = n - 1; i > j; --i) {
      if (m(i, j) == 0.0) continue;
      const double phi = std::atan2(m(i, j), m(j, j));
      m = expm_real(phi * omega(n, j, i).real()) * m;
      g.push_back({j, i, phi});
    }
  std::vector<PlaneRotation> out;
  std::vector<int> negative;
  for (int k = 0; k < n; ++k)
    if (m(k, k) < 0) negative.push_back(k);
  if (negative.size() % 2 != 0) throw Error(ErrorCode::invariant_violation, "rotation target has determinant -1");
  for (std::size_t k = 0; k < negative.size(); k += 2) out.push_back({negative[k], negative[k + 1], M_PI});
  for (auto it = g.rbegin(); it != g.rend(); ++it) out.push_back({it->i, it->j, -it->angle});
  return out;
}

// Realises exp(theta * Omega_ij) from plane generators and quarter-turn
// conjugations.
class PlaneRealiser {
 public:
  PlaneRealiser(const SystemSpec& spec, const ParamPoint& beta) : n_(spec.n) {
    for (int c = 0; c < static_cast<int>(spec.generators.size()); ++c) {
      const RealMatrix m = spec.channel_matrix(c, beta).real().topLeftCorner(n_, n_);
      for (int i = 0; i < n_; ++i)
        for (int j = i + 1; j < n_; ++j) {
          const double k = m(i, j);
          if (k == 0.0 || recipes_.count({i, j})) continue;
          if ((m - k * omega(n_, i, j).real()).cwiseAbs().maxCoeff() > 1e-12) continue;
          recipes_[{i, j}] = Recipe{c, k, {}, {}, 0.0};
        }
    }
    bool grew = true;
    while (grew) {
      grew = false;
      for (int i = 0; i < n_; ++i)
        for (int k = i + 1; k < n_; ++k) {
          if (recipes_.count({i, k})) continue;
          for (int j = 0; j < n_ && !recipes_.count({i, k}); ++j) {
            if (j == i || j == k || !recipes_.count(key(i, j)) || !recipes_.count(key(j, k))) continue;
            // exp(theta Omega_ik) = R exp(sigma theta Omega_ij) R^-1, R = exp(pi/2 Omega_jk)
            const RealMatrix r = expm_real(M_PI / 2 * omega(n_, j, k).real());
            const RealMatrix moved = r * omega(n_, i, j).real() * r.transpose();
            const double sigma = moved(i, k);
            recipes_[{i, k}] = Recipe{-1, 0.0, {i, j}, {j, k}, sigma};
            grew = true;
          }
        }
    }
  }

  bool complete() const { return static_cast<int>(recipes_.size()) == n_ * (n_ - 1) / 2; }

  // exp(theta * Omega_ab) for any a != b.
  void realise(std::vector<ChannelOp>& ops, int a, int b, double theta) const {
    const auto k = key(a, b);
    theta *= orient(a, b);
    const auto it = recipes_.find(k);
    if (it == recipes_.end()) throw Error(ErrorCode::uncontrollable, "rotation plane is not reachable");
    const Recipe& r = it->second;
    if (r.channel >= 0) {
      push_op(ops, r.channel, theta / r.gain);
      return;
    }
    realise(ops, r.conj.first, r.conj.second, -M_PI / 2);
    realise(ops, r.base.first, r.base.second, r.sign * theta);
    realise(ops, r.conj.first, r.conj.second, M_PI / 2);
  }

 private:
  struct Recipe {
    int channel;
    double gain;
    std::pair<int, int> base, conj;
    double sign;
  };

  static std::pair<int, int> key(int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }
  static double orient(int a, int b) { return a < b ? 1.0 : -1.0; }

  int n_;
  std::map<std::pair<int, int>, Recipe> recipes_;
};

}  // namespace detail

struct SteeringPlan {
  ParamPoint beta;
  Eigen::VectorXd z;
  RealMatrix A;
  std::array<ControlSchedule, 3> phases;
  ControlSchedule schedule;                 // the three phases back to back
  std::array<GroupElement, 3> waypoints;    // expected state after each phase
};

/// Steers one SE(n) system (at parameter point `beta`, default the box
/// midpoint) from I to (X_F, x_F): rotate to A^-1 X_F, translate to z, then
/// rotate by A so that z lands on x_F = A z.
inline SteeringPlan three_step_steer_sen(const SystemSpec& spec, const Eigen::VectorXd& x_f, const RealMatrix& X_f,
                                         std::optional<ParamPoint> beta = std::nullopt) {
  validate(spec);
  if (spec.group != GroupKind::SE) throw Error(ErrorCode::spec, "three-step steering needs an SE(n) spec");
  const int n = spec.n;
  if (x_f.size() != n || X_f.rows() != n || X_f.cols() != n) throw Error(ErrorCode::shape, "target has the wrong size");
  check_group_element({X_f.cast<Complex>(), GroupKind::SO});
  const ControllabilityReport rep = check_classical(spec);
  if (!rep.controllable)
    throw Error(ErrorCode::uncontrollable, std::string("spec is not controllable: ") +
                                               (rep.obstruction ? to_string(*rep.obstruction) : "rank-deficit"));
  SteeringPlan plan;
  plan.beta = beta ? *beta : spec.midpoint();

  const double radius = x_f.norm();
  Eigen::VectorXd proj = Eigen::VectorXd::Zero(n);
  for (int k : spec.translations) proj(k) = x_f(k);
  if (radius == 0.0) {
    plan.z = Eigen::VectorXd::Zero(n);
  } else if (proj.norm() > 1e-12 * radius) {
    plan.z = radius * proj / proj.norm();
  } else {
    plan.z = radius * Eigen::VectorXd::Unit(n, spec.translations.front());
  }

  // Two Householder reflections mapping u = z/|z| to w = x_F/|x_F|.
  auto householder = [n](const Eigen::VectorXd& v) {
    return RealMatrix(RealMatrix::Identity(n, n) - 2.0 * v * v.transpose() / v.squaredNorm());
  };
  plan.A = RealMatrix::Identity(n, n);
  if (radius > 0.0) {
    const Eigen::VectorXd u = plan.z / radius, w = x_f / radius;
    if ((u - w).norm() > 1e-15) {
      if ((u + w).norm() > 1e-8) {
        plan.A = householder(w) * householder(u + w);
      } else {
        Eigen::Index k;
        u.cwiseAbs().minCoeff(&k);
        Eigen::VectorXd e = Eigen::VectorXd::Unit(n, k) - u(k) * u;
        plan.A = householder(e) * householder(u);
      }
    }
  }

  const int channels = spec.channel_count();
  const detail::PlaneRealiser planes(spec, plan.beta);
  if (!planes.complete())
    throw Error(ErrorCode::uncontrollable, "rotation generators do not reach every plane by conjugation");
  auto rotation_phase = [&](const RealMatrix& r) {
    std::vector<ChannelOp> ops;
    for (const auto& g : detail::givens_factor(r)) planes.realise(ops, g.i, g.j, g.angle);
    return detail::to_schedule(channels, ops);
  };
  const RealMatrix first = plan.A.transpose() * X_f;
  plan.phases[0] = rotation_phase(first);
  std::vector<ChannelOp> shift;
  for (int k = 0; k < n; ++k) {
    if (plan.z(k) == 0.0) continue;
    const auto it = std::find(spec.translations.begin(), spec.translations.end(), k);
    const int ch = static_cast<int>(spec.generators.size() + static_cast<std::size_t>(it - spec.translations.begin()));
    detail::push_op(shift, ch, plan.z(k));
  }
  plan.phases[1] = detail::to_schedule(channels, shift);
  plan.phases[2] = rotation_phase(plan.A);
  plan.schedule = concatenate(concatenate(plan.phases[0], plan.phases[1]), plan.phases[2]);

  auto hom = [n](const RealMatrix& r, const Eigen::VectorXd& x) {
    Matrix m = Matrix::Identity(n + 1, n + 1);
    m.topLeftCorner(n, n) = r.cast<Complex>();
    m.topRightCorner(n, 1) = x.cast<Complex>();
    return GroupElement{m, GroupKind::SE};
  };
  plan.waypoints = {hom(first, Eigen::VectorXd::Zero(n)), hom(first, plan.z), hom(X_f, x_f)};
  return plan;
}

}  // namespace ensctl

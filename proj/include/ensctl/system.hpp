#pragma once

// SystemSpec: a (possibly parameterised) bilinear system
//   dX/dt = (sum_k f_k(beta) u_k B_k + sum_l v_l T_{k_l}) X
// on SO(n), SE(n), SU(2) or a user-supplied matrix group.

#include <ensctl/lie_core.hpp>

#include <set>
#include <string>
#include <variant>
#include <vector>

namespace ensctl {

struct ParameterRange {
  std::string label;
  double min = 1.0;
  double max = 1.0;
  int samples = 1;
};

/// A control channel's coefficient: a parameter label (beta_label) or a
/// fixed constant.
using Coefficient = std::variant<std::string, double>;

struct Generator {
  BasisElement element;
  Coefficient coefficient = 1.0;
};

struct SystemSpec {
  GroupKind group = GroupKind::SO;
  int n = 3;
  std::vector<Generator> generators;
  std::vector<int> translations;  // 0-based k for T_k, SE(n) only
  std::vector<ParameterRange> parameters;
  int ambient_dimension = 0;  // generic groups only

  int channel_count() const { return static_cast<int>(generators.size() + translations.size()); }

  int algebra_dim() const {
    return group == GroupKind::Generic ? ambient_dimension : algebra_dimension(group, n);
  }

  int parameter_index(const std::string& label) const {
    for (std::size_t i = 0; i < parameters.size(); ++i)
      if (parameters[i].label == label) return static_cast<int>(i);
    return -1;
  }

  double coefficient(int generator, const ParamPoint& beta) const {
    const Coefficient& c = generators[static_cast<std::size_t>(generator)].coefficient;
    if (const double* v = std::get_if<double>(&c)) return *v;
    const int idx = parameter_index(std::get<std::string>(c));
    return beta.at(static_cast<std::size_t>(idx));
  }

  /// Channel matrix evaluated at a parameter point: f_k(beta) B_k for rotational
  /// generators, T_k for translation channels.
  Matrix channel_matrix(int channel, const ParamPoint& beta) const {
    const int g = static_cast<int>(generators.size());
    if (channel < g) return coefficient(channel, beta) * generators[static_cast<std::size_t>(channel)].element.matrix;
    return se_translation(n, translations[static_cast<std::size_t>(channel - g)]).matrix;
  }

  /// Generators with every parameter label replaced by 1.
  std::vector<AlgebraElement> nominal_generators() const {
    std::vector<AlgebraElement> out;
    for (const auto& gen : generators) {
      double c = 1.0;
      if (const double* v = std::get_if<double>(&gen.coefficient)) c = *v;
      out.push_back({c * gen.element.matrix, group, std::nullopt});
    }
    for (int k : translations) out.push_back({se_translation(n, k).matrix, group, std::nullopt});
    return out;
  }

  ParamPoint midpoint() const {
    ParamPoint p;
    for (const auto& r : parameters) p.push_back(0.5 * (r.min + r.max));
    return p;
  }

  bool has_labels() const {
    for (const auto& gen : generators)
      if (std::holds_alternative<std::string>(gen.coefficient)) return true;
    return false;
  }
};

/// Structural checks shared by every consumer.
inline void validate(const SystemSpec& spec) {
  if (spec.group != GroupKind::Generic && spec.group != GroupKind::SU2 && spec.n < 2)
    throw Error(ErrorCode::invalid_dimension, "n must be >= 2");
  if (spec.group == GroupKind::SU2 && spec.n != 2) throw Error(ErrorCode::invalid_dimension, "SU(2) has n = 2");
  if (spec.group == GroupKind::Generic && spec.ambient_dimension <= 0)
    throw Error(ErrorCode::spec, "generic specs need an ambient algebra dimension");
  if (!spec.translations.empty() && spec.group != GroupKind::SE)
    throw Error(ErrorCode::spec, "translation channels exist only on SE(n)");
  const int size = matrix_size(spec.group, spec.n);
  std::set<std::string> labels;
  for (const auto& p : spec.parameters) {
    if (!labels.insert(p.label).second) throw Error(ErrorCode::spec, "duplicate parameter label " + p.label);
    if (!(p.min > 0.0) || !(p.max >= p.min))
      throw Error(ErrorCode::spec, "parameter " + p.label + " needs 0 < min <= max");
    if (p.samples < 1) throw Error(ErrorCode::spec, "parameter " + p.label + " needs samples >= 1");
  }
  for (const auto& gen : spec.generators) {
    if (gen.element.matrix.rows() != size || gen.element.matrix.cols() != size)
      throw Error(ErrorCode::shape, "generator " + gen.element.label + " has the wrong size");
    if (!in_algebra(spec.group, gen.element.matrix, 1e-10))
      throw Error(ErrorCode::spec, "generator " + gen.element.label + " is not in the declared algebra");
    if (const auto* label = std::get_if<std::string>(&gen.coefficient)) {
      if (spec.parameter_index(*label) < 0) throw Error(ErrorCode::spec, "unknown parameter label " + *label);
    } else if (!(std::get<double>(gen.coefficient) > 0.0) && spec.group != GroupKind::Generic) {
      throw Error(ErrorCode::spec, "constant coefficients must be positive");
    }
  }
  for (int k : spec.translations)
    if (k < 0 || k >= spec.n) throw Error(ErrorCode::spec, "translation channel out of range");
}

inline std::vector<double> linspace(double a, double b, int count) {
  std::vector<double> out;
  if (count == 1) return {0.5 * (a + b)};
  for (int i = 0; i < count; ++i) out.push_back(a + (b - a) * i / (count - 1));
  return out;
}

/// Tensor-product grid over the parameter box, first label varying slowest.
inline std::vector<ParamPoint> parameter_grid(const SystemSpec& spec) {
  std::vector<ParamPoint> grid{ParamPoint{}};
  for (const auto& r : spec.parameters) {
    std::vector<ParamPoint> next;
    for (const auto& p : grid)
      for (double v : linspace(r.min, r.max, r.samples)) {
        ParamPoint q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    grid = std::move(next);
  }
  return grid;
}

}  // namespace ensctl

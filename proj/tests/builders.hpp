#pragma once

#include <ensctl/system.hpp>

#include <string>
#include <utility>
#include <vector>

namespace testing_support {

using namespace ensctl;

// so(3) chart: Omega_x = -Omega_23, Omega_y = Omega_13, Omega_z = -Omega_12.
inline BasisElement omega_x() {
  BasisElement e = so_rotation(3, 1, 2);
  e.matrix = -e.matrix;
  e.label = "Omega_x";
  e.kind = BasisKind::generic;
  return e;
}
inline BasisElement omega_y() {
  BasisElement e = so_rotation(3, 0, 2);
  e.label = "Omega_y";
  e.kind = BasisKind::generic;
  return e;
}
inline BasisElement omega_z() {
  BasisElement e = so_rotation(3, 0, 1);
  e.matrix = -e.matrix;
  e.label = "Omega_z";
  e.kind = BasisKind::generic;
  return e;
}

inline ParameterRange range(std::string label, double lo = 1.0, double hi = 2.0, int samples = 3) {
  return {std::move(label), lo, hi, samples};
}

// so(n) spec from 1-based planes, each labelled with its own parameter or a
// shared label when `shared` is given.
inline SystemSpec so_spec(int n, const std::vector<std::pair<int, int>>& planes, const std::string& shared = "",
                          int samples = 3) {
  SystemSpec s;
  s.group = GroupKind::SO;
  s.n = n;
  for (std::size_t k = 0; k < planes.size(); ++k) {
    const std::string label = shared.empty() ? "b" + std::to_string(k + 1) : shared;
    s.generators.push_back({so_rotation(n, planes[k].first - 1, planes[k].second - 1), label});
    if (s.parameter_index(label) < 0) s.parameters.push_back(range(label, 1.0, 2.0, samples));
  }
  return s;
}

inline SystemSpec se_spec(int n, const std::vector<std::pair<int, int>>& planes, const std::vector<int>& translations,
                          const std::string& shared = "b") {
  SystemSpec s;
  s.group = GroupKind::SE;
  s.n = n;
  for (const auto& [i, j] : planes) s.generators.push_back({se_rotation(n, i - 1, j - 1), shared});
  for (int k : translations) s.translations.push_back(k - 1);
  s.parameters.push_back(range(shared));
  return s;
}

inline std::vector<std::pair<int, int>> all_planes(int n) {
  std::vector<std::pair<int, int>> out;
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) out.emplace_back(i, j);
  return out;
}

}  // namespace testing_support

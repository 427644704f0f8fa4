#pragma once

// File formats. Structured artifacts are JSON, time series are CSV. Indices
// in files are 1-based, in memory 0-based.

#include <ensctl/covering.hpp>
#include <ensctl/function_closure.hpp>
#include <ensctl/larc.hpp>
#include <ensctl/simulator.hpp>
#include <ensctl/synthesis.hpp>
#include <ensctl/system.hpp>

#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace ensctl::io {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Low-level helpers
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::parse, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::parse, "cannot write " + path);
  out << text;
}

/// Parses JSON, reporting failures as "line L, column C".
inline Json parse_json(const std::string& text, const std::string& source = "input") {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(ErrorCode::parse, source + ": line " + std::to_string(line) + ", column " + std::to_string(column) +
                                      ": malformed JSON");
  }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void only_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::parse, where + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw Error(ErrorCode::parse, "unknown key '" + item.key() + "' in " + where);
  }
}

inline const Json& need(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(ErrorCode::parse, where + " is missing '" + key + "'");
  return j.at(key);
}

inline int need_int(const Json& j, const char* key, const std::string& where) {
  const Json& v = need(j, key, where);
  if (!v.is_number_integer()) throw Error(ErrorCode::parse, where + "." + key + " must be an integer");
  return v.get<int>();
}

inline double need_number(const Json& j, const char* key, const std::string& where) {
  const Json& v = need(j, key, where);
  if (!v.is_number()) throw Error(ErrorCode::parse, where + "." + key + " must be a number");
  return v.get<double>();
}

}  // namespace detail

inline Json matrix_to_json(const Matrix& m) {
  const bool real = is_real(m);
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (real)
        row.push_back(m(i, j).real());
      else
        row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    }
    rows.push_back(row);
  }
  return rows;
}

/// Rows of numbers, or of [re, im] pairs for complex entries.
inline Matrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw Error(ErrorCode::parse, where + " must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorCode::parse, where + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (v.is_number()) {
        m(r, c) = v.get<double>();
      } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        m(r, c) = Complex(v[0].get<double>(), v[1].get<double>());
      } else {
        throw Error(ErrorCode::parse, where + " entries must be numbers or [re, im] pairs");
      }
    }
  }
  return m;
}

inline Json vector_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// ---------------------------------------------------------------------------
// System specs
// ---------------------------------------------------------------------------

inline const char* group_name(GroupKind g) {
  switch (g) {
    case GroupKind::SO: return "SO";
    case GroupKind::SE: return "SE";
    case GroupKind::SU2: return "SU2";
    case GroupKind::Generic: return "generic";
  }
  return "generic";
}

/// {"group", "n", "generators": [{"type", "i", "j" | "k", "param"}],
///  "translations": [{"k"}], "parameters": {label: {"min", "max", "samples"}}}.
/// so_basis and se_rotation accept i > j, meaning Omega_ij = -Omega_ji.
inline SystemSpec spec_from_json(const Json& j) {
  detail::only_keys(j, {"group", "n", "generators", "translations", "parameters"}, "spec");
  SystemSpec s;
  const Json& g = detail::need(j, "group", "spec");
  if (!g.is_string()) throw Error(ErrorCode::parse, "spec.group must be a string");
  const std::string group = g.get<std::string>();
  if (group == "SO") {
    s.group = GroupKind::SO;
  } else if (group == "SE") {
    s.group = GroupKind::SE;
  } else if (group == "SU2") {
    s.group = GroupKind::SU2;
  } else {
    throw Error(ErrorCode::parse, "spec.group must be SO, SE or SU2");
  }
  s.n = s.group == GroupKind::SU2 && !j.contains("n") ? 2 : detail::need_int(j, "n", "spec");
  if (s.n < 2 || s.n > 64) throw Error(ErrorCode::invalid_dimension, "spec.n must lie in [2, 64]");

  if (j.contains("parameters")) {
    const Json& ps = j.at("parameters");
    if (!ps.is_object()) throw Error(ErrorCode::parse, "spec.parameters must be an object");
    for (const auto& item : ps.items()) {
      const std::string where = "parameters." + item.key();
      detail::only_keys(item.value(), {"min", "max", "samples"}, where);
      s.parameters.push_back({item.key(), detail::need_number(item.value(), "min", where),
                              detail::need_number(item.value(), "max", where),
                              detail::need_int(item.value(), "samples", where)});
    }
  }

  const Json& gens = detail::need(j, "generators", "spec");
  if (!gens.is_array()) throw Error(ErrorCode::parse, "spec.generators must be an array");
  for (std::size_t idx = 0; idx < gens.size(); ++idx) {
    const Json& e = gens[idx];
    const std::string where = "generators[" + std::to_string(idx + 1) + "]";
    const Json& type = detail::need(e, "type", where);
    if (!type.is_string()) throw Error(ErrorCode::parse, where + ".type must be a string");
    const std::string t = type.get<std::string>();
    Generator gen;
    if (t == "so_basis" || t == "se_rotation") {
      detail::only_keys(e, {"type", "i", "j", "param"}, where);
      if ((t == "so_basis") != (s.group == GroupKind::SO) || (t == "se_rotation") != (s.group == GroupKind::SE))
        throw Error(ErrorCode::spec, where + ": type " + t + " does not match group " + group);
      const int i = detail::need_int(e, "i", where), jj = detail::need_int(e, "j", where);
      if (i < 1 || jj < 1 || i > s.n || jj > s.n || i == jj)
        throw Error(ErrorCode::spec, where + ": need distinct plane indices in 1.." + std::to_string(s.n));
      const int lo = std::min(i, jj) - 1, hi = std::max(i, jj) - 1;
      gen.element = t == "so_basis" ? so_rotation(s.n, lo, hi) : se_rotation(s.n, lo, hi);
      if (i > jj) {
        gen.element.matrix = -gen.element.matrix;
        gen.element.label = (t == "so_basis" ? "Omega_" : "R_") + std::to_string(i) + std::to_string(jj);
      }
    } else if (t == "su2_spin") {
      detail::only_keys(e, {"type", "k", "param"}, where);
      if (s.group != GroupKind::SU2) throw Error(ErrorCode::spec, where + ": su2_spin needs group SU2");
      const int k = detail::need_int(e, "k", where);
      if (k < 1 || k > 3) throw Error(ErrorCode::spec, where + ": k must be 1, 2 or 3");
      gen.element = su2_spin(k - 1);
    } else {
      throw Error(ErrorCode::parse, where + ": unknown generator type '" + t + "'");
    }
    const Json& p = detail::need(e, "param", where);
    if (p.is_string()) {
      gen.coefficient = p.get<std::string>();
    } else if (p.is_number()) {
      gen.coefficient = p.get<double>();
    } else {
      throw Error(ErrorCode::parse, where + ".param must be a label or a number");
    }
    s.generators.push_back(std::move(gen));
  }

  if (j.contains("translations")) {
    const Json& ts = j.at("translations");
    if (!ts.is_array()) throw Error(ErrorCode::parse, "spec.translations must be an array");
    for (std::size_t idx = 0; idx < ts.size(); ++idx) {
      const std::string where = "translations[" + std::to_string(idx + 1) + "]";
      detail::only_keys(ts[idx], {"k"}, where);
      const int k = detail::need_int(ts[idx], "k", where);
      if (k < 1 || k > s.n) throw Error(ErrorCode::spec, where + ": k must lie in 1.." + std::to_string(s.n));
      s.translations.push_back(k - 1);
    }
  }
  validate(s);
  return s;
}

inline SystemSpec read_spec(const std::string& path) { return spec_from_json(parse_json(read_file(path), path)); }

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// {"group", "n", "constant": matrix} | {"group": "SO", "n": 3, "euler": [x, y, z]}
/// | {"group", "n", "points": [{"beta": [...], "matrix": ...}]}.
/// Constant forms are expanded over `grid`.
inline EnsembleState target_from_json(const Json& j, const std::vector<ParamPoint>& grid) {
  detail::only_keys(j, {"group", "n", "constant", "euler", "points"}, "target");
  const std::string group = detail::need(j, "group", "target").get<std::string>();
  GroupKind g;
  if (group == "SO") {
    g = GroupKind::SO;
  } else if (group == "SE") {
    g = GroupKind::SE;
  } else if (group == "SU2") {
    g = GroupKind::SU2;
  } else {
    throw Error(ErrorCode::parse, "target.group must be SO, SE or SU2");
  }
  const int n = detail::need_int(j, "n", "target");
  const int forms = static_cast<int>(j.contains("constant")) + static_cast<int>(j.contains("euler")) +
                    static_cast<int>(j.contains("points"));
  if (forms != 1) throw Error(ErrorCode::parse, "target needs exactly one of constant, euler, points");
  EnsembleState out;
  auto element = [&](const Matrix& m) {
    if (m.rows() != matrix_size(g, n) || m.cols() != m.rows()) throw Error(ErrorCode::shape, "target matrix has the wrong size");
    GroupElement x{m, g};
    check_group_element(x, 1e-9);
    return x;
  };
  if (j.contains("points")) {
    for (const auto& p : j.at("points")) {
      detail::only_keys(p, {"beta", "matrix"}, "target point");
      out.grid.push_back(detail::need(p, "beta", "target point").get<std::vector<double>>());
      out.states.push_back(element(matrix_from_json(detail::need(p, "matrix", "target point"), "target matrix")));
    }
    return out;
  }
  GroupElement x;
  if (j.contains("euler")) {
    if (g != GroupKind::SO || n != 3) throw Error(ErrorCode::spec, "euler targets need SO(3)");
    const auto e = j.at("euler").get<std::vector<double>>();
    if (e.size() != 3) throw Error(ErrorCode::parse, "target.euler needs three angles");
    x = element(euler_compose(e[0], e[1], e[2]).cast<Complex>());
  } else {
    x = element(matrix_from_json(j.at("constant"), "target.constant"));
  }
  out.grid = grid;
  out.states.assign(grid.size(), x);
  return out;
}

inline Json target_to_json(const EnsembleState& s) {
  Json j;
  j["group"] = s.states.empty() ? "SO" : group_name(s.states.front().group);
  const auto size = s.states.empty() ? 0 : s.states.front().matrix.rows();
  j["n"] = !s.states.empty() && s.states.front().group == GroupKind::SE ? size - 1 : size;
  Json pts = Json::array();
  for (std::size_t i = 0; i < s.states.size(); ++i)
    pts.push_back(Json{{"beta", s.grid[i]}, {"matrix", matrix_to_json(s.states[i].matrix)}});
  j["points"] = pts;
  return j;
}

// ---------------------------------------------------------------------------
// Schedules (CSV and JSON)
// ---------------------------------------------------------------------------

inline std::string schedule_to_csv(const ControlSchedule& s) {
  std::string out = "t_start,t_end";
  for (int c = 1; c <= s.channels; ++c) out += ",u_" + std::to_string(c);
  out += "\n";
  for (std::size_t i = 0; i < s.intervals(); ++i) {
    out += format_number(s.breakpoints[i]) + "," + format_number(s.breakpoints[i + 1]);
    for (double u : s.controls[i]) out += "," + format_number(u);
    out += "\n";
  }
  return out;
}

inline ControlSchedule schedule_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, "schedule CSV is empty");
  std::vector<std::string> header;
  {
    std::stringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "t_start" || header[1] != "t_end")
    throw Error(ErrorCode::parse, "schedule CSV header must start with t_start,t_end");
  for (std::size_t c = 2; c < header.size(); ++c)
    if (header[c] != "u_" + std::to_string(c - 1)) throw Error(ErrorCode::parse, "schedule CSV: unexpected column " + header[c]);
  ControlSchedule s{static_cast<int>(header.size() - 2), {}, {}};
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream r(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(r, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::parse, "schedule CSV line " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != header.size()) throw Error(ErrorCode::parse, "schedule CSV line " + std::to_string(row) + ": wrong column count");
    if (s.breakpoints.empty()) s.breakpoints.push_back(v[0]);
    if (v[0] != s.breakpoints.back())
      throw Error(ErrorCode::parse, "schedule CSV line " + std::to_string(row) + ": intervals must be contiguous");
    s.breakpoints.push_back(v[1]);
    s.controls.emplace_back(v.begin() + 2, v.end());
  }
  if (s.breakpoints.empty()) s.breakpoints.push_back(0.0);
  validate(s, s.channels);
  return s;
}

inline ControlSchedule read_schedule(const std::string& path) { return schedule_from_csv(read_file(path)); }

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

inline std::string trajectory_to_csv(const EnsembleTrajectory& tr) {
  std::string out = "grid_index,t";
  if (tr.points.empty() || tr.points.front().states.empty()) return out + "\n";
  const Matrix& first = tr.points.front().states.front().matrix;
  const bool real = tr.points.front().states.front().group != GroupKind::SU2 &&
                    tr.points.front().states.front().group != GroupKind::Generic;
  for (Eigen::Index i = 0; i < first.rows(); ++i)
    for (Eigen::Index j = 0; j < first.cols(); ++j) {
      const std::string ij = std::to_string(i + 1) + "_" + std::to_string(j + 1);
      out += real ? ",x_" + ij : ",re_" + ij + ",im_" + ij;
    }
  out += "\n";
  for (std::size_t p = 0; p < tr.points.size(); ++p)
    for (std::size_t k = 0; k < tr.points[p].states.size(); ++k) {
      out += std::to_string(p + 1) + "," + format_number(tr.points[p].times[k]);
      const Matrix& m = tr.points[p].states[k].matrix;
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          out += "," + format_number(m(i, j).real());
          if (!real) out += "," + format_number(m(i, j).imag());
        }
      out += "\n";
    }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json report_to_json(const ControllabilityReport& r) {
  Json j;
  j["mode"] = r.ensemble ? "ensemble" : "classical";
  j["controllable"] = r.controllable;
  j["closure_dimension"] = r.closure_dimension;
  j["algebra_dimension"] = r.algebra_dimension;
  j["obstruction"] = r.obstruction ? Json(to_string(*r.obstruction)) : Json(nullptr);
  j["center_dimension"] = r.center.size();
  if (r.sphere_transitive) j["sphere_transitive"] = *r.sphere_transitive;
  if (r.translational_reach) j["translational_reach"] = *r.translational_reach;
  j["embedding_assumed"] = r.embedding_assumed;
  return j;
}

inline Json certificates_to_json(const SystemSpec& spec, const std::map<int, MonomialCertificate>& certs) {
  const auto basis = standard_basis(spec.group, spec.n);
  Json a = Json::array();
  for (const auto& [idx, c] : certs) {
    Json e;
    e["element"] = basis[static_cast<std::size_t>(idx)].label;
    Json ex = Json::object();
    for (std::size_t k = 0; k < spec.parameters.size(); ++k) ex[spec.parameters[k].label] = c.exponents[k];
    e["exponents"] = ex;
    e["sign"] = c.sign;
    e["depth"] = c.depth;
    a.push_back(e);
  }
  return a;
}

inline Json cover_to_json(const Cover& c) {
  Json j;
  j["algebra"] = group_name(c.algebra);
  j["dimension"] = c.basis.size();
  Json ts = Json::array();
  for (const auto& t : c.triples) {
    Json e;
    Json labels = Json::array(), signs = Json::array(), idx = Json::array();
    for (int k = 0; k < 3; ++k) {
      labels.push_back(c.basis[static_cast<std::size_t>(t.index[static_cast<std::size_t>(k)])].label);
      signs.push_back(t.sign[static_cast<std::size_t>(k)]);
      idx.push_back(t.index[static_cast<std::size_t>(k)] + 1);
    }
    e["labels"] = labels;
    e["basis_index"] = idx;
    e["signs"] = signs;
    e["certificate"] = Json{{"passed", t.certificate.passed},
                            {"residuals", t.certificate.residuals},
                            {"violated", t.certificate.violated ? Json(*t.certificate.violated) : Json(nullptr)}};
    ts.push_back(e);
  }
  j["triples"] = ts;
  return j;
}

inline Json probe_to_json(const FunctionClosureResult& r, std::size_t grid_points) {
  const SaturationReport s = saturation_report(r);
  Json j;
  j["grid_points"] = grid_points;
  j["target_dimension"] = r.target;
  j["dimensions"] = r.dimensions;
  j["verdict"] = to_string(r.verdict);
  j["depth_to_saturation"] = s.depth_to_saturation ? Json(*s.depth_to_saturation) : Json(nullptr);
  j["final_dimension"] = s.final_dimension;
  j["deficiency"] = s.deficiency;
  j["condition"] = s.condition;
  j["max_rejected_residual"] = r.max_rejected;
  return j;
}

inline Json fit_to_json(const PolynomialFit& f) {
  return Json{{"powers", f.powers},           {"coefficients", f.coefficients}, {"sup_error", f.sup_error},
              {"condition", f.condition},     {"domain", {f.domain_min, f.domain_max}}};
}

inline Json program_to_json(const FlowProgram& p) {
  Json j;
  j["chart"] = p.chart;
  Json flows = Json::array();
  for (const auto& f : p.flows)
    flows.push_back(Json{{"word", f.word.to_string()},
                         {"duration", f.duration},
                         {"axis", std::string(1, "xyz"[f.axis < 0 ? 0 : f.axis])},
                         {"power", f.power},
                         {"coefficient", f.coefficient}});
  j["flows"] = flows;
  return j;
}

/// Parses words such as "g2" or "[g1,[g1,g2]]" (1-based channels).
inline BracketWord word_from_string(const std::string& s) {
  std::size_t pos = 0;
  std::function<BracketWord()> parse = [&]() -> BracketWord {
    if (pos >= s.size()) throw Error(ErrorCode::parse, "truncated bracket word '" + s + "'");
    if (s[pos] == 'g') {
      ++pos;
      const std::size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (start == pos) throw Error(ErrorCode::parse, "bad channel in bracket word '" + s + "'");
      const int c = std::stoi(s.substr(start, pos - start));
      if (c < 1) throw Error(ErrorCode::parse, "channels in bracket words are 1-based");
      return BracketWord::leaf(c - 1);
    }
    if (s[pos] != '[') throw Error(ErrorCode::parse, "bad bracket word '" + s + "'");
    ++pos;
    BracketWord a = parse();
    if (pos >= s.size() || s[pos] != ',') throw Error(ErrorCode::parse, "bad bracket word '" + s + "'");
    ++pos;
    BracketWord b = parse();
    if (pos >= s.size() || s[pos] != ']') throw Error(ErrorCode::parse, "bad bracket word '" + s + "'");
    ++pos;
    return BracketWord::bracket(std::move(a), std::move(b));
  };
  BracketWord w = parse();
  if (pos != s.size()) throw Error(ErrorCode::parse, "trailing characters in bracket word '" + s + "'");
  return w;
}

inline FlowProgram program_from_json(const Json& j) {
  detail::only_keys(j, {"chart", "flows"}, "program");
  FlowProgram p;
  if (j.contains("chart")) p.chart = j.at("chart").get<std::string>();
  for (const auto& f : detail::need(j, "flows", "program")) {
    detail::only_keys(f, {"word", "duration", "axis", "power", "coefficient"}, "flow");
    PrimitiveFlow flow;
    flow.word = word_from_string(detail::need(f, "word", "flow").get<std::string>());
    flow.duration = detail::need_number(f, "duration", "flow");
    if (f.contains("axis")) {
      const std::string a = f.at("axis").get<std::string>();
      if (a.size() != 1 || std::string("xyz").find(a[0]) == std::string::npos)
        throw Error(ErrorCode::parse, "flow axis must be x, y or z");
      flow.axis = static_cast<int>(std::string("xyz").find(a[0]));
    }
    if (f.contains("power")) flow.power = f.at("power").get<int>();
    if (f.contains("coefficient")) flow.coefficient = f.at("coefficient").get<double>();
    p.flows.push_back(std::move(flow));
  }
  return p;
}

inline Json evaluation_to_json(const EvaluationReport& r) {
  Json j;
  j["sup"] = r.sup;
  j["argmax"] = r.argmax + 1;
  j["per_point"] = r.per_point;
  if (!r.rotation.empty()) {
    j["sup_rotation"] = r.sup_rotation;
    j["sup_translation"] = r.sup_translation;
    j["rotation"] = r.rotation;
    j["translation"] = r.translation;
  }
  return j;
}

}  // namespace ensctl::io

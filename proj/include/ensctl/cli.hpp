#pragma once

// Command-line driver. Every command writes its payload files into --out and
// a separate metadata.json with provenance; payloads are deterministic.
//
// Exit codes: 0 success (or controllable), 1 module error (or
// uncontrollable), 2 usage or parse error.

#include <ensctl/io.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace ensctl::cli {

inline constexpr const char* version = "0.1.0";

namespace detail {

inline std::vector<double> parse_list(const std::string& text, char sep = ',') {
  std::vector<double> out;
  std::stringstream s(text);
  std::string cell;
  while (std::getline(s, cell, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "bad number '" + cell + "'");
    }
  }
  return out;
}

// "a,b;c,d" -> rows separated by ';'.
inline RealMatrix parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream s(text);
  std::string row;
  while (std::getline(s, row, ';')) rows.push_back(parse_list(row));
  if (rows.empty()) throw Error(ErrorCode::parse, "empty matrix");
  RealMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw Error(ErrorCode::parse, "ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Context {
  std::filesystem::path out_dir;
  std::vector<std::string> args;
  std::string command;
  std::vector<std::string> written;
  std::ostream* out = nullptr;

  void write(const std::string& name, const std::string& text) {
    std::filesystem::create_directories(out_dir);
    io::write_file((out_dir / name).string(), text);
    written.push_back(name);
  }

  void finish() {
    io::Json meta;
    meta["tool"] = "ensctl";
    meta["version"] = version;
    meta["command"] = command;
    meta["arguments"] = args;
    meta["generated_at"] = utc_now();
    meta["payloads"] = written;
    std::filesystem::create_directories(out_dir);
    io::write_file((out_dir / "metadata.json").string(), io::dump(meta));
  }
};

}  // namespace detail

/// Runs the tool on `args` (without the program name).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Controllability analysis and ensemble control synthesis for bilinear systems on matrix Lie groups"};
  app.require_subcommand(1);
  std::string out_dir = "out";
  int threads = 0;
  std::optional<double> tol;
  app.add_option("--out", out_dir, "Directory for output files")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (0: machine parallelism)")->check(CLI::NonNegativeNumber);
  app.add_option("--tol", tol, "Tolerance: probe rank threshold, plan error bound")->check(CLI::PositiveNumber);
  app.set_version_flag("--version", version);

  std::string spec_path, target_path, schedule_path, program_path, group = "so", mode = "minimal", store = "breakpoints";
  std::string xf_text, Xf_text, beta_text;
  bool ensemble = false, classical = false;
  int n = 3, depth = 12, degree = 11, dense = 4;
  std::optional<int> grid_samples, refine;

  auto* check = app.add_subcommand("check", "Lie algebra rank condition (classical or ensemble)");
  check->add_option("spec", spec_path, "System spec JSON")->required();
  auto* ens_flag = check->add_flag("--ensemble", ensemble, "Force the ensemble verdict");
  check->add_flag("--classical", classical, "Force the single-system verdict")->excludes(ens_flag);

  auto* cover = app.add_subcommand("cover", "Cover of an algebra by so(3)/su(2) triples");
  cover->add_option("--group", group, "so or su2")->check(CLI::IsMember({"so", "su2"}))->capture_default_str();
  cover->add_option("--n", n, "Matrix dimension")->capture_default_str();
  cover->add_option("--mode", mode, "minimal or full")->check(CLI::IsMember({"minimal", "full"}))->capture_default_str();

  auto* probe = app.add_subcommand("probe", "Lie closure over a parameter grid");
  probe->add_option("spec", spec_path, "System spec JSON")->required();
  probe->add_option("--depth", depth, "Maximum bracket depth")->check(CLI::PositiveNumber)->capture_default_str();
  probe->add_option("--grid", grid_samples, "Samples per parameter (overrides the spec)")->check(CLI::PositiveNumber);

  auto* plan = app.add_subcommand("plan", "Plan and compile broadcast controls for an SO(3) ensemble target");
  plan->add_option("spec", spec_path, "System spec JSON")->required();
  plan->add_option("target", target_path, "Target JSON")->required();
  plan->add_option("--degree", degree, "Odd degree bound")->capture_default_str();
  plan->add_option("--refine", refine, "Fixed refinement m (default: chosen by measured error)")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Integrate a schedule or flow program over the spec's grid");
  simulate->add_option("spec", spec_path, "System spec JSON")->required();
  auto* sched_opt = simulate->add_option("--schedule", schedule_path, "Schedule CSV");
  auto* prog_opt = simulate->add_option("--program", program_path, "Flow program JSON (exact flows)");
  sched_opt->excludes(prog_opt);
  simulate->add_option("--target", target_path, "Target JSON for evaluation");
  simulate->add_option("--store", store, "breakpoints, final or dense")
      ->check(CLI::IsMember({"breakpoints", "final", "dense"}))
      ->capture_default_str();
  simulate->add_option("--dense", dense, "Samples per interval in dense mode")->check(CLI::PositiveNumber);

  auto* steer = app.add_subcommand("steer-sen", "Three-step steering of one SE(n) system");
  steer->add_option("spec", spec_path, "System spec JSON")->required();
  steer->add_option("--xf", xf_text, "Target translation, comma separated")->required();
  steer->add_option("--Xf", Xf_text, "Target rotation, rows separated by ';' (default identity)");
  steer->add_option("--beta", beta_text, "Parameter point (default box midpoint)");

  std::vector<std::string> argv_store{"ensctl"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  detail::Context ctx{out_dir, args, "", {}, &out};
  auto emit = [&](const std::string& name, const io::Json& j) {
    const std::string text = io::dump(j);
    ctx.write(name, text);
    return text;
  };
  try {
    if (*check) {
      ctx.command = "check";
      const SystemSpec spec = io::read_spec(spec_path);
      // Default: the ensemble question whenever the spec carries a nontrivial
      // parameter box, the classical one otherwise.
      bool box = false;
      for (const auto& p : spec.parameters) box = box || (p.max > p.min && p.samples > 1);
      ensemble = ensemble || (!classical && spec.has_labels() && box);
      const ControllabilityReport rep = ensemble ? check_ensemble(spec) : check_classical(spec);
      io::Json j = io::report_to_json(rep);
      if (ensemble && rep.controllable && spec.group != GroupKind::Generic) {
        try {
          j["certificates"] = io::certificates_to_json(spec, monomial_certificates(spec));
        } catch (const Error&) {
          // Generators outside the signed basis carry no monomial certificates.
        }
      }
      out << emit("check.json", j);
      ctx.finish();
      return rep.controllable ? 0 : 1;
    }
    if (*cover) {
      ctx.command = "cover";
      Cover c;
      if (group == "so") {
        c = cover_so_n(n, mode == "minimal" ? CoverMode::minimal : CoverMode::full);
      } else {
        if (n != 2) throw Error(ErrorCode::invalid_dimension, "su2 covers need --n 2");
        c = cover_from_triples(standard_basis(GroupKind::SU2, 2), {{0, 1, 2}});
      }
      emit("cover.json", io::cover_to_json(c));
      out << "cover: " << c.triples.size() << " triples\n";
      ctx.finish();
      return 0;
    }
    if (*probe) {
      ctx.command = "probe";
      SystemSpec spec = io::read_spec(spec_path);
      if (grid_samples)
        for (auto& p : spec.parameters) p.samples = *grid_samples;
      const auto grid = parameter_grid(spec);
      const auto r = fn_lie_closure(spec, grid, depth, tol.value_or(1e-8));
      emit("probe.json", io::probe_to_json(r, grid.size()));
      out << "probe: " << to_string(r.verdict) << " at dimension " << r.dimensions.back() << " of " << r.target << "\n";
      ctx.finish();
      return 0;
    }
    if (*plan) {
      ctx.command = "plan";
      const SystemSpec spec = io::read_spec(spec_path);
      const auto grid = parameter_grid(spec);
      const EnsembleState target = io::target_from_json(io::parse_json(io::read_file(target_path), target_path), grid);
      const So3Plan p = plan_so3_ensemble(spec, target.grid, target.states, degree, tol.value_or(1e-2));
      CompiledProgram c;
      if (refine) {
        c = compile_program(spec, p, *refine);
        c.measured_error = measure_compile_error(spec, target.grid, p.program, c.schedule, threads);
      } else {
        c = choose_refinement(spec, target.grid, p, std::max(1e-6, 0.1 * p.predicted_error), 512, threads);
      }
      SimulationOptions opt;
      opt.store = StoreMode::final_only;
      opt.threads = threads;
      const auto ev = evaluate(integrate_ensemble(spec, target.grid, c.schedule, opt), target);
      io::Json j;
      j["predicted_error"] = p.predicted_error;
      j["fits"] = {{"x", io::fit_to_json(p.fits[0])}, {"y", io::fit_to_json(p.fits[1])}, {"z", io::fit_to_json(p.fits[2])}};
      j["gimbal_lock_points"] = static_cast<int>(std::count(p.angles.gimbal_lock.begin(), p.angles.gimbal_lock.end(), true));
      j["refinement"] = c.refinement;
      j["compile_error"] = c.measured_error;
      j["final_distance"] = ev.sup;
      j["bound"] = p.predicted_error + c.measured_error + 1e-9;
      j["within_bound"] = ev.sup <= p.predicted_error + c.measured_error + 1e-9;
      j["intervals"] = c.schedule.intervals();
      j["duration"] = c.schedule.duration();
      io::Json axes = io::Json::array();
      for (const auto& a : c.axes)
        axes.push_back(io::Json{{"axis", std::string(1, "xyz"[a.axis])},
                                {"direct", a.direct},
                                {"family", a.direct ? "direct" : (a.cosine ? "cosine" : "sine")},
                                {"terms", a.weights.size()},
                                {"realisation_error", a.realisation_error}});
      j["realisation"] = axes;
      emit("plan.json", j);
      emit("program.json", io::program_to_json(p.program));
      ctx.write("schedule.csv", io::schedule_to_csv(c.schedule));
      out << "plan: predicted " << io::format_number(p.predicted_error) << ", compile " << io::format_number(c.measured_error)
          << " (m = " << c.refinement << "), final " << io::format_number(ev.sup) << "\n";
      ctx.finish();
      return 0;
    }
    if (*simulate) {
      ctx.command = "simulate";
      if (schedule_path.empty() == program_path.empty())
        throw CLI::ValidationError("simulate needs exactly one of --schedule and --program");
      const SystemSpec spec = io::read_spec(spec_path);
      const auto grid = parameter_grid(spec);
      std::optional<EnsembleState> target;
      if (!target_path.empty()) target = io::target_from_json(io::parse_json(io::read_file(target_path), target_path), grid);
      const auto& points = target ? target->grid : grid;
      EnsembleState final_state{points, {}};
      if (!schedule_path.empty()) {
        SimulationOptions opt;
        opt.store = store == "final" ? StoreMode::final_only : store == "dense" ? StoreMode::dense : StoreMode::breakpoints;
        opt.dense_samples = dense;
        opt.threads = threads;
        const auto tr = integrate_ensemble(spec, points, io::read_schedule(schedule_path), opt);
        ctx.write("trajectory.csv", io::trajectory_to_csv(tr));
        final_state = tr.final_state();
      } else {
        const FlowProgram prog = io::program_from_json(io::parse_json(io::read_file(program_path), program_path));
        for (const auto& p : points) final_state.states.push_back({program_product(spec, prog, p), spec.group});
      }
      emit("final.json", io::target_to_json(final_state));
      if (target) {
        const auto ev = evaluate(final_state, *target);
        emit("evaluation.json", io::evaluation_to_json(ev));
        out << "simulate: sup distance " << io::format_number(ev.sup) << " at grid point " << ev.argmax + 1 << "\n";
      } else {
        out << "simulate: " << points.size() << " grid points\n";
      }
      ctx.finish();
      return 0;
    }
    if (*steer) {
      ctx.command = "steer-sen";
      const SystemSpec spec = io::read_spec(spec_path);
      const auto xv = detail::parse_list(xf_text);
      const Eigen::VectorXd xf = Eigen::Map<const Eigen::VectorXd>(xv.data(), static_cast<Eigen::Index>(xv.size()));
      const RealMatrix Xf = Xf_text.empty() ? RealMatrix(RealMatrix::Identity(spec.n, spec.n)) : detail::parse_matrix(Xf_text);
      std::optional<ParamPoint> beta;
      if (!beta_text.empty()) beta = detail::parse_list(beta_text);
      const SteeringPlan sp = three_step_steer_sen(spec, xf, Xf, beta);
      SimulationOptions opt;
      opt.store = StoreMode::final_only;
      const GroupElement end = integrate_single(spec, sp.beta, sp.schedule, opt).states.back();
      const SeDistance d = se_distance(end, sp.waypoints[2]);
      io::Json j;
      j["beta"] = sp.beta;
      j["z"] = io::vector_to_json(sp.z);
      j["A"] = io::matrix_to_json(sp.A.cast<Complex>());
      io::Json phases = io::Json::array();
      for (std::size_t k = 0; k < 3; ++k)
        phases.push_back(io::Json{{"intervals", sp.phases[k].intervals()},
                                  {"duration", sp.phases[k].duration()},
                                  {"waypoint", io::matrix_to_json(sp.waypoints[k].matrix)}});
      j["phases"] = phases;
      j["endpoint"] = {{"rotation_error", d.rotation}, {"translation_error", d.translation}};
      emit("steer.json", j);
      ctx.write("schedule.csv", io::schedule_to_csv(sp.schedule));
      out << "steer-sen: rotation error " << io::format_number(d.rotation) << ", translation error "
          << io::format_number(d.translation) << "\n";
      ctx.finish();
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    io::Json j{{"error", to_string(e.code())}, {"message", e.what()}};
    err << j.dump() << "\n";
    return e.code() == ErrorCode::parse ? 2 : 1;
  } catch (const std::exception& e) {
    io::Json j{{"error", "internal"}, {"message", e.what()}};
    err << j.dump() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ensctl::cli

#pragma once

// Exact integration of piecewise-constant bilinear systems: on each interval
// the state is multiplied on the left by one matrix exponential.

#include <ensctl/lie_core.hpp>
#include <ensctl/system.hpp>

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace ensctl {

/// Piecewise-constant controls: `controls[i]` holds one value per channel on
/// [breakpoints[i], breakpoints[i+1]).
struct ControlSchedule {
  int channels = 0;
  std::vector<double> breakpoints{0.0};
  std::vector<std::vector<double>> controls;

  std::size_t intervals() const { return controls.size(); }
  double duration() const { return breakpoints.back() - breakpoints.front(); }

  void append(double dt, std::vector<double> u) {
    if (!(dt > 0.0)) throw Error(ErrorCode::spec, "interval lengths must be positive");
    if (static_cast<int>(u.size()) != channels) throw Error(ErrorCode::spec, "control vector has the wrong length");
    breakpoints.push_back(breakpoints.back() + dt);
    controls.push_back(std::move(u));
  }

  /// One unit-length interval with a single active channel.
  void append_unit(int channel, double u) {
    std::vector<double> v(static_cast<std::size_t>(channels), 0.0);
    v[static_cast<std::size_t>(channel)] = u;
    append(1.0, std::move(v));
  }
};

inline void validate(const ControlSchedule& s, int expected_channels) {
  if (s.channels != expected_channels)
    throw Error(ErrorCode::spec, "schedule has " + std::to_string(s.channels) + " channels, spec has " +
                                     std::to_string(expected_channels));
  if (s.breakpoints.size() != s.controls.size() + 1) throw Error(ErrorCode::spec, "schedule breakpoint count mismatch");
  for (std::size_t i = 0; i + 1 < s.breakpoints.size(); ++i)
    if (!(s.breakpoints[i + 1] > s.breakpoints[i])) throw Error(ErrorCode::spec, "breakpoints must increase strictly");
  for (const auto& u : s.controls) {
    if (static_cast<int>(u.size()) != s.channels) throw Error(ErrorCode::spec, "control vector has the wrong length");
    for (double v : u)
      if (!std::isfinite(v)) throw Error(ErrorCode::numeric, "non-finite control value");
  }
}

/// Concatenation: `b` runs after `a`.
inline ControlSchedule concatenate(const ControlSchedule& a, const ControlSchedule& b) {
  if (a.channels != b.channels) throw Error(ErrorCode::spec, "cannot concatenate schedules with different channels");
  ControlSchedule out = a;
  for (std::size_t i = 0; i < b.controls.size(); ++i) out.append(b.breakpoints[i + 1] - b.breakpoints[i], b.controls[i]);
  return out;
}

enum class StoreMode { breakpoints, final_only, dense };

struct SimulationOptions {
  StoreMode store = StoreMode::breakpoints;
  int dense_samples = 4;  // samples per interval in dense mode
  int threads = 0;        // 0: hardware concurrency
};

struct Trajectory {
  std::vector<double> times;
  std::vector<GroupElement> states;
};

namespace detail {

inline GroupElement fix_se_row(GroupElement x) {
  if (x.group == GroupKind::SE) {
    const auto n = x.matrix.rows();
    x.matrix.row(n - 1).setZero();
    x.matrix(n - 1, n - 1) = 1.0;
  }
  return x;
}

}  // namespace detail

inline Trajectory integrate_single(const SystemSpec& spec, const ParamPoint& beta, const ControlSchedule& schedule,
                                   const SimulationOptions& opt = {}) {
  validate(schedule, spec.channel_count());
  if (beta.size() != spec.parameters.size()) throw Error(ErrorCode::spec, "parameter point has the wrong dimension");
  const int channels = spec.channel_count();
  const bool real = spec.group != GroupKind::SU2 && spec.group != GroupKind::Generic;
  std::vector<Matrix> b;
  std::vector<RealMatrix> rb;
  for (int ch = 0; ch < channels; ++ch) {
    b.push_back(spec.channel_matrix(ch, beta));
    rb.push_back(b.back().real());
  }
  const int size = matrix_size(spec.group, spec.n);
  Trajectory tr;
  auto record = [&](double t, GroupElement x) {
    tr.times.push_back(t);
    tr.states.push_back(detail::fix_se_row(std::move(x)));
  };

  RealMatrix xr = RealMatrix::Identity(size, size);
  Matrix xc = Matrix::Identity(size, size);
  auto current = [&]() -> GroupElement { return {real ? Matrix(xr.cast<Complex>()) : xc, spec.group}; };
  if (opt.store != StoreMode::final_only) record(schedule.breakpoints.front(), current());

  for (std::size_t i = 0; i < schedule.intervals(); ++i) {
    const double dt = schedule.breakpoints[i + 1] - schedule.breakpoints[i];
    const auto& u = schedule.controls[i];
    if (real) {
      RealMatrix a = RealMatrix::Zero(size, size);
      for (int ch = 0; ch < channels; ++ch)
        if (u[static_cast<std::size_t>(ch)] != 0.0) a += u[static_cast<std::size_t>(ch)] * rb[static_cast<std::size_t>(ch)];
      if (opt.store == StoreMode::dense)
        for (int k = 1; k < opt.dense_samples; ++k) {
          const double f = static_cast<double>(k) / opt.dense_samples;
          record(schedule.breakpoints[i] + f * dt, {Matrix((expm_real(f * dt * a) * xr).cast<Complex>()), spec.group});
        }
      xr = expm_real(dt * a) * xr;
      if (spec.group == GroupKind::SE) {
        xr.row(size - 1).setZero();
        xr(size - 1, size - 1) = 1.0;
      }
    } else {
      Matrix a = Matrix::Zero(size, size);
      for (int ch = 0; ch < channels; ++ch)
        if (u[static_cast<std::size_t>(ch)] != 0.0) a += u[static_cast<std::size_t>(ch)] * b[static_cast<std::size_t>(ch)];
      if (opt.store == StoreMode::dense)
        for (int k = 1; k < opt.dense_samples; ++k) {
          const double f = static_cast<double>(k) / opt.dense_samples;
          record(schedule.breakpoints[i] + f * dt, {expm(Matrix(f * dt * a)) * xc, spec.group});
        }
      xc = expm(Matrix(dt * a)) * xc;
    }
    if (opt.store != StoreMode::final_only) record(schedule.breakpoints[i + 1], current());
  }
  if (opt.store == StoreMode::final_only) record(schedule.breakpoints.back(), current());
  return tr;
}

struct EnsembleTrajectory {
  std::vector<ParamPoint> grid;
  std::vector<Trajectory> points;  // one per grid point, same time stamps

  EnsembleState final_state() const {
    EnsembleState s{grid, {}};
    for (const auto& p : points) s.states.push_back(p.states.back());
    return s;
  }
};

/// Broadcast: the same schedule drives every grid point. Points are dealt to
/// worker threads round-robin; each point is integrated independently, so the
/// result does not depend on the thread count.
inline EnsembleTrajectory integrate_ensemble(const SystemSpec& spec, const std::vector<ParamPoint>& grid,
                                             const ControlSchedule& schedule, const SimulationOptions& opt = {}) {
  validate(schedule, spec.channel_count());
  EnsembleTrajectory out{grid, std::vector<Trajectory>(grid.size())};
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(opt.threads > 0 ? static_cast<std::size_t>(opt.threads) : hw,
                                                    std::max<std::size_t>(grid.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) out.points[i] = integrate_single(spec, grid[i], schedule, opt);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < grid.size(); i += workers)
          out.points[i] = integrate_single(spec, grid[i], schedule, opt);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

struct EvaluationReport {
  double sup = 0.0;
  std::size_t argmax = 0;
  std::vector<double> per_point;
  // SE(n) only
  std::vector<double> rotation;
  std::vector<double> translation;
  double sup_rotation = 0.0;
  double sup_translation = 0.0;
};

/// Distance between final states and a target on the same grid. Ties in the
/// maximum go to the lowest grid index.
inline EvaluationReport evaluate(const EnsembleState& final_state, const EnsembleState& target) {
  if (!same_grid(final_state.grid, target.grid) || final_state.states.size() != target.states.size())
    throw Error(ErrorCode::grid, "evaluation target lives on a different grid");
  EvaluationReport r;
  for (std::size_t i = 0; i < final_state.states.size(); ++i) {
    const auto& x = final_state.states[i];
    const auto& y = target.states[i];
    double d;
    if (x.group == GroupKind::SE) {
      const SeDistance s = se_distance(x, y);
      r.rotation.push_back(s.rotation);
      r.translation.push_back(s.translation);
      r.sup_rotation = std::max(r.sup_rotation, s.rotation);
      r.sup_translation = std::max(r.sup_translation, s.translation);
      d = s.max();
    } else {
      d = geodesic_distance(x, y);
    }
    r.per_point.push_back(d);
    if (d > r.sup) {
      r.sup = d;
      r.argmax = i;
    }
  }
  return r;
}

inline EvaluationReport evaluate(const EnsembleTrajectory& tr, const EnsembleState& target) {
  return evaluate(tr.final_state(), target);
}

}  // namespace ensctl

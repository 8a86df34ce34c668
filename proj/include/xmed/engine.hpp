#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xmed/errors.hpp"
#include "xmed/grid.hpp"
#include "xmed/model.hpp"
#include "xmed/threading.hpp"

namespace xmed {

// The u,v fields over a lattice at time t. Arrays are row-major,
// last axis fastest, matching GridSpec.
struct FieldState {
  GridSpec grid;
  std::vector<double> u, v;
  double t = 0.0;          // ms
  std::uint64_t step_count = 0;
};

enum class StimTarget { u, v };

// Timed hard-set of one variable inside a region (crossfield protocol
// building block). Overwrites, does not add.
struct StimulusEvent {
  double time = 0.0;  // ms
  RegionSpec region;
  StimTarget target = StimTarget::u;
  double value = 0.0;
};

enum class Backend { stencil, graph };

struct RunPlan {
  FhnParams params;
  GridSpec grid;
  ConductionMask mask;
  double dt = 0.05;            // ms
  double t_end = 0.0;          // ms
  std::vector<StimulusEvent> stimuli;
  double snapshot_every = 0.0;  // ms; must be a positive multiple of dt
  Backend backend = Backend::stencil;
  bool reaction_enabled = true;

  std::int64_t snapshot_stride() const {
    return std::llround(snapshot_every / dt);
  }

  void validate() const {
    params.validate();
    if (!(dt > 0.0)) throw ConfigError("plan: dt must be > 0");
    const double limit = stability_limit(params, grid);
    if (dt > limit * (1.0 + 1e-12))
      throw ConfigError("plan: dt=" + std::to_string(dt) +
                        " exceeds diffusion stability limit " +
                        std::to_string(limit));
    if (!(t_end >= 0.0)) throw ConfigError("plan: t_end must be >= 0");
    const std::int64_t k = snapshot_stride();
    if (k < 1 || std::abs(static_cast<double>(k) * dt - snapshot_every) >
                     1e-9 * std::max(1.0, snapshot_every))
      throw ConfigError("plan: snapshot_every must be a positive multiple of dt");
    for (std::size_t i = 0; i < stimuli.size(); ++i) {
      if (stimuli[i].time < 0.0)
        throw ConfigError("plan: stimulus time must be >= 0");
      if (i > 0 && stimuli[i].time < stimuli[i - 1].time)
        throw ConfigError("plan: stimuli must be sorted by time");
      validate_region(stimuli[i].region, grid.ndim());
    }
    if (!mask.grid().same_lattice(grid))
      throw ConfigError("plan: mask grid does not match plan grid");
  }
};

// Uniform resting state; obstacle nodes are frozen at the same value.
inline FieldState make_rest_state(const GridSpec& grid, const FhnParams& p) {
  const StatePair rest = resting_state(p);
  FieldState st{grid,
                std::vector<double>(grid.node_count(), rest.u),
                std::vector<double>(grid.node_count(), rest.v),
                0.0,
                0};
  return st;
}

// Sets the target variable on all active nodes inside the region. Returns
// the number of nodes written (zero is legal and merely suspicious).
inline std::int64_t apply_stimulus(FieldState& state, const StimulusEvent& ev,
                                   const ConductionMask& mask) {
  const auto in_region = region_mask(state.grid, ev.region);
  std::vector<double>& field = ev.target == StimTarget::u ? state.u : state.v;
  std::int64_t count = 0;
  for (NodeIndex i = 0; i < state.grid.node_count(); ++i) {
    if (in_region[i] && mask.active(i)) {
      field[i] = ev.value;
      ++count;
    }
  }
  return count;
}

namespace detail {

// One forward-Euler step over first-axis rows [row_lo, row_hi), writing the
// new buffers. Neighbor sums are accumulated in a fixed order (axis 0 minus,
// axis 0 plus, axis 1 minus, ...) so results do not depend on the partition.
// Records the smallest-index node that produced a non-finite value.
template <bool HasMask>
inline void step_rows_stencil(const GridSpec& grid, const std::uint8_t* mask,
                              const FhnParams& p, double dt, bool react,
                              const double* u0, const double* v0, double* u1,
                              double* v1, std::int64_t row_lo,
                              std::int64_t row_hi, std::int64_t* first_bad) {
  const int nd = grid.ndim();
  const auto& shape = grid.shape();
  const auto& strides = grid.strides();
  const double w = 1.0 / (grid.spacing() * grid.spacing());
  const double du_w = p.d_u * w;
  const double dv_w = p.d_v * w;
  const bool dv_pos = p.d_v > 0.0;
  const std::int64_t n_last = shape[nd - 1];
  const std::int64_t begin = row_lo * strides[0];
  const std::int64_t end = row_hi * strides[0];
  std::int64_t bad = -1;

  std::vector<std::int64_t> c(nd, 0);
  std::vector<std::uint8_t> ok_minus(nd, 0), ok_plus(nd, 0);
  if (begin < end) grid.unflatten(begin, c);

  std::int64_t base = begin;
  while (base < end) {
    const std::int64_t j0 = nd == 1 ? base : 0;
    const std::int64_t j1 = nd == 1 ? end : n_last;
    for (int k = 0; k + 1 < nd; ++k) {
      ok_minus[k] = c[k] > 0;
      ok_plus[k] = c[k] + 1 < shape[k];
    }
    const std::int64_t line = base - j0;
    for (std::int64_t j = j0; j < j1; ++j) {
      const std::int64_t i = line + j;
      if constexpr (HasMask) {
        if (!mask[i]) {
          u1[i] = u0[i];
          v1[i] = v0[i];
          continue;
        }
      }
      const double ui = u0[i];
      const double vi = v0[i];
      double su = 0.0, sv = 0.0;
      for (int k = 0; k + 1 < nd; ++k) {
        const std::int64_t s = strides[k];
        if (ok_minus[k] && (!HasMask || mask[i - s])) {
          su += u0[i - s] - ui;
          if (dv_pos) sv += v0[i - s] - vi;
        }
        if (ok_plus[k] && (!HasMask || mask[i + s])) {
          su += u0[i + s] - ui;
          if (dv_pos) sv += v0[i + s] - vi;
        }
      }
      if (j > 0 && (!HasMask || mask[i - 1])) {
        su += u0[i - 1] - ui;
        if (dv_pos) sv += v0[i - 1] - vi;
      }
      if (j + 1 < shape[nd - 1] && (!HasMask || mask[i + 1])) {
        su += u0[i + 1] - ui;
        if (dv_pos) sv += v0[i + 1] - vi;
      }
      double fu = 0.0, gv = 0.0;
      if (react) {
        const StatePair r = reaction(p, StatePair{ui, vi});
        fu = r.u;
        gv = r.v;
      }
      const double un = ui + dt * (du_w * su + fu);
      const double vn = vi + dt * (dv_w * sv + gv);
      if (!(std::isfinite(un) && std::isfinite(vn)) && bad < 0) bad = i;
      u1[i] = un;
      v1[i] = vn;
    }
    base += j1 - j0;
    for (int k = nd - 2; k >= 0; --k) {
      if (++c[k] < shape[k]) break;
      c[k] = 0;
    }
  }
  *first_bad = bad;
}

template <bool HasMask>
inline void step_rows_graph(const LatticeGraph& graph, const std::uint8_t* mask,
                            const FhnParams& p, double dt, bool react,
                            const double* u0, const double* v0, double* u1,
                            double* v1, std::int64_t lo, std::int64_t hi,
                            std::int64_t* first_bad) {
  const double du_w = p.d_u * graph.coupling_weight;
  const double dv_w = p.d_v * graph.coupling_weight;
  const bool dv_pos = p.d_v > 0.0;
  std::int64_t bad = -1;
  for (std::int64_t i = lo; i < hi; ++i) {
    if constexpr (HasMask) {
      if (!mask[i]) {
        u1[i] = u0[i];
        v1[i] = v0[i];
        continue;
      }
    }
    const double ui = u0[i];
    const double vi = v0[i];
    double su = 0.0, sv = 0.0;
    for (std::int64_t e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) {
      const std::int64_t j = graph.neighbor_indices[e];
      su += u0[j] - ui;
      if (dv_pos) sv += v0[j] - vi;
    }
    double fu = 0.0, gv = 0.0;
    if (react) {
      const StatePair r = reaction(p, StatePair{ui, vi});
      fu = r.u;
      gv = r.v;
    }
    const double un = ui + dt * (du_w * su + fu);
    const double vn = vi + dt * (dv_w * sv + gv);
    if (!(std::isfinite(un) && std::isfinite(vn)) && bad < 0) bad = i;
    u1[i] = un;
    v1[i] = vn;
  }
  *first_bad = bad;
}

// Dispatches one step across the pool. Workers own contiguous slabs along
// the first axis; everyone reads the old buffers and writes only its slab.
inline void step_into(const RunPlan& plan, const LatticeGraph* graph,
                      const double* u0, const double* v0, double* u1,
                      double* v1, WorkerPool& pool, std::uint64_t step_number) {
  const GridSpec& grid = plan.grid;
  const std::int64_t rows = grid.shape()[0];
  const int workers = pool.size();
  const std::uint8_t* mask =
      plan.mask.all() ? nullptr : plan.mask.data().data();
  std::vector<std::int64_t> bad(workers, -1);

  pool.run([&](int w) {
    const std::int64_t row_lo = rows * w / workers;
    const std::int64_t row_hi = rows * (w + 1) / workers;
    if (graph) {
      const std::int64_t lo = row_lo * grid.strides()[0];
      const std::int64_t hi = row_hi * grid.strides()[0];
      if (mask)
        step_rows_graph<true>(*graph, mask, plan.params, plan.dt,
                              plan.reaction_enabled, u0, v0, u1, v1, lo, hi,
                              &bad[w]);
      else
        step_rows_graph<false>(*graph, nullptr, plan.params, plan.dt,
                               plan.reaction_enabled, u0, v0, u1, v1, lo, hi,
                               &bad[w]);
    } else {
      if (mask)
        step_rows_stencil<true>(grid, mask, plan.params, plan.dt,
                                plan.reaction_enabled, u0, v0, u1, v1, row_lo,
                                row_hi, &bad[w]);
      else
        step_rows_stencil<false>(grid, nullptr, plan.params, plan.dt,
                                 plan.reaction_enabled, u0, v0, u1, v1, row_lo,
                                 row_hi, &bad[w]);
    }
  });

  for (int w = 0; w < workers; ++w) {
    if (bad[w] >= 0) throw DivergenceError(step_number, bad[w]);
  }
}

}  // namespace detail

// One forward-Euler step of Eq.-(2)-style dynamics; double-buffered, so the
// update is simultaneous and independent of visitation order.
inline FieldState step(const FieldState& state, const RunPlan& plan,
                       int workers = 1) {
  plan.validate();
  if (!state.grid.same_lattice(plan.grid))
    throw ContractError("step: state grid does not match plan grid");
  FieldState next = state;
  WorkerPool pool(workers);
  std::optional<LatticeGraph> graph;
  if (plan.backend == Backend::graph)
    graph.emplace(build_graph(plan.grid, plan.mask));
  detail::step_into(plan, graph ? &*graph : nullptr, state.u.data(),
                    state.v.data(), next.u.data(), next.v.data(), pool,
                    state.step_count + 1);
  next.t = state.t + plan.dt;
  next.step_count = state.step_count + 1;
  return next;
}

using SnapshotSink = std::function<void(const FieldState&)>;

struct RunResult {
  FieldState state;  // final checkpoint
  std::vector<std::string> warnings;
  std::int64_t steps = 0;
};

// Runs the plan from the given state (or from rest). Stimuli fire before the
// step whose index matches their snapped time; snapshots are emitted every
// snapshot_stride steps counted from the start of this run, beginning with
// the initial state. Fully deterministic for a fixed plan: results are
// bitwise independent of the worker count.
inline RunResult run(const RunPlan& plan, std::optional<FieldState> initial,
                     const SnapshotSink& sink, int workers = 1) {
  plan.validate();
  RunResult result;
  FieldState st =
      initial ? std::move(*initial) : make_rest_state(plan.grid, plan.params);
  if (!st.grid.same_lattice(plan.grid))
    throw ConfigError("run: initial state grid does not match plan grid");

  const double t0 = st.t;
  const std::uint64_t step0 = st.step_count;
  if (plan.t_end < t0 - 1e-12)
    throw ConfigError("run: t_end precedes the initial state time");
  const std::int64_t total_steps =
      std::max<std::int64_t>(0, std::llround((plan.t_end - t0) / plan.dt));
  const std::int64_t snap_k = plan.snapshot_stride();

  // Schedule stimuli on the absolute step axis.
  struct Scheduled {
    std::int64_t step;
    const StimulusEvent* ev;
  };
  std::vector<Scheduled> schedule;
  for (const auto& ev : plan.stimuli) {
    const double offset = (ev.time - t0) / plan.dt;
    const std::int64_t rel = std::llround(offset);
    if (std::abs(offset - static_cast<double>(rel)) > 1e-6)
      result.warnings.push_back("stimulus at t=" + std::to_string(ev.time) +
                                " ms snapped to step boundary");
    if (rel < 0) continue;  // already applied before this state was saved
    if (rel >= total_steps) {
      result.warnings.push_back("stimulus at t=" + std::to_string(ev.time) +
                                " ms lies at or beyond t_end; never fires");
      continue;
    }
    schedule.push_back({rel, &ev});
  }
  std::stable_sort(schedule.begin(), schedule.end(),
                   [](const Scheduled& a, const Scheduled& b) {
                     return a.step < b.step;
                   });

  WorkerPool pool(workers);
  std::optional<LatticeGraph> graph;
  if (plan.backend == Backend::graph)
    graph.emplace(build_graph(plan.grid, plan.mask));

  std::vector<double> u_next(st.u.size()), v_next(st.v.size());

  auto emit = [&](const FieldState& s) {
    for (NodeIndex i = 0; i < s.grid.node_count(); ++i) {
      if (!(std::isfinite(s.u[i]) && std::isfinite(s.v[i])))
        throw DivergenceError(s.step_count, i);
    }
    if (sink) sink(s);
  };

  std::size_t next_event = 0;
  for (std::int64_t n = 0; n < total_steps; ++n) {
    if (n % snap_k == 0) emit(st);
    while (next_event < schedule.size() && schedule[next_event].step == n) {
      apply_stimulus(st, *schedule[next_event].ev, plan.mask);
      ++next_event;
    }
    detail::step_into(plan, graph ? &*graph : nullptr, st.u.data(),
                      st.v.data(), u_next.data(), v_next.data(), pool,
                      step0 + static_cast<std::uint64_t>(n) + 1);
    st.u.swap(u_next);
    st.v.swap(v_next);
    st.t += plan.dt;
    ++st.step_count;
  }
  if (total_steps % snap_k == 0) emit(st);

  result.state = std::move(st);
  result.steps = total_steps;
  return result;
}

// Crops a snapshot to an axis-aligned box and resamples u, v onto a finer
// lattice by multilinear interpolation. The new origin is the box corner.
// A node of the result is active iff all interpolation corners are active.
inline std::pair<FieldState, ConductionMask> subdomain_restart(
    const FieldState& snap, const ConductionMask& mask, const BoxRegion& box,
    double new_spacing) {
  const GridSpec& g = snap.grid;
  const int nd = g.ndim();
  if (static_cast<int>(box.lo.size()) != nd ||
      static_cast<int>(box.hi.size()) != nd)
    throw ConfigError("subdomain_restart: box rank mismatch");
  if (!(new_spacing > 0.0))
    throw ConfigError("subdomain_restart: spacing must be > 0");
  const double ratio = g.spacing() / new_spacing;
  const std::int64_t m = std::llround(ratio);
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9)
    throw ConfigError("subdomain_restart: new spacing must divide old spacing");

  std::vector<std::int64_t> new_shape(nd);
  for (int k = 0; k < nd; ++k) {
    const double lo = box.lo[k], hi = box.hi[k];
    const double dmin = g.coord_mm(k, 0);
    const double dmax = g.coord_mm(k, g.shape()[k] - 1);
    if (lo < dmin - 1e-9 || hi > dmax + 1e-9 || lo > hi)
      throw ConfigError("subdomain_restart: box outside snapshot domain");
    new_shape[k] =
        static_cast<std::int64_t>(std::floor((hi - lo) / new_spacing + 1e-9)) +
        1;
  }
  GridSpec ng(new_shape, new_spacing, box.lo);

  FieldState out{ng, std::vector<double>(ng.node_count()),
                 std::vector<double>(ng.node_count()), snap.t, 0};
  std::vector<std::uint8_t> active(ng.node_count(), 1);

  const int corners = 1 << nd;
  std::vector<std::int64_t> c(nd, 0), base(nd);
  std::vector<double> frac(nd);
  for (NodeIndex i = 0; i < ng.node_count(); ++i) {
    for (int k = 0; k < nd; ++k) {
      const double x = ng.coord_mm(k, c[k]);
      double q = (x - g.origin()[k]) / g.spacing();
      // snap to exact lattice lines so aligned crops stay bitwise equal
      const double qr = std::nearbyint(q);
      if (std::abs(q - qr) < 1e-9) q = qr;
      std::int64_t b = static_cast<std::int64_t>(std::floor(q));
      b = std::clamp<std::int64_t>(b, 0, g.shape()[k] - 2);
      base[k] = b;
      frac[k] = q - static_cast<double>(b);
    }
    double su = 0.0, sv = 0.0;
    bool all_corners_active = true;
    for (int corner = 0; corner < corners; ++corner) {
      double wgt = 1.0;
      NodeIndex src = 0;
      for (int k = 0; k < nd; ++k) {
        const bool hi = corner & (1 << k);
        wgt *= hi ? frac[k] : 1.0 - frac[k];
        src += (base[k] + (hi ? 1 : 0)) * g.strides()[k];
      }
      if (wgt != 0.0) {
        if (!mask.active(src)) all_corners_active = false;
        su += wgt * snap.u[src];
        sv += wgt * snap.v[src];
      }
    }
    out.u[i] = su;
    out.v[i] = sv;
    active[i] = all_corners_active ? 1 : 0;
    for (int k = nd - 1; k >= 0; --k) {
      if (++c[k] < ng.shape()[k]) break;
      c[k] = 0;
    }
  }
  return {std::move(out), ConductionMask(ng, std::move(active))};
}

}  // namespace xmed

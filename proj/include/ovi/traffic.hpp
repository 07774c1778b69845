#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ovi/common.hpp"
#include "ovi/io.hpp"

namespace ovi::traffic {

// ---------------------------------------------------------------------------
// Vehicle weight model: a mixture of lognormal components per vehicle class,
// weights in kilograms.
// ---------------------------------------------------------------------------

struct LognormalComponent {
  double w;      // mixture coefficient
  double mu;     // log-space mean
  double sigma;  // log-space std
};

struct VehicleTypeSpec {
  int type_id = 0;
  std::vector<LognormalComponent> components;

  void validate() const {
    require(!components.empty(), "vehicle type needs at least one component");
    double sum = 0.0;
    for (const auto& c : components) {
      require(c.w >= 0.0, "mixture coefficient must be >= 0");
      require(c.sigma > 0.0, "lognormal sigma must be > 0");
      sum += c.w;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "mixture coefficients must sum to 1");
  }

  double mixture_mean() const {
    double m = 0.0;
    for (const auto& c : components) {
      m += c.w * std::exp(c.mu + 0.5 * c.sigma * c.sigma);
    }
    return m;
  }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    const double lx = std::log(x);
    double f = 0.0;
    for (const auto& c : components) {
      const double z = (lx - c.mu) / c.sigma;
      f += c.w * 0.5 * std::erfc(-z / std::numbers::sqrt2);
    }
    return f;
  }
};

// Five vehicle classes fitted to toll-station records. The third coefficient
// of each class is 1 - w1 - w2. Class 3's second log-mean reads a comma
// radix as a decimal point; class 4's second component is implausibly heavy
// and in practice only survives sampling when the weight cap is disabled.
inline std::array<VehicleTypeSpec, 5> default_type_specs() {
  return {
      VehicleTypeSpec{0,
                      {{0.337, 4.970, 0.130},
                       {0.545, 7.144, 0.211},
                       {0.118, 7.883, 0.373}}},
      VehicleTypeSpec{1,
                      {{0.056, 8.010, 0.670},
                       {0.065, 4.061, 0.060},
                       {0.879, 8.111, 0.543}}},
      VehicleTypeSpec{2,
                      {{0.572, 9.067, 0.370},
                       {0.293, 5.815, 0.006},
                       {0.135, 9.371, 0.100}}},
      VehicleTypeSpec{3,
                      {{0.134, 9.390, 0.385},
                       {0.311, 9.345, 0.149},
                       {0.555, 4.936, 0.184}}},
      VehicleTypeSpec{4,
                      {{0.558, 9.762, 0.256},
                       {0.352, 16.050, 0.317},
                       {0.090, 10.690, 0.258}}},
  };
}

// Draws from the mixture, re-drawing while the sample exceeds the cap.
// Pass an infinite cap to disable rejection.
inline double sample_vehicle_weight(const VehicleTypeSpec& spec,
                                    double weight_cap_kg, Rng& rng,
                                    int retry_limit = 1000) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int attempt = 0; attempt < retry_limit; ++attempt) {
    const double u = uni(rng);
    double acc = 0.0;
    const LognormalComponent* chosen = &spec.components.back();
    for (const auto& c : spec.components) {
      acc += c.w;
      if (u < acc) {
        chosen = &c;
        break;
      }
    }
    std::normal_distribution<double> normal(chosen->mu, chosen->sigma);
    const double w = std::exp(normal(rng));
    if (w <= weight_cap_kg) return w;
  }
  throw ConfigError("vehicle weight sampling exhausted retry limit; "
                    "weight cap rejects nearly all draws");
}

// ---------------------------------------------------------------------------
// Cellular automaton
// ---------------------------------------------------------------------------

struct Vehicle {
  std::int64_t id = 0;
  int type_id = 0;
  double weight_kg = 0.0;
  int velocity = 0;  // cells per tick
  int cell = 0;
};

// One automaton state. Vehicles are kept sorted by cell; at most one vehicle
// per cell.
struct RoadState {
  int n_cells = 0;
  double cell_length_m = 0.0;
  std::vector<Vehicle> vehicles;

  double bridge_length_m() const { return n_cells * cell_length_m; }

  void validate() const {
    require(n_cells > 0 && cell_length_m > 0.0, "invalid road geometry");
    int prev = -1;
    for (const auto& v : vehicles) {
      require(v.cell > prev, "vehicles must be sorted with one per cell");
      require(v.cell >= 0 && v.cell < n_cells, "vehicle cell out of range");
      require(v.velocity >= 0, "negative velocity");
      require(v.weight_kg > 0.0, "vehicle weight must be positive");
      prev = v.cell;
    }
  }
};

struct CaParams {
  int n_cells = 30;
  double cell_length_m = 2.0;
  int v_max = 4;                  // cells per tick
  double p_slow = 0.3;            // random slowdown probability
  double p_inject = 0.5;          // entry-cell injection probability per tick
  std::array<double, 5> type_probs{0.2, 0.2, 0.2, 0.2, 0.2};
  double weight_cap_kg = 60000.0;
  std::uint64_t seed = 0;
  std::array<VehicleTypeSpec, 5> type_specs = default_type_specs();
  int retry_limit = 1000;

  void validate() const {
    require(n_cells > 0 && cell_length_m > 0.0, "invalid cell grid");
    require(v_max >= 1, "v_max must be >= 1");
    require(p_slow >= 0.0 && p_slow <= 1.0, "p_slow outside [0,1]");
    require(p_inject >= 0.0 && p_inject <= 1.0, "p_inject outside [0,1]");
    require(weight_cap_kg > 0.0, "weight cap must be positive");
    double sum = 0.0;
    for (double p : type_probs) {
      require(p >= 0.0, "type probability must be >= 0");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "type_probs must sum to 1");
    for (const auto& s : type_specs) s.validate();
  }
};

struct TrafficTrajectory {
  double tick_duration_s = 1.0;
  std::vector<RoadState> states;

  int n_cells() const { return states.empty() ? 0 : states.front().n_cells; }
  double cell_length_m() const {
    return states.empty() ? 0.0 : states.front().cell_length_m;
  }
  double bridge_length_m() const { return n_cells() * cell_length_m(); }

  void validate() const {
    require(tick_duration_s > 0.0, "tick duration must be positive");
    for (const auto& s : states) {
      s.validate();
      require(s.n_cells == n_cells() && s.cell_length_m == cell_length_m(),
              "all states must share the cell grid");
    }
  }
};

// One synchronous automaton update: accelerate, cap at the gap, random
// slowdown, advance. Vehicles passing the last cell exit; a new vehicle may
// enter at cell 0 afterwards. Gaps are measured in the pre-step state, so no
// two vehicles can land in the same cell.
inline RoadState nasch_step(const RoadState& state, const CaParams& params,
                            Rng& rng, std::int64_t& next_vehicle_id) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  RoadState next{state.n_cells, state.cell_length_m, {}};
  next.vehicles.reserve(state.vehicles.size() + 1);

  const std::size_t n = state.vehicles.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vehicle v = state.vehicles[i];
    const int gap = (i + 1 < n)
                        ? state.vehicles[i + 1].cell - v.cell - 1
                        : state.n_cells;  // open downstream boundary
    v.velocity = std::min(v.velocity + 1, params.v_max);
    v.velocity = std::min(v.velocity, gap);
    if (uni(rng) < params.p_slow) v.velocity = std::max(v.velocity - 1, 0);
    v.cell += v.velocity;
    if (v.cell < state.n_cells) next.vehicles.push_back(v);
  }

  const bool entry_free =
      next.vehicles.empty() || next.vehicles.front().cell > 0;
  if (entry_free && uni(rng) < params.p_inject) {
    const double u = uni(rng);
    double acc = 0.0;
    int type = static_cast<int>(params.type_probs.size()) - 1;
    for (std::size_t t = 0; t < params.type_probs.size(); ++t) {
      acc += params.type_probs[t];
      if (u < acc) {
        type = static_cast<int>(t);
        break;
      }
    }
    const double w = sample_vehicle_weight(
        params.type_specs[static_cast<std::size_t>(type)],
        params.weight_cap_kg, rng, params.retry_limit);
    next.vehicles.insert(next.vehicles.begin(),
                         Vehicle{next_vehicle_id++, type, w, 0, 0});
  }
  return next;
}

// Runs the automaton from an empty road. states[0] is the initial empty
// state; states[t] is the road after t updates.
inline TrafficTrajectory simulate(const CaParams& params, std::size_t n_ticks) {
  params.validate();
  require(n_ticks >= 1, "n_ticks must be >= 1");
  Rng rng(params.seed);
  std::int64_t next_id = 0;
  TrafficTrajectory traj;
  traj.tick_duration_s = 1.0;
  traj.states.reserve(n_ticks);
  traj.states.push_back(RoadState{params.n_cells, params.cell_length_m, {}});
  for (std::size_t t = 1; t < n_ticks; ++t) {
    traj.states.push_back(nasch_step(traj.states.back(), params, rng, next_id));
  }
  return traj;
}

// Mean vehicle count per section per tick, for sections of the given length
// tiling the bridge (the last section may be shorter).
inline double avg_vehicles_per_section(const TrafficTrajectory& traj,
                                       double section_length_m) {
  require(!traj.states.empty(), "empty trajectory");
  require(section_length_m > 0.0, "section length must be positive");
  const double cells_per_section = section_length_m / traj.cell_length_m();
  const double rounded = std::round(cells_per_section);
  require(std::abs(cells_per_section - rounded) <= 1e-9 && rounded >= 1.0,
          "section length must be a positive multiple of the cell length");
  const int k = static_cast<int>(rounded);
  const int n_sections = (traj.n_cells() + k - 1) / k;

  double total = 0.0;
  for (const auto& s : traj.states) {
    total += static_cast<double>(s.vehicles.size());
  }
  return total / (static_cast<double>(traj.states.size()) * n_sections);
}

// ---------------------------------------------------------------------------
// Continuous-time view: concentrated loads at a sampling instant
// ---------------------------------------------------------------------------

struct PointLoad {
  double pos_m = 0.0;
  double weight_kg = 0.0;
  std::int64_t vehicle_id = 0;
  int type_id = 0;
};

// Loads on the span at time t. Between ticks, positions interpolate linearly
// from a vehicle's cell center toward its next-state cell center; vehicles
// absent from the next state interpolate toward the first off-span cell and
// drop out once past the span. Vehicles entering at the next tick do not
// contribute before it.
inline std::vector<PointLoad> loads_at(const TrafficTrajectory& traj,
                                       double t_seconds) {
  require(t_seconds >= 0.0, "time must be >= 0");
  const double ticks = t_seconds / traj.tick_duration_s;
  std::size_t i = static_cast<std::size_t>(ticks);
  double frac = ticks - static_cast<double>(i);
  if (frac < 1e-9) frac = 0.0;
  if (frac > 1.0 - 1e-9) {
    ++i;
    frac = 0.0;
  }
  require(i + (frac > 0.0 ? 1 : 0) < traj.states.size(),
          "time beyond trajectory end");

  const RoadState& cur = traj.states[i];
  const double cell_len = cur.cell_length_m;
  const double span = cur.n_cells * cell_len;
  std::vector<PointLoad> loads;
  loads.reserve(cur.vehicles.size());

  if (frac == 0.0) {
    for (const auto& v : cur.vehicles) {
      loads.push_back({(v.cell + 0.5) * cell_len, v.weight_kg, v.id, v.type_id});
    }
    return loads;
  }

  const RoadState& nxt = traj.states[i + 1];
  for (const auto& v : cur.vehicles) {
    double target_cell = static_cast<double>(cur.n_cells);
    for (const auto& w : nxt.vehicles) {
      if (w.id == v.id) {
        target_cell = static_cast<double>(w.cell);
        break;
      }
    }
    const double cell_pos = v.cell + frac * (target_cell - v.cell);
    const double pos = (cell_pos + 0.5) * cell_len;
    if (pos < span) {
      loads.push_back({pos, v.weight_kg, v.id, v.type_id});
    }
  }
  return loads;
}

// ---------------------------------------------------------------------------
// Export / import
// ---------------------------------------------------------------------------

inline std::string trajectory_to_csv(const TrafficTrajectory& traj,
                                     const std::string& config_digest = {}) {
  std::string out;
  out.reserve(traj.states.size() * 48);
  if (!config_digest.empty()) {
    out += "# config_digest=" + config_digest + "\n";
  }
  out += "tick,cell_index,vehicle_id,type_id,weight_kg,velocity\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    for (const auto& v : traj.states[t].vehicles) {
      out += std::to_string(t);
      out += ',';
      out += std::to_string(v.cell);
      out += ',';
      out += std::to_string(v.id);
      out += ',';
      out += std::to_string(v.type_id);
      out += ',';
      out += format_double(v.weight_kg);
      out += ',';
      out += std::to_string(v.velocity);
      out += '\n';
    }
  }
  return out;
}

inline TrafficTrajectory trajectory_from_csv(const std::string& csv,
                                             std::size_t n_ticks, int n_cells,
                                             double cell_length_m,
                                             double tick_duration_s) {
  TrafficTrajectory traj;
  traj.tick_duration_s = tick_duration_s;
  traj.states.assign(n_ticks, RoadState{n_cells, cell_length_m, {}});
  for_each_csv_row(csv, [&](const std::vector<std::string_view>& cols) {
    if (cols.size() != 6) throw IoError("trajectory row needs 6 columns");
    const auto tick = static_cast<std::size_t>(parse_int(cols[0]));
    if (tick >= n_ticks) throw IoError("trajectory row tick out of range");
    Vehicle v;
    v.cell = static_cast<int>(parse_int(cols[1]));
    v.id = parse_int(cols[2]);
    v.type_id = static_cast<int>(parse_int(cols[3]));
    v.weight_kg = parse_double(cols[4]);
    v.velocity = static_cast<int>(parse_int(cols[5]));
    traj.states[tick].vehicles.push_back(v);
  });
  for (auto& s : traj.states) {
    std::sort(s.vehicles.begin(), s.vehicles.end(),
              [](const Vehicle& a, const Vehicle& b) { return a.cell < b.cell; });
  }
  traj.validate();
  return traj;
}

}  // namespace ovi::traffic

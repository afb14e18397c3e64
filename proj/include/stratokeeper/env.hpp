#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratokeeper/atmosphere.hpp"
#include "stratokeeper/balloon.hpp"
#include "stratokeeper/util.hpp"
#include "stratokeeper/windfield.hpp"

namespace stk {

enum class RewardKind { Step, Tanh, Exp };

inline const char* reward_name(RewardKind k) {
  switch (k) {
    case RewardKind::Step: return "step";
    case RewardKind::Tanh: return "tanh";
    case RewardKind::Exp: return "exp";
  }
  return "?";
}

struct EnvConfig {
  double region_radius_km = 50.0;
  double decision_period_s = 180.0;
  int horizon = 960;  // decision steps (48 h at 180 s)
  double obs_pressure_lo = 5000.0;
  double obs_pressure_hi = 14000.0;
  int n_wind_levels = 25;
  RewardKind reward_kind = RewardKind::Step;
  double cliff_c = 0.4;
  double decay_rho_km = 50.0;
  double decay_tau_km = 100.0;
  double exp_rate_per_km = 0.01;
  double action_altitude_lo = 14000.0;
  double action_altitude_hi = 21000.0;
  double time_factor_lo = 1.0;
  double time_factor_hi = 5.0;
  double physics_dt_s = 10.0;
  double floor_altitude_m = 10000.0;
  double initial_altitude_m = 14000.0;
  double lapse_scale_lo = 0.95;
  double lapse_scale_hi = 1.05;
  double launch_x_max_km = 400.0;
  double launch_y_max_km = 400.0;
  double launch_t_max_h = 24.0;
  BalloonParams balloon;
  double initial_sand_kg = 0.5;
  double initial_mols = 0.0;      // 0 = derive from free_lift_rate at sea level
  double free_lift_rate = 4.0;    // m/s
  NoiseSpec noise;                // forecast-error noise template

  void validate() const {
    if (region_radius_km <= 0.0) throw std::invalid_argument("region_radius must be > 0");
    if (obs_pressure_lo >= obs_pressure_hi) {
      throw std::invalid_argument("obs_pressure_lo must be < obs_pressure_hi");
    }
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (n_wind_levels < 2) throw std::invalid_argument("n_wind_levels must be >= 2");
    if (decision_period_s <= 0.0 || physics_dt_s <= 0.0) {
      throw std::invalid_argument("decision period and physics dt must be > 0");
    }
  }
};

// Fixed affine feature scales. These are part of the weights-file contract:
// a trained network only transfers if observations are standardized with
// exactly these constants.
struct ObservationScales {
  static constexpr double kWindSpeed = 30.0;   // m/s
  static constexpr double kAltitude = 21000.0; // m
  static constexpr double kAscentRate = 5.0;   // m/s
  static constexpr double kDragArea = 30.0;    // m^2
  static constexpr double kVolume = 60.0;      // m^3
  static constexpr double kMols = 200.0;       // mol
  static constexpr double kTotalMass = 5.0;    // kg
  static constexpr double kSandMass = 1.0;     // kg
  static constexpr double kDistance = 400.0;   // km
};

constexpr int kObservationSize = 77;
using Observation = std::array<double, kObservationSize>;

// Observation layout: 25 wind levels x (speed, bearing error), then ambient
// block, then short histories.
namespace obs_layout {
constexpr int wind_speed(int level) { return 2 * level; }
constexpr int wind_bearing(int level) { return 2 * level + 1; }
constexpr int kAltitude = 50;
constexpr int kAscentRate = 51;
constexpr int kDragArea = 52;
constexpr int kVolume = 53;
constexpr int kHeliumMols = 54;
constexpr int kTotalMass = 55;
constexpr int kSandMass = 56;
constexpr int kWindSpeedHere = 57;
constexpr int kSinBearingHere = 58;
constexpr int kCosBearingHere = 59;
constexpr int kDistance = 60;
constexpr int kSinHeading = 61;
constexpr int kCosHeading = 62;
constexpr int kSinTimeOfDay = 63;
constexpr int kCosTimeOfDay = 64;
constexpr int kSandFraction = 65;
constexpr int kHeliumFraction = 66;
constexpr int kPrevReward = 67;
constexpr int past_altitude(int k) { return 68 + k; }     // k in [0, 3)
constexpr int past_ascent_rate(int k) { return 71 + k; }
constexpr int past_float(int k) { return 74 + k; }
}  // namespace obs_layout

struct Action {
  double u0 = 0.0;  // desired altitude, normalized
  double u1 = 0.0;  // time factor, normalized
  double u2 = 0.0;  // float flag value

  Action clamped() const {
    return Action{std::clamp(u0, -1.0, 1.0), std::clamp(u1, -1.0, 1.0),
                  std::clamp(u2, -1.0, 1.0)};
  }
};

struct DecodedAction {
  double desired_altitude_m;  // a0
  double time_factor;         // a1
  double float_value;         // a2
};

inline DecodedAction decode_action(const Action& raw, const EnvConfig& cfg) {
  const Action u = raw.clamped();
  return DecodedAction{
      cfg.action_altitude_lo +
          (u.u0 + 1.0) / 2.0 * (cfg.action_altitude_hi - cfg.action_altitude_lo),
      cfg.time_factor_lo +
          (u.u1 + 1.0) / 2.0 * (cfg.time_factor_hi - cfg.time_factor_lo),
      u.u2};
}

// h_dot_d = (a0 - h) / (a1 T) while the float value stays in [-1, 0];
// floating freezes the desired rate at zero.
inline double desired_ascent_rate(const DecodedAction& a, double altitude_m,
                                  double decision_period_s) {
  if (decision_period_s <= 0.0) throw std::domain_error("decision period must be > 0");
  if (a.float_value > 0.0) return 0.0;
  return (a.desired_altitude_m - altitude_m) / (a.time_factor * decision_period_s);
}

inline double reward(double distance_km, RewardKind kind, const EnvConfig& cfg) {
  const double tail = cfg.cliff_c *
      std::exp2(-(distance_km - cfg.decay_rho_km) / cfg.decay_tau_km);
  switch (kind) {
    case RewardKind::Step:
      return distance_km < cfg.region_radius_km ? 1.0 : tail;
    case RewardKind::Tanh:
      return distance_km < cfg.region_radius_km
                 ? -(std::tanh(distance_km / 20.0 - 3.0) - 1.0) / 2.0
                 : tail;
    case RewardKind::Exp:
      return std::exp2(-cfg.exp_rate_per_km * distance_km);
  }
  return 0.0;
}

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  std::string reason;       // horizon | burst | floor | resources
  double distance_km = 0.0;
  double helium_mols = 0.0;
  double sand_mass = 0.0;
};

struct StepRecord {
  int step;
  double t_s, x_km, y_km, h_m, d_km, reward;
  Action action;
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  double episode_return = 0.0;
  int horizon = 0;
  std::string termination_reason;
  int pressure_clamp_events = 0;
  int vent_saturation_events = 0;
};

struct Launch {
  double x_km = 0.0;
  double y_km = 0.0;
  double dt_hours = 0.0;
};

// Single-owner mutable environment; distinct instances may run in parallel.
class Env {
 public:
  Env(EnvConfig cfg, const WindGrid& grid, const Launch& launch, std::uint64_t seed)
      : cfg_(std::move(cfg)), grid_(&grid) {
    cfg_.validate();
    Rng rng(seed);
    atmosphere_ = AtmosphereModel::standard(
        rng.uniform(cfg_.lapse_scale_lo, cfg_.lapse_scale_hi));
    noise_ = cfg_.noise;
    noise_.seed = cfg_.noise.seed ^ seed;

    state_.x_km = launch.x_km;
    state_.y_km = launch.y_km;
    state_.altitude = cfg_.initial_altitude_m;
    state_.ascent_rate = 0.0;
    state_.time_s = launch.dt_hours * 3600.0;
    state_.sand_mass = cfg_.initial_sand_kg;
    if (cfg_.initial_mols > 0.0) {
      state_.helium_mols = cfg_.initial_mols;
    } else {
      const AirProperties sea = AtmosphereModel::standard().properties_at(0.0);
      state_.helium_mols = mols_for_free_lift(
          cfg_.free_lift_rate, sea, cfg_.balloon.payload_mass + cfg_.initial_sand_kg,
          cfg_.balloon);
    }
    initial_sand_ = state_.sand_mass;
    initial_mols_ = state_.helium_mols;
    hist_altitude_.fill(state_.altitude);
    hist_ascent_.fill(0.0);
    hist_float_.fill(0.0);
    observation_ = observe();
  }

  const EnvConfig& config() const { return cfg_; }
  const BalloonState& state() const { return state_; }
  const Observation& observation() const { return observation_; }
  bool terminated() const { return terminated_; }
  const std::string& termination_reason() const { return reason_; }
  int step_index() const { return step_index_; }
  int pressure_clamp_events() const { return pressure_clamp_events_; }
  int vent_saturation_events() const { return vent_saturation_events_; }

  StepOutcome step(const Action& raw_action) {
    if (terminated_) {
      throw std::logic_error("env_step called on a terminated environment");
    }
    const Action action = raw_action.clamped();
    const DecodedAction decoded = decode_action(action, cfg_);
    const double h_dot_d =
        desired_ascent_rate(decoded, state_.altitude, cfg_.decision_period_s);

    const double pre_altitude = state_.altitude;
    const double pre_ascent = state_.ascent_rate;

    if (decoded.float_value <= 0.0) {
      apply_resource_action(h_dot_d);
    }

    const int n_sub = std::max(
        1, int(std::lround(cfg_.decision_period_s / cfg_.physics_dt_s)));
    const double dt = cfg_.decision_period_s / n_sub;
    const auto wind_fn = [this](double x, double y, double alt, double t_s) {
      return wind_at(x, y, alt, t_s);
    };
    for (int i = 0; i < n_sub; ++i) {
      state_ = integrate_step(state_, wind_fn, atmosphere_, cfg_.balloon, dt);
    }

    ++step_index_;
    push_history(pre_altitude, pre_ascent, decoded.float_value);

    const double d = std::hypot(state_.x_km, state_.y_km);
    const double r = reward(d, cfg_.reward_kind, cfg_);
    prev_reward_ = r;

    check_termination();
    if (!terminated_) observation_ = observe();

    StepOutcome out;
    out.observation = observation_;
    out.reward = r;
    out.terminated = terminated_;
    out.reason = reason_;
    out.distance_km = d;
    out.helium_mols = state_.helium_mols;
    out.sand_mass = state_.sand_mass;
    return out;
  }

 private:
  void apply_resource_action(double h_dot_d) {
    const AirProperties air = atmosphere_.properties_at(state_.altitude);
    if (h_dot_d > state_.ascent_rate) {
      const double retain = ballast_to_retain(h_dot_d, state_, air, cfg_.balloon);
      double drop = std::clamp(state_.sand_mass - retain, 0.0,
                               cfg_.balloon.max_ballast_rate);
      drop = std::min(drop, state_.sand_mass);
      state_.sand_mass -= drop;
    } else if (h_dot_d < state_.ascent_rate) {
      const VentSolution sol =
          vent_mols_to_retain(h_dot_d, state_, air, cfg_.balloon);
      double vented;
      if (!sol.bracketed) {
        ++vent_saturation_events_;
        vented = cfg_.balloon.max_vent_rate;
      } else {
        vented = std::clamp(state_.helium_mols - sol.mols_to_retain, 0.0,
                            cfg_.balloon.max_vent_rate);
      }
      vented = std::min(vented, state_.helium_mols);
      state_.helium_mols -= vented;
    }
  }

  WindVector wind_at(double x_km, double y_km, double altitude_m, double t_s) {
    double p = atmosphere_.pressure_at(altitude_m);
    const GridAxes& ax = grid_->axes();
    if (p < ax.pressure_min()) {
      p = ax.pressure_min();
      ++pressure_clamp_events_;
    } else if (p > ax.pressure_max()) {
      p = ax.pressure_max();
      ++pressure_clamp_events_;
    }
    double lon, lat;
    grid_->tangent().to_lonlat(x_km, y_km, lon, lat);
    return perturbed_sample(*grid_, noise_, lon, lat, p, t_s / 3600.0);
  }

  void push_history(double altitude, double ascent, double float_value) {
    for (int k = 2; k > 0; --k) {
      hist_altitude_[k] = hist_altitude_[k - 1];
      hist_ascent_[k] = hist_ascent_[k - 1];
      hist_float_[k] = hist_float_[k - 1];
    }
    hist_altitude_[0] = altitude;
    hist_ascent_[0] = ascent;
    hist_float_[0] = float_value;
  }

  void check_termination() {
    const AirProperties air = atmosphere_.properties_at(state_.altitude);
    const double volume =
        envelope_volume(state_.helium_mols, air.temperature, air.pressure);
    if (step_index_ >= cfg_.horizon) {
      terminated_ = true;
      reason_ = "horizon";
    } else if (volume >= cfg_.balloon.burst_volume) {
      terminated_ = true;
      reason_ = "burst";
    } else if (state_.altitude < cfg_.floor_altitude_m) {
      terminated_ = true;
      reason_ = "floor";
    } else if (state_.helium_mols <= 0.0 && state_.sand_mass <= 0.0 &&
               state_.ascent_rate < -2.0) {
      terminated_ = true;
      reason_ = "resources";
    }
  }

  Observation observe() {
    using namespace obs_layout;
    using S = ObservationScales;
    Observation obs{};

    const double d = std::hypot(state_.x_km, state_.y_km);
    // Unit vector toward the target; (0, 1) by convention at the center.
    double dir_x = 0.0, dir_y = 1.0;
    if (d > 0.0) {
      dir_x = -state_.x_km / d;
      dir_y = -state_.y_km / d;
    }

    for (int i = 0; i < cfg_.n_wind_levels; ++i) {
      const double p = cfg_.obs_pressure_lo +
                       (cfg_.obs_pressure_hi - cfg_.obs_pressure_lo) * i /
                           (cfg_.n_wind_levels - 1);
      const WindVector w = wind_at_pressure(p);
      obs[wind_speed(i)] = std::hypot(w.u, w.v) / S::kWindSpeed;
      obs[wind_bearing(i)] = bearing_error(w, dir_x, dir_y) / kPi;
    }

    const AirProperties air = atmosphere_.properties_at(state_.altitude);
    const EnvelopeGeometry geom = envelope_geometry(state_.helium_mols, air);
    const WindVector here = wind_at(state_.x_km, state_.y_km, state_.altitude,
                                    state_.time_s);
    const double here_bearing = bearing_error(here, dir_x, dir_y);

    obs[kAltitude] = state_.altitude / S::kAltitude;
    obs[kAscentRate] = state_.ascent_rate / S::kAscentRate;
    obs[kDragArea] = geom.drag_area / S::kDragArea;
    obs[kVolume] = geom.volume / S::kVolume;
    obs[kHeliumMols] = state_.helium_mols / S::kMols;
    obs[kTotalMass] = state_.total_mass(cfg_.balloon) / S::kTotalMass;
    obs[kSandMass] = state_.sand_mass / S::kSandMass;
    obs[kWindSpeedHere] = std::hypot(here.u, here.v) / S::kWindSpeed;
    obs[kSinBearingHere] = std::sin(here_bearing);
    obs[kCosBearingHere] = std::cos(here_bearing);
    obs[kDistance] = d / S::kDistance;
    obs[kSinHeading] = dir_x;
    obs[kCosHeading] = dir_y;
    const double tod = 2.0 * kPi * std::fmod(state_.time_s / 3600.0, 24.0) / 24.0;
    obs[kSinTimeOfDay] = std::sin(tod);
    obs[kCosTimeOfDay] = std::cos(tod);
    obs[kSandFraction] = initial_sand_ > 0.0 ? state_.sand_mass / initial_sand_ : 0.0;
    obs[kHeliumFraction] = initial_mols_ > 0.0 ? state_.helium_mols / initial_mols_ : 0.0;
    obs[kPrevReward] = prev_reward_;
    for (int k = 0; k < 3; ++k) {
      obs[past_altitude(k)] = hist_altitude_[k] / S::kAltitude;
      obs[past_ascent_rate(k)] = hist_ascent_[k] / S::kAscentRate;
      obs[past_float(k)] = hist_float_[k];
    }
    return obs;
  }

  WindVector wind_at_pressure(double p) {
    const GridAxes& ax = grid_->axes();
    if (p < ax.pressure_min()) {
      p = ax.pressure_min();
      ++pressure_clamp_events_;
    } else if (p > ax.pressure_max()) {
      p = ax.pressure_max();
      ++pressure_clamp_events_;
    }
    double lon, lat;
    grid_->tangent().to_lonlat(state_.x_km, state_.y_km, lon, lat);
    return perturbed_sample(*grid_, noise_, lon, lat, p, state_.time_s / 3600.0);
  }

  static double bearing_error(const WindVector& w, double dir_x, double dir_y) {
    if (w.u == 0.0 && w.v == 0.0) return 0.0;
    return signed_angle(w.u, w.v, dir_x, dir_y);
  }

  EnvConfig cfg_;
  const WindGrid* grid_;
  AtmosphereModel atmosphere_ = AtmosphereModel::standard();
  NoiseSpec noise_;
  BalloonState state_;
  Observation observation_{};
  std::array<double, 3> hist_altitude_{};
  std::array<double, 3> hist_ascent_{};
  std::array<double, 3> hist_float_{};
  double prev_reward_ = 0.0;
  double initial_sand_ = 0.0;
  double initial_mols_ = 0.0;
  int step_index_ = 0;
  int pressure_clamp_events_ = 0;
  int vent_saturation_events_ = 0;
  bool terminated_ = false;
  std::string reason_;
};

using Controller = std::function<Action(const Observation&)>;

// Full-episode rollout under a controller. Deterministic given all inputs
// and the seed.
inline EpisodeTrace rollout(const EnvConfig& cfg, const Launch& launch,
                            const WindGrid& grid, const Controller& controller,
                            std::uint64_t seed) {
  if (std::abs(launch.x_km) > cfg.launch_x_max_km) {
    throw std::invalid_argument("launch x " + format_full(launch.x_km) +
                                " km violates |x| <= " +
                                format_full(cfg.launch_x_max_km));
  }
  if (std::abs(launch.y_km) > cfg.launch_y_max_km) {
    throw std::invalid_argument("launch y " + format_full(launch.y_km) +
                                " km violates |y| <= " +
                                format_full(cfg.launch_y_max_km));
  }
  if (launch.dt_hours < 0.0 || launch.dt_hours > cfg.launch_t_max_h) {
    throw std::invalid_argument("launch time offset " +
                                format_full(launch.dt_hours) +
                                " h violates 0 <= dt <= " +
                                format_full(cfg.launch_t_max_h));
  }

  Env env(cfg, grid, launch, seed);
  EpisodeTrace trace;
  trace.horizon = cfg.horizon;
  trace.steps.reserve(cfg.horizon);
  while (!env.terminated()) {
    const Action action = controller(env.observation());
    const int step = env.step_index();
    const StepOutcome out = env.step(action);
    const BalloonState& s = env.state();
    trace.steps.push_back(StepRecord{step, s.time_s, s.x_km, s.y_km, s.altitude,
                                     out.distance_km, out.reward, action.clamped()});
    trace.episode_return += out.reward;
  }
  trace.termination_reason = env.termination_reason();
  trace.pressure_clamp_events = env.pressure_clamp_events();
  trace.vent_saturation_events = env.vent_saturation_events();
  return trace;
}

struct RegionMetrics {
  double tw_fraction = 0.0;
  double reach_ratio = 0.0;
};

// Fraction of decision steps inside the region (normalized by the episode
// horizon) and the ratio of episodes that ever enter it.
inline RegionMetrics metrics(const std::vector<EpisodeTrace>& traces,
                             double region_radius_km) {
  if (traces.empty()) throw std::invalid_argument("metrics needs at least one trace");
  double inside_steps = 0.0;
  double denom = 0.0;
  double reached = 0.0;
  for (const EpisodeTrace& t : traces) {
    denom += t.horizon;
    bool any = false;
    for (const StepRecord& s : t.steps) {
      if (s.d_km < region_radius_km) {
        inside_steps += 1.0;
        any = true;
      }
    }
    if (any) reached += 1.0;
  }
  return RegionMetrics{inside_steps / denom, reached / double(traces.size())};
}

inline void write_episode_csv(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "step,t_s,x_km,y_km,h_m,d_km,reward,u0,u1,u2\n";
  for (const StepRecord& s : trace.steps) {
    out << s.step << ',' << format_full(s.t_s) << ',' << format_full(s.x_km) << ','
        << format_full(s.y_km) << ',' << format_full(s.h_m) << ','
        << format_full(s.d_km) << ',' << format_full(s.reward) << ','
        << format_full(s.action.u0) << ',' << format_full(s.action.u1) << ','
        << format_full(s.action.u2) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace stk

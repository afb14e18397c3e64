#pragma once

#include <cmath>
#include <stdexcept>

#include "stratokeeper/atmosphere.hpp"
#include "stratokeeper/windfield.hpp"

namespace stk {

constexpr double kMolarMassHelium = 0.0040026;  // kg/mol

struct BalloonParams {
  double payload_mass = 1.5;       // kg, payload + envelope inert mass
  double drag_coefficient = 0.47;  // sphere
  double molar_mass_helium = kMolarMassHelium;
  double molar_mass_air = kMolarMassAir;
  double burst_volume = 58.0;      // m^3, ~22 km ceiling with default fill
  double max_vent_rate = 5.0;      // mol per decision step
  double max_ballast_rate = 0.05;  // kg per decision step
};

struct BalloonState {
  double x_km = 0.0;         // target-relative east
  double y_km = 0.0;         // target-relative north
  double altitude = 14000.0;  // m
  double ascent_rate = 0.0;  // m/s
  double vx = 0.0;           // m/s
  double vy = 0.0;           // m/s
  double helium_mols = 0.0;
  double sand_mass = 0.0;    // kg
  double time_s = 0.0;

  double total_mass(const BalloonParams& p) const {
    return p.payload_mass + helium_mols * p.molar_mass_helium + sand_mass;
  }
};

struct EnvelopeGeometry {
  double volume;     // m^3
  double drag_area;  // m^2
};

// Ideal-gas envelope volume V = nRT/P.
inline double envelope_volume(double mols, double temperature, double pressure) {
  if (temperature <= 0.0) throw std::domain_error("temperature must be positive");
  if (pressure <= 0.0) throw std::domain_error("pressure must be positive");
  if (mols < 0.0) throw std::domain_error("helium mols must be >= 0");
  return mols * kGasConstant * temperature / pressure;
}

// Cross-section of a sphere of volume V: A = pi (3V / 4pi)^(2/3).
inline double drag_area(double volume) {
  if (volume < 0.0) throw std::domain_error("volume must be >= 0");
  return kPi * std::pow(3.0 * volume / (4.0 * kPi), 2.0 / 3.0);
}

inline EnvelopeGeometry envelope_geometry(double mols, const AirProperties& air) {
  const double v = envelope_volume(mols, air.temperature, air.pressure);
  return EnvelopeGeometry{v, drag_area(v)};
}

struct Acceleration {
  double ax, ay, az;  // m/s^2
};

// Point-mass force balance: buoyancy up, weight down, drag opposing the
// motion relative to the wind. Vertical wind is taken as zero.
inline Acceleration acceleration(const BalloonState& state, const WindVector& wind,
                                 const AirProperties& air, const BalloonParams& params) {
  const EnvelopeGeometry geom = envelope_geometry(state.helium_mols, air);
  const double mass = state.total_mass(params);
  const double rel_x = state.vx - wind.u;
  const double rel_y = state.vy - wind.v;
  const double rel_z = state.ascent_rate;
  const double rel_mag = std::sqrt(rel_x * rel_x + rel_y * rel_y + rel_z * rel_z);
  const double drag_scale =
      -0.5 * air.density * params.drag_coefficient * geom.drag_area * rel_mag;
  const double buoyancy = air.density * geom.volume * kGravity;
  return Acceleration{
      drag_scale * rel_x / mass,
      drag_scale * rel_y / mass,
      (buoyancy + drag_scale * rel_z - mass * kGravity) / mass,
  };
}

// One classical RK4 step over (x, y, h, vx, vy, h_dot). Resources are not
// touched by integration. `wind_at(x_km, y_km, altitude_m, time_s)` supplies
// the local wind.
template <typename WindFn>
BalloonState integrate_step(const BalloonState& state, WindFn&& wind_at,
                            const AtmosphereModel& atmosphere,
                            const BalloonParams& params, double dt) {
  if (dt <= 0.0) throw std::domain_error("dt must be positive");

  struct Derivative {
    double dx_km, dy_km, dh, dvx, dvy, dhdot;
  };
  const auto eval = [&](const BalloonState& s, double t_offset) -> Derivative {
    BalloonState probe = s;
    probe.time_s = state.time_s + t_offset;
    const AirProperties air = atmosphere.properties_at(probe.altitude);
    const WindVector wind =
        wind_at(probe.x_km, probe.y_km, probe.altitude, probe.time_s);
    const Acceleration acc = acceleration(probe, wind, air, params);
    return Derivative{probe.vx / 1000.0, probe.vy / 1000.0, probe.ascent_rate,
                      acc.ax, acc.ay, acc.az};
  };
  const auto advance = [&](const Derivative& d, double h) -> BalloonState {
    BalloonState s = state;
    s.x_km += d.dx_km * h;
    s.y_km += d.dy_km * h;
    s.altitude += d.dh * h;
    s.vx += d.dvx * h;
    s.vy += d.dvy * h;
    s.ascent_rate += d.dhdot * h;
    return s;
  };

  const Derivative k1 = eval(state, 0.0);
  const Derivative k2 = eval(advance(k1, dt / 2.0), dt / 2.0);
  const Derivative k3 = eval(advance(k2, dt / 2.0), dt / 2.0);
  const Derivative k4 = eval(advance(k3, dt), dt);

  BalloonState next = state;
  next.x_km += dt / 6.0 * (k1.dx_km + 2.0 * (k2.dx_km + k3.dx_km) + k4.dx_km);
  next.y_km += dt / 6.0 * (k1.dy_km + 2.0 * (k2.dy_km + k3.dy_km) + k4.dy_km);
  next.altitude += dt / 6.0 * (k1.dh + 2.0 * (k2.dh + k3.dh) + k4.dh);
  next.vx += dt / 6.0 * (k1.dvx + 2.0 * (k2.dvx + k3.dvx) + k4.dvx);
  next.vy += dt / 6.0 * (k1.dvy + 2.0 * (k2.dvy + k3.dvy) + k4.dvy);
  next.ascent_rate += dt / 6.0 * (k1.dhdot + 2.0 * (k2.dhdot + k3.dhdot) + k4.dhdot);
  next.time_s += dt;
  return next;
}

// Sand mass to retain so the balloon ascends at steady rate h_dot_d:
//   m_s,calc = rho V - (rho / 2g) c_d A |h_dot_d| h_dot_d - m_p - m_h
// Evaluated at the current envelope (helium and ambient conditions).
inline double ballast_to_retain(double h_dot_d, const BalloonState& state,
                                const AirProperties& air, const BalloonParams& params) {
  const EnvelopeGeometry geom = envelope_geometry(state.helium_mols, air);
  const double drag_mass = air.density / (2.0 * kGravity) * params.drag_coefficient *
                           geom.drag_area * std::abs(h_dot_d) * h_dot_d;
  return air.density * geom.volume - drag_mass - params.payload_mass -
         state.helium_mols * params.molar_mass_helium;
}

struct VentSolution {
  double mols_to_retain;  // n_calc
  bool bracketed;         // false when no root exists in (0, upper]
};

// Steady-state force balance at ascent rate h_dot_d, as a function of the
// helium mols n (with V = nRT/P and A = pi (3RTn / 4 pi P)^(2/3)):
//   rho (RT/P) g n - M_he g n - 1/2 rho |h_dot_d| h_dot_d c_d A(n)
//     - (m_p + m_s) g = 0
// The residual is monotone increasing in n for h_dot_d <= 0, so bisection
// on a sign-changing bracket is exact.
inline VentSolution solve_mols_for_ascent(double h_dot_d, const AirProperties& air,
                                          double non_helium_mass,
                                          const BalloonParams& params,
                                          double upper) {
  const double rt_over_p = kGasConstant * air.temperature / air.pressure;
  const double area_coeff =
      kPi * std::pow(3.0 * rt_over_p / (4.0 * kPi), 2.0 / 3.0);
  const auto residual = [&](double n) {
    return air.density * rt_over_p * kGravity * n -
           params.molar_mass_helium * kGravity * n -
           0.5 * air.density * std::abs(h_dot_d) * h_dot_d *
               params.drag_coefficient * area_coeff * std::pow(n, 2.0 / 3.0) -
           non_helium_mass * kGravity;
  };
  const double tol = 1e-6 * non_helium_mass * kGravity;
  if (residual(upper) < 0.0) {
    return VentSolution{upper, false};
  }
  double lo = 0.0, hi = upper;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double r = residual(mid);
    if (std::abs(r) <= tol) return VentSolution{mid, true};
    if (r < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return VentSolution{0.5 * (lo + hi), true};
}

// Helium mols to retain so the balloon settles at descent/ascent rate
// h_dot_d; used by the vent action. The caller clamps the vented amount.
inline VentSolution vent_mols_to_retain(double h_dot_d, const BalloonState& state,
                                        const AirProperties& air,
                                        const BalloonParams& params) {
  return solve_mols_for_ascent(h_dot_d, air, params.payload_mass + state.sand_mass,
                               params, state.helium_mols);
}

// Helium fill giving a free-lift ascent rate at the given conditions.
// Expands the bracket upward until the residual changes sign.
inline double mols_for_free_lift(double ascent_rate, const AirProperties& air,
                                 double non_helium_mass, const BalloonParams& params) {
  double upper = 2.0 * non_helium_mass /
                 (params.molar_mass_air - params.molar_mass_helium);
  for (int i = 0; i < 60; ++i) {
    const VentSolution sol =
        solve_mols_for_ascent(ascent_rate, air, non_helium_mass, params, upper);
    if (sol.bracketed) return sol.mols_to_retain;
    upper *= 2.0;
  }
  throw std::runtime_error("free-lift solve failed to bracket a root");
}

}  // namespace stk

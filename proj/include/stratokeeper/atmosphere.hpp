#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratokeeper/util.hpp"

namespace stk {

constexpr double kGravity = 9.80665;         // m/s^2
constexpr double kGasConstant = 8.31446;     // J/(mol K)
constexpr double kMolarMassAir = 0.0289644;  // kg/mol

struct AtmosphereLayer {
  double base_altitude;     // m
  double base_temperature;  // K
  double lapse_rate;        // K/m, zero for isothermal layers
  double base_pressure;     // Pa
};

struct AirProperties {
  double temperature;  // K
  double pressure;     // Pa
  double density;      // kg/m^3
};

// US Standard Atmosphere 1976 layer model. Base pressures are derived by
// barometric continuity from the sea-level pair (288.15 K, 101325 Pa), so
// the table stays self-consistent when lapse rates are rescaled for
// per-episode perturbation.
class AtmosphereModel {
 public:
  static AtmosphereModel standard(double lapse_scale = 1.0) {
    // Base altitudes and lapse rates of the seven US1976 layers.
    static constexpr double kBases[] = {0.0,     11000.0, 20000.0, 32000.0,
                                        47000.0, 51000.0, 71000.0};
    static constexpr double kLapse[] = {-0.0065, 0.0,     0.001, 0.0028,
                                        0.0,     -0.0028, -0.002};
    std::vector<AtmosphereLayer> layers;
    layers.reserve(7);
    double t = 288.15;
    double p = 101325.0;
    for (int i = 0; i < 7; ++i) {
      AtmosphereLayer layer{kBases[i], t, kLapse[i] * lapse_scale, p};
      layers.push_back(layer);
      if (i + 1 < 7) {
        const double h_next = kBases[i + 1];
        p = pressure_in_layer(layer, h_next);
        t = layer.base_temperature + (h_next - layer.base_altitude) * layer.lapse_rate;
      }
    }
    return AtmosphereModel(std::move(layers), 47000.0);
  }

  double max_altitude() const { return max_altitude_; }
  const std::vector<AtmosphereLayer>& layers() const { return layers_; }

  double temperature_at(double h) const {
    const AtmosphereLayer& layer = layer_for(h);
    return layer.base_temperature + (h - layer.base_altitude) * layer.lapse_rate;
  }

  double pressure_at(double h) const {
    return pressure_in_layer(layer_for(h), h);
  }

  AirProperties properties_at(double h) const {
    const AtmosphereLayer& layer = layer_for(h);
    const double t = layer.base_temperature + (h - layer.base_altitude) * layer.lapse_rate;
    const double p = pressure_in_layer(layer, h);
    return AirProperties{t, p, p * kMolarMassAir / (kGasConstant * t)};
  }

  // Inverts pressure_at on [0, max_altitude] by bisection. Pressure is
  // strictly decreasing in altitude, so the root is unique.
  double altitude_for_pressure(double p) const {
    const double p_top = pressure_at(max_altitude_);
    const double p_bottom = layers_.front().base_pressure;
    if (p > p_bottom || p < p_top) {
      throw std::out_of_range("pressure " + std::to_string(p) +
                              " Pa outside invertible range [" +
                              std::to_string(p_top) + ", " +
                              std::to_string(p_bottom) + "]");
    }
    double lo = 0.0, hi = max_altitude_;
    for (int i = 0; i < 80; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (pressure_at(mid) > p) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

 private:
  AtmosphereModel(std::vector<AtmosphereLayer> layers, double max_altitude)
      : layers_(std::move(layers)), max_altitude_(max_altitude) {}

  static double pressure_in_layer(const AtmosphereLayer& layer, double h) {
    const double dh = h - layer.base_altitude;
    if (layer.lapse_rate != 0.0) {
      const double t = layer.base_temperature + dh * layer.lapse_rate;
      const double expo = -kGravity * kMolarMassAir / (kGasConstant * layer.lapse_rate);
      return layer.base_pressure * std::pow(t / layer.base_temperature, expo);
    }
    return layer.base_pressure *
           std::exp(-kGravity * kMolarMassAir * dh /
                    (kGasConstant * layer.base_temperature));
  }

  const AtmosphereLayer& layer_for(double h) const {
    if (h < 0.0) {
      throw std::out_of_range("altitude " + std::to_string(h) +
                              " m below supported minimum 0 m");
    }
    if (h > max_altitude_) {
      throw std::out_of_range("altitude " + std::to_string(h) +
                              " m above supported maximum " +
                              std::to_string(max_altitude_) + " m");
    }
    std::size_t i = layers_.size() - 1;
    while (i > 0 && layers_[i].base_altitude > h) --i;
    return layers_[i];
  }

  std::vector<AtmosphereLayer> layers_;
  double max_altitude_;
};

}  // namespace stk

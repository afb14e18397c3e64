#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratokeeper/util.hpp"

namespace stk {

struct WindVector {
  double u = 0.0;  // eastward, m/s
  double v = 0.0;  // northward, m/s
};

struct GridAxes {
  double lon_origin = 0.0;  // deg
  double lat_origin = 0.0;  // deg
  double lon_step = 0.4;    // deg
  double lat_step = 0.4;    // deg
  int n_lon = 0;
  int n_lat = 0;
  std::vector<double> pressure_levels;  // Pa, strictly ascending
  double time_origin = 0.0;  // hours
  double time_step = 6.0;    // hours
  int n_time = 0;

  double lon_max() const { return lon_origin + lon_step * (n_lon - 1); }
  double lat_max() const { return lat_origin + lat_step * (n_lat - 1); }
  double time_max() const { return time_origin + time_step * (n_time - 1); }
  double pressure_min() const { return pressure_levels.front(); }
  double pressure_max() const { return pressure_levels.back(); }

  void validate() const {
    if (n_lon < 2 || n_lat < 2 || n_time < 2 ||
        pressure_levels.size() < 2) {
      throw std::invalid_argument("grid axes need at least 2 nodes per axis");
    }
    if (lon_step <= 0.0 || lat_step <= 0.0 || time_step <= 0.0) {
      throw std::invalid_argument("grid axis steps must be positive");
    }
    for (std::size_t i = 0; i < pressure_levels.size(); ++i) {
      const double p = pressure_levels[i];
      if (p < 2000.0 || p > 17500.0) {
        throw std::invalid_argument(
            "pressure level " + format_full(p) +
            " Pa outside supported range [2000, 17500]");
      }
      if (i > 0 && pressure_levels[i - 1] >= p) {
        throw std::invalid_argument("pressure levels must be strictly ascending");
      }
    }
  }
};

// Local tangent-plane projection around a reference point; x points east,
// y points north, both in km.
struct TangentPlane {
  double lon_center = 0.0;
  double lat_center = 0.0;
  static constexpr double kKmPerDegLat = 111.32;

  double km_per_deg_lon() const {
    return kKmPerDegLat * std::cos(lat_center * kPi / 180.0);
  }
  void to_km(double lon, double lat, double& x_km, double& y_km) const {
    x_km = (lon - lon_center) * km_per_deg_lon();
    y_km = (lat - lat_center) * kKmPerDegLat;
  }
  void to_lonlat(double x_km, double y_km, double& lon, double& lat) const {
    lon = lon_center + x_km / km_per_deg_lon();
    lat = lat_center + y_km / kKmPerDegLat;
  }
};

struct NoiseSpec {
  std::uint64_t seed = 0;
  double amplitude = 0.0;          // m/s
  double spatial_scale_km = 250.0;
  double pressure_scale_pa = 4000.0;
  double time_scale_h = 12.0;

  void validate() const {
    if (amplitude < 0.0) throw std::invalid_argument("noise amplitude must be >= 0");
    if (spatial_scale_km <= 0.0 || pressure_scale_pa <= 0.0 || time_scale_h <= 0.0) {
      throw std::invalid_argument("noise scales must be positive");
    }
  }
};

namespace detail {

// 32 unit gradients: the permutations of (+-1, +-1, +-1, 0) / sqrt(3).
inline const double (*gradient_table())[4] {
  static double table[32][4];
  static const bool initialized = [] {
    const double s = 1.0 / std::sqrt(3.0);
    int k = 0;
    for (int zero = 0; zero < 4; ++zero) {
      for (int signs = 0; signs < 8; ++signs) {
        int bit = 0;
        for (int d = 0; d < 4; ++d) {
          table[k][d] = 0.0;
          if (d == zero) continue;
          table[k][d] = (signs >> bit & 1) ? s : -s;
          ++bit;
        }
        ++k;
      }
    }
    return true;
  }();
  (void)initialized;
  return table;
}

inline double fade(double t) { return t * t * t * (t * (6.0 * t - 15.0) + 10.0); }

inline std::uint64_t lattice_hash(std::uint64_t seed, std::int64_t x,
                                  std::int64_t y, std::int64_t z,
                                  std::int64_t w) {
  std::uint64_t h = seed;
  h ^= splitmix64(h) + std::uint64_t(x) * 0x9e3779b97f4a7c15ull;
  h ^= splitmix64(h) + std::uint64_t(y) * 0xc2b2ae3d27d4eb4full;
  h ^= splitmix64(h) + std::uint64_t(z) * 0x165667b19e3779f9ull;
  h ^= splitmix64(h) + std::uint64_t(w) * 0x27d4eb2f165667c5ull;
  return splitmix64(h);
}

}  // namespace detail

// Seeded 4-D lattice gradient noise over the scaled coordinates
// (x/spatial, y/spatial, p/pressure, t/time). Zero at every lattice point,
// continuous, and confined to [-1, 1].
inline double gradient_noise(const NoiseSpec& spec, double x_km, double y_km,
                             double p_pa, double t_h) {
  const double c[4] = {x_km / spec.spatial_scale_km, y_km / spec.spatial_scale_km,
                       p_pa / spec.pressure_scale_pa, t_h / spec.time_scale_h};
  std::int64_t cell[4];
  double frac[4], faded[4];
  for (int d = 0; d < 4; ++d) {
    const double fl = std::floor(c[d]);
    cell[d] = std::int64_t(fl);
    frac[d] = c[d] - fl;
    faded[d] = detail::fade(frac[d]);
  }
  const auto* grads = detail::gradient_table();
  double corner[16];
  for (int k = 0; k < 16; ++k) {
    const int dx = k & 1, dy = k >> 1 & 1, dz = k >> 2 & 1, dw = k >> 3 & 1;
    const std::uint64_t h = detail::lattice_hash(spec.seed, cell[0] + dx,
                                                 cell[1] + dy, cell[2] + dz,
                                                 cell[3] + dw);
    const double* g = grads[h & 31];
    corner[k] = g[0] * (frac[0] - dx) + g[1] * (frac[1] - dy) +
                g[2] * (frac[2] - dz) + g[3] * (frac[3] - dw);
  }
  // Collapse one axis at a time.
  for (int d = 0, n = 8; d < 4; ++d, n >>= 1) {
    for (int k = 0; k < n; ++k) {
      corner[k] = corner[k] + faded[d] * (corner[k + n] - corner[k]);
    }
  }
  return std::clamp(corner[0], -1.0, 1.0);
}

struct SyntheticWindSpec {
  std::uint64_t seed = 0;
  double base_speed = 6.0;          // m/s
  double direction_twist = 0.0;     // rad per Pa
  double time_drift = 0.0;          // rad per hour
  NoiseSpec noise;

  void validate() const {
    if (base_speed < 0.0) throw std::invalid_argument("base_speed must be >= 0");
    noise.validate();
  }
};

// Gridded wind over (time, pressure, lat, lon), row-major with lon
// innermost. Immutable after construction or load; concurrent reads are
// safe.
class WindGrid {
 public:
  explicit WindGrid(GridAxes axes) : axes_(std::move(axes)) {
    axes_.validate();
    const std::size_t n = count();
    u_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }

  const GridAxes& axes() const { return axes_; }

  std::size_t count() const {
    return std::size_t(axes_.n_time) * axes_.pressure_levels.size() *
           axes_.n_lat * axes_.n_lon;
  }

  std::size_t index(int ti, int pi, int yi, int xi) const {
    return ((std::size_t(ti) * axes_.pressure_levels.size() + pi) * axes_.n_lat +
            yi) * axes_.n_lon + xi;
  }

  double& u_at(int ti, int pi, int yi, int xi) { return u_[index(ti, pi, yi, xi)]; }
  double& v_at(int ti, int pi, int yi, int xi) { return v_[index(ti, pi, yi, xi)]; }
  double u_at(int ti, int pi, int yi, int xi) const { return u_[index(ti, pi, yi, xi)]; }
  double v_at(int ti, int pi, int yi, int xi) const { return v_[index(ti, pi, yi, xi)]; }

  TangentPlane tangent() const {
    return TangentPlane{axes_.lon_origin + 0.5 * axes_.lon_step * (axes_.n_lon - 1),
                        axes_.lat_origin + 0.5 * axes_.lat_step * (axes_.n_lat - 1)};
  }

  void validate() const {
    axes_.validate();
    if (u_.size() != count() || v_.size() != count()) {
      throw std::invalid_argument("wind array extents do not match axes counts");
    }
    for (std::size_t i = 0; i < u_.size(); ++i) {
      if (!std::isfinite(u_[i]) || !std::isfinite(v_[i])) {
        throw std::invalid_argument("non-finite wind component at node " +
                                    std::to_string(i));
      }
    }
  }

  const std::vector<double>& u_values() const { return u_; }
  const std::vector<double>& v_values() const { return v_; }
  std::vector<double>& u_values() { return u_; }
  std::vector<double>& v_values() { return v_; }

 private:
  GridAxes axes_;
  std::vector<double> u_, v_;
};

namespace detail {

struct AxisLocation {
  int index;     // lower node
  double frac;   // in [0, 1]
};

inline AxisLocation locate_uniform(double q, double origin, double step, int n,
                                   const char* axis_name) {
  const double max = origin + step * (n - 1);
  if (q < origin || q > max) {
    throw std::out_of_range(std::string(axis_name) + " coordinate " +
                            format_full(q) + " outside grid range [" +
                            format_full(origin) + ", " + format_full(max) + "]");
  }
  int i = int(std::floor((q - origin) / step));
  i = std::clamp(i, 0, n - 2);
  return {i, (q - (origin + step * i)) / step};
}

inline AxisLocation locate_levels(double q, const std::vector<double>& levels,
                                  const char* axis_name) {
  if (q < levels.front() || q > levels.back()) {
    throw std::out_of_range(std::string(axis_name) + " coordinate " +
                            format_full(q) + " outside grid range [" +
                            format_full(levels.front()) + ", " +
                            format_full(levels.back()) + "]");
  }
  auto it = std::upper_bound(levels.begin(), levels.end(), q);
  int i = int(it - levels.begin()) - 1;
  i = std::clamp(i, 0, int(levels.size()) - 2);
  return {i, (q - levels[i]) / (levels[i + 1] - levels[i])};
}

}  // namespace detail

// Multilinear interpolation over the 16 enclosing nodes; exact at nodes.
// Out-of-range coordinates raise an error naming the offending axis.
inline WindVector quadrilinear_sample(const WindGrid& grid, double lon,
                                      double lat, double p_pa, double t_h) {
  const GridAxes& ax = grid.axes();
  const auto lx = detail::locate_uniform(lon, ax.lon_origin, ax.lon_step, ax.n_lon, "lon");
  const auto ly = detail::locate_uniform(lat, ax.lat_origin, ax.lat_step, ax.n_lat, "lat");
  const auto lp = detail::locate_levels(p_pa, ax.pressure_levels, "pressure");
  const auto lt = detail::locate_uniform(t_h, ax.time_origin, ax.time_step, ax.n_time, "time");

  WindVector out;
  for (int k = 0; k < 16; ++k) {
    const int dt = k & 1, dp = k >> 1 & 1, dy = k >> 2 & 1, dx = k >> 3 & 1;
    const double w = (dt ? lt.frac : 1.0 - lt.frac) * (dp ? lp.frac : 1.0 - lp.frac) *
                     (dy ? ly.frac : 1.0 - ly.frac) * (dx ? lx.frac : 1.0 - lx.frac);
    if (w == 0.0) continue;
    const std::size_t idx = grid.index(lt.index + dt, lp.index + dp,
                                       ly.index + dy, lx.index + dx);
    out.u += w * grid.u_values()[idx];
    out.v += w * grid.v_values()[idx];
  }
  return out;
}

// Forecast-error emulation: adds seeded gradient noise on top of the
// interpolated forecast. The u and v channels use seed and seed^1.
inline WindVector perturbed_sample(const WindGrid& grid, const NoiseSpec& noise,
                                   double lon, double lat, double p_pa,
                                   double t_h) {
  WindVector w = quadrilinear_sample(grid, lon, lat, p_pa, t_h);
  if (noise.amplitude > 0.0) {
    const TangentPlane plane = grid.tangent();
    double x_km, y_km;
    plane.to_km(lon, lat, x_km, y_km);
    NoiseSpec nu = noise;
    NoiseSpec nv = noise;
    nv.seed = noise.seed ^ 1ull;
    w.u += noise.amplitude * gradient_noise(nu, x_km, y_km, p_pa, t_h);
    w.v += noise.amplitude * gradient_noise(nv, x_km, y_km, p_pa, t_h);
  }
  return w;
}

// Deterministic synthetic wind: direction rotates with pressure and time,
// speed is modulated by gradient noise. Stands in for reanalysis data at
// desk scale while guaranteeing direction diversity across altitude.
inline WindGrid synthesize_grid(const SyntheticWindSpec& spec, const GridAxes& axes) {
  spec.validate();
  WindGrid grid(axes);
  const GridAxes& ax = grid.axes();
  std::uint64_t sm = spec.seed;
  const double theta0 = 2.0 * kPi * (double(splitmix64(sm) >> 11) * 0x1.0p-53);
  const double p_mid = 0.5 * (ax.pressure_min() + ax.pressure_max());
  const TangentPlane plane = grid.tangent();
  for (int ti = 0; ti < ax.n_time; ++ti) {
    const double t = ax.time_origin + ax.time_step * ti;
    for (std::size_t pi = 0; pi < ax.pressure_levels.size(); ++pi) {
      const double p = ax.pressure_levels[pi];
      for (int yi = 0; yi < ax.n_lat; ++yi) {
        for (int xi = 0; xi < ax.n_lon; ++xi) {
          double x_km, y_km;
          plane.to_km(ax.lon_origin + ax.lon_step * xi,
                      ax.lat_origin + ax.lat_step * yi, x_km, y_km);
          const double theta = theta0 + spec.direction_twist * (p - p_mid) +
                               spec.time_drift * t;
          double speed = spec.base_speed;
          if (spec.noise.amplitude > 0.0) {
            speed *= 1.0 + 0.3 * gradient_noise(spec.noise, x_km, y_km, p, t);
          }
          grid.u_at(ti, int(pi), yi, xi) = speed * std::cos(theta);
          grid.v_at(ti, int(pi), yi, xi) = speed * std::sin(theta);
        }
      }
    }
  }
  return grid;
}

namespace detail {

[[noreturn]] inline void parse_fail(int line, const std::string& what) {
  throw std::runtime_error("grid file line " + std::to_string(line) + ": " + what);
}

}  // namespace detail

// Text grid format, normative byte layout:
//   WINDGRID 1
//   axes lon0 lat0 dlon dlat nlon nlat t0 dt nt np
//   plevels p1 ... pnp
//   u v                  (nt*np*nlat*nlon lines, time outermost, lon innermost)
inline void write_grid(const WindGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const GridAxes& ax = grid.axes();
  out << "WINDGRID 1\n";
  out << "axes " << format_full(ax.lon_origin) << ' ' << format_full(ax.lat_origin)
      << ' ' << format_full(ax.lon_step) << ' ' << format_full(ax.lat_step) << ' '
      << ax.n_lon << ' ' << ax.n_lat << ' ' << format_full(ax.time_origin) << ' '
      << format_full(ax.time_step) << ' ' << ax.n_time << ' '
      << ax.pressure_levels.size() << '\n';
  out << "plevels";
  for (double p : ax.pressure_levels) out << ' ' << format_full(p);
  out << '\n';
  for (std::size_t i = 0; i < grid.count(); ++i) {
    out << format_full(grid.u_values()[i]) << ' ' << format_full(grid.v_values()[i])
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline WindGrid read_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) detail::parse_fail(1, "missing header");
  ++line_no;
  if (line != "WINDGRID 1") detail::parse_fail(line_no, "bad magic, expected 'WINDGRID 1'");

  if (!std::getline(in, line)) detail::parse_fail(2, "missing axes line");
  ++line_no;
  GridAxes ax;
  std::size_t np = 0;
  {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "axes") detail::parse_fail(line_no, "expected 'axes'");
    if (!(ss >> ax.lon_origin >> ax.lat_origin >> ax.lon_step >> ax.lat_step >>
          ax.n_lon >> ax.n_lat >> ax.time_origin >> ax.time_step >> ax.n_time >> np)) {
      detail::parse_fail(line_no, "malformed axes line");
    }
  }

  if (!std::getline(in, line)) detail::parse_fail(3, "missing plevels line");
  ++line_no;
  {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "plevels") detail::parse_fail(line_no, "expected 'plevels'");
    double p;
    while (ss >> p) ax.pressure_levels.push_back(p);
    if (ax.pressure_levels.size() != np) {
      detail::parse_fail(line_no, "header declares " + std::to_string(np) +
                                      " pressure levels but " +
                                      std::to_string(ax.pressure_levels.size()) +
                                      " provided");
    }
  }

  WindGrid grid = [&] {
    try {
      return WindGrid(ax);
    } catch (const std::invalid_argument& e) {
      detail::parse_fail(line_no, e.what());
    }
  }();

  for (std::size_t i = 0; i < grid.count(); ++i) {
    if (!std::getline(in, line)) {
      detail::parse_fail(line_no + 1, "expected " + std::to_string(grid.count()) +
                                          " data lines, got " + std::to_string(i));
    }
    ++line_no;
    std::istringstream ss(line);
    double u, v;
    if (!(ss >> u >> v)) detail::parse_fail(line_no, "malformed data line");
    if (!std::isfinite(u) || !std::isfinite(v)) {
      detail::parse_fail(line_no, "non-finite value");
    }
    grid.u_values()[i] = u;
    grid.v_values()[i] = v;
  }
  return grid;
}

}  // namespace stk

#include "mara/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <string>
#include <unordered_map>

#include "mara/errors.hpp"

namespace mara {

Vec3 matvec(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return c;
}

Mat3 transpose(const Mat3& m) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
  return t;
}

double determinant(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 identity3() { return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}}; }

SphericalGrid build_equiangular_grid(std::size_t n_theta, std::size_t n_phi, QuadratureRule rule) {
  if (n_theta == 0 || n_phi == 0)
    throw InvalidArgument("spherical grid needs n_theta >= 1 and n_phi >= 1");
  constexpr double pi = std::numbers::pi;
  SphericalGrid g;
  g.n_theta = n_theta;
  g.n_phi = n_phi;
  const std::size_t n = n_theta * n_phi;
  g.points.reserve(n);
  g.weights.reserve(n);
  const double dtheta = pi / static_cast<double>(n_theta);
  const double dphi = 2.0 * pi / static_cast<double>(n_phi);
  g.rule = rule;
  for (std::size_t i = 0; i < n_theta; ++i) {
    const double theta = dtheta * (static_cast<double>(i) + 0.5);
    const double st = std::sin(theta), ct = std::cos(theta);
    double w_theta = st * dtheta;
    if (rule == QuadratureRule::fejer) {
      // Fejer's first rule on the Chebyshev nodes cos(theta_i).
      double s = 0.0;
      for (std::size_t m = 1; 2 * m <= n_theta; ++m)
        s += std::cos(2.0 * static_cast<double>(m) * theta) / (4.0 * static_cast<double>(m * m) - 1.0);
      w_theta = 2.0 / static_cast<double>(n_theta) * (1.0 - 2.0 * s);
    }
    for (std::size_t j = 0; j < n_phi; ++j) {
      const double phi = dphi * static_cast<double>(j);
      g.points.push_back({std::cos(phi) * st, std::sin(phi) * st, ct});
      g.weights.push_back(w_theta * dphi);
    }
  }
  double total = 0.0;
  for (double w : g.weights) total += w;
  const double scale = 4.0 * pi / total;
  for (double& w : g.weights) w *= scale;
  g.xs.resize(n);
  g.ys.resize(n);
  g.zs.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    g.xs[k] = g.points[k][0];
    g.ys[k] = g.points[k][1];
    g.zs[k] = g.points[k][2];
  }
  return g;
}

SphericalGrid rotate_grid(const SphericalGrid& grid, const Mat3& rotation) {
  SphericalGrid g = grid;
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.points[k] = matvec(rotation, grid.points[k]);
    g.xs[k] = g.points[k][0];
    g.ys[k] = g.points[k][1];
    g.zs[k] = g.points[k][2];
  }
  return g;
}

double quadrature(std::span<const double> values, const SphericalGrid& grid) {
  if (values.size() != grid.size())
    throw InvalidArgument("quadrature: " + std::to_string(values.size()) + " values for " +
                          std::to_string(grid.size()) + " grid points");
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) s += values[k] * grid.weights[k];
  return s;
}

RigidMotion RigidMotion::compose(const RigidMotion& other) const {
  return {matmul(rotation, other.rotation), matvec(rotation, other.translation) + translation};
}

RigidMotion RigidMotion::inverse() const {
  Mat3 rt = transpose(rotation);
  Vec3 t = matvec(rt, translation);
  return {rt, {-t[0], -t[1], -t[2]}};
}

RigidMotion rotation_from_euler(double phi, double theta, double psi) {
  auto rz = [](double a) -> Mat3 {
    const double c = std::cos(a), s = std::sin(a);
    return {{{c, -s, 0.0}, {s, c, 0.0}, {0.0, 0.0, 1.0}}};
  };
  const double c = std::cos(theta), s = std::sin(theta);
  const Mat3 ry{{{c, 0.0, s}, {0.0, 1.0, 0.0}, {-s, 0.0, c}}};
  return {matmul(matmul(rz(phi), ry), rz(psi)), {0.0, 0.0, 0.0}};
}

std::vector<Vec3> apply_rigid(const RigidMotion& motion, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(motion(p));
  return out;
}

RigidMotion random_rigid_motion(std::mt19937_64& rng, double translation_scale) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u1 = u01(rng), u2 = u01(rng), u3 = u01(rng);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double w = a * std::sin(two_pi * u2), x = a * std::cos(two_pi * u2);
  const double y = b * std::sin(two_pi * u3), z = b * std::cos(two_pi * u3);
  Mat3 r{{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
          {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
          {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
  std::uniform_real_distribution<double> ut(-translation_scale, translation_scale);
  Vec3 t{0.0, 0.0, 0.0};
  if (translation_scale > 0.0) t = {ut(rng), ut(rng), ut(rng)};
  return {r, t};
}

std::vector<double> real_spherical_harmonics(int l_max, const Vec3& direction) {
  if (l_max < 0) throw InvalidArgument("l_max must be non-negative");
  const double n = norm(direction);
  if (!(std::abs(n - 1.0) <= 1e-9))
    throw InvalidArgument("spherical harmonics need a unit direction (norm " + std::to_string(n) + ")");
  std::vector<double> out(sph_harm_count(l_max));
  detail::sph_harm_poly(l_max, direction[0], direction[1], direction[2], out.data());
  return out;
}

namespace {

void check_positions(std::span<const Vec3> positions, double cutoff) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff))
    throw InvalidArgument("neighbor list cutoff must be positive and finite");
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (double c : positions[i])
      if (!std::isfinite(c)) throw InvalidArgument("non-finite coordinate for atom " + std::to_string(i));
}

}  // namespace

NeighborList neighbor_list(std::span<const Vec3> positions, double cutoff) {
  check_positions(positions, cutoff);
  NeighborList nl;
  nl.cutoff = cutoff;
  const std::size_t n = positions.size();
  const double cut2 = cutoff * cutoff;
  auto within = [&](std::size_t i, std::size_t j) {
    const Vec3 d = positions[j] - positions[i];
    return dot(d, d) < cut2;
  };

  if (n <= 64) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && within(i, j)) nl.edges.emplace_back(i, j);
    return nl;
  }

  // Cell list with cells of edge >= cutoff; only the 27 surrounding cells are scanned.
  Vec3 lo = positions[0];
  for (const Vec3& p : positions)
    for (int c = 0; c < 3; ++c) lo[c] = std::min(lo[c], p[c]);
  auto cell_of = [&](const Vec3& p) {
    std::array<long long, 3> idx{};
    for (int c = 0; c < 3; ++c) idx[c] = static_cast<long long>(std::floor((p[c] - lo[c]) / cutoff));
    return idx;
  };
  auto key = [](long long a, long long b, long long c) {
    return (a * 73856093LL) ^ (b * 19349663LL) ^ (c * 83492791LL);
  };
  std::unordered_map<long long, std::vector<std::size_t>> cells;
  std::vector<std::array<long long, 3>> cell_idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    cell_idx[i] = cell_of(positions[i]);
    cells[key(cell_idx[i][0], cell_idx[i][1], cell_idx[i][2])].push_back(i);
  }
  std::vector<std::size_t> found;
  for (std::size_t i = 0; i < n; ++i) {
    found.clear();
    const auto& ci = cell_idx[i];
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          auto it = cells.find(key(ci[0] + dx, ci[1] + dy, ci[2] + dz));
          if (it == cells.end()) continue;
          for (std::size_t j : it->second) {
            // Hash collisions can alias distant cells; the distance test is authoritative.
            if (j != i && within(i, j)) found.push_back(j);
          }
        }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    for (std::size_t j : found) nl.edges.emplace_back(i, j);
  }
  return nl;
}

}  // namespace mara

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mara/config.hpp"
#include "mara/geometry.hpp"

namespace testing {

using mara::operator+;
using mara::operator-;
using mara::operator*;

inline std::vector<mara::Vec3> random_cloud(std::mt19937_64& rng, std::size_t n, double half_width) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  std::vector<mara::Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

/// Random cloud whose atoms are at least `min_dist` apart.
inline std::vector<mara::Vec3> spaced_cloud(std::mt19937_64& rng, std::size_t n, double half_width, double min_dist) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  std::vector<mara::Vec3> pts;
  while (pts.size() < n) {
    mara::Vec3 p{u(rng), u(rng), u(rng)};
    bool ok = true;
    for (const auto& q : pts) ok = ok && mara::norm(p - q) >= min_dist;
    if (ok) pts.push_back(p);
  }
  return pts;
}

inline mara::AtomicConfiguration molecule(std::vector<int> species, std::vector<mara::Vec3> pos) {
  mara::AtomicConfiguration c;
  c.species = std::move(species);
  c.positions = std::move(pos);
  return c;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testing

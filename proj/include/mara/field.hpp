#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mara/geometry.hpp"

namespace mara {

/// Minimum separation below which an edge has no usable direction.
inline constexpr double kMinEdgeLength = 1e-8;

/// Distances from the grid points scaled onto the sphere of radius r_ij around
/// atom i to atom j. The minimum sits at the grid direction closest to x_j - x_i.
struct EdgeSphericalField {
  std::pair<std::size_t, std::size_t> edge{0, 0};
  double r = 0.0;
  std::vector<double> values;
};

/// values_k = || x_j - (x_i + r_ij g_k) ||. Throws DegenerateGeometry when
/// r_ij <= 1e-8.
EdgeSphericalField grid_field(const Vec3& x_i, const Vec3& x_j, const SphericalGrid& grid);

/// How the scalar field is lifted to per-grid-point feature vectors.
///   scalar : one feature, delta_k / (2 r)
///   rbf(n) : n Gaussians with centres m * 2r/(n-1) and width 2r/(n-1)
///            (n = 1: centre r, width 2r)
struct FieldMode {
  enum class Kind { scalar, rbf };
  Kind kind = Kind::scalar;
  std::size_t n = 1;

  std::size_t dim() const { return kind == Kind::scalar ? 1 : n; }
  std::string to_string() const;
  /// Accepts "scalar" or "rbf(<n>)"; anything else is InvalidArgument.
  static FieldMode parse(std::string_view text);
};

/// Row-major (n_grid x dim) features.
std::vector<double> field_features(const EdgeSphericalField& field, const FieldMode& mode);

}  // namespace mara

#include "mara/field.hpp"

#include <charconv>
#include <cmath>

#include "mara/errors.hpp"
#include "mara/kernels.hpp"

namespace mara {

EdgeSphericalField grid_field(const Vec3& x_i, const Vec3& x_j, const SphericalGrid& grid) {
  const Vec3 d = x_j - x_i;
  const double r = norm(d);
  if (!(r > kMinEdgeLength)) throw DegenerateGeometry("grid field needs distinct atoms");
  EdgeSphericalField f;
  f.r = r;
  f.values.resize(grid.size());
  kernels::active().sphere_distances(d.data(), r, grid.xs.data(), grid.ys.data(), grid.zs.data(),
                                     f.values.data(), grid.size());
  return f;
}

std::string FieldMode::to_string() const {
  return kind == Kind::scalar ? "scalar" : "rbf(" + std::to_string(n) + ")";
}

FieldMode FieldMode::parse(std::string_view text) {
  if (text == "scalar") return {};
  if (text.starts_with("rbf(") && text.ends_with(")")) {
    std::string_view digits = text.substr(4, text.size() - 5);
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && n >= 1) return {Kind::rbf, n};
  }
  throw InvalidArgument("unknown field feature mode '" + std::string(text) + "'");
}

std::vector<double> field_features(const EdgeSphericalField& field, const FieldMode& mode) {
  const std::size_t k = field.values.size();
  const double two_r = 2.0 * field.r;
  if (mode.kind == FieldMode::Kind::scalar) {
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = field.values[i] / two_r;
    return out;
  }
  const std::size_t n = mode.n;
  // In units of t = delta / (2r): centres m/(n-1), width 1/(n-1).
  const double width = n > 1 ? 1.0 / static_cast<double>(n - 1) : 1.0;
  std::vector<double> out(k * n);
  for (std::size_t i = 0; i < k; ++i) {
    const double t = field.values[i] / two_r;
    for (std::size_t m = 0; m < n; ++m) {
      const double centre = n > 1 ? static_cast<double>(m) * width : 0.5;
      const double z = (t - centre) / width;
      out[i * n + m] = std::exp(-0.5 * z * z);
    }
  }
  return out;
}

}  // namespace mara

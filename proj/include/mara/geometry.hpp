#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace mara {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 matvec(const Mat3& m, const Vec3& v);
Mat3 matmul(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& m);
double determinant(const Mat3& m);
Mat3 identity3();

/// Colatitude weights of the equiangular grid.
///   fejer     : Fejer's first rule on the cell-centred nodes (exact for
///               polynomials in cos(theta) of degree < n_theta)
///   sine_area : sin(theta) dtheta dphi cell areas (second order)
/// Both are rescaled so the weights sum to exactly 4 pi.
enum class QuadratureRule { fejer, sine_area };

/// Equiangular quadrature grid on the unit sphere. Points are ordered with the
/// colatitude index outermost: k = i * n_phi + j.
struct SphericalGrid {
  std::size_t n_theta = 0;
  std::size_t n_phi = 0;
  QuadratureRule rule = QuadratureRule::fejer;
  std::vector<Vec3> points;
  std::vector<double> weights;
  // Structure-of-arrays copy of `points` for the vector kernels.
  std::vector<double> xs, ys, zs;

  std::size_t size() const { return points.size(); }
};

/// Cell-centred colatitudes theta_i = pi (i + 1/2) / n_theta, longitudes
/// phi_j = 2 pi j / n_phi, with weights from `rule`.
SphericalGrid build_equiangular_grid(std::size_t n_theta, std::size_t n_phi,
                                     QuadratureRule rule = QuadratureRule::fejer);

/// Grid with every point rotated by `rotation`; weights unchanged.
SphericalGrid rotate_grid(const SphericalGrid& grid, const Mat3& rotation);

/// sum_k values_k * w_k
double quadrature(std::span<const double> values, const SphericalGrid& grid);

struct RigidMotion {
  Mat3 rotation = identity3();
  Vec3 translation{0.0, 0.0, 0.0};

  Vec3 operator()(const Vec3& x) const { return matvec(rotation, x) + translation; }
  /// (this * other)(x) = this(other(x))
  RigidMotion compose(const RigidMotion& other) const;
  RigidMotion inverse() const;
};

/// R = R_z(phi) R_y(theta) R_z(psi), zero translation.
RigidMotion rotation_from_euler(double phi, double theta, double psi);

std::vector<Vec3> apply_rigid(const RigidMotion& motion, std::span<const Vec3> points);

/// Haar-uniform rotation (unit quaternion from three uniforms) plus a
/// translation with components uniform in [-translation_scale, translation_scale].
RigidMotion random_rigid_motion(std::mt19937_64& rng, double translation_scale);

constexpr std::size_t sph_harm_count(int l_max) { return static_cast<std::size_t>((l_max + 1) * (l_max + 1)); }
constexpr std::size_t sph_harm_index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }

/// Real orthonormal spherical harmonics Y_lm for l <= l_max, indexed l*l + l + m
/// (m = -l..l). l = 1 is sqrt(3/4pi) * (y, z, x). No Condon-Shortley phase.
/// Throws InvalidArgument when |direction| deviates from 1 by more than 1e-9.
std::vector<double> real_spherical_harmonics(int l_max, const Vec3& direction);

namespace detail {

/// Cartesian-polynomial evaluation of the real harmonics; exact for unit (x, y, z)
/// and safe at the poles. T may be a dual number.
template <class T>
void sph_harm_poly(int l_max, const T& x, const T& y, const T& z, T* out) {
  constexpr double kPi = 3.14159265358979323846;
  const std::size_t L = static_cast<std::size_t>(l_max);
  // (x + i y)^m = A_m + i B_m
  std::vector<T> a(L + 1), b(L + 1);
  a[0] = T(1.0);
  b[0] = T(0.0);
  for (std::size_t m = 1; m <= L; ++m) {
    a[m] = x * a[m - 1] - y * b[m - 1];
    b[m] = x * b[m - 1] + y * a[m - 1];
  }
  // p[l][m]: associated Legendre P_l^m(z) / sin^m(theta), a polynomial in z.
  std::vector<std::vector<T>> p(L + 1, std::vector<T>(L + 1, T(0.0)));
  double dfact = 1.0;  // (2m - 1)!!
  for (std::size_t m = 0; m <= L; ++m) {
    if (m > 0) dfact *= static_cast<double>(2 * m - 1);
    p[m][m] = T(dfact);
    if (m + 1 <= L) p[m + 1][m] = z * p[m][m] * static_cast<double>(2 * m + 1);
    for (std::size_t l = m + 2; l <= L; ++l) {
      p[l][m] = (z * p[l - 1][m] * static_cast<double>(2 * l - 1) -
                 p[l - 2][m] * static_cast<double>(l + m - 1)) /
                static_cast<double>(l - m);
    }
  }
  for (std::size_t l = 0; l <= L; ++l) {
    const double base = static_cast<double>(2 * l + 1) / (4.0 * kPi);
    out[l * l + l] = p[l][0] * std::sqrt(base);
    double ratio = 1.0;  // (l - m)! / (l + m)!
    for (std::size_t m = 1; m <= l; ++m) {
      ratio /= static_cast<double>((l + m) * (l - m + 1));
      const double n = std::sqrt(2.0 * base * ratio);
      out[l * l + l + m] = p[l][m] * a[m] * n;
      out[l * l + l - m] = p[l][m] * b[m] * n;
    }
  }
}

}  // namespace detail

/// Ordered pairs (i, j), i != j, with ||x_j - x_i|| < cutoff (open ball).
/// Sorted by i, then j.
struct NeighborList {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  double cutoff = 0.0;
};

/// Throws InvalidArgument for non-finite coordinates or cutoff <= 0.
NeighborList neighbor_list(std::span<const Vec3> positions, double cutoff);

}  // namespace mara

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mara/dataset.hpp"
#include "mara/errors.hpp"

namespace mara {

namespace {

constexpr double kBoltzmann = 0.0019872041;  // kcal/(mol K)

/// Morse energy and dE/dr.
std::pair<double, double> morse(double r, const PotentialParams& p) {
  const double e = std::exp(-p.alpha * (r - p.r0));
  return {p.depth * (1 - e) * (1 - e), 2 * p.depth * p.alpha * (1 - e) * e};
}

void add_bond(const std::vector<Vec3>& x, std::size_t i, std::size_t j, const PotentialParams& p, EnergyForces& out) {
  const Vec3 d = x[j] - x[i];
  const double r = norm(d);
  if (!(r > 0)) throw DegenerateGeometry("bonded atoms coincide");
  const auto [e, de] = morse(r, p);
  out.energy += e;
  const Vec3 g = (de / r) * d;  // dE/dx_j
  out.forces[j] = out.forces[j] - g;
  out.forces[i] = out.forces[i] + g;
}

}  // namespace

std::string_view to_string(Potential p) { return p == Potential::morse ? "morse" : "trimer"; }

Potential parse_potential(std::string_view name) {
  if (name == "morse") return Potential::morse;
  if (name == "trimer") return Potential::trimer;
  throw InvalidArgument("unknown potential '" + std::string(name) + "' (expected morse or trimer)");
}

EnergyForces evaluate_potential(Potential kind, const std::vector<Vec3>& x, const PotentialParams& p) {
  const std::size_t need = kind == Potential::morse ? 2 : 3;
  if (x.size() != need)
    throw InvalidArgument(std::string(to_string(kind)) + " potential needs " + std::to_string(need) + " atoms");
  EnergyForces out;
  out.forces.assign(need, Vec3{0, 0, 0});
  add_bond(x, 0, 1, p, out);
  if (kind == Potential::trimer) {
    add_bond(x, 0, 2, p, out);
    const Vec3 a = x[1] - x[0], b = x[2] - x[0];
    const double la = norm(a), lb = norm(b);
    const double c = dot(a, b) / (la * lb);
    const double c0 = std::cos(p.theta0_deg * std::numbers::pi / 180.0);
    out.energy += p.k_angle * (c - c0) * (c - c0);
    const double pref = 2 * p.k_angle * (c - c0);
    const Vec3 dca = (1.0 / (la * lb)) * b - (c / (la * la)) * a;
    const Vec3 dcb = (1.0 / (la * lb)) * a - (c / (lb * lb)) * b;
    out.forces[1] = out.forces[1] - pref * dca;
    out.forces[2] = out.forces[2] - pref * dcb;
    out.forces[0] = out.forces[0] + pref * (dca + dcb);
  }
  return out;
}

Dataset synth_dataset(Potential kind, std::size_t n, std::uint64_t seed, double noise_T, const PotentialParams& p) {
  if (n == 0) throw InvalidArgument("synth_dataset needs n >= 1");
  if (!(noise_T > 0) || !std::isfinite(noise_T)) throw InvalidArgument("sampling temperature must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double kT = kBoltzmann * noise_T;
  const double r_lo = 0.6 * p.r0, r_hi = 2.0 * p.r0;
  const double th0 = p.theta0_deg * std::numbers::pi / 180.0, dth = std::numbers::pi / 4;
  Dataset d;
  std::ostringstream prov;
  prov << "synth:" << to_string(kind) << "(n=" << n << ",seed=" << seed << ",T=" << noise_T << ")";
  d.provenance = prov.str();
  while (d.samples.size() < n) {
    std::vector<Vec3> x;
    const double r1 = r_lo + (r_hi - r_lo) * unit(rng);
    if (kind == Potential::morse) {
      x = {{0, 0, 0}, {r1, 0, 0}};
    } else {
      const double r2 = r_lo + (r_hi - r_lo) * unit(rng);
      const double th = th0 - dth + 2 * dth * unit(rng);
      x = {{0, 0, 0}, {r1, 0, 0}, {r2 * std::cos(th), r2 * std::sin(th), 0}};
    }
    const double e = evaluate_potential(kind, x, p).energy;
    if (unit(rng) >= std::exp(-e / kT)) continue;
    Vec3 centre{0, 0, 0};
    for (const auto& v : x) centre = centre + v;
    centre = (1.0 / double(x.size())) * centre;
    RigidMotion m = random_rigid_motion(rng, 0.0);
    m.translation = -1.0 * matvec(m.rotation, centre);
    AtomicConfiguration c;
    c.positions = apply_rigid(m, x);
    c.species = kind == Potential::morse ? std::vector<int>{1, 1} : std::vector<int>{8, 1, 1};
    const auto ef = evaluate_potential(kind, c.positions, p);
    c.energy = ef.energy;
    c.forces = ef.forces;
    d.samples.push_back(std::move(c));
  }
  assign_splits(d, seed);
  return d;
}

}  // namespace mara

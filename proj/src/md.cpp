#include "mara/md.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mara/errors.hpp"

namespace mara {

ForceFn model_forces(const ModelState& state, std::vector<int> species, const EvalOptions& opts) {
  return [state, species = std::move(species), opts](const std::vector<Vec3>& x, double* energy) {
    AtomicConfiguration c;
    c.species = species;
    c.positions = x;
    Prediction p = predict(c, state, true, opts);
    if (energy) *energy = p.energy;
    return p.forces;
  };
}

ForceFn potential_forces(Potential kind, const PotentialParams& params) {
  return [kind, params](const std::vector<Vec3>& x, double* energy) {
    EnergyForces ef = evaluate_potential(kind, x, params);
    if (energy) *energy = ef.energy;
    return ef.forces;
  };
}

void MDState::validate() const {
  if (velocities.size() != positions.size() || masses.size() != positions.size())
    throw InvalidArgument("MD state: positions, velocities and masses differ in length");
  for (double m : masses)
    if (!(m > 0) || !std::isfinite(m)) throw InvalidArgument("MD state: masses must be positive");
}

std::vector<Vec3> maxwell_boltzmann_init(double temperature, const std::vector<double>& masses, std::uint64_t seed) {
  if (!(temperature > 0)) throw InvalidArgument("Maxwell-Boltzmann init needs T > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<Vec3> v(masses.size());
  Vec3 p{0, 0, 0};
  double mtot = 0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (!(masses[i] > 0)) throw InvalidArgument("masses must be positive");
    const double s = std::sqrt(kBoltzmann * temperature * kAccel / masses[i]);
    for (int c = 0; c < 3; ++c) {
      v[i][c] = s * gauss(rng);
      p[c] += masses[i] * v[i][c];
    }
    mtot += masses[i];
  }
  for (auto& vi : v)
    for (int c = 0; c < 3; ++c) vi[c] -= p[c] / mtot;
  return v;
}

double kinetic_energy(const std::vector<Vec3>& v, const std::vector<double>& m) {
  double e = 0;
  for (std::size_t i = 0; i < v.size(); ++i) e += 0.5 * m[i] * dot(v[i], v[i]);
  return e / kAccel;
}

double kinetic_temperature(const std::vector<Vec3>& v, const std::vector<double>& m) {
  // The thermostat acts on every Cartesian component, centre of mass included.
  const double dof = 3.0 * static_cast<double>(v.size());
  if (dof <= 0) return 0.0;
  return 2.0 * kinetic_energy(v, m) / (dof * kBoltzmann);
}

namespace {

void fetch_forces(MDState& s, const ForceFn& fn, std::size_t step) {
  s.forces = fn(s.positions, &s.potential);
  if (s.forces.size() != s.positions.size())
    throw SimulationAbort(step, "force provider returned " + std::to_string(s.forces.size()) + " forces for " +
                                    std::to_string(s.positions.size()) + " atoms",
                          s.positions);
  for (std::size_t i = 0; i < s.forces.size(); ++i)
    for (int c = 0; c < 3; ++c)
      if (!std::isfinite(s.forces[i][c]) || !std::isfinite(s.positions[i][c]))
        throw SimulationAbort(step, "non-finite force or position on atom " + std::to_string(i) +
                                        " at t = " + std::to_string(s.time) + " fs",
                              s.positions);
}

void kick(MDState& s, double h) {
  for (std::size_t i = 0; i < s.velocities.size(); ++i) {
    const double a = h * kAccel / s.masses[i];
    for (int c = 0; c < 3; ++c) s.velocities[i][c] += a * s.forces[i][c];
  }
}

void drift(MDState& s, double h) {
  for (std::size_t i = 0; i < s.positions.size(); ++i)
    for (int c = 0; c < 3; ++c) s.positions[i][c] += h * s.velocities[i][c];
}

}  // namespace

void langevin_step(MDState& s, const ForceFn& fn, double dt, double friction, double temperature,
                   std::size_t step_index) {
  if (!(dt > 0)) throw InvalidArgument("time step must be positive");
  if (!(friction >= 0)) throw InvalidArgument("friction must be non-negative");
  if (!(temperature >= 0)) throw InvalidArgument("temperature must be non-negative");
  s.validate();
  if (s.forces.size() != s.positions.size()) fetch_forces(s, fn, step_index);

  kick(s, 0.5 * dt);
  drift(s, 0.5 * dt);
  if (friction > 0) {
    const double c1 = std::exp(-friction * dt);
    const double c2 = std::sqrt(1.0 - c1 * c1);
    std::normal_distribution<double> gauss;
    for (std::size_t i = 0; i < s.velocities.size(); ++i) {
      const double sigma = std::sqrt(kBoltzmann * temperature * kAccel / s.masses[i]);
      for (int c = 0; c < 3; ++c) s.velocities[i][c] = c1 * s.velocities[i][c] + c2 * sigma * gauss(s.rng);
    }
  }
  drift(s, 0.5 * dt);
  fetch_forces(s, fn, step_index + 1);
  kick(s, 0.5 * dt);
  s.time += dt;
}

namespace {

ForceStats force_stats(std::size_t step, const std::vector<Vec3>& f) {
  std::vector<double> norms;
  norms.reserve(f.size());
  for (const auto& fi : f) norms.push_back(norm(fi));
  const TailMetrics t = tail_metrics(norms);
  return {step, t.mae, t.q95, t.max};
}

AtomicConfiguration frame_of(const AtomicConfiguration& base, const MDState& s) {
  AtomicConfiguration f;
  f.species = base.species;
  f.positions = s.positions;
  f.energy = s.potential;
  f.forces = s.forces;
  f.info = {{"time", std::to_string(s.time)}};
  return f;
}

}  // namespace

Trajectory run(const AtomicConfiguration& initial, const ForceFn& fn, const MDOptions& o) {
  initial.validate();
  if (initial.size() == 0) throw InvalidArgument("MD needs at least one atom");
  if (o.frame_every == 0) throw InvalidArgument("frame interval must be positive");
  MDState s;
  s.positions = initial.positions;
  for (int z : initial.species) s.masses.push_back(atomic_mass(z));
  s.rng.seed(o.seed);
  s.velocities = o.init_velocities && o.temperature > 0
                     ? maxwell_boltzmann_init(o.temperature, s.masses, o.seed ^ 0x9e3779b97f4a7c15ULL)
                     : std::vector<Vec3>(initial.size(), Vec3{0, 0, 0});
  fetch_forces(s, fn, 0);

  Trajectory t;
  auto record = [&](std::size_t step) {
    t.force_stats.push_back(force_stats(step, s.forces));
    t.temperature.push_back(kinetic_temperature(s.velocities, s.masses));
    t.potential.push_back(s.potential);
    if (step % o.frame_every == 0) {
      t.frames.push_back(frame_of(initial, s));
      t.frame_times.push_back(s.time);
    }
  };
  record(0);
  for (std::size_t step = 1; step <= o.steps; ++step) {
    langevin_step(s, fn, o.dt, o.friction, o.temperature, step - 1);
    record(step);
  }
  return t;
}

RDF rdf(const std::vector<AtomicConfiguration>& frames, double r_max, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("RDF needs at least one bin");
  if (!(r_max > 0)) throw InvalidArgument("RDF r_max must be positive");
  RDF out;
  out.bin_width = r_max / static_cast<double>(bins);
  out.counts.assign(bins, 0.0);
  out.g.assign(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) out.centers.push_back((static_cast<double>(b) + 0.5) * out.bin_width);
  std::size_t pairs = 0;
  for (const auto& f : frames) {
    const std::size_t n = f.size();
    pairs += n * (n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double r = norm(f.positions[j] - f.positions[i]);
        if (r < r_max) out.counts[static_cast<std::size_t>(r / out.bin_width)] += 1.0;
      }
  }
  if (pairs == 0) return out;
  constexpr double pi = std::numbers::pi;
  const double volume = 4.0 / 3.0 * pi * r_max * r_max * r_max;
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) * out.bin_width, hi = lo + out.bin_width;
    const double shell = 4.0 / 3.0 * pi * (hi * hi * hi - lo * lo * lo);
    out.g[b] = out.counts[b] / (static_cast<double>(pairs) * shell / volume);
  }
  return out;
}

double first_peak(const RDF& r) {
  if (r.g.empty()) throw InvalidArgument("empty RDF");
  const double gmax = *std::max_element(r.g.begin(), r.g.end());
  if (!(gmax > 0)) throw InvalidArgument("RDF has no counts");
  for (std::size_t b = 0; b < r.g.size(); ++b) {
    const bool left = b == 0 || r.g[b] >= r.g[b - 1];
    const bool right = b + 1 == r.g.size() || r.g[b] >= r.g[b + 1];
    if (left && right && r.g[b] >= 0.5 * gmax) return r.centers[b];
  }
  return r.centers[static_cast<std::size_t>(std::max_element(r.g.begin(), r.g.end()) - r.g.begin())];
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  if (window == 0) throw InvalidArgument("moving average window must be at least 1");
  const std::size_t n = x.size();
  const std::size_t before = (window - 1) / 2, after = window / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= before ? i - before : 0;
    const std::size_t hi = std::min(n, i + after + 1);
    out[i] = window == 1 ? x[i] : (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace mara

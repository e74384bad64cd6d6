#pragma once

// NVT Langevin dynamics for isolated clusters.
//
// Units: positions in A, velocities in A/fs, masses in amu, forces in
// kcal/mol/A, temperature in K. Acceleration = kAccel * F / m with
// kAccel = 4.184e-4 (1 kcal/mol/A/amu = 4.184e-4 A/fs^2).
//
// BAOAB splitting, one step of length dt:
//   B  v += dt/2 * a(x)
//   A  x += dt/2 * v
//   O  v  = c1 v + c2 sqrt(kB T / m) xi,   c1 = exp(-gamma dt), c2 = sqrt(1 - c1^2)
//   A  x += dt/2 * v
//   B  v += dt/2 * a(x')
// With gamma = 0 the O step is the identity and the scheme is velocity Verlet.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mara/config.hpp"
#include "mara/dataset.hpp"
#include "mara/metrics.hpp"
#include "mara/model.hpp"

namespace mara {

inline constexpr double kBoltzmann = 0.0019872041;  // kcal/(mol K)
inline constexpr double kAccel = 4.184e-4;          // (kcal/mol/A/amu) -> A/fs^2

/// Forces (kcal/mol/A) at the given positions; optionally the potential energy.
using ForceFn = std::function<std::vector<Vec3>(const std::vector<Vec3>&, double* energy)>;

/// Forces from a model for a fixed species list.
ForceFn model_forces(const ModelState& state, std::vector<int> species, const EvalOptions& opts = {});
/// Forces from an analytic synthetic potential.
ForceFn potential_forces(Potential kind, const PotentialParams& params = {});

struct MDState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<double> masses;
  double time = 0.0;
  std::mt19937_64 rng;
  /// Forces at `positions`; filled lazily by the integrator.
  std::vector<Vec3> forces;
  double potential = 0.0;

  void validate() const;
};

/// Velocities with each component drawn from N(0, kB T / m_i), then the
/// centre-of-mass velocity removed.
std::vector<Vec3> maxwell_boltzmann_init(double temperature, const std::vector<double>& masses, std::uint64_t seed);

/// Kinetic energy (kcal/mol) and the matching temperature with 3N degrees of
/// freedom (the Langevin thermostat also drives the centre of mass).
double kinetic_energy(const std::vector<Vec3>& velocities, const std::vector<double>& masses);
double kinetic_temperature(const std::vector<Vec3>& velocities, const std::vector<double>& masses);

/// One BAOAB step. Throws SimulationAbort on non-finite forces or positions.
void langevin_step(MDState& state, const ForceFn& forces, double dt, double friction, double temperature,
                   std::size_t step_index = 0);

struct ForceStats {
  std::size_t step = 0;
  double mean = 0.0;
  double q95 = 0.0;
  double max = 0.0;
};

struct MDOptions {
  std::size_t steps = 10000;
  double dt = 1.0;          // fs
  double friction = 0.1;    // 1/fs
  double temperature = 500.0;
  std::uint64_t seed = 0;
  std::size_t frame_every = 10;
  bool init_velocities = true;
};

struct Trajectory {
  std::vector<AtomicConfiguration> frames;     // every frame_every steps, plus step 0
  std::vector<double> frame_times;             // fs
  std::vector<ForceStats> force_stats;         // every step, including step 0
  std::vector<double> temperature;             // kinetic temperature every step, including step 0
  std::vector<double> potential;               // potential energy every step, including step 0
};

/// Runs `steps` steps from `initial`. Determined entirely by the seed.
/// On SimulationAbort the partial trajectory is lost; the error names the step.
Trajectory run(const AtomicConfiguration& initial, const ForceFn& forces, const MDOptions& opts);

struct RDF {
  std::vector<double> centers;   // bin centres (A)
  std::vector<double> g;         // normalised
  std::vector<double> counts;    // ordered pairs summed over frames
  double bin_width = 0.0;
};

/// Radial distribution of an isolated cluster. Ordered pair distances are
/// histogrammed on [0, r_max) and normalised per bin by the ideal-gas shell
/// count n_frames * N (N - 1) / V * 4 pi r^2 dr with V = 4/3 pi r_max^3, so
/// g = 1 for atoms spread uniformly over the ball of radius r_max.
RDF rdf(const std::vector<AtomicConfiguration>& frames, double r_max, std::size_t bins);

/// Centre of the first local maximum of g that reaches half the global maximum.
double first_peak(const RDF& r);

/// Centred window mean over indices [i - (w-1)/2, i + w/2]; near the ends the
/// window is clipped to the series, so it holds fewer points.
std::vector<double> moving_average(const std::vector<double>& series, std::size_t window);

}  // namespace mara

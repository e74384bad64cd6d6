#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mara/config.hpp"

namespace mara {

enum class Split { train, valid, test };
std::string_view to_string(Split s);

struct Dataset {
  std::vector<AtomicConfiguration> samples;
  std::vector<Split> splits;  // parallel to samples
  std::string provenance;     // "synth:<kind>(...)" or a file path

  std::size_t size() const { return samples.size(); }
  std::vector<const AtomicConfiguration*> subset(Split s) const;
  /// Copies of the samples in split `s`.
  std::vector<AtomicConfiguration> copy_of(Split s) const;
  /// Sorted list of atomic numbers that occur anywhere.
  std::vector<int> species() const;
};

/// Seeded shuffle into train/valid/test with the given fractions (test gets
/// the remainder). With two or more samples, train and valid are never empty.
void assign_splits(Dataset& data, std::uint64_t seed, double train_fraction = 0.8, double valid_fraction = 0.1);

// ---- extended XYZ --------------------------------------------------------------

/// Element symbol for atomic number z (1..118).
std::string element_symbol(int z);
/// Atomic number for a symbol or a numeric token; InvalidArgument otherwise.
int atomic_number(std::string_view symbol);
/// Standard atomic mass in amu.
double atomic_mass(int z);

/// Frames with `Properties=` including species:S:1 and pos:R:3 and optionally
/// forces:R:3 (a missing descriptor means species + pos). The comment's
/// `energy=` becomes the energy; every other key/value pair is kept in order.
/// Other per-atom columns are skipped. Throws ParseError (1-based line) on
/// malformed input and SchemaError when `require_energy` and a frame lacks it.
std::vector<AtomicConfiguration> parse_extxyz(std::string_view text, bool require_energy = false);
std::string write_extxyz(const std::vector<AtomicConfiguration>& frames);

Dataset read_extxyz_file(const std::string& path, bool require_energy = true);
void write_extxyz_file(const std::string& path, const std::vector<AtomicConfiguration>& frames);

// ---- synthetic potentials ---------------------------------------------------------

enum class Potential { morse, trimer };

struct PotentialParams {
  double depth = 1.0;          // D, kcal/mol
  double alpha = 1.0;          // a, 1/A
  double r0 = 1.5;             // A
  double k_angle = 0.5;        // kcal/mol
  double theta0_deg = 104.5;   // degrees
};

struct EnergyForces {
  double energy = 0.0;
  std::vector<Vec3> forces;
};

/// Morse dimer: E = D (1 - exp(-a (r - r0)))^2.
/// Trimer (atom 0 central): Morse on bonds 0-1 and 0-2 plus
/// k (cos theta - cos theta0)^2 on the angle 1-0-2.
EnergyForces evaluate_potential(Potential kind, const std::vector<Vec3>& positions, const PotentialParams& p = {});

Potential parse_potential(std::string_view name);
std::string_view to_string(Potential p);

/// n labelled geometries drawn by rejection sampling from the Boltzmann
/// distribution of the potential at temperature noise_T (K) over a bounded
/// window of internal coordinates (bonds in [0.6 r0, 2 r0]; trimer angle
/// within 45 degrees of theta0), randomly oriented and centred. Morse dimers
/// are H2-like (Z = 1, 1); trimers are O-H-H with O central. Splits are
/// assigned with the same seed.
Dataset synth_dataset(Potential kind, std::size_t n, std::uint64_t seed, double noise_T = 500.0,
                      const PotentialParams& p = {});

}  // namespace mara

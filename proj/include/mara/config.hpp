#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mara/geometry.hpp"

namespace mara {

/// One molecular geometry. Energies in kcal/mol, forces in kcal/mol/A.
struct AtomicConfiguration {
  std::vector<int> species;  // atomic numbers
  std::vector<Vec3> positions;
  std::optional<double> energy;
  std::optional<std::vector<Vec3>> forces;
  /// Extra comment-line key/value pairs, kept verbatim and in order.
  std::vector<std::pair<std::string, std::string>> info;

  std::size_t size() const { return positions.size(); }
  /// Throws InvalidArgument on non-finite positions or mismatched shapes.
  void validate() const;
};

}  // namespace mara

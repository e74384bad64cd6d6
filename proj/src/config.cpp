#include "mara/config.hpp"

#include <cmath>
#include <string>

#include "mara/errors.hpp"

namespace mara {

void AtomicConfiguration::validate() const {
  if (species.size() != positions.size())
    throw InvalidArgument("configuration has " + std::to_string(species.size()) + " species for " +
                          std::to_string(positions.size()) + " positions");
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (double c : positions[i])
      if (!std::isfinite(c)) throw InvalidArgument("position of atom " + std::to_string(i) + " is not finite");
  if (forces && forces->size() != positions.size())
    throw InvalidArgument("forces do not match the number of atoms");
  if (energy && !std::isfinite(*energy)) throw InvalidArgument("energy is not finite");
}

}  // namespace mara

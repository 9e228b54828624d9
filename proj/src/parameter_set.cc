#include "fedsim/parameter_set.h"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "fedsim/error.h"

namespace fedsim {

std::size_t LayerShape::ElementCount() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

std::size_t ParameterSet::ShapeElementCount() const {
  std::size_t total = 0;
  for (const auto& s : shapes) total += s.ElementCount();
  return total;
}

bool ParameterSet::AllFinite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ParameterSet::Validate() const {
  if (ShapeElementCount() != values.size()) {
    throw DimensionError(fmt::format(
        "parameter layout covers {} elements but {} values are present",
        ShapeElementCount(), values.size()));
  }
  if (!AllFinite()) throw InvalidArgument("parameter set has non-finite value");
}

bool ParameterSet::BitIdentical(const ParameterSet& other) const {
  if (shapes != other.shapes || values.size() != other.values.size()) {
    return false;
  }
  return values.empty() ||
         std::memcmp(values.data(), other.values.data(),
                     values.size() * sizeof(double)) == 0;
}

}  // namespace fedsim

#ifndef FEDSIM_PARAMETER_SET_H_
#define FEDSIM_PARAMETER_SET_H_

#include <cstddef>
#include <string>
#include <vector>

namespace fedsim {

struct LayerShape {
  std::string name;
  std::vector<std::size_t> dims;

  std::size_t ElementCount() const;
  bool operator==(const LayerShape&) const = default;
};

// Flat parameter vector plus the layer layout that partitions it. This is the
// unit exchanged between clients and the server.
struct ParameterSet {
  std::vector<double> values;
  std::vector<LayerShape> shapes;

  std::size_t size() const { return values.size(); }

  // Sum of ElementCount() over shapes.
  std::size_t ShapeElementCount() const;

  bool SameLayout(const ParameterSet& other) const {
    return shapes == other.shapes && values.size() == other.values.size();
  }

  bool AllFinite() const;

  // Throws DimensionError when the layout does not cover values exactly, or
  // InvalidArgument when a value is NaN/Inf.
  void Validate() const;

  // Bitwise equality of values (distinguishes -0.0 from 0.0) and layout.
  bool BitIdentical(const ParameterSet& other) const;

  bool operator==(const ParameterSet&) const = default;
};

}  // namespace fedsim

#endif  // FEDSIM_PARAMETER_SET_H_

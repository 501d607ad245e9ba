#include "clothsense/labels.hpp"

#include <string>

#include "clothsense/error.hpp"

namespace clothsense {

void PropertyLabels::validate() const {
  for (std::size_t i = 0; i < kNumProperties; ++i) {
    if (value[i] < 0 || value[i] >= kPropertyTable[i].classes) {
      throw ShapeError("label '" + std::string(kPropertyTable[i].name) + "' = " +
                       std::to_string(value[i]) + " outside [0, " +
                       std::to_string(kPropertyTable[i].classes) + ")");
    }
  }
}

Property property_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumProperties; ++i) {
    if (kPropertyTable[i].name == name) return static_cast<Property>(i);
  }
  throw ShapeError("unknown property '" + std::string(name) + "'");
}

}  // namespace clothsense

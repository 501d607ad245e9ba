#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace clothsense {

/// The eleven clothing properties. The enumerator order is the row order of
/// every report this project writes.
enum class Property : int {
  kThickness = 0,
  kSmoothness,
  kFuzziness,
  kSoftness,
  kStretchiness,
  kDurability,
  kWoolen,
  kWindproof,
  kSeason,
  kTextile,
  kWashMethod,
};

inline constexpr std::size_t kNumProperties = 11;

struct PropertyInfo {
  std::string_view name;
  int classes;
  /// Reference chance accuracy reported alongside every metric.
  double chance;
};

inline constexpr std::array<PropertyInfo, kNumProperties> kPropertyTable{{
    {"thickness", 5, 0.2},
    {"smoothness", 5, 0.2},
    {"fuzziness", 4, 0.25},
    {"softness", 2, 0.5},
    {"stretchiness", 2, 0.5},
    {"durability", 2, 0.5},
    {"woolen", 2, 0.5},
    {"windproof", 2, 0.5},
    {"season", 4, 0.25},
    {"textile", 20, 0.05},
    {"wash_method", 6, 0.17},
}};

inline constexpr const PropertyInfo& info(Property p) {
  return kPropertyTable[static_cast<std::size_t>(p)];
}
inline constexpr std::size_t index(Property p) { return static_cast<std::size_t>(p); }

inline constexpr std::array<std::string_view, 20> kTextileNames{
    "cotton", "satin",  "polyester", "denim", "gabardine", "broadcloth", "parka",
    "leather", "crepe", "corduroy",  "velvet", "flannel",  "fleece",     "hairy",
    "wool",   "knit",   "net",       "suit",  "woven",     "other"};

inline constexpr std::array<std::string_view, 6> kWashNames{
    "machine_warm",        "machine_cold",       "machine_cold_gentle",
    "machine_cold_gentle_no_tumble", "hand_wash", "dry_clean"};

inline constexpr std::array<std::string_view, 4> kSeasonNames{"all_season", "summer",
                                                               "spring_fall", "winter"};

/// Ground truth for one item: one class index per property.
struct PropertyLabels {
  std::array<int, kNumProperties> value{};

  int operator[](Property p) const { return value[index(p)]; }
  int& operator[](Property p) { return value[index(p)]; }

  /// Throws ShapeError when a field is outside its class range.
  void validate() const;

  bool operator==(const PropertyLabels&) const = default;
};

Property property_from_name(std::string_view name);

}  // namespace clothsense

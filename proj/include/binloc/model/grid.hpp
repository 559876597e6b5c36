#pragma once

// DOA class grid: 5-degree classes over a device-local region of interest,
// [-10, 65] for 16 classes or [-10, 105] for 24, plus the region split used
// by evaluation (frontal / diagonal / lateral).

#include <cmath>
#include <string>

#include <json.hpp>

#include "binloc/core/error.hpp"

namespace binloc {

enum class Region { frontal = 0, diagonal = 1, lateral = 2 };

inline const char* region_name(Region r) {
  switch (r) {
    case Region::frontal: return "frontal";
    case Region::diagonal: return "diagonal";
    default: return "lateral";
  }
}

struct ClassGrid {
  int d = 24;
  double lower = -10.0;
  double upper = 105.0;

  ClassGrid() = default;
  explicit ClassGrid(int num_classes) : d(num_classes) {
    require(d == 16 || d == 24, "class grid supports 16 or 24 classes, got " + std::to_string(d));
    upper = lower + 5.0 * (d - 1);
  }

  double center(int cls) const {
    require(cls >= 0 && cls < d, "class index out of range");
    return lower + 5.0 * cls;
  }

  bool in_roi(double azimuth) const { return azimuth >= lower && azimuth <= upper; }

  // Nearest class center; boundary ties round toward the larger azimuth.
  int nearest_class(double azimuth) const {
    require(in_roi(azimuth), "azimuth outside the region of interest");
    const int cls = static_cast<int>(std::floor((azimuth - lower) / 5.0 + 0.5));
    return cls < 0 ? 0 : (cls >= d ? d - 1 : cls);
  }

  Region region(int cls) const {
    const double c = center(cls);
    if (c <= 30.0) return Region::frontal;
    if (c <= 65.0) return Region::diagonal;
    return Region::lateral;
  }

  bool has_region(Region r) const { return r != Region::lateral || d == 24; }
  int num_regions() const { return d == 24 ? 3 : 2; }

  nlohmann::json to_json() const { return {{"d", d}, {"lower", lower}, {"upper", upper}}; }

  static ClassGrid from_json(const nlohmann::json& j) {
    ClassGrid g(j.at("d").get<int>());
    require_data(g.lower == j.at("lower").get<double>() && g.upper == j.at("upper").get<double>(),
                 "class grid bounds do not match the class count");
    return g;
  }
};

}  // namespace binloc

#pragma once

#include <string>
#include <vector>

#include "epwa/grid.hpp"

namespace epwa {

// Log floors applied before taking ln: ratio-type inputs (rural proportion,
// agricultural land fraction) and positive quantities (density, GDP).
inline constexpr double kRatioFloor = 1e-6;
inline constexpr double kPositiveFloor = 1e-3;
// Responses are squeezed into the open interval for the Beta likelihood.
inline constexpr double kResponseEps = 1e-6;

struct UnitFeatures {
  std::string unit_id;
  std::string country_iso3;
  std::string region_code;
  int year = 0;
  double ln_rural_prop = 0.0;   // ln of rural/total population ratio
  double ln_pop_density = 0.0;  // ln persons per km^2
  double ln_gdp_median = 0.0;   // ln of unit median GDP per capita
  double ln_agland = 0.0;       // ln of mean cropland+pasture fraction
};

struct FeatureBuildResult {
  std::vector<UnitFeatures> features;
  std::vector<std::string> skipped_units;  // zero total population or no valid cells
};

// Per-unit zonal features: rural proportion = sum(rural)/sum(total),
// density = sum(total)/sum(area), agland = zonal mean of clamp(crop+pasture, 0, 1),
// GDP = zonal median. All pass through the floored natural log.
FeatureBuildResult build_unit_features(const Raster& rural, const Raster& total,
                                       const Raster& gdp_pc, const Raster& cropland,
                                       const Raster& pasture, const ZoneMap& zones,
                                       const Raster& cell_area, int year);

// Clamp a [0,1] response into (0,1); outside [0,1] is a domain error.
double squeeze_response(double y);

// features.csv: unit_id,country_iso3,region_code,year,
//               ln_rural_prop,ln_pop_density,ln_gdp_median,ln_agland
std::vector<UnitFeatures> read_features_csv(const std::string& path);
void write_features_csv(const std::vector<UnitFeatures>& rows, const std::string& path);

}  // namespace epwa

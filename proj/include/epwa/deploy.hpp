#pragma once

#include <map>
#include <string>
#include <vector>

#include "epwa/grid.hpp"
#include "epwa/model.hpp"
#include "epwa/raster_ops.hpp"

namespace epwa {

// Default deployment grid: global extent (-180,180) x (-56,84) at 1/12 degree.
GridSpec default_deploy_grid();

struct DeployInputs {
  Raster rural, total, cropland, pasture, gdp_pc;
  ZoneMap admin2;     // GDP median aggregation units
  ZoneMap countries;  // legend carries country ISO3 and region code
  ResampleMethod resample_method = ResampleMethod::nearest;
};

struct DeployStack {
  int year = 0;
  std::string scenario;
  GridSpec grid;
  Raster rural, total, cropland, pasture;
  Raster gdp_feature;  // admin-2 median GDP broadcast to every cell
  Raster cell_area;
  ZoneMap admin2, countries;
};

// Resamples every layer onto the deployment grid, builds the broadcast GDP
// feature and floors population cells below one person to zero.
DeployStack build_stack(const DeployInputs& in, const GridSpec& grid, int year,
                        const std::string& scenario);

struct GridPredictReport {
  long valid_cells = 0;
  long masked_cells = 0;          // population present but another layer missing
  long fallback_country = 0;
  long fallback_region = 0;
  long fallback_none = 0;
  double pop_lost_to_mask = 0.0;  // population mass in masked cells
};

struct GridPrediction {
  Raster epwa;
  GridPredictReport report;
};

// Per-cell features (rural share, density, broadcast GDP, agricultural land)
// with the training-time log floors, then the scalar prediction path with
// country -> region fallback. Cells with zero or missing population are
// nodata.
GridPrediction predict_grid(const FittedModel& model, const DeployStack& stack,
                            int threads = 1);

struct WorkersResult {
  Raster workers;
  std::vector<std::string> units_missing_ratio;
};

// Head counts: workers = epwa * population * employable ratio of the cell's
// unit. Units absent from the ratio table yield nodata.
WorkersResult workers_raster(const Raster& epwa, const Raster& population,
                             const std::map<std::string, double>& employable,
                             const ZoneMap& zones);

struct CorrectionTable {
  int year = 0;
  std::map<std::string, double> xi;            // unit -> positive scale factor
  std::map<std::string, long> clamped_cells;   // filled by apply_correction
  std::vector<std::string> zero_denominator;   // units reported, xi omitted
};

// Population-weighted ratio aligning predicted unit aggregates with the
// reference EPWA (constant per unit-year).
CorrectionTable correction_factors(const std::map<std::string, double>& expected,
                                   const Raster& predicted, const Raster& population,
                                   const ZoneMap& zones, int year);

struct CorrectionResult {
  Raster corrected;
  long clamped_cells = 0;
  std::vector<std::string> units_without_xi;
};

// corrected = min(xi * predicted, 1 - eps); units without a factor pass
// through unchanged. No smoothing across unit boundaries.
CorrectionResult apply_correction(const Raster& predicted, CorrectionTable& table,
                                  const ZoneMap& zones);

// unit_id,year,xi,clamped_cells
void write_correction_csv(const CorrectionTable& table, const std::string& path);

// Reference series CSVs: unit_id,year,value (header required).
std::map<std::pair<std::string, int>, double> read_unit_year_csv(const std::string& path,
                                                                 const std::string& value_name);

// Regional totals of a workers raster keyed by the countries legend region.
std::map<std::string, double> regional_totals(const Raster& workers, const ZoneMap& countries);

}  // namespace epwa

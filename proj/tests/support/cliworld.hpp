// On-disk fixture for the pipeline commands: rasters, zone maps, labels and
// a run config covering features -> fit -> validate -> deploy.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "epwa/grid.hpp"
#include "epwa/labels.hpp"

namespace cliworld {

namespace fs = std::filesystem;

struct World {
  fs::path dir;
  std::string config_path;
  epwa::GridSpec grid;
  std::vector<int> label_years;
  std::vector<int> deploy_years;
};

// Deterministic value in (0,1) from integer keys.
inline double unit_value(int a, int b, int c) {
  const double t = std::sin(double(a) * 12.9898 + double(b) * 78.233 + double(c) * 0.417) *
                   43758.5453;
  return t - std::floor(t);
}

inline World write_cli_world(const fs::path& dir) {
  fs::create_directories(dir);
  World w;
  w.dir = dir;
  w.grid = epwa::GridSpec::from_extent(0.0, 8.0, 0.0, 4.0, 0.5);
  for (int y = 2000; y <= 2020; ++y) w.label_years.push_back(y);
  w.deploy_years = {2010, 2050};

  const int rows = w.grid.n_rows, cols = w.grid.n_cols;

  // Units: 6 zones, two per subnational country (AAA, BBB) plus one-country
  // units CCC and DDD. Country bands by column.
  epwa::Raster unit_ids = epwa::Raster::constant(w.grid, 0.0);
  epwa::Raster country_ids = epwa::Raster::constant(w.grid, 0.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int c = std::min(3, 4 * j / cols);  // 0..3 -> AAA,BBB,CCC,DDD
      country_ids.at(i, j) = c + 1;
      const int quarter = std::min(3, 4 * i / rows);
      int zone = 0;
      if (c == 0) zone = 1 + quarter;       // AAA-0..AAA-3
      else if (c == 1) zone = 5 + quarter;  // BBB-0..BBB-3
      else if (c == 2) zone = 9;            // CCC
      else zone = 10;                       // DDD
      unit_ids.at(i, j) = zone;
    }
  epwa::write_gwg1(unit_ids, (dir / "units.gwg").string());
  epwa::write_gwg1(country_ids, (dir / "countries.gwg").string());
  epwa::Raster admin0 = epwa::Raster::nodata_like(w.grid);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int c = std::min(3, 4 * j / cols);
      if (c <= 1) admin0.at(i, j) = c + 1;  // countries with subnational units
    }
  epwa::write_gwg1(admin0, (dir / "admin0.gwg").string());
  {
    std::ofstream os(dir / "units_legend.csv");
    os << "zone_id,unit_id,country_iso3,region_code\n";
    for (int u = 0; u < 4; ++u)
      os << (1 + u) << ",AAA-" << u << ",AAA,R01\n";
    for (int u = 0; u < 4; ++u)
      os << (5 + u) << ",BBB-" << u << ",BBB,R02\n";
    os << "9,CCC,CCC,R01\n10,DDD,DDD,R03\n";
  }
  {
    std::ofstream os(dir / "countries_legend.csv");
    os << "zone_id,unit_id,country_iso3,region_code\n";
    os << "1,AAA,AAA,R01\n2,BBB,BBB,R02\n3,CCC,CCC,R01\n4,DDD,DDD,R03\n";
  }
  {
    std::ofstream os(dir / "admin0_legend.csv");
    os << "zone_id,unit_id,country_iso3,region_code\n";
    os << "1,AAA,AAA,R01\n2,BBB,BBB,R02\n";
  }

  auto value_raster = [&](int salt, double lo, double hi) {
    epwa::Raster r = epwa::Raster::constant(w.grid, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        r.at(i, j) = lo + (hi - lo) * unit_value(i, j, salt);
    return r;
  };

  epwa::write_gwg1(value_raster(1, 0.05, 0.7), (dir / "cropland.gwg").string());
  epwa::write_gwg1(value_raster(2, 0.05, 0.5), (dir / "pasture.gwg").string());
  for (int anchor : {2000, 2010, 2020}) {
    epwa::write_gwg1(value_raster(anchor, 50.0, 800.0),
                     (dir / ("total_" + std::to_string(anchor) + ".gwg")).string());
    epwa::write_gwg1(value_raster(anchor + 7, 20.0, 400.0),
                     (dir / ("rural_" + std::to_string(anchor) + ".gwg")).string());
  }
  for (int y : w.label_years)
    epwa::write_gwg1(value_raster(100 + y, 400.0, 30000.0),
                     (dir / ("gdp_" + std::to_string(y) + ".gwg")).string());

  // deploy-time rasters per (scenario, year)
  for (int y : w.deploy_years) {
    epwa::write_gwg1(value_raster(y, 50.0, 900.0),
                     (dir / ("total_ssp2_" + std::to_string(y) + ".gwg")).string());
    epwa::write_gwg1(value_raster(y + 3, 20.0, 500.0),
                     (dir / ("rural_ssp2_" + std::to_string(y) + ".gwg")).string());
    epwa::write_gwg1(value_raster(y + 11, 400.0, 30000.0),
                     (dir / ("gdp_ssp2_" + std::to_string(y) + ".gwg")).string());
  }

  // labels: subnational units for AAA/BBB, national records for AAA/BBB
  // (displaced into the reserve) and national-only CCC/DDD
  {
    std::ofstream os(dir / "labels.csv");
    os << "unit_id,country_iso3,region_code,admin_level,year,epwa\n";
    const char* units[8] = {"AAA-0", "AAA-1", "AAA-2", "AAA-3",
                            "BBB-0", "BBB-1", "BBB-2", "BBB-3"};
    const char* unit_iso[8] = {"AAA", "AAA", "AAA", "AAA", "BBB", "BBB", "BBB", "BBB"};
    const char* unit_region[8] = {"R01", "R01", "R01", "R01",
                                  "R02", "R02", "R02", "R02"};
    for (int u = 0; u < 8; ++u)
      for (int y : w.label_years)
        os << units[u] << ',' << unit_iso[u] << ',' << unit_region[u] << ",1," << y
           << ',' << 0.05 + 0.8 * unit_value(u, y, 31) << "\n";
    const char* nats[4] = {"AAA", "BBB", "CCC", "DDD"};
    const char* nat_region[4] = {"R01", "R02", "R01", "R03"};
    for (int c = 0; c < 4; ++c)
      for (int y : w.label_years)
        os << nats[c] << ',' << nats[c] << ',' << nat_region[c] << ",0," << y << ','
           << 0.05 + 0.8 * unit_value(c, y, 47) << "\n";
  }

  // employable ratios and the correction reference for the deploy years
  {
    std::ofstream os(dir / "employable.csv");
    os << "unit_id,year,ratio\n";
    const char* units[10] = {"AAA-0", "AAA-1", "AAA-2", "AAA-3", "BBB-0",
                             "BBB-1", "BBB-2", "BBB-3", "CCC",   "DDD"};
    for (int u = 0; u < 10; ++u)
      for (int y : w.deploy_years) os << units[u] << ',' << y << ",0.6\n";
  }
  {
    std::ofstream os(dir / "reference.csv");
    os << "unit_id,year,epwa\n";
    const char* units[10] = {"AAA-0", "AAA-1", "AAA-2", "AAA-3", "BBB-0",
                             "BBB-1", "BBB-2", "BBB-3", "CCC",   "DDD"};
    for (int u = 0; u < 10; ++u)
      os << units[u] << ",2010," << 0.1 + 0.3 * unit_value(u, 2010, 53) << "\n";
  }

  // run configuration
  {
    std::ofstream os(dir / "config.json");
    os << R"({
  "seed": 7,
  "threads": 1,
  "out_dir": ")" << (dir / "out").string() << R"(",
  "paths": {
    "labels_csv": "labels.csv",
    "features_csv": ")" << (dir / "out" / "features.csv").string() << R"("
  },
  "features": {
    "years": [)";
    for (std::size_t i = 0; i < w.label_years.size(); ++i)
      os << (i ? "," : "") << w.label_years[i];
    os << R"(],
    "zones": [
      {"raster": "units.gwg", "legend": "units_legend.csv"},
      {"raster": "admin0.gwg", "legend": "admin0_legend.csv"}
    ],
    "rasters": {
      "cropland": "cropland.gwg",
      "pasture": "pasture.gwg",
      "cell_area": "",
      "gdp_pattern": "gdp_{year}.gwg",
      "rural_anchors": {"2000": "rural_2000.gwg", "2010": "rural_2010.gwg", "2020": "rural_2020.gwg"},
      "total_anchors": {"2000": "total_2000.gwg", "2010": "total_2010.gwg", "2020": "total_2020.gwg"}
    }
  },
  "model": {
    "structure": "smooths_re",
    "grouping": "country",
    "univariate_rank": 5,
    "tensor_rank": 4,
    "lambda_grid": {"log10_min": -2, "log10_max": 6, "points": 5, "sweeps": 1}
  },
  "fit": {
    "model_out": "model.json",
    "metrics_csv": "fit_metrics.csv",
    "compare_structures": ["linear", "smooths_re"],
    "partial_effects": true
  },
  "validate": {
    "strategies": ["spatial", "time_forward", "time_backward", "multiscale"],
    "regions": [],
    "report_csv": "validation.csv"
  },
  "deploy": {
    "grid": {"lon_min": 0.0, "lon_max": 8.0, "lat_min": 0.0, "lat_max": 4.0,
             "cell_size": 0.5, "nodata": -9999.0},
    "years": [2010, 2050],
    "scenarios": ["SSP2"],
    "model_path": ")" << (dir / "out" / "model.json").string() << R"(",
    "rasters": {
      "rural_pattern": "rural_{scenario}_{year}.gwg",
      "total_pattern": "total_{scenario}_{year}.gwg",
      "gdp_pattern": "gdp_{scenario}_{year}.gwg",
      "cropland": "cropland.gwg",
      "pasture": "pasture.gwg"
    },
    "zones": {
      "admin2": {"raster": "units.gwg", "legend": "units_legend.csv"},
      "countries": {"raster": "countries.gwg", "legend": "countries_legend.csv"}
    },
    "employable_csv": "employable.csv",
    "correction_reference_csv": "reference.csv",
    "carry_forward_correction": false,
    "resample_method": "nearest",
    "formats": ["gwg", "asc"]
  }
})";
  }
  w.config_path = (dir / "config.json").string();
  return w;
}

}  // namespace cliworld

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace epwa {

// Geographic grid: degrees, north-up, row 0 is the top (northernmost) row,
// values stored row-major. Cell centers sit at lon_min + (j+0.5)*cell_size.
struct GridSpec {
  double lon_min = 0.0;
  double lon_max = 0.0;
  double lat_min = 0.0;
  double lat_max = 0.0;
  double cell_size = 0.0;
  double nodata = -9999.0;
  int n_rows = 0;
  int n_cols = 0;

  // Throws on inconsistent extent/resolution (extent must be an integer
  // number of cells within 1e-9 before rounding).
  void validate() const;

  std::size_t size() const { return std::size_t(n_rows) * std::size_t(n_cols); }
  std::size_t index(int row, int col) const { return std::size_t(row) * n_cols + col; }

  double lon_center(int col) const { return lon_min + (col + 0.5) * cell_size; }
  double lat_center(int row) const { return lat_max - (row + 0.5) * cell_size; }

  // Cell containing a point; returns false when the point is outside the grid.
  bool locate(double lon, double lat, int& row, int& col) const;

  bool same_grid(const GridSpec& o) const;

  static GridSpec from_extent(double lon_min, double lon_max, double lat_min,
                              double lat_max, double cell_size,
                              double nodata = -9999.0);
};

struct Raster {
  GridSpec spec;
  std::vector<double> values;
  std::string variable_id;
  int year = 0;
  std::string scenario = "observed";

  void validate() const;  // length check + finiteness of non-nodata values

  double at(int row, int col) const { return values[spec.index(row, col)]; }
  double& at(int row, int col) { return values[spec.index(row, col)]; }
  bool is_nodata(double v) const { return v == spec.nodata; }

  static Raster constant(const GridSpec& spec, double value);
  static Raster nodata_like(const GridSpec& spec);
};

struct ZoneInfo {
  std::string unit_id;
  std::string country_iso3;
  std::string region_code;
};

struct ZoneMap {
  static constexpr std::int64_t kNoZone = std::numeric_limits<std::int64_t>::min();

  GridSpec spec;
  std::vector<std::int64_t> zone_ids;           // kNoZone marks unassigned cells
  std::map<std::int64_t, ZoneInfo> legend;      // zone_id -> unit lineage

  void validate() const;  // every assigned zone id must appear in the legend

  std::int64_t zone_at(int row, int col) const { return zone_ids[spec.index(row, col)]; }
  const ZoneInfo* info_at(int row, int col) const;

  // Zone raster values are rounded to integers; raster nodata -> kNoZone.
  static ZoneMap from_raster(const Raster& ids, std::map<std::int64_t, ZoneInfo> legend);
};

// ---- file formats ----

// "GWG1" binary grid exchange format, little-endian:
//   magic "GWG1"; f64 lon_min, lon_max, lat_min, lat_max, cell_size, nodata;
//   u32 n_rows, n_cols; u8 dtype (0 = f32, 1 = f64); row-major values, top row first.
Raster read_gwg1(const std::string& path);
void write_gwg1(const Raster& r, const std::string& path, bool as_f32 = false);

// ESRI ASCII grid (ncols/nrows/xllcorner/yllcorner/cellsize/NODATA_value).
// Values are printed with 17 significant digits so doubles survive round-trips.
Raster read_esri_ascii(const std::string& path);
void write_esri_ascii(const Raster& r, const std::string& path);

// Dispatch on extension: .gwg -> GWG1, .asc -> ESRI ASCII.
Raster read_raster(const std::string& path);
void write_raster(const Raster& r, const std::string& path);

// Zone legend CSV: zone_id,unit_id,country_iso3,region_code (header required).
std::map<std::int64_t, ZoneInfo> read_zone_legend(const std::string& path);
void write_zone_legend(const std::map<std::int64_t, ZoneInfo>& legend, const std::string& path);
ZoneMap read_zonemap(const std::string& raster_path, const std::string& legend_path);

}  // namespace epwa

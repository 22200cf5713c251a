#include "epwa/grid.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "epwa/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "GWG1 I/O assumes a little-endian host");

namespace epwa {

void GridSpec::validate() const {
  if (!(lon_min < lon_max) || !(lat_min < lat_max))
    fail_invalid("grid spec: extent must satisfy lon_min < lon_max and lat_min < lat_max");
  if (!(cell_size > 0.0)) fail_invalid("grid spec: cell_size must be positive");
  if (!std::isfinite(nodata)) fail_invalid("grid spec: nodata sentinel must be finite");
  const double fc = (lon_max - lon_min) / cell_size;
  const double fr = (lat_max - lat_min) / cell_size;
  if (std::fabs(fc - std::round(fc)) > 1e-9 || std::fabs(fr - std::round(fr)) > 1e-9)
    fail_invalid("grid spec: extent is not an integer number of cells");
  if (n_cols != int(std::lround(fc)) || n_rows != int(std::lround(fr)))
    fail_invalid("grid spec: n_rows/n_cols do not match extent and cell_size");
}

bool GridSpec::locate(double lon, double lat, int& row, int& col) const {
  if (lon < lon_min || lon > lon_max || lat < lat_min || lat > lat_max) return false;
  col = int(std::floor((lon - lon_min) / cell_size));
  row = int(std::floor((lat_max - lat) / cell_size));
  if (col == n_cols) col = n_cols - 1;  // points on the east/south edge
  if (row == n_rows) row = n_rows - 1;
  return true;
}

bool GridSpec::same_grid(const GridSpec& o) const {
  return lon_min == o.lon_min && lon_max == o.lon_max && lat_min == o.lat_min &&
         lat_max == o.lat_max && cell_size == o.cell_size && n_rows == o.n_rows &&
         n_cols == o.n_cols;
}

GridSpec GridSpec::from_extent(double lon_min, double lon_max, double lat_min,
                               double lat_max, double cell_size, double nodata) {
  GridSpec s;
  s.lon_min = lon_min;
  s.lon_max = lon_max;
  s.lat_min = lat_min;
  s.lat_max = lat_max;
  s.cell_size = cell_size;
  s.nodata = nodata;
  s.n_cols = int(std::lround((lon_max - lon_min) / cell_size));
  s.n_rows = int(std::lround((lat_max - lat_min) / cell_size));
  s.validate();
  return s;
}

void Raster::validate() const {
  spec.validate();
  if (values.size() != spec.size())
    fail_invalid("raster: values length does not match n_rows*n_cols");
  for (double v : values)
    if (v != spec.nodata && !std::isfinite(v))
      fail_invalid("raster: non-nodata value is not finite");
}

Raster Raster::constant(const GridSpec& spec, double value) {
  Raster r;
  r.spec = spec;
  r.values.assign(spec.size(), value);
  return r;
}

Raster Raster::nodata_like(const GridSpec& spec) {
  return constant(spec, spec.nodata);
}

const ZoneInfo* ZoneMap::info_at(int row, int col) const {
  const std::int64_t z = zone_at(row, col);
  if (z == kNoZone) return nullptr;
  auto it = legend.find(z);
  return it == legend.end() ? nullptr : &it->second;
}

void ZoneMap::validate() const {
  spec.validate();
  if (zone_ids.size() != spec.size())
    fail_invalid("zone map: id array length does not match grid");
  for (std::int64_t z : zone_ids)
    if (z != kNoZone && !legend.count(z))
      fail_invalid("zone map: zone id " + std::to_string(z) + " missing from legend");
}

ZoneMap ZoneMap::from_raster(const Raster& ids, std::map<std::int64_t, ZoneInfo> legend) {
  ids.validate();
  ZoneMap zm;
  zm.spec = ids.spec;
  zm.legend = std::move(legend);
  zm.zone_ids.resize(ids.values.size());
  for (std::size_t i = 0; i < ids.values.size(); ++i)
    zm.zone_ids[i] = ids.is_nodata(ids.values[i]) ? kNoZone : std::int64_t(std::llround(ids.values[i]));
  zm.validate();
  return zm;
}

// ---- GWG1 ----

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_gwg1(const Raster& r, const std::string& path, bool as_f32) {
  r.spec.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) fail_io("cannot open for writing: " + path);
  os.write("GWG1", 4);
  put(os, r.spec.lon_min);
  put(os, r.spec.lon_max);
  put(os, r.spec.lat_min);
  put(os, r.spec.lat_max);
  put(os, r.spec.cell_size);
  put(os, r.spec.nodata);
  put(os, std::uint32_t(r.spec.n_rows));
  put(os, std::uint32_t(r.spec.n_cols));
  put(os, std::uint8_t(as_f32 ? 0 : 1));
  if (as_f32) {
    for (double v : r.values) put(os, float(v));
  } else {
    os.write(reinterpret_cast<const char*>(r.values.data()),
             std::streamsize(r.values.size() * sizeof(double)));
  }
  if (!os) fail_io("write failed: " + path);
}

Raster read_gwg1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_io("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "GWG1", 4) != 0)
    fail_io("not a GWG1 file: " + path);
  Raster r;
  r.spec.lon_min = get<double>(is);
  r.spec.lon_max = get<double>(is);
  r.spec.lat_min = get<double>(is);
  r.spec.lat_max = get<double>(is);
  r.spec.cell_size = get<double>(is);
  r.spec.nodata = get<double>(is);
  r.spec.n_rows = int(get<std::uint32_t>(is));
  r.spec.n_cols = int(get<std::uint32_t>(is));
  const auto dtype = get<std::uint8_t>(is);
  if (!is) fail_io("truncated GWG1 header: " + path);
  if (dtype > 1) fail_io("unknown GWG1 dtype: " + path);
  r.spec.validate();
  r.values.resize(r.spec.size());
  if (dtype == 0) {
    for (double& v : r.values) v = double(get<float>(is));
  } else {
    is.read(reinterpret_cast<char*>(r.values.data()),
            std::streamsize(r.values.size() * sizeof(double)));
  }
  if (!is) fail_io("truncated GWG1 values: " + path);
  return r;
}

// ---- ESRI ASCII ----

void write_esri_ascii(const Raster& r, const std::string& path) {
  r.spec.validate();
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  char buf[40];
  os << "ncols " << r.spec.n_cols << "\n";
  os << "nrows " << r.spec.n_rows << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", r.spec.lon_min);
  os << "xllcorner " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", r.spec.lat_min);
  os << "yllcorner " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", r.spec.cell_size);
  os << "cellsize " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", r.spec.nodata);
  os << "NODATA_value " << buf << "\n";
  for (int i = 0; i < r.spec.n_rows; ++i) {
    for (int j = 0; j < r.spec.n_cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r.at(i, j));
      os << buf << (j + 1 == r.spec.n_cols ? "" : " ");
    }
    os << "\n";
  }
  if (!os) fail_io("write failed: " + path);
}

Raster read_esri_ascii(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_io("cannot open: " + path);
  int ncols = -1, nrows = -1;
  double xll = 0, yll = 0, cell = 0, nodata = -9999.0;
  bool have_nodata = false;
  std::string key;
  // Header: key/value lines until the first numeric token.
  while (is >> key) {
    std::string lower;
    for (char c : key) lower += char(std::tolower((unsigned char)c));
    if (lower == "ncols") is >> ncols;
    else if (lower == "nrows") is >> nrows;
    else if (lower == "xllcorner") is >> xll;
    else if (lower == "yllcorner") is >> yll;
    else if (lower == "cellsize") is >> cell;
    else if (lower == "nodata_value") { is >> nodata; have_nodata = true; }
    else break;  // first value token
  }
  if (ncols <= 0 || nrows <= 0 || cell <= 0)
    fail_io("bad ESRI ASCII header: " + path);
  (void)have_nodata;
  Raster r;
  r.spec.lon_min = xll;
  r.spec.lat_min = yll;
  r.spec.cell_size = cell;
  r.spec.nodata = nodata;
  r.spec.n_cols = ncols;
  r.spec.n_rows = nrows;
  r.spec.lon_max = xll + ncols * cell;
  r.spec.lat_max = yll + nrows * cell;
  r.values.resize(r.spec.size());
  // `key` already holds the first value token.
  r.values[0] = std::stod(key);
  for (std::size_t i = 1; i < r.values.size(); ++i)
    if (!(is >> r.values[i])) fail_io("truncated ESRI ASCII values: " + path);
  return r;
}

namespace {

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

Raster read_raster(const std::string& path) {
  if (ends_with(path, ".asc")) return read_esri_ascii(path);
  if (ends_with(path, ".gwg")) return read_gwg1(path);
  fail_io("unknown raster extension (expected .gwg or .asc): " + path);
}

void write_raster(const Raster& r, const std::string& path) {
  if (ends_with(path, ".asc")) return write_esri_ascii(r, path);
  if (ends_with(path, ".gwg")) return write_gwg1(r, path);
  fail_io("unknown raster extension (expected .gwg or .asc): " + path);
}

// ---- zone legend CSV ----

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') { cur += '"'; ++i; }
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::map<std::int64_t, ZoneInfo> read_zone_legend(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_io("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) fail_io("empty legend CSV: " + path);
  auto hdr = split_csv_line(line);
  if (hdr.size() < 4 || hdr[0] != "zone_id" || hdr[1] != "unit_id" ||
      hdr[2] != "country_iso3" || hdr[3] != "region_code")
    fail_io("legend CSV must start with header zone_id,unit_id,country_iso3,region_code: " + path);
  std::map<std::int64_t, ZoneInfo> legend;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < 4) fail_io("short legend row in " + path + ": " + line);
    legend[std::stoll(f[0])] = ZoneInfo{f[1], f[2], f[3]};
  }
  return legend;
}

void write_zone_legend(const std::map<std::int64_t, ZoneInfo>& legend, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  os << "zone_id,unit_id,country_iso3,region_code\n";
  for (const auto& [id, info] : legend)
    os << id << ',' << info.unit_id << ',' << info.country_iso3 << ',' << info.region_code << "\n";
  if (!os) fail_io("write failed: " + path);
}

ZoneMap read_zonemap(const std::string& raster_path, const std::string& legend_path) {
  return ZoneMap::from_raster(read_raster(raster_path), read_zone_legend(legend_path));
}

}  // namespace epwa

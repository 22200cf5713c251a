#include "epwa/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "epwa/errors.hpp"
#include "epwa/raster_ops.hpp"

namespace epwa {

double squeeze_response(double y) {
  if (!(y >= 0.0 && y <= 1.0))
    fail_invalid("squeeze_response: value outside [0,1]");
  return std::min(std::max(y, kResponseEps), 1.0 - kResponseEps);
}

FeatureBuildResult build_unit_features(const Raster& rural, const Raster& total,
                                       const Raster& gdp_pc, const Raster& cropland,
                                       const Raster& pasture, const ZoneMap& zones,
                                       const Raster& cell_area, int year) {
  for (const Raster* r : {&rural, &total, &gdp_pc, &cropland, &pasture, &cell_area})
    if (!r->spec.same_grid(zones.spec))
      fail_invalid("build_unit_features: raster grid does not match zone map");

  // Combined agricultural land fraction, clamped to [0,1]; nodata when
  // either layer is missing.
  Raster agland = Raster::nodata_like(zones.spec);
  for (std::size_t i = 0; i < agland.values.size(); ++i) {
    const double c = cropland.values[i];
    const double p = pasture.values[i];
    if (cropland.is_nodata(c) || pasture.is_nodata(p)) continue;
    agland.values[i] = std::min(std::max(c + p, 0.0), 1.0);
  }

  const auto sum_rural = zonal_stat(rural, zones, ZonalStat::sum);
  const auto sum_total = zonal_stat(total, zones, ZonalStat::sum);
  const auto sum_area = zonal_stat(cell_area, zones, ZonalStat::sum);
  const auto mean_ag = zonal_stat(agland, zones, ZonalStat::mean);
  const auto med_gdp = zonal_stat(gdp_pc, zones, ZonalStat::median);

  // Unit lineage, in legend order for deterministic output.
  std::map<std::string, const ZoneInfo*> units;
  for (const auto& [id, info] : zones.legend)
    units.emplace(info.unit_id, &info);

  FeatureBuildResult out;
  for (const auto& [unit, info] : units) {
    const auto tt = sum_total.find(unit);
    if (tt == sum_total.end() || tt->second <= 0.0) {
      out.skipped_units.push_back(unit);
      continue;
    }
    const auto rr = sum_rural.find(unit);
    const auto aa = sum_area.find(unit);
    const auto gg = med_gdp.find(unit);
    const auto ag = mean_ag.find(unit);
    if (aa == sum_area.end() || gg == med_gdp.end() || ag == mean_ag.end()) {
      out.skipped_units.push_back(unit);
      continue;
    }
    const double rural_sum = rr == sum_rural.end() ? 0.0 : rr->second;
    double rural_prop = rural_sum / tt->second;
    rural_prop = std::min(std::max(rural_prop, kRatioFloor), 1.0);
    const double density = std::max(tt->second / aa->second, kPositiveFloor);
    const double gdp = std::max(gg->second, kPositiveFloor);
    const double agfrac = std::min(std::max(ag->second, kRatioFloor), 1.0);

    UnitFeatures f;
    f.unit_id = unit;
    f.country_iso3 = info->country_iso3;
    f.region_code = info->region_code;
    f.year = year;
    f.ln_rural_prop = std::log(rural_prop);
    f.ln_pop_density = std::log(density);
    f.ln_gdp_median = std::log(gdp);
    f.ln_agland = std::log(agfrac);
    out.features.push_back(std::move(f));
  }
  return out;
}

// ---- CSV ----

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') { out.push_back(cur); cur.clear(); }
    else if (c != '\r') cur += c;
  }
  out.push_back(cur);
  return out;
}

const std::vector<std::string> kHeader = {
    "unit_id", "country_iso3", "region_code", "year",
    "ln_rural_prop", "ln_pop_density", "ln_gdp_median", "ln_agland"};

}  // namespace

std::vector<UnitFeatures> read_features_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_io("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) fail_io("empty features CSV: " + path);
  if (split_line(line) != kHeader) fail_io("features CSV header mismatch: " + path);
  std::vector<UnitFeatures> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_line(line);
    if (f.size() != 8) fail_io("features CSV row with wrong field count: " + line);
    UnitFeatures u;
    u.unit_id = f[0];
    u.country_iso3 = f[1];
    u.region_code = f[2];
    u.year = std::stoi(f[3]);
    u.ln_rural_prop = std::stod(f[4]);
    u.ln_pop_density = std::stod(f[5]);
    u.ln_gdp_median = std::stod(f[6]);
    u.ln_agland = std::stod(f[7]);
    for (double v : {u.ln_rural_prop, u.ln_pop_density, u.ln_gdp_median, u.ln_agland})
      if (!std::isfinite(v)) fail_invalid("features CSV: non-finite feature for " + u.unit_id);
    out.push_back(std::move(u));
  }
  return out;
}

void write_features_csv(const std::vector<UnitFeatures>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  os << "unit_id,country_iso3,region_code,year,ln_rural_prop,ln_pop_density,ln_gdp_median,ln_agland\n";
  char buf[4][32];
  for (const auto& r : rows) {
    std::snprintf(buf[0], 32, "%.17g", r.ln_rural_prop);
    std::snprintf(buf[1], 32, "%.17g", r.ln_pop_density);
    std::snprintf(buf[2], 32, "%.17g", r.ln_gdp_median);
    std::snprintf(buf[3], 32, "%.17g", r.ln_agland);
    os << r.unit_id << ',' << r.country_iso3 << ',' << r.region_code << ',' << r.year
       << ',' << buf[0] << ',' << buf[1] << ',' << buf[2] << ',' << buf[3] << "\n";
  }
  if (!os) fail_io("write failed: " + path);
}

}  // namespace epwa

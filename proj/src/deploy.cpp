#include "epwa/deploy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

#include "epwa/beta.hpp"
#include "epwa/errors.hpp"
#include "epwa/features.hpp"

namespace epwa {

GridSpec default_deploy_grid() {
  return GridSpec::from_extent(-180.0, 180.0, -56.0, 84.0, 1.0 / 12.0);
}

namespace {

Raster to_grid(const Raster& r, const GridSpec& grid, ResampleMethod method) {
  if (r.spec.same_grid(grid)) return r;
  return resample(r, grid, method);
}

ZoneMap zones_to_grid(const ZoneMap& z, const GridSpec& grid) {
  if (z.spec.same_grid(grid)) return z;
  // Nearest-neighbour on the id plane keeps ids intact.
  Raster ids = Raster::nodata_like(z.spec);
  for (std::size_t i = 0; i < ids.values.size(); ++i)
    if (z.zone_ids[i] != ZoneMap::kNoZone) ids.values[i] = double(z.zone_ids[i]);
  return ZoneMap::from_raster(resample(ids, grid, ResampleMethod::nearest), z.legend);
}

// Grid cells below one person are treated as empty (interpolation artifacts).
void floor_population(Raster& r) {
  for (double& v : r.values)
    if (!r.is_nodata(v) && v > 0.0 && v < 1.0) v = 0.0;
}

}  // namespace

DeployStack build_stack(const DeployInputs& in, const GridSpec& grid, int year,
                        const std::string& scenario) {
  DeployStack s;
  s.year = year;
  s.scenario = scenario;
  s.grid = grid;
  s.rural = to_grid(in.rural, grid, in.resample_method);
  s.total = to_grid(in.total, grid, in.resample_method);
  s.cropland = to_grid(in.cropland, grid, in.resample_method);
  s.pasture = to_grid(in.pasture, grid, in.resample_method);
  s.admin2 = zones_to_grid(in.admin2, grid);
  s.countries = zones_to_grid(in.countries, grid);
  floor_population(s.total);
  floor_population(s.rural);
  const Raster gdp = to_grid(in.gdp_pc, grid, in.resample_method);
  s.gdp_feature = broadcast_zonal(zonal_stat(gdp, s.admin2, ZonalStat::median), s.admin2);
  s.cell_area = cell_area_km2(grid);
  return s;
}

namespace {

struct CellRow {
  std::size_t cell = 0;
  std::array<double, 4> feats{};
  const ZoneInfo* info = nullptr;
};

}  // namespace

GridPrediction predict_grid(const FittedModel& model, const DeployStack& stack,
                            int threads) {
  const GridSpec& g = stack.grid;
  for (const Raster* r : {&stack.rural, &stack.total, &stack.cropland, &stack.pasture,
                          &stack.gdp_feature, &stack.cell_area})
    if (!r->spec.same_grid(g)) fail_invalid("predict_grid: stack layer off the deploy grid");

  GridPrediction out;
  out.epwa = Raster::nodata_like(g);
  out.epwa.variable_id = "epwa";
  out.epwa.year = stack.year;
  out.epwa.scenario = stack.scenario;

  std::vector<CellRow> rows;
  rows.reserve(g.size() / 4);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double total = stack.total.values[i];
    if (stack.total.is_nodata(total) || total <= 0.0) continue;  // nodata: no population
    const double rural = stack.rural.values[i];
    const double crop = stack.cropland.values[i];
    const double past = stack.pasture.values[i];
    const double gdp = stack.gdp_feature.values[i];
    const ZoneInfo* info = stack.countries.info_at(int(i) / g.n_cols, int(i) % g.n_cols);
    if (stack.rural.is_nodata(rural) || stack.cropland.is_nodata(crop) ||
        stack.pasture.is_nodata(past) || stack.gdp_feature.is_nodata(gdp) || !info) {
      ++out.report.masked_cells;
      out.report.pop_lost_to_mask += total;
      continue;
    }
    CellRow row;
    row.cell = i;
    row.info = info;
    const double rp = std::min(std::max(rural / total, kRatioFloor), 1.0);
    const double pd = std::max(total / stack.cell_area.values[i], kPositiveFloor);
    const double gm = std::max(gdp, kPositiveFloor);
    const double ag = std::min(std::max(crop + past, kRatioFloor), 1.0);
    row.feats = {std::log(rp), std::log(pd), std::log(gm), std::log(ag)};
    rows.push_back(row);
  }

  const long n = long(rows.size());
  std::vector<double> mu(static_cast<std::size_t>(n));
  std::vector<EffectSource> src(static_cast<std::size_t>(n));
  const int nthreads = std::max(1, threads);
  auto worker = [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      const Prediction p =
          model.predict_one(rows[std::size_t(i)].feats, rows[std::size_t(i)].info->country_iso3,
                            rows[std::size_t(i)].info->region_code);
      mu[std::size_t(i)] = p.mu;
      src[std::size_t(i)] = p.source;
    }
  };
  if (nthreads == 1 || n < 1024) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (n + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const long lo = t * chunk;
      const long hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  for (long i = 0; i < n; ++i) {
    out.epwa.values[rows[std::size_t(i)].cell] = mu[std::size_t(i)];
    switch (src[std::size_t(i)]) {
      case EffectSource::country: ++out.report.fallback_country; break;
      case EffectSource::region: ++out.report.fallback_region; break;
      case EffectSource::none: ++out.report.fallback_none; break;
      case EffectSource::fixed_only: break;
    }
  }
  out.report.valid_cells = n;
  return out;
}

WorkersResult workers_raster(const Raster& epwa, const Raster& population,
                             const std::map<std::string, double>& employable,
                             const ZoneMap& zones) {
  if (!epwa.spec.same_grid(population.spec) || !epwa.spec.same_grid(zones.spec))
    fail_invalid("workers_raster: grids are not aligned");
  WorkersResult out;
  out.workers = Raster::nodata_like(epwa.spec);
  out.workers.variable_id = "agricultural_workers";
  out.workers.year = epwa.year;
  out.workers.scenario = epwa.scenario;
  std::set<std::string> missing;
  for (std::size_t i = 0; i < epwa.values.size(); ++i) {
    const double e = epwa.values[i];
    const double n = population.values[i];
    if (epwa.is_nodata(e) || population.is_nodata(n)) continue;
    const ZoneInfo* info = zones.info_at(int(i) / zones.spec.n_cols, int(i) % zones.spec.n_cols);
    if (!info) continue;
    auto it = employable.find(info->unit_id);
    if (it == employable.end()) {
      missing.insert(info->unit_id);
      continue;
    }
    out.workers.values[i] = e * n * it->second;
  }
  out.units_missing_ratio.assign(missing.begin(), missing.end());
  return out;
}

CorrectionTable correction_factors(const std::map<std::string, double>& expected,
                                   const Raster& predicted, const Raster& population,
                                   const ZoneMap& zones, int year) {
  if (!predicted.spec.same_grid(population.spec) || !predicted.spec.same_grid(zones.spec))
    fail_invalid("correction_factors: grids are not aligned");
  CorrectionTable table;
  table.year = year;
  struct Acc { double pop = 0.0, weighted_pred = 0.0; };
  std::map<std::string, Acc> acc;
  // Row-major accumulation over cells valid in both layers.
  for (std::size_t i = 0; i < predicted.values.size(); ++i) {
    const double p = predicted.values[i];
    const double n = population.values[i];
    if (predicted.is_nodata(p) || population.is_nodata(n)) continue;
    const ZoneInfo* info = zones.info_at(int(i) / zones.spec.n_cols, int(i) % zones.spec.n_cols);
    if (!info) continue;
    Acc& a = acc[info->unit_id];
    a.pop += n;
    a.weighted_pred += p * n;
  }
  for (const auto& [unit, value] : expected) {
    auto it = acc.find(unit);
    if (it == acc.end()) continue;  // no valid cells for this unit
    if (it->second.weighted_pred == 0.0) {
      table.zero_denominator.push_back(unit);
      continue;
    }
    const double xi = value * it->second.pop / it->second.weighted_pred;
    if (!(xi > 0.0) || !std::isfinite(xi)) {  // factors must stay positive
      table.zero_denominator.push_back(unit);
      continue;
    }
    table.xi[unit] = xi;
  }
  return table;
}

CorrectionResult apply_correction(const Raster& predicted, CorrectionTable& table,
                                  const ZoneMap& zones) {
  if (!predicted.spec.same_grid(zones.spec))
    fail_invalid("apply_correction: grids are not aligned");
  CorrectionResult out;
  out.corrected = predicted;
  std::set<std::string> without;
  for (std::size_t i = 0; i < predicted.values.size(); ++i) {
    const double p = predicted.values[i];
    if (predicted.is_nodata(p)) continue;
    const ZoneInfo* info = zones.info_at(int(i) / zones.spec.n_cols, int(i) % zones.spec.n_cols);
    if (!info) continue;
    auto it = table.xi.find(info->unit_id);
    if (it == table.xi.end()) {
      without.insert(info->unit_id);
      continue;
    }
    const double scaled = it->second * p;
    if (scaled > 1.0 - kResponseEps) {
      out.corrected.values[i] = 1.0 - kResponseEps;
      ++out.clamped_cells;
      ++table.clamped_cells[info->unit_id];
    } else {
      out.corrected.values[i] = scaled;
    }
  }
  out.units_without_xi.assign(without.begin(), without.end());
  return out;
}

void write_correction_csv(const CorrectionTable& table, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  os << "unit_id,year,xi,clamped_cells\n";
  char buf[32];
  for (const auto& [unit, xi] : table.xi) {
    std::snprintf(buf, sizeof buf, "%.17g", xi);
    const auto it = table.clamped_cells.find(unit);
    os << unit << ',' << table.year << ',' << buf << ','
       << (it == table.clamped_cells.end() ? 0L : it->second) << "\n";
  }
  if (!os) fail_io("write failed: " + path);
}

std::map<std::pair<std::string, int>, double> read_unit_year_csv(const std::string& path,
                                                                 const std::string& value_name) {
  std::ifstream is(path);
  if (!is) fail_io("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) fail_io("empty CSV: " + path);
  {
    std::string expect = "unit_id,year," + value_name;
    std::string got = line;
    if (!got.empty() && got.back() == '\r') got.pop_back();
    if (got != expect)
      fail_io("CSV header mismatch in " + path + " (expected " + expect + ")");
  }
  std::map<std::pair<std::string, int>, double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') { f.push_back(cur); cur.clear(); }
      else if (c != '\r') cur += c;
    }
    f.push_back(cur);
    if (f.size() != 3) fail_io("bad row in " + path + ": " + line);
    out[{f[0], std::stoi(f[1])}] = std::stod(f[2]);
  }
  return out;
}

std::map<std::string, double> regional_totals(const Raster& workers,
                                              const ZoneMap& countries) {
  if (!workers.spec.same_grid(countries.spec))
    fail_invalid("regional_totals: grids are not aligned");
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < workers.values.size(); ++i) {
    const double v = workers.values[i];
    if (workers.is_nodata(v)) continue;
    const ZoneInfo* info =
        countries.info_at(int(i) / countries.spec.n_cols, int(i) % countries.spec.n_cols);
    if (!info) continue;
    out[info->region_code] += v;
  }
  return out;
}

}  // namespace epwa

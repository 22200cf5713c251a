#include "epwa/raster_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "epwa/errors.hpp"

namespace epwa {

ResampleMethod parse_resample_method(const std::string& name) {
  if (name == "nearest") return ResampleMethod::nearest;
  if (name == "block_mean") return ResampleMethod::block_mean;
  if (name == "area_weighted_mean") return ResampleMethod::area_weighted_mean;
  fail_invalid("unknown resample method: " + name);
}

ZonalStat parse_zonal_stat(const std::string& name) {
  if (name == "mean") return ZonalStat::mean;
  if (name == "median") return ZonalStat::median;
  if (name == "sum") return ZonalStat::sum;
  fail_invalid("unknown zonal statistic: " + name);
}

namespace {

void require_overlap(const GridSpec& a, const GridSpec& b) {
  if (a.lon_max <= b.lon_min || b.lon_max <= a.lon_min ||
      a.lat_max <= b.lat_min || b.lat_max <= a.lat_min)
    fail_invalid("resample: source and target extents do not overlap");
}

Raster resample_nearest(const Raster& src, const GridSpec& target) {
  Raster out = Raster::nodata_like(target);
  out.variable_id = src.variable_id;
  out.year = src.year;
  out.scenario = src.scenario;
  for (int i = 0; i < target.n_rows; ++i) {
    const double lat = target.lat_center(i);
    for (int j = 0; j < target.n_cols; ++j) {
      int si, sj;
      if (!src.spec.locate(target.lon_center(j), lat, si, sj)) continue;
      const double v = src.at(si, sj);
      out.at(i, j) = src.is_nodata(v) ? target.nodata : v;
    }
  }
  return out;
}

Raster resample_block_mean(const Raster& src, const GridSpec& target) {
  const double ratio = target.cell_size / src.spec.cell_size;
  if (std::fabs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
    fail_invalid("block_mean: target cell_size is not an integer multiple of source cell_size");
  Raster out = Raster::nodata_like(target);
  out.variable_id = src.variable_id;
  out.year = src.year;
  out.scenario = src.scenario;
  const double half = target.cell_size / 2.0;
  for (int i = 0; i < target.n_rows; ++i) {
    const double lat_c = target.lat_center(i);
    for (int j = 0; j < target.n_cols; ++j) {
      const double lon_c = target.lon_center(j);
      // Source cells whose centers fall inside this target cell.
      double sum = 0.0;
      long count = 0;
      for (int si = 0; si < src.spec.n_rows; ++si) {
        const double slat = src.spec.lat_center(si);
        if (slat <= lat_c - half || slat > lat_c + half) continue;
        for (int sj = 0; sj < src.spec.n_cols; ++sj) {
          const double slon = src.spec.lon_center(sj);
          if (slon < lon_c - half || slon >= lon_c + half) continue;
          const double v = src.at(si, sj);
          if (src.is_nodata(v)) continue;
          sum += v;
          ++count;
        }
      }
      if (count > 0) out.at(i, j) = sum / double(count);
    }
  }
  return out;
}

Raster resample_area_weighted(const Raster& src, const GridSpec& target) {
  Raster out = Raster::nodata_like(target);
  out.variable_id = src.variable_id;
  out.year = src.year;
  out.scenario = src.scenario;
  for (int i = 0; i < target.n_rows; ++i) {
    const double lat_hi = target.lat_max - i * target.cell_size;
    const double lat_lo = lat_hi - target.cell_size;
    for (int j = 0; j < target.n_cols; ++j) {
      const double lon_lo = target.lon_min + j * target.cell_size;
      const double lon_hi = lon_lo + target.cell_size;
      // Source cell index range intersecting the target cell.
      const int si0 = std::max(0, int(std::floor((src.spec.lat_max - lat_hi) / src.spec.cell_size)));
      const int si1 = std::min(src.spec.n_rows - 1, int(std::floor((src.spec.lat_max - lat_lo) / src.spec.cell_size + 1e-12)));
      const int sj0 = std::max(0, int(std::floor((lon_lo - src.spec.lon_min) / src.spec.cell_size)));
      const int sj1 = std::min(src.spec.n_cols - 1, int(std::floor((lon_hi - src.spec.lon_min) / src.spec.cell_size + 1e-12)));
      double wsum = 0.0, vsum = 0.0;
      for (int si = si0; si <= si1; ++si) {
        const double s_hi = src.spec.lat_max - si * src.spec.cell_size;
        const double s_lo = s_hi - src.spec.cell_size;
        const double dlat = std::min(lat_hi, s_hi) - std::max(lat_lo, s_lo);
        if (dlat <= 0) continue;
        for (int sj = sj0; sj <= sj1; ++sj) {
          const double w_lo = src.spec.lon_min + sj * src.spec.cell_size;
          const double w_hi = w_lo + src.spec.cell_size;
          const double dlon = std::min(lon_hi, w_hi) - std::max(lon_lo, w_lo);
          if (dlon <= 0) continue;
          const double v = src.at(si, sj);
          if (src.is_nodata(v)) continue;
          const double w = dlat * dlon;
          wsum += w;
          vsum += w * v;
        }
      }
      if (wsum > 0.0) out.at(i, j) = vsum / wsum;
    }
  }
  return out;
}

}  // namespace

Raster resample(const Raster& src, const GridSpec& target, ResampleMethod method) {
  src.spec.validate();
  target.validate();
  require_overlap(src.spec, target);
  if (src.spec.same_grid(target)) {
    Raster out = src;
    out.spec.nodata = src.spec.nodata;  // identity keeps values cell-for-cell
    return out;
  }
  switch (method) {
    case ResampleMethod::nearest: return resample_nearest(src, target);
    case ResampleMethod::block_mean: return resample_block_mean(src, target);
    case ResampleMethod::area_weighted_mean: return resample_area_weighted(src, target);
  }
  fail_invalid("unreachable resample method");
}

std::map<std::string, double> zonal_stat(const Raster& value, const ZoneMap& zones,
                                         ZonalStat stat) {
  if (!value.spec.same_grid(zones.spec))
    fail_invalid("zonal_stat: value raster and zone map grids are not aligned");
  struct Acc {
    double sum = 0.0;
    long count = 0;
    std::vector<double> all;  // only filled for median
  };
  std::map<std::string, Acc> acc;
  const bool need_all = stat == ZonalStat::median;
  for (std::size_t idx = 0; idx < value.values.size(); ++idx) {
    const std::int64_t z = zones.zone_ids[idx];
    if (z == ZoneMap::kNoZone) continue;
    const double v = value.values[idx];
    if (value.is_nodata(v)) continue;
    auto it = zones.legend.find(z);
    if (it == zones.legend.end())
      fail_invalid("zonal_stat: zone id " + std::to_string(z) + " missing from legend");
    Acc& a = acc[it->second.unit_id];
    a.sum += v;
    ++a.count;
    if (need_all) a.all.push_back(v);
  }
  std::map<std::string, double> out;
  for (auto& [unit, a] : acc) {
    switch (stat) {
      case ZonalStat::sum: out[unit] = a.sum; break;
      case ZonalStat::mean: out[unit] = a.sum / double(a.count); break;
      case ZonalStat::median: {
        std::sort(a.all.begin(), a.all.end());
        const std::size_t n = a.all.size();
        out[unit] = (n % 2 == 1) ? a.all[n / 2]
                                 : (a.all[n / 2 - 1] + a.all[n / 2]) / 2.0;
        break;
      }
    }
  }
  return out;
}

Raster interpolate_population(const Raster& p1, const Raster& p2, int t1, int t2, int t) {
  if (!p1.spec.same_grid(p2.spec))
    fail_invalid("interpolate_population: anchor grids are not aligned");
  if (!(t1 < t2)) fail_invalid("interpolate_population: requires t1 < t2");
  if (t < t1 || t > t2)
    fail_invalid("interpolate_population: query year outside [t1, t2]");
  Raster out = Raster::nodata_like(p1.spec);
  out.variable_id = p1.variable_id;
  out.year = t;
  out.scenario = p1.scenario;
  const double span = double(t2 - t1);
  const double dt = double(t - t1);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double a = p1.values[i];
    const double b = p2.values[i];
    if (p1.is_nodata(a) || p2.is_nodata(b)) continue;
    if (a == 0.0 && b == 0.0) {
      out.values[i] = 0.0;
    } else if (a == 0.0 || b == 0.0) {
      out.values[i] = a + (b - a) * (dt / span);  // growth rate undefined
    } else {
      const double r = std::log(b / a) / span;
      out.values[i] = a * std::exp(r * dt);
    }
  }
  return out;
}

Raster broadcast_zonal(const std::map<std::string, double>& values, const ZoneMap& zones) {
  Raster out = Raster::nodata_like(zones.spec);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const std::int64_t z = zones.zone_ids[i];
    if (z == ZoneMap::kNoZone) continue;
    auto lit = zones.legend.find(z);
    if (lit == zones.legend.end()) continue;
    auto vit = values.find(lit->second.unit_id);
    if (vit != values.end()) out.values[i] = vit->second;
  }
  return out;
}

Raster cell_area_km2(const GridSpec& spec) {
  constexpr double kEarthRadiusKm = 6371.0072;
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  Raster out = Raster::constant(spec, 0.0);
  out.variable_id = "cell_area_km2";
  const double band = kEarthRadiusKm * kEarthRadiusKm * spec.cell_size * kDeg;
  for (int i = 0; i < spec.n_rows; ++i) {
    const double lat_hi = (spec.lat_max - i * spec.cell_size) * kDeg;
    const double lat_lo = lat_hi - spec.cell_size * kDeg;
    const double a = band * (std::sin(lat_hi) - std::sin(lat_lo));
    for (int j = 0; j < spec.n_cols; ++j) out.at(i, j) = a;
  }
  return out;
}

}  // namespace epwa

#pragma once

#include <map>
#include <string>

#include "epwa/grid.hpp"

namespace epwa {

enum class ResampleMethod { nearest, block_mean, area_weighted_mean };
enum class ZonalStat { mean, median, sum };

ResampleMethod parse_resample_method(const std::string& name);
ZonalStat parse_zonal_stat(const std::string& name);

// Resample to a target grid. Nodata propagates; block_mean and
// area_weighted_mean ignore nodata contributors and produce nodata when a
// block has none. block_mean requires the target cell size to be an integer
// multiple of the source cell size.
Raster resample(const Raster& src, const GridSpec& target, ResampleMethod method);

// Per-unit statistic over the non-nodata cells of each zone. Units with no
// valid cell are omitted. Median of an even count is the mean of the two
// middle values. Accumulation runs in row-major cell order.
std::map<std::string, double> zonal_stat(const Raster& value, const ZoneMap& zones,
                                         ZonalStat stat);

// Cellwise exponential interpolation between two population anchors:
// r = ln(P2/P1)/(t2-t1), P(t) = P1*exp(r*(t-t1)). Cells with both anchors
// zero stay zero; cells where exactly one anchor is zero interpolate
// linearly (the growth rate is undefined there). Nodata propagates.
Raster interpolate_population(const Raster& p1, const Raster& p2, int t1, int t2, int t);

// Paint each cell with its unit's value; cells whose unit has no table entry
// become nodata.
Raster broadcast_zonal(const std::map<std::string, double>& values, const ZoneMap& zones);

// Spherical cell areas in km^2 (authalic radius 6371.0072 km).
Raster cell_area_km2(const GridSpec& spec);

}  // namespace epwa

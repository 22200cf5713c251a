#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "epwa/errors.hpp"
#include "epwa/grid.hpp"
#include "epwa/raster_ops.hpp"
#include "support/testworld.hpp"

using namespace epwa;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
  const fs::path p = fs::temp_directory_path() / "epwa_raster_tests";
  fs::create_directories(p);
  return p;
}

// Brute-force nearest lookup: scan every source cell for the one containing
// the query point.
double oracle_nearest(const Raster& src, double lon, double lat) {
  for (int i = 0; i < src.spec.n_rows; ++i)
    for (int j = 0; j < src.spec.n_cols; ++j) {
      const double lo = src.spec.lon_min + j * src.spec.cell_size;
      const double hi = lo + src.spec.cell_size;
      const double top = src.spec.lat_max - i * src.spec.cell_size;
      const double bot = top - src.spec.cell_size;
      if (lon >= lo && lon < hi && lat <= top && lat > bot) return src.at(i, j);
    }
  return src.spec.nodata;
}

}  // namespace

TEST_CASE("grid spec invariants") {
  CHECK_NOTHROW(GridSpec::from_extent(-180, 180, -56, 84, 1.0 / 12.0).validate());
  CHECK_THROWS_AS(GridSpec::from_extent(-180, 180, -56, 84, 0.083), Error);  // not integral
  CHECK_THROWS_AS(GridSpec::from_extent(10, 0, 0, 10, 1.0), Error);
  GridSpec g = testworld::small_grid(4, 5);
  g.n_cols = 7;
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("resample identity returns values cell-for-cell") {
  std::mt19937_64 rng(7);
  const GridSpec g = testworld::small_grid(10, 10);
  const Raster src = testworld::random_raster(g, rng, -5.0, 5.0, 0.1);
  for (auto m : {ResampleMethod::nearest, ResampleMethod::block_mean,
                 ResampleMethod::area_weighted_mean}) {
    const Raster out = resample(src, g, m);
    CHECK(out.values == src.values);
  }
}

TEST_CASE("block_mean of a 2x2 block is 2.5") {
  const GridSpec g = testworld::small_grid(2, 2);
  Raster src = Raster::constant(g, 0.0);
  src.values = {1.0, 2.0, 3.0, 4.0};
  const GridSpec target = testworld::small_grid(1, 1, 2.0);
  const Raster out = resample(src, target, ResampleMethod::block_mean);
  CHECK(out.values[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("nearest matches the brute-force per-cell oracle") {
  std::mt19937_64 rng(11);
  const GridSpec g = testworld::small_grid(10, 10);
  const Raster src = testworld::random_raster(g, rng, 0.0, 100.0, 0.05);
  const GridSpec target = GridSpec::from_extent(0.0, 10.0, 0.0, 10.0, 10.0 / 3.0);
  const Raster out = resample(src, target, ResampleMethod::nearest);
  for (int i = 0; i < target.n_rows; ++i)
    for (int j = 0; j < target.n_cols; ++j) {
      const double want = oracle_nearest(src, target.lon_center(j), target.lat_center(i));
      const double got = out.at(i, j);
      if (want == src.spec.nodata)
        CHECK(out.is_nodata(got));
      else
        CHECK(got == want);
    }
}

TEST_CASE("block_mean preserves the global mean on fully valid grids") {
  std::mt19937_64 rng(13);
  const GridSpec g = testworld::small_grid(12, 12);
  const Raster src = testworld::random_raster(g, rng, -2.0, 9.0);
  for (int factor : {2, 3, 4, 6}) {
    const GridSpec target = testworld::small_grid(12 / factor, 12 / factor, double(factor));
    const Raster out = resample(src, target, ResampleMethod::block_mean);
    double src_mean = 0.0, out_mean = 0.0;
    for (double v : src.values) src_mean += v;
    for (double v : out.values) out_mean += v;
    src_mean /= double(src.values.size());
    out_mean /= double(out.values.size());
    CHECK(out_mean == doctest::Approx(src_mean).epsilon(1e-12));
  }
}

TEST_CASE("block_mean nodata handling and errors") {
  const GridSpec g = testworld::small_grid(2, 2);
  Raster src = Raster::constant(g, 1.0);
  src.values[0] = g.nodata;
  const GridSpec one = testworld::small_grid(1, 1, 2.0);
  CHECK(resample(src, one, ResampleMethod::block_mean).values[0] == doctest::Approx(1.0));
  src.values = {g.nodata, g.nodata, g.nodata, g.nodata};
  CHECK(resample(src, one, ResampleMethod::block_mean).values[0] == one.nodata);

  const GridSpec far = GridSpec::from_extent(100.0, 102.0, 100.0, 102.0, 1.0);
  CHECK_THROWS_AS(resample(src, far, ResampleMethod::nearest), Error);
  const GridSpec ratio = GridSpec::from_extent(0.0, 1.5, 0.0, 1.5, 1.5);
  CHECK_THROWS_AS(resample(src, ratio, ResampleMethod::block_mean), Error);
}

TEST_CASE("area_weighted_mean equals block_mean for aligned blocks") {
  std::mt19937_64 rng(17);
  const GridSpec g = testworld::small_grid(6, 6);
  const Raster src = testworld::random_raster(g, rng, 0.0, 10.0);
  const GridSpec target = testworld::small_grid(2, 2, 3.0);
  const Raster a = resample(src, target, ResampleMethod::area_weighted_mean);
  const Raster b = resample(src, target, ResampleMethod::block_mean);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("zonal statistics small examples") {
  const GridSpec g = testworld::small_grid(1, 3);
  Raster v = Raster::constant(g, 0.0);
  v.values = {3.0, 1.0, 2.0};
  ZoneMap zm;
  zm.spec = g;
  zm.zone_ids = {1, 1, 1};
  zm.legend[1] = {"unit", "AAA", "R1"};
  CHECK(zonal_stat(v, zm, ZonalStat::median).at("unit") == doctest::Approx(2.0));

  const GridSpec g2 = testworld::small_grid(1, 2);
  Raster v2 = Raster::constant(g2, 0.0);
  v2.values = {0.2, 0.4};
  ZoneMap zm2;
  zm2.spec = g2;
  zm2.zone_ids = {1, 1};
  zm2.legend[1] = {"unit", "AAA", "R1"};
  CHECK(zonal_stat(v2, zm2, ZonalStat::mean).at("unit") == doctest::Approx(0.3));
  // even count: mean of the two middle values
  CHECK(zonal_stat(v2, zm2, ZonalStat::median).at("unit") == doctest::Approx(0.3));
}

TEST_CASE("zonal statistics match the brute-force accumulation oracle") {
  std::mt19937_64 rng(19);
  const GridSpec g = testworld::small_grid(50, 50);
  const Raster v = testworld::random_raster(g, rng, -1.0, 4.0, 0.07);
  const ZoneMap zm = testworld::random_zones(g, 7, rng, 0.05);

  // Oracle: per-unit cell values collected in row-major order.
  std::map<std::string, std::vector<double>> cells;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (zm.zone_ids[i] == ZoneMap::kNoZone) continue;
    if (v.is_nodata(v.values[i])) continue;
    cells[zm.legend.at(zm.zone_ids[i]).unit_id].push_back(v.values[i]);
  }
  const auto sums = zonal_stat(v, zm, ZonalStat::sum);
  const auto means = zonal_stat(v, zm, ZonalStat::mean);
  const auto medians = zonal_stat(v, zm, ZonalStat::median);
  CHECK(sums.size() == cells.size());
  for (const auto& [unit, vals] : cells) {
    double s = 0.0;
    for (double x : vals) s += x;
    CHECK(sums.at(unit) == s);  // identical accumulation order, exact
    CHECK(means.at(unit) == doctest::Approx(s / double(vals.size())).epsilon(1e-12));
    std::vector<double> sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double med = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    CHECK(medians.at(unit) == med);
  }
}

TEST_CASE("zonal sum over a partition equals the global sum") {
  std::mt19937_64 rng(23);
  const GridSpec g = testworld::small_grid(20, 20);
  // integer values sum exactly under any association
  Raster v = Raster::constant(g, 0.0);
  std::uniform_int_distribution<int> D(-50, 50);
  for (double& x : v.values) x = double(D(rng));
  const ZoneMap zm = testworld::random_zones(g, 9, rng, 0.0);
  const auto sums = zonal_stat(v, zm, ZonalStat::sum);
  double total = 0.0, global = 0.0;
  for (const auto& [u, s] : sums) total += s;
  for (double x : v.values) global += x;
  CHECK(total == global);
}

TEST_CASE("zonal alignment error and omitted units") {
  std::mt19937_64 rng(29);
  const GridSpec g = testworld::small_grid(4, 4);
  const Raster v = testworld::random_raster(g, rng);
  ZoneMap zm = testworld::random_zones(g, 2, rng);
  zm.legend[3] = {"empty_unit", "AAA", "R1"};  // unit with no cells
  CHECK(zonal_stat(v, zm, ZonalStat::sum).count("empty_unit") == 0);

  ZoneMap other = zm;
  other.spec = testworld::small_grid(4, 5);
  other.zone_ids.assign(other.spec.size(), 1);
  CHECK_THROWS_AS(zonal_stat(v, other, ZonalStat::sum), Error);
}

TEST_CASE("population interpolation anchors and midpoint") {
  const GridSpec g = testworld::small_grid(1, 1);
  const Raster p1 = Raster::constant(g, 100.0);
  const Raster p2 = Raster::constant(g, 200.0);
  const Raster at_t1 = interpolate_population(p1, p2, 2000, 2010, 2000);
  CHECK(at_t1.values[0] == 100.0);  // exact anchor identity
  const Raster mid = interpolate_population(p1, p2, 2000, 2010, 2005);
  CHECK(mid.values[0] == doctest::Approx(100.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(mid.values[0] == doctest::Approx(141.4214).epsilon(1e-6));
}

TEST_CASE("population interpolation matches the formula oracle on every year") {
  std::mt19937_64 rng(31);
  const GridSpec g = testworld::small_grid(8, 8);
  const Raster p1 = testworld::random_raster(g, rng, 1.0, 1e4);
  const Raster p2 = testworld::random_raster(g, rng, 1.0, 1e4);
  for (int t = 2000; t <= 2020; ++t) {
    const Raster out = interpolate_population(p1, p2, 2000, 2020, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = std::log(p2.values[i] / p1.values[i]) / 20.0;
      const double want = p1.values[i] * std::exp(r * double(t - 2000));
      CHECK(out.values[i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("population interpolation geometric symmetry") {
  std::mt19937_64 rng(37);
  const GridSpec g = testworld::small_grid(6, 6);
  const Raster p1 = testworld::random_raster(g, rng, 0.5, 2e3);
  const Raster p2 = testworld::random_raster(g, rng, 0.5, 2e3);
  for (int t : {2001, 2004, 2009}) {
    const Raster a = interpolate_population(p1, p2, 2000, 2010, t);
    const Raster b = interpolate_population(p1, p2, 2000, 2010, 2010 - (t - 2000));
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(a.values[i] * b.values[i] ==
            doctest::Approx(p1.values[i] * p2.values[i]).epsilon(1e-10));
  }
}

TEST_CASE("population interpolation zero anchors and errors") {
  const GridSpec g = testworld::small_grid(1, 4);
  Raster p1 = Raster::constant(g, 0.0);
  Raster p2 = Raster::constant(g, 0.0);
  p1.values = {0.0, 0.0, 50.0, g.nodata};
  p2.values = {0.0, 80.0, 0.0, 10.0};
  const Raster mid = interpolate_population(p1, p2, 2000, 2010, 2004);
  CHECK(mid.values[0] == 0.0);
  CHECK(mid.values[1] == doctest::Approx(80.0 * 0.4));  // linear when the rate is undefined
  CHECK(mid.values[2] == doctest::Approx(50.0 * 0.6));
  CHECK(mid.is_nodata(mid.values[3]));

  CHECK_THROWS_AS(interpolate_population(p1, p2, 2000, 2010, 1999), Error);
  CHECK_THROWS_AS(interpolate_population(p1, p2, 2000, 2010, 2011), Error);
  CHECK_THROWS_AS(interpolate_population(p1, p2, 2010, 2000, 2005), Error);
  const Raster other = Raster::constant(testworld::small_grid(2, 2), 1.0);
  CHECK_THROWS_AS(interpolate_population(p1, other, 2000, 2010, 2005), Error);
}

TEST_CASE("broadcast_zonal paints units and leaves gaps nodata") {
  std::mt19937_64 rng(41);
  const GridSpec g = testworld::small_grid(5, 5);
  const ZoneMap zm = testworld::random_zones(g, 1, rng);
  const Raster seven = broadcast_zonal({{"U1", 7.0}}, zm);
  for (double v : seven.values) CHECK(v == 7.0);

  const Raster empty = broadcast_zonal({}, zm);
  for (double v : empty.values) CHECK(empty.is_nodata(v));
}

TEST_CASE("broadcast_zonal matches the per-cell legend lookup oracle") {
  std::mt19937_64 rng(43);
  const GridSpec g = testworld::small_grid(9, 9);
  const ZoneMap zm = testworld::random_zones(g, 5, rng, 0.1);
  const std::map<std::string, double> table = {{"U1", 1.5}, {"U3", -2.0}, {"U5", 0.25}};
  const Raster out = broadcast_zonal(table, zm);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto z = zm.zone_ids[i];
    if (z == ZoneMap::kNoZone) {
      CHECK(out.is_nodata(out.values[i]));
      continue;
    }
    const auto it = table.find(zm.legend.at(z).unit_id);
    if (it == table.end())
      CHECK(out.is_nodata(out.values[i]));
    else
      CHECK(out.values[i] == it->second);
  }
}

TEST_CASE("GWG1 round-trip is bitwise lossless for f64") {
  std::mt19937_64 rng(47);
  const GridSpec g = testworld::small_grid(7, 11, 0.25);
  Raster r = testworld::random_raster(g, rng, -1e6, 1e6, 0.1);
  r.values[3] = 1e-310;  // subnormal survives too
  const auto path = (tmpdir() / "round.gwg").string();
  write_gwg1(r, path);
  const Raster back = read_gwg1(path);
  CHECK(back.spec.same_grid(r.spec));
  CHECK(back.spec.nodata == r.spec.nodata);
  CHECK(back.values == r.values);
}

TEST_CASE("GWG1 f32 dtype reads back as widened doubles") {
  const GridSpec g = testworld::small_grid(2, 2);
  Raster r = Raster::constant(g, 0.0);
  r.values = {1.5, -2.25, 0.0, 1e10};
  const auto path = (tmpdir() / "f32.gwg").string();
  write_gwg1(r, path, /*as_f32=*/true);
  const Raster back = read_gwg1(path);
  for (std::size_t i = 0; i < r.values.size(); ++i)
    CHECK(back.values[i] == double(float(r.values[i])));
}

TEST_CASE("GWG1 rejects foreign files") {
  const auto path = (tmpdir() / "bad.gwg").string();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("nope", f);
  std::fclose(f);
  CHECK_THROWS_AS(read_gwg1(path), Error);
  CHECK_THROWS_AS(read_gwg1((tmpdir() / "missing.gwg").string()), Error);
}

TEST_CASE("ESRI ASCII round-trip is exact at printed precision") {
  std::mt19937_64 rng(53);
  const GridSpec g = GridSpec::from_extent(-10.0, -6.0, 40.0, 43.0, 0.5, -1.0);
  const Raster r = testworld::random_raster(g, rng, -3.0, 3.0, 0.2);
  const auto path = (tmpdir() / "round.asc").string();
  write_esri_ascii(r, path);
  const Raster back = read_esri_ascii(path);
  CHECK(back.spec.same_grid(r.spec));
  CHECK(back.values == r.values);  // 17 significant digits round-trip doubles
}

TEST_CASE("cell areas shrink toward the pole and cover the band") {
  const GridSpec g = GridSpec::from_extent(0.0, 10.0, 0.0, 60.0, 10.0);
  const Raster a = cell_area_km2(g);
  CHECK(a.at(0, 0) < a.at(5, 0));  // top row sits closest to the pole
  double total = 0.0;
  for (double v : a.values) total += v;
  const double want = (10.0 / 360.0) * 2.0 * 3.14159265358979323846 * 6371.0072 *
                      6371.0072 * std::sin(60.0 * 3.14159265358979323846 / 180.0);
  CHECK(total == doctest::Approx(want).epsilon(1e-9));
}

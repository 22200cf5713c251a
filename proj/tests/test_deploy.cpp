#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "epwa/beta.hpp"
#include "epwa/deploy.hpp"
#include "epwa/errors.hpp"
#include "epwa/features.hpp"
#include "support/testworld.hpp"

using namespace epwa;

namespace {

// Small region-aware model shared by the grid tests.
const FittedModel& deploy_model() {
  static const FittedModel model = [] {
    ModelSpec spec;
    spec.structure = ModelStructure::smooths_re;
    spec.univariate_rank = 5;
    spec.lambda_grid.points = 5;
    spec.lambda_grid.sweeps = 1;
    const auto synth = testworld::make_synth_gamm(600, 50.0, 4711);
    return fit_with_region_table_data(spec, synth.data);
  }();
  return model;
}

DeployStack stack_of(const testworld::DeployWorld& w, int year = 2020,
                     const std::string& scenario = "SSP2") {
  DeployInputs in;
  in.rural = w.rural;
  in.total = w.total;
  in.cropland = w.cropland;
  in.pasture = w.pasture;
  in.gdp_pc = w.gdp;
  in.admin2 = w.admin2;
  in.countries = w.countries;
  return build_stack(in, w.grid, year, scenario);
}

}  // namespace

TEST_CASE("build_stack broadcasts the admin-2 median GDP") {
  const GridSpec g = testworld::small_grid(1, 3);
  DeployInputs in;
  in.rural = Raster::constant(g, 10.0);
  in.total = Raster::constant(g, 100.0);
  in.cropland = Raster::constant(g, 0.2);
  in.pasture = Raster::constant(g, 0.1);
  in.gdp_pc = Raster::constant(g, 0.0);
  in.gdp_pc.values = {1.0, 2.0, 3.0};
  in.admin2.spec = g;
  in.admin2.zone_ids = {1, 1, 1};
  in.admin2.legend[1] = {"unit", "AAA", "R1"};
  in.countries = in.admin2;
  const DeployStack s = build_stack(in, g, 2020, "SSP2");
  for (double v : s.gdp_feature.values) CHECK(v == 2.0);  // median of {1,2,3}
}

TEST_CASE("build_stack floors sub-person population cells to zero") {
  const GridSpec g = testworld::small_grid(1, 4);
  DeployInputs in;
  in.total = Raster::constant(g, 0.0);
  in.total.values = {0.0, 0.5, 1.0, 250.0};
  in.rural = Raster::constant(g, 0.0);
  in.rural.values = {0.0, 0.2, 0.9, 40.0};
  in.cropland = Raster::constant(g, 0.3);
  in.pasture = Raster::constant(g, 0.2);
  in.gdp_pc = Raster::constant(g, 1000.0);
  in.admin2.spec = g;
  in.admin2.zone_ids = {1, 1, 1, 1};
  in.admin2.legend[1] = {"unit", "AAA", "R1"};
  in.countries = in.admin2;
  const DeployStack s = build_stack(in, g, 2020, "SSP2");
  CHECK(s.total.values[0] == 0.0);
  CHECK(s.total.values[1] == 0.0);  // 0.5 person -> empty
  CHECK(s.total.values[2] == 1.0);
  CHECK(s.total.values[3] == 250.0);
  CHECK(s.rural.values[1] == 0.0);
}

TEST_CASE("cropland stays constant across deploy years") {
  auto w = testworld::make_deploy_world(10, 12, 7);
  const DeployStack a = stack_of(w, 2020);
  const DeployStack b = stack_of(w, 2100);
  CHECK(a.cropland.values == b.cropland.values);
  CHECK(a.pasture.values == b.pasture.values);
}

TEST_CASE("stack features equal the composition of raster oracles") {
  auto w = testworld::make_deploy_world(8, 10, 11);
  const DeployStack s = stack_of(w);
  const Raster want =
      broadcast_zonal(zonal_stat(w.gdp, w.admin2, ZonalStat::median), w.admin2);
  CHECK(s.gdp_feature.values == want.values);
}

TEST_CASE("grid predictions stay in (0,1), mask follows population, oracle row-for-row") {
  auto w = testworld::make_deploy_world(20, 20, 13);
  const DeployStack s = stack_of(w);
  const FittedModel& m = deploy_model();
  const GridPrediction pred = predict_grid(m, s);

  const Raster area = cell_area_km2(w.grid);
  long valid = 0;
  for (int i = 0; i < w.grid.n_rows; ++i)
    for (int j = 0; j < w.grid.n_cols; ++j) {
      const std::size_t idx = w.grid.index(i, j);
      const double e = pred.epwa.values[idx];
      const double total = s.total.values[idx];
      const bool pop_absent = s.total.is_nodata(total) || total <= 0.0;
      if (pop_absent) {
        CHECK(pred.epwa.is_nodata(e));  // nodata exactly where population is 0/masked
        continue;
      }
      const bool masked = s.rural.is_nodata(s.rural.values[idx]) ||
                          s.cropland.is_nodata(s.cropland.values[idx]) ||
                          s.pasture.is_nodata(s.pasture.values[idx]) ||
                          s.gdp_feature.is_nodata(s.gdp_feature.values[idx]) ||
                          !s.countries.info_at(i, j);
      if (masked) {
        CHECK(pred.epwa.is_nodata(e));
        continue;
      }
      ++valid;
      CHECK(e > 0.0);
      CHECK(e < 1.0);

      // independent scalar-predict oracle, same feature arithmetic
      const double rp = std::min(std::max(s.rural.values[idx] / total, 1e-6), 1.0);
      const double pd = std::max(total / area.values[idx], 1e-3);
      const double gm = std::max(s.gdp_feature.values[idx], 1e-3);
      const double ag = std::min(
          std::max(s.cropland.values[idx] + s.pasture.values[idx], 1e-6), 1.0);
      const ZoneInfo* info = s.countries.info_at(i, j);
      const Prediction want = m.predict_one(
          {std::log(rp), std::log(pd), std::log(gm), std::log(ag)},
          info->country_iso3, info->region_code);
      CHECK(e == want.mu);  // row-for-row equality
    }
  CHECK(pred.report.valid_cells == valid);
}

TEST_CASE("fallback counts match the world construction") {
  auto w = testworld::make_deploy_world(16, 18, 17);
  const DeployStack s = stack_of(w);
  const GridPrediction pred = predict_grid(deploy_model(), s);

  long want_country = 0, want_region = 0, want_none = 0;
  for (int i = 0; i < w.grid.n_rows; ++i)
    for (int j = 0; j < w.grid.n_cols; ++j) {
      const std::size_t idx = w.grid.index(i, j);
      if (pred.epwa.is_nodata(pred.epwa.values[idx])) continue;
      const ZoneInfo* info = s.countries.info_at(i, j);
      if (info->country_iso3 == "AAA" || info->country_iso3 == "BBB")
        ++want_country;
      else if (info->country_iso3 == "KAZ")  // unseen country, known region
        ++want_region;
      else
        ++want_none;
    }
  CHECK(pred.report.fallback_country == want_country);
  CHECK(pred.report.fallback_region == want_region);
  CHECK(pred.report.fallback_none == want_none);
  CHECK(want_region > 0);
  CHECK(want_none > 0);
}

TEST_CASE("masked population mass is reported") {
  auto w = testworld::make_deploy_world(6, 8, 19);
  // land/sea style mismatch: a populated cell missing from the cropland layer
  std::size_t hole = 0;
  for (std::size_t i = 0; i < w.grid.size(); ++i)
    if (!w.total.is_nodata(w.total.values[i]) && w.total.values[i] > 1.0) {
      hole = i;
      break;
    }
  w.cropland.values[hole] = w.grid.nodata;
  const DeployStack s = stack_of(w);
  const GridPrediction pred = predict_grid(deploy_model(), s);
  CHECK(pred.report.masked_cells >= 1);
  CHECK(pred.report.pop_lost_to_mask >= w.total.values[hole]);
  CHECK(pred.epwa.is_nodata(pred.epwa.values[hole]));
}

TEST_CASE("two cells differing only in country move by the effect difference") {
  const FittedModel& m = deploy_model();
  const std::array<double, 4> feats = {-1.0, 2.0, 8.5, -1.0};
  const Prediction a = m.predict_one(feats, "AAA", "R01");
  const Prediction b = m.predict_one(feats, "BBB", "R02");
  const double want = m.country_effects.at("AAA") - m.country_effects.at("BBB");
  CHECK(logit(a.mu) - logit(b.mu) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("workers raster arithmetic") {
  const GridSpec g = testworld::small_grid(1, 3);
  Raster epwa_r = Raster::constant(g, 0.2);
  Raster pop = Raster::constant(g, 1000.0);
  pop.values[1] = 0.0;
  epwa_r.values[2] = g.nodata;
  ZoneMap zm;
  zm.spec = g;
  zm.zone_ids = {1, 1, 2};
  zm.legend[1] = {"u1", "AAA", "R1"};
  zm.legend[2] = {"u2", "AAA", "R1"};
  const WorkersResult res = workers_raster(epwa_r, pop, {{"u1", 0.6}, {"u2", 0.5}}, zm);
  CHECK(res.workers.values[0] == doctest::Approx(120.0).epsilon(1e-15));  // 0.2*1000*0.6
  CHECK(res.workers.values[1] == 0.0);                                    // no population
  CHECK(res.workers.is_nodata(res.workers.values[2]));                    // nodata epwa

  // unit missing from the ratio table
  const WorkersResult gap = workers_raster(epwa_r, pop, {{"u2", 0.5}}, zm);
  CHECK(gap.workers.is_nodata(gap.workers.values[0]));
  REQUIRE(gap.units_missing_ratio.size() == 1);
  CHECK(gap.units_missing_ratio[0] == "u1");
}

TEST_CASE("workers raster is linear in population and employable ratio") {
  std::mt19937_64 rng(23);
  auto w = testworld::make_deploy_world(8, 10, 23);
  const DeployStack s = stack_of(w);
  const GridPrediction pred = predict_grid(deploy_model(), s);

  const WorkersResult base = workers_raster(pred.epwa, s.total, w.employable, s.admin2);
  Raster pop2 = s.total;
  for (double& v : pop2.values)
    if (!pop2.is_nodata(v)) v *= 2.0;
  std::map<std::string, double> ratio3 = w.employable;
  for (auto& [k, v] : ratio3) v *= 3.0;
  const WorkersResult doubled = workers_raster(pred.epwa, pop2, w.employable, s.admin2);
  const WorkersResult tripled = workers_raster(pred.epwa, s.total, ratio3, s.admin2);
  for (std::size_t i = 0; i < base.workers.values.size(); ++i) {
    if (base.workers.is_nodata(base.workers.values[i])) continue;
    CHECK(doubled.workers.values[i] ==
          doctest::Approx(2.0 * base.workers.values[i]).epsilon(1e-12));
    CHECK(tripled.workers.values[i] ==
          doctest::Approx(3.0 * base.workers.values[i]).epsilon(1e-12));
  }

  // unit sums match the accumulation oracle
  const auto sums = zonal_stat(base.workers, s.admin2, ZonalStat::sum);
  for (const auto& [unit, total] : sums) {
    double want = 0.0;
    for (std::size_t i = 0; i < w.grid.size(); ++i) {
      if (s.admin2.zone_ids[i] == ZoneMap::kNoZone) continue;
      if (s.admin2.legend.at(s.admin2.zone_ids[i]).unit_id != unit) continue;
      const double workers = base.workers.values[i];
      if (!base.workers.is_nodata(workers)) want += workers;
    }
    CHECK(total == want);
  }
}

TEST_CASE("correction factor worked example: 100/70") {
  const GridSpec g = testworld::small_grid(1, 2);
  Raster pred = Raster::constant(g, 0.0);
  pred.values = {0.1, 0.2};
  Raster pop = Raster::constant(g, 0.0);
  pop.values = {100.0, 300.0};
  ZoneMap zm;
  zm.spec = g;
  zm.zone_ids = {1, 1};
  zm.legend[1] = {"unit", "AAA", "R1"};

  CorrectionTable table = correction_factors({{"unit", 0.25}}, pred, pop, zm, 2010);
  REQUIRE(table.xi.count("unit") == 1);
  const double want = (0.25 * (100.0 + 300.0)) / (0.1 * 100.0 + 0.2 * 300.0);
  CHECK(table.xi.at("unit") == want);  // same accumulation order, exact
  CHECK(table.xi.at("unit") == doctest::Approx(100.0 / 70.0).epsilon(1e-15));
  CHECK(table.xi.at("unit") == doctest::Approx(1.42857).epsilon(1e-5));

  const CorrectionResult res = apply_correction(pred, table, zm);
  CHECK(res.corrected.values[0] == doctest::Approx(0.142857).epsilon(1e-5));
  CHECK(res.corrected.values[1] == doctest::Approx(0.285714).epsilon(1e-5));
  // population-weighted mean equals the reference exactly
  const double weighted =
      (res.corrected.values[0] * 100.0 + res.corrected.values[1] * 300.0) / 400.0;
  CHECK(weighted == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(res.clamped_cells == 0);
}

TEST_CASE("correction factor edge cases") {
  const GridSpec g = testworld::small_grid(1, 4);
  Raster pred = Raster::constant(g, 0.25);
  Raster pop = Raster::constant(g, 10.0);
  ZoneMap zm;
  zm.spec = g;
  zm.zone_ids = {1, 1, 2, 2};
  zm.legend[1] = {"match", "AAA", "R1"};
  zm.legend[2] = {"zero", "AAA", "R1"};
  pred.values[2] = 0.0;
  pred.values[3] = 0.0;

  CorrectionTable table =
      correction_factors({{"match", 0.25}, {"zero", 0.5}}, pred, pop, zm, 2000);
  CHECK(table.xi.at("match") == doctest::Approx(1.0).epsilon(1e-15));  // already aligned
  CHECK(table.xi.count("zero") == 0);  // zero denominator reported, xi omitted
  REQUIRE(table.zero_denominator.size() == 1);
  CHECK(table.zero_denominator[0] == "zero");

  // uniform population: xi reduces to mean(expected)/mean(predicted)
  const GridSpec g2 = testworld::small_grid(1, 3);
  Raster p2 = Raster::constant(g2, 0.0);
  p2.values = {0.1, 0.2, 0.3};
  const Raster n2 = Raster::constant(g2, 55.0);
  ZoneMap z2;
  z2.spec = g2;
  z2.zone_ids = {1, 1, 1};
  z2.legend[1] = {"u", "AAA", "R1"};
  CorrectionTable t2 = correction_factors({{"u", 0.4}}, p2, n2, z2, 2000);
  CHECK(t2.xi.at("u") == doctest::Approx(0.4 / 0.2).epsilon(1e-12));
}

TEST_CASE("apply_correction clamps, flags missing units and keeps inputs intact") {
  const GridSpec g = testworld::small_grid(1, 3);
  Raster pred = Raster::constant(g, 0.0);
  pred.values = {0.5, 0.9, 0.4};
  ZoneMap zm;
  zm.spec = g;
  zm.zone_ids = {1, 1, 2};
  zm.legend[1] = {"scaled", "AAA", "R1"};
  zm.legend[2] = {"missing", "AAA", "R1"};
  CorrectionTable table;
  table.year = 2005;
  table.xi["scaled"] = 1.5;
  const Raster before = pred;
  const CorrectionResult res = apply_correction(pred, table, zm);
  CHECK(pred.values == before.values);  // uncorrected output untouched
  CHECK(res.corrected.values[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(res.corrected.values[1] == 1.0 - 1e-6);  // clamped
  CHECK(res.clamped_cells == 1);
  CHECK(table.clamped_cells.at("scaled") == 1);
  CHECK(res.corrected.values[2] == 0.4);  // unit without xi passes through
  REQUIRE(res.units_without_xi.size() == 1);
  CHECK(res.units_without_xi[0] == "missing");

  // identity factor leaves the raster unchanged
  CorrectionTable unity;
  unity.xi["scaled"] = 1.0;
  unity.xi["missing"] = 1.0;
  const CorrectionResult same = apply_correction(pred, unity, zm);
  CHECK(same.corrected.values == pred.values);
}

TEST_CASE("aggregation identity holds after correction") {
  // many-unit world: corrected population-weighted aggregates equal the
  // reference per unit
  auto w = testworld::make_deploy_world(20, 22, 29);
  const DeployStack s = stack_of(w);
  const GridPrediction pred = predict_grid(deploy_model(), s);

  // reference values near the predicted unit means keep every cell inside
  // the clamp so the identity applies everywhere
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(0.85, 1.15);
  std::map<std::string, double> expected;
  std::map<std::string, double> num, den;
  for (std::size_t i = 0; i < w.grid.size(); ++i) {
    if (s.admin2.zone_ids[i] == ZoneMap::kNoZone) continue;
    const double p = pred.epwa.values[i];
    const double n = s.total.values[i];
    if (pred.epwa.is_nodata(p) || s.total.is_nodata(n)) continue;
    const std::string& unit = s.admin2.legend.at(s.admin2.zone_ids[i]).unit_id;
    num[unit] += p * n;
    den[unit] += n;
  }
  for (const auto& [unit, d] : den)
    if (d > 0.0) expected[unit] = num[unit] / d * U(rng);

  CorrectionTable table = correction_factors(expected, pred.epwa, s.total, s.admin2, 2020);
  const CorrectionResult res = apply_correction(pred.epwa, table, s.admin2);
  CHECK(res.clamped_cells == 0);

  for (const auto& [unit, xi] : table.xi) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.grid.size(); ++i) {
      if (s.admin2.zone_ids[i] == ZoneMap::kNoZone) continue;
      if (s.admin2.legend.at(s.admin2.zone_ids[i]).unit_id != unit) continue;
      const double c = res.corrected.values[i];
      const double n = s.total.values[i];
      if (res.corrected.is_nodata(c) || s.total.is_nodata(n)) continue;
      num += c * n;
      den += n;
    }
    REQUIRE(den > 0.0);
    CHECK(num / den == doctest::Approx(expected.at(unit)).epsilon(1e-10));
  }
}

TEST_CASE("grid prediction is bitwise independent of the thread count") {
  auto w = testworld::make_deploy_world(40, 40, 41);
  const DeployStack s = stack_of(w);
  const GridPrediction one = predict_grid(deploy_model(), s, 1);
  const GridPrediction four = predict_grid(deploy_model(), s, 4);
  CHECK(one.epwa.values == four.epwa.values);
  CHECK(one.report.fallback_region == four.report.fallback_region);
}

TEST_CASE("regional totals match a direct accumulation") {
  auto w = testworld::make_deploy_world(10, 12, 37);
  const DeployStack s = stack_of(w);
  const GridPrediction pred = predict_grid(deploy_model(), s);
  const WorkersResult wk = workers_raster(pred.epwa, s.total, w.employable, s.admin2);
  const auto totals = regional_totals(wk.workers, s.countries);
  std::map<std::string, double> want;
  for (std::size_t i = 0; i < w.grid.size(); ++i) {
    const double v = wk.workers.values[i];
    if (wk.workers.is_nodata(v)) continue;
    const auto z = s.countries.zone_ids[i];
    if (z == ZoneMap::kNoZone) continue;
    want[s.countries.legend.at(z).region_code] += v;
  }
  CHECK(totals == want);
}

TEST_CASE("correction table CSV layout") {
  CorrectionTable table;
  table.year = 2010;
  table.xi["a"] = 1.25;
  table.xi["b"] = 0.8;
  table.clamped_cells["b"] = 3;
  const auto path = (std::filesystem::temp_directory_path() / "epwa_corr.csv").string();
  write_correction_csv(table, path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "unit_id,year,xi,clamped_cells");
  std::getline(is, line);
  CHECK(line == "a,2010,1.25,0");
  std::getline(is, line);
  CHECK(line == "b,2010,0.80000000000000004,3");
}

TEST_CASE("unit-year reference CSV parsing") {
  const auto path = (std::filesystem::temp_directory_path() / "epwa_ref.csv").string();
  {
    std::ofstream os(path);
    os << "unit_id,year,epwa\nu1,2000,0.25\nu1,2010,0.3\nu2,2000,0.5\n";
  }
  const auto table = read_unit_year_csv(path, "epwa");
  CHECK(table.size() == 3);
  CHECK(table.at({"u1", 2010}) == 0.3);
  CHECK_THROWS_AS(read_unit_year_csv(path, "ratio"), Error);  // header mismatch
}

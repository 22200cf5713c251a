#include "epwa/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "epwa/deploy.hpp"
#include "epwa/errors.hpp"
#include "epwa/features.hpp"
#include "epwa/grid.hpp"
#include "epwa/labels.hpp"
#include "epwa/model.hpp"
#include "epwa/model_json.hpp"
#include "epwa/raster_ops.hpp"
#include "epwa/sha256.hpp"
#include "epwa/validate.hpp"

namespace fs = std::filesystem;

namespace epwa {

using json = nlohmann::ordered_json;

nlohmann::ordered_json default_config() {
  json cfg;
  cfg["seed"] = 1;
  cfg["threads"] = 1;
  cfg["out_dir"] = "out";
  cfg["paths"] = {{"labels_csv", "labels.csv"}, {"features_csv", "features.csv"}};
  cfg["features"] = {
      {"years", json::array({2000, 2010, 2020})},
      {"zones", {{"raster", "zones.gwg"}, {"legend", "zones_legend.csv"}}},
      {"rasters",
       {{"cropland", "cropland.gwg"},
        {"pasture", "pasture.gwg"},
        {"cell_area", ""},
        {"gdp_pattern", "gdp_{year}.gwg"},
        {"rural_anchors", json::object()},
        {"total_anchors", json::object()}}}};
  cfg["model"] = spec_to_json(ModelSpec{});
  cfg["fit"] = {{"model_out", "model.json"},
                {"metrics_csv", "fit_metrics.csv"},
                {"compare_structures",
                 json::array({"linear", "smooths", "smooths_re", "smooths_re_int"})},
                {"partial_effects", true}};
  cfg["validate"] = {{"strategies",
                      json::array({"spatial", "time_forward", "time_backward", "multiscale"})},
                     {"regions", json::array()},
                     {"report_csv", "validation.csv"}};
  cfg["deploy"] = {
      {"grid",
       {{"lon_min", -180.0},
        {"lon_max", 180.0},
        {"lat_min", -56.0},
        {"lat_max", 84.0},
        {"cell_size", 1.0 / 12.0},
        {"nodata", -9999.0}}},
      {"years", json::array({2000, 2010, 2020, 2030, 2040, 2050, 2060, 2070, 2080, 2090, 2100})},
      {"scenarios", json::array({"SSP1", "SSP2", "SSP3", "SSP4", "SSP5"})},
      {"model_path", "model.json"},
      {"rasters",
       {{"rural_pattern", "rural_{scenario}_{year}.gwg"},
        {"total_pattern", "total_{scenario}_{year}.gwg"},
        {"gdp_pattern", "gdp_{scenario}_{year}.gwg"},
        {"cropland", "cropland.gwg"},
        {"pasture", "pasture.gwg"}}},
      {"zones",
       {{"admin2", {{"raster", "admin2.gwg"}, {"legend", "admin2_legend.csv"}}},
        {"countries", {{"raster", "countries.gwg"}, {"legend", "countries_legend.csv"}}}}},
      {"employable_csv", "employable.csv"},
      {"correction_reference_csv", ""},
      {"carry_forward_correction", false},
      {"resample_method", "nearest"},
      {"formats", json::array({"gwg"})}};
  return cfg;
}

namespace {

void deep_merge(json& base, const json& over) {
  for (const auto& [k, v] : over.items()) {
    if (base.contains(k) && base[k].is_object() && v.is_object())
      deep_merge(base[k], v);
    else
      base[k] = v;
  }
}

void log_event(const std::string& event, const json& detail = json::object()) {
  json line;
  line["event"] = event;
  for (const auto& [k, v] : detail.items()) line[k] = v;
  std::cerr << line.dump() << "\n";
}

struct Run {
  json cfg;
  std::string config_path;
  fs::path config_dir;
  fs::path out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::string> outputs;  // paths relative to out_dir

  // Input paths resolve against the config file's directory.
  std::string in_path(const std::string& p) const {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (config_dir / p).string();
  }
  fs::path out_path(const std::string& p) { return out_dir / p; }

  void note_output(const std::string& rel) { outputs.push_back(rel); }

  void write_manifest(const std::string& command) {
    std::sort(outputs.begin(), outputs.end());
    json m;
    m["command"] = command;
    m["config_sha256"] = sha256_file(config_path);
    m["seed"] = seed;
    json files = json::array();
    for (const auto& rel : outputs) {
      const fs::path p = out_dir / rel;
      json f;
      f["path"] = rel;
      f["bytes"] = fs::file_size(p);
      f["sha256"] = sha256_file(p.string());
      files.push_back(std::move(f));
    }
    m["outputs"] = std::move(files);
    const fs::path mp = out_dir / ("manifest_" + command + ".json");
    std::ofstream os(mp, std::ios::binary);
    if (!os) fail_io("cannot write manifest: " + mp.string());
    os << m.dump(2) << "\n";
  }
};

Run open_run(const std::string& config_path, const RunOverrides& ov) {
  Run r;
  r.config_path = config_path;
  r.cfg = load_config(config_path);
  r.config_dir = fs::path(config_path).parent_path();
  if (ov.out_dir)
    r.out_dir = *ov.out_dir;
  else
    r.out_dir = r.cfg.at("out_dir").get<std::string>();
  r.seed = ov.seed ? *ov.seed : r.cfg.at("seed").get<std::uint64_t>();
  r.threads = ov.threads ? *ov.threads : r.cfg.at("threads").get<int>();
  std::error_code ec;
  fs::create_directories(r.out_dir, ec);
  if (ec) fail_io("cannot create output directory: " + r.out_dir.string());
  return r;
}

std::string subst(std::string pattern, const std::string& key, const std::string& value) {
  const std::string tag = "{" + key + "}";
  for (std::size_t pos = pattern.find(tag); pos != std::string::npos;
       pos = pattern.find(tag))
    pattern.replace(pos, tag.size(), value);
  return pattern;
}

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower((unsigned char)c));
  return s;
}

// Population raster for an arbitrary year from decadal anchors.
Raster population_for_year(const json& anchors, const Run& run, int year) {
  std::map<int, std::string> by_year;
  for (const auto& [k, v] : anchors.items()) by_year[std::stoi(k)] = v.get<std::string>();
  if (by_year.empty()) fail_invalid("features: no population anchor rasters configured");
  if (by_year.count(year)) return read_raster(run.in_path(by_year.at(year)));
  auto hi = by_year.upper_bound(year);
  if (hi == by_year.begin() || hi == by_year.end())
    fail_invalid("features: year " + std::to_string(year) +
                 " outside the population anchor range");
  auto lo = std::prev(hi);
  const Raster p1 = read_raster(run.in_path(lo->second));
  const Raster p2 = read_raster(run.in_path(hi->second));
  return interpolate_population(p1, p2, lo->first, hi->first, year);
}

}  // namespace

nlohmann::ordered_json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_io("cannot open config: " + path);
  json user;
  try {
    is >> user;
  } catch (const std::exception& e) {
    fail_invalid("config parse error in " + path + ": " + e.what());
  }
  json cfg = default_config();
  deep_merge(cfg, user);
  return cfg;
}

void cmd_features(const std::string& config_path, const RunOverrides& ov) {
  Run run = open_run(config_path, ov);
  const json& fc = run.cfg.at("features");
  // One zone map per admin level to aggregate over; a single object also works.
  std::vector<ZoneMap> zone_maps;
  const json& zj = fc.at("zones");
  if (zj.is_array()) {
    for (const auto& entry : zj)
      zone_maps.push_back(read_zonemap(run.in_path(entry.at("raster")),
                                       run.in_path(entry.at("legend"))));
  } else {
    zone_maps.push_back(
        read_zonemap(run.in_path(zj.at("raster")), run.in_path(zj.at("legend"))));
  }
  if (zone_maps.empty()) fail_invalid("features: no zone maps configured");
  const json& rs = fc.at("rasters");
  const Raster cropland = read_raster(run.in_path(rs.at("cropland")));
  const Raster pasture = read_raster(run.in_path(rs.at("pasture")));
  const std::string area_path = rs.at("cell_area").get<std::string>();
  const Raster cell_area = area_path.empty() ? cell_area_km2(zone_maps.front().spec)
                                             : read_raster(run.in_path(area_path));

  std::vector<UnitFeatures> rows;
  std::set<std::string> skipped;
  for (const auto& yj : fc.at("years")) {
    const int year = yj.get<int>();
    const Raster rural = population_for_year(rs.at("rural_anchors"), run, year);
    const Raster total = population_for_year(rs.at("total_anchors"), run, year);
    const Raster gdp =
        read_raster(run.in_path(subst(rs.at("gdp_pattern"), "year", std::to_string(year))));
    for (const ZoneMap& zones : zone_maps) {
      FeatureBuildResult fr =
          build_unit_features(rural, total, gdp, cropland, pasture, zones, cell_area, year);
      for (auto& f : fr.features) rows.push_back(std::move(f));
      skipped.insert(fr.skipped_units.begin(), fr.skipped_units.end());
    }
    log_event("features_year", {{"year", year}, {"units", rows.size()}});
  }
  const std::string out_name =
      fs::path(run.cfg.at("paths").at("features_csv").get<std::string>()).filename().string();
  write_features_csv(rows, run.out_path(out_name).string());
  run.note_output(out_name);
  if (!skipped.empty()) {
    std::ofstream os(run.out_path("features_skipped_units.csv"));
    os << "unit_id\n";
    for (const auto& u : skipped) os << u << "\n";
    run.note_output("features_skipped_units.csv");
  }
  run.write_manifest("features");
  log_event("features_done", {{"rows", rows.size()}, {"skipped_units", skipped.size()}});
}

void cmd_fit(const std::string& config_path, const RunOverrides& ov) {
  Run run = open_run(config_path, ov);
  const LabelSet labels =
      merge_labels_from_records(read_labels_csv(run.in_path(run.cfg.at("paths").at("labels_csv"))));
  const std::vector<UnitFeatures> features =
      read_features_csv(run.in_path(run.cfg.at("paths").at("features_csv")));
  const ModelData data = join_labels_features(labels, features);

  const ModelSpec primary_spec = spec_from_json(run.cfg.at("model"));
  const json& fit_cfg = run.cfg.at("fit");

  std::ofstream metrics(run.out_path(fit_cfg.at("metrics_csv")));
  if (!metrics) fail_io("cannot write metrics CSV");
  metrics << "structure,gcv,aic,explained_variance,r2,rmse\n";
  char buf[5][32];
  for (const auto& sj : fit_cfg.at("compare_structures")) {
    ModelSpec spec = primary_spec;
    spec.structure = parse_structure(sj.get<std::string>());
    const FittedModel m = fit_with_region_table_data(spec, data);
    const FitMetrics& fm = m.train_metrics;
    std::snprintf(buf[0], 32, "%.17g", fm.gcv);
    std::snprintf(buf[1], 32, "%.17g", fm.aic);
    std::snprintf(buf[2], 32, "%.17g", fm.explained_variance);
    std::snprintf(buf[3], 32, "%.17g", fm.r2);
    std::snprintf(buf[4], 32, "%.17g", fm.rmse);
    metrics << to_string(spec.structure) << ',' << buf[0] << ',' << buf[1] << ','
            << buf[2] << ',' << buf[3] << ',' << buf[4] << "\n";
    log_event("fit_structure", {{"structure", to_string(spec.structure)},
                                {"r2", fm.r2},
                                {"aic", fm.aic}});
  }
  metrics.close();
  run.note_output(fit_cfg.at("metrics_csv"));

  const FittedModel model = fit_with_region_table_data(primary_spec, data);
  save_model(model, run.out_path(fit_cfg.at("model_out")).string());
  run.note_output(fit_cfg.at("model_out"));

  if (fit_cfg.at("partial_effects").get<bool>() &&
      primary_spec.structure != ModelStructure::linear) {
    for (const auto& var : kFeatureNames) {
      const auto rows = export_partial_effects(model, var);
      const std::string name = "partial_effect_" + var + ".csv";
      write_partial_effects_csv(rows, run.out_path(name).string());
      run.note_output(name);
    }
  }
  run.write_manifest("fit");
  log_event("fit_done", {{"model", fit_cfg.at("model_out")}});
}

void cmd_validate(const std::string& config_path, const RunOverrides& ov) {
  Run run = open_run(config_path, ov);
  const LabelSet labels =
      merge_labels_from_records(read_labels_csv(run.in_path(run.cfg.at("paths").at("labels_csv"))));
  const std::vector<UnitFeatures> features =
      read_features_csv(run.in_path(run.cfg.at("paths").at("features_csv")));
  const ModelSpec spec = spec_from_json(run.cfg.at("model"));
  const json& vc = run.cfg.at("validate");

  std::vector<ValidationReport> reports;
  for (const auto& sj : vc.at("strategies")) {
    const SplitStrategy strategy = parse_strategy(sj.get<std::string>());
    if (strategy == SplitStrategy::multiscale) {
      std::vector<std::string> regions;
      for (const auto& rj : vc.at("regions")) regions.push_back(rj.get<std::string>());
      if (regions.empty()) regions = subnational_regions(labels);
      for (const auto& region : regions) {
        const SplitPlan plan = split_multiscale(labels, region);
        reports.push_back(evaluate_split(spec, plan, features));
        log_event("validate_done", {{"strategy", "multiscale"},
                                    {"region", region},
                                    {"rmse", reports.back().rmse}});
      }
    } else {
      const SplitPlan plan = strategy == SplitStrategy::spatial
                                 ? split_spatial(labels, run.seed)
                                 : split_temporal(labels, strategy);
      reports.push_back(evaluate_split(spec, plan, features));
      log_event("validate_done",
                {{"strategy", to_string(strategy)}, {"rmse", reports.back().rmse}});
    }
  }
  write_validation_csv(reports, run.out_path(vc.at("report_csv")).string());
  run.note_output(vc.at("report_csv"));
  run.write_manifest("validate");
}

void cmd_deploy(const std::string& config_path, const RunOverrides& ov) {
  Run run = open_run(config_path, ov);
  const json& dc = run.cfg.at("deploy");
  const json& gj = dc.at("grid");
  const GridSpec grid = GridSpec::from_extent(
      gj.at("lon_min").get<double>(), gj.at("lon_max").get<double>(),
      gj.at("lat_min").get<double>(), gj.at("lat_max").get<double>(),
      gj.at("cell_size").get<double>(), gj.at("nodata").get<double>());

  const FittedModel model = load_model(run.in_path(dc.at("model_path")));
  const ZoneMap admin2 = read_zonemap(run.in_path(dc.at("zones").at("admin2").at("raster")),
                                      run.in_path(dc.at("zones").at("admin2").at("legend")));
  const ZoneMap countries =
      read_zonemap(run.in_path(dc.at("zones").at("countries").at("raster")),
                   run.in_path(dc.at("zones").at("countries").at("legend")));
  const Raster cropland = read_raster(run.in_path(dc.at("rasters").at("cropland")));
  const Raster pasture = read_raster(run.in_path(dc.at("rasters").at("pasture")));
  const ResampleMethod method = parse_resample_method(dc.at("resample_method"));

  const auto employable = read_unit_year_csv(run.in_path(dc.at("employable_csv")), "ratio");
  const std::string ref_path = dc.at("correction_reference_csv").get<std::string>();
  std::map<std::pair<std::string, int>, double> reference;
  if (!ref_path.empty()) reference = read_unit_year_csv(run.in_path(ref_path), "epwa");
  int latest_ref_year = -1;
  for (const auto& [key, v] : reference) latest_ref_year = std::max(latest_ref_year, key.second);
  const bool carry_forward = dc.at("carry_forward_correction").get<bool>();

  std::vector<std::string> formats;
  for (const auto& f : dc.at("formats")) formats.push_back(f.get<std::string>());

  std::ofstream report(run.out_path("deploy_report.csv"));
  if (!report) fail_io("cannot write deploy report");
  report << "scenario,year,valid_cells,masked_cells,pop_lost_to_mask,"
            "fallback_country,fallback_region,fallback_none,clamped_cells,corrected\n";

  // region -> year -> total workers (uncorrected), per scenario
  for (const auto& scj : dc.at("scenarios")) {
    const std::string scenario = scj.get<std::string>();
    const std::string sc_file = lower(scenario);
    std::map<std::string, std::map<int, double>> region_workers;
    for (const auto& yj : dc.at("years")) {
      const int year = yj.get<int>();
      auto read_pattern = [&](const char* key) {
        std::string p = dc.at("rasters").at(key).get<std::string>();
        p = subst(subst(p, "scenario", sc_file), "year", std::to_string(year));
        return read_raster(run.in_path(p));
      };
      DeployInputs in;
      in.rural = read_pattern("rural_pattern");
      in.total = read_pattern("total_pattern");
      in.gdp_pc = read_pattern("gdp_pattern");
      in.cropland = cropland;
      in.pasture = pasture;
      in.admin2 = admin2;
      in.countries = countries;
      in.resample_method = method;
      const DeployStack stack = build_stack(in, grid, year, scenario);
      const GridPrediction pred = predict_grid(model, stack, run.threads);

      auto emit = [&](const Raster& r, const std::string& stem) {
        for (const auto& ext : formats) {
          const std::string name = stem + "." + ext;
          write_raster(r, run.out_path(name).string());
          run.note_output(name);
        }
      };
      const std::string tag = sc_file + "_" + std::to_string(year);
      emit(pred.epwa, "epwa_" + tag + "_uncorrected");

      std::map<std::string, double> ratio_year;
      for (const auto& [key, v] : employable)
        if (key.second == year) {
          if (!(v >= 0.0 && v <= 1.0))
            fail_invalid("employable ratio outside [0,1] for " + key.first + "/" +
                         std::to_string(year));
          ratio_year[key.first] = v;
        }
      const WorkersResult wk =
          workers_raster(pred.epwa, stack.total, ratio_year, stack.admin2);
      emit(wk.workers, "workers_" + tag + "_uncorrected");
      for (const auto& [region, total] : regional_totals(wk.workers, stack.countries))
        region_workers[region][year] = total;

      long clamped = 0;
      bool corrected = false;
      std::map<std::string, double> expected;
      if (!reference.empty()) {
        for (const auto& [key, v] : reference)
          if (key.second == year) expected[key.first] = v;
        // futures stay uncorrected unless carry-forward is requested
        if (expected.empty() && carry_forward && latest_ref_year >= 0 &&
            year > latest_ref_year) {
          for (const auto& [key, v] : reference)
            if (key.second == latest_ref_year) expected[key.first] = v;
        }
      }
      if (!expected.empty()) {
        CorrectionTable table =
            correction_factors(expected, pred.epwa, stack.total, stack.admin2, year);
        const CorrectionResult cr = apply_correction(pred.epwa, table, stack.admin2);
        clamped = cr.clamped_cells;
        corrected = true;
        emit(cr.corrected, "epwa_" + tag + "_corrected");
        const WorkersResult wkc =
            workers_raster(cr.corrected, stack.total, ratio_year, stack.admin2);
        emit(wkc.workers, "workers_" + tag + "_corrected");
        const std::string cname = "correction_" + tag + ".csv";
        write_correction_csv(table, run.out_path(cname).string());
        run.note_output(cname);
      }
      report << scenario << ',' << year << ',' << pred.report.valid_cells << ','
             << pred.report.masked_cells << ',' << pred.report.pop_lost_to_mask << ','
             << pred.report.fallback_country << ',' << pred.report.fallback_region << ','
             << pred.report.fallback_none << ',' << clamped << ',' << (corrected ? 1 : 0)
             << "\n";
      log_event("deploy_done", {{"scenario", scenario},
                                {"year", year},
                                {"valid_cells", pred.report.valid_cells},
                                {"pop_lost_to_mask", pred.report.pop_lost_to_mask}});
    }

    // Regional summary mirroring the aggregate-change table layout.
    std::vector<int> years;
    for (const auto& yj : dc.at("years")) years.push_back(yj.get<int>());
    const int baseline =
        std::count(years.begin(), years.end(), 2020) ? 2020 : years.front();
    const std::string sname = "region_summary_" + sc_file + ".csv";
    std::ofstream os(run.out_path(sname));
    os << "region,pop_baseline,pop_2050,delta_2050,pop_2100,delta_2100\n";
    char buf[32];
    auto put = [&](double v, bool have) {
      if (!have) { os << ','; return; }
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    };
    for (const auto& [region, by_year] : region_workers) {
      const bool have_base = by_year.count(baseline) > 0;
      const double base = have_base ? by_year.at(baseline) : 0.0;
      os << region;
      put(base, have_base);
      for (int y : {2050, 2100}) {
        const bool have = by_year.count(y) > 0;
        const double v = have ? by_year.at(y) : 0.0;
        put(v, have);
        put(have_base && base != 0.0 ? 100.0 * (v - base) / base : 0.0,
            have && have_base && base != 0.0);
      }
      os << "\n";
    }
    os.close();
    run.note_output(sname);
  }
  report.close();
  run.note_output("deploy_report.csv");
  run.write_manifest("deploy");
}

}  // namespace epwa

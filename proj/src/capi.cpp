#include "epwa.h"

#include <cstring>
#include <sstream>
#include <string>

#include "epwa/deploy.hpp"
#include "epwa/errors.hpp"
#include "epwa/features.hpp"
#include "epwa/grid.hpp"
#include "epwa/labels.hpp"
#include "epwa/model.hpp"
#include "epwa/model_json.hpp"
#include "epwa/raster_ops.hpp"
#include "epwa/runner.hpp"

namespace {

thread_local std::string g_last_error;

epwa_status set_error(const std::exception& e, epwa_status code) {
  g_last_error = e.what();
  return code;
}

template <typename Fn>
epwa_status guarded(Fn&& fn) {
  try {
    fn();
    return EPWA_OK;
  } catch (const epwa::Error& e) {
    return set_error(e, static_cast<epwa_status>(e.code()));
  } catch (const std::exception& e) {
    return set_error(e, EPWA_E_INVALID);
  }
}

epwa_status require(bool ok, const char* msg) {
  if (ok) return EPWA_OK;
  g_last_error = msg;
  return EPWA_E_INVALID;
}

epwa::GridSpec from_c(const epwa_gridspec& g) {
  epwa::GridSpec s;
  s.lon_min = g.lon_min;
  s.lon_max = g.lon_max;
  s.lat_min = g.lat_min;
  s.lat_max = g.lat_max;
  s.cell_size = g.cell_size;
  s.nodata = g.nodata;
  s.n_rows = g.n_rows;
  s.n_cols = g.n_cols;
  s.validate();
  return s;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

epwa::RunOverrides overrides(const char* out_dir, int64_t seed, int threads) {
  epwa::RunOverrides ov;
  if (out_dir) ov.out_dir = std::string(out_dir);
  if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);
  if (threads > 0) ov.threads = threads;
  return ov;
}

}  // namespace

struct epwa_raster {
  epwa::Raster r;
};
struct epwa_zonemap {
  epwa::ZoneMap z;
};
struct epwa_model {
  epwa::FittedModel m;
};

extern "C" {

const char* epwa_last_error(void) { return g_last_error.c_str(); }

epwa_status epwa_raster_create(const epwa_gridspec* spec, const double* values,
                               epwa_raster** out) {
  if (epwa_status s = require(spec && values && out, "null argument")) return s;
  return guarded([&] {
    epwa::Raster r;
    r.spec = from_c(*spec);
    r.values.assign(values, values + r.spec.size());
    r.validate();
    *out = new epwa_raster{std::move(r)};
  });
}

epwa_status epwa_raster_read(const char* path, epwa_raster** out) {
  if (epwa_status s = require(path && out, "null argument")) return s;
  return guarded([&] { *out = new epwa_raster{epwa::read_raster(path)}; });
}

epwa_status epwa_raster_write(const epwa_raster* r, const char* path) {
  if (epwa_status s = require(r && path, "null argument")) return s;
  return guarded([&] { epwa::write_raster(r->r, path); });
}

epwa_status epwa_raster_spec(const epwa_raster* r, epwa_gridspec* out) {
  if (epwa_status s = require(r && out, "null argument")) return s;
  const epwa::GridSpec& g = r->r.spec;
  *out = {g.lon_min, g.lon_max, g.lat_min, g.lat_max, g.cell_size,
          g.nodata,  g.n_rows,  g.n_cols};
  return EPWA_OK;
}

epwa_status epwa_raster_values(const epwa_raster* r, const double** values, size_t* count) {
  if (epwa_status s = require(r && values && count, "null argument")) return s;
  *values = r->r.values.data();
  *count = r->r.values.size();
  return EPWA_OK;
}

epwa_status epwa_raster_resample(const epwa_raster* src, const epwa_gridspec* target,
                                 const char* method, epwa_raster** out) {
  if (epwa_status s = require(src && target && method && out, "null argument")) return s;
  return guarded([&] {
    *out = new epwa_raster{
        epwa::resample(src->r, from_c(*target), epwa::parse_resample_method(method))};
  });
}

epwa_status epwa_population_interpolate(const epwa_raster* p1, const epwa_raster* p2,
                                        int t1, int t2, int t, epwa_raster** out) {
  if (epwa_status s = require(p1 && p2 && out, "null argument")) return s;
  return guarded([&] {
    *out = new epwa_raster{epwa::interpolate_population(p1->r, p2->r, t1, t2, t)};
  });
}

void epwa_raster_free(epwa_raster* r) { delete r; }

epwa_status epwa_zonemap_read(const char* raster_path, const char* legend_csv,
                              epwa_zonemap** out) {
  if (epwa_status s = require(raster_path && legend_csv && out, "null argument")) return s;
  return guarded([&] {
    *out = new epwa_zonemap{epwa::read_zonemap(raster_path, legend_csv)};
  });
}

void epwa_zonemap_free(epwa_zonemap* z) { delete z; }

epwa_status epwa_zonal_stat_csv(const epwa_raster* value, const epwa_zonemap* zones,
                                const char* stat, char** csv) {
  if (epwa_status s = require(value && zones && stat && csv, "null argument")) return s;
  return guarded([&] {
    const auto table = epwa::zonal_stat(value->r, zones->z, epwa::parse_zonal_stat(stat));
    std::ostringstream os;
    os << "unit_id,value\n";
    char buf[32];
    for (const auto& [unit, v] : table) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << unit << ',' << buf << "\n";
    }
    *csv = dup_string(os.str());
  });
}

epwa_status epwa_fit(const char* labels_csv_path, const char* features_csv_path,
                     const char* model_spec_json, epwa_model** out) {
  if (epwa_status s = require(labels_csv_path && features_csv_path && out, "null argument"))
    return s;
  return guarded([&] {
    epwa::ModelSpec spec;
    if (model_spec_json && model_spec_json[0] != '\0')
      spec = epwa::spec_from_json(nlohmann::json::parse(model_spec_json));
    const epwa::LabelSet labels =
        epwa::merge_labels_from_records(epwa::read_labels_csv(labels_csv_path));
    const auto features = epwa::read_features_csv(features_csv_path);
    *out = new epwa_model{epwa::fit_with_region_table(spec, labels, features)};
  });
}

epwa_status epwa_model_load(const char* path, epwa_model** out) {
  if (epwa_status s = require(path && out, "null argument")) return s;
  return guarded([&] { *out = new epwa_model{epwa::load_model(path)}; });
}

epwa_status epwa_model_save(const epwa_model* m, const char* path) {
  if (epwa_status s = require(m && path, "null argument")) return s;
  return guarded([&] { epwa::save_model(m->m, path); });
}

epwa_status epwa_model_predict(const epwa_model* m, const double features[4],
                               const char* country_iso3, const char* region_code,
                               double* mu, int* effect_source) {
  if (epwa_status s = require(m && features && mu, "null argument")) return s;
  return guarded([&] {
    const epwa::Prediction p = m->m.predict_one(
        {features[0], features[1], features[2], features[3]},
        country_iso3 ? country_iso3 : "", region_code ? region_code : "");
    *mu = p.mu;
    if (effect_source) *effect_source = static_cast<int>(p.source);
  });
}

epwa_status epwa_model_metrics_json(const epwa_model* m, char** json_out) {
  if (epwa_status s = require(m && json_out, "null argument")) return s;
  return guarded([&] {
    nlohmann::ordered_json j;
    j["gcv"] = m->m.train_metrics.gcv;
    j["aic"] = m->m.train_metrics.aic;
    j["explained_variance"] = m->m.train_metrics.explained_variance;
    j["r2"] = m->m.train_metrics.r2;
    j["rmse"] = m->m.train_metrics.rmse;
    j["phi"] = m->m.phi;
    j["edf"] = m->m.diagnostics.edf;
    j["deviance"] = m->m.diagnostics.deviance;
    *json_out = dup_string(j.dump(2));
  });
}

void epwa_model_free(epwa_model* m) { delete m; }

epwa_status epwa_run_features(const char* config_path, const char* out_dir, int64_t seed,
                              int threads) {
  if (epwa_status s = require(config_path, "null config path")) return s;
  return guarded([&] { epwa::cmd_features(config_path, overrides(out_dir, seed, threads)); });
}

epwa_status epwa_run_fit(const char* config_path, const char* out_dir, int64_t seed,
                         int threads) {
  if (epwa_status s = require(config_path, "null config path")) return s;
  return guarded([&] { epwa::cmd_fit(config_path, overrides(out_dir, seed, threads)); });
}

epwa_status epwa_run_validate(const char* config_path, const char* out_dir, int64_t seed,
                              int threads) {
  if (epwa_status s = require(config_path, "null config path")) return s;
  return guarded([&] { epwa::cmd_validate(config_path, overrides(out_dir, seed, threads)); });
}

epwa_status epwa_run_deploy(const char* config_path, const char* out_dir, int64_t seed,
                            int threads) {
  if (epwa_status s = require(config_path, "null config path")) return s;
  return guarded([&] { epwa::cmd_deploy(config_path, overrides(out_dir, seed, threads)); });
}

epwa_status epwa_config_defaults(char** json_out) {
  if (epwa_status s = require(json_out != nullptr, "null argument")) return s;
  return guarded([&] { *json_out = dup_string(epwa::default_config().dump(2)); });
}

void epwa_string_free(char* s) { std::free(s); }

}  // extern "C"

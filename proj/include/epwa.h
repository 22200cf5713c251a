/* C interface for the EPWA modeling and downscaling library.
 *
 * All functions return a status code (0 success); on failure
 * epwa_last_error() carries a message for the calling thread. Handles are
 * opaque and must be released with the matching *_free function.
 */
#ifndef EPWA_H
#define EPWA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EPWA_API __declspec(dllexport)
#else
#define EPWA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int epwa_status;
#define EPWA_OK 0
#define EPWA_E_INVALID 2 /* validation / domain errors */
#define EPWA_E_IO 3      /* file and format errors */
#define EPWA_E_NUMERIC 4 /* numerical failure (non-convergence) */

EPWA_API const char* epwa_last_error(void);

typedef struct epwa_raster epwa_raster;
typedef struct epwa_zonemap epwa_zonemap;
typedef struct epwa_model epwa_model;

typedef struct epwa_gridspec {
  double lon_min, lon_max, lat_min, lat_max;
  double cell_size;
  double nodata;
  int32_t n_rows, n_cols;
} epwa_gridspec;

/* ---- rasters (GWG1 binary or ESRI ASCII, by extension .gwg / .asc) ---- */
EPWA_API epwa_status epwa_raster_create(const epwa_gridspec* spec, const double* values,
                                        epwa_raster** out);
EPWA_API epwa_status epwa_raster_read(const char* path, epwa_raster** out);
EPWA_API epwa_status epwa_raster_write(const epwa_raster* r, const char* path);
EPWA_API epwa_status epwa_raster_spec(const epwa_raster* r, epwa_gridspec* out);
EPWA_API epwa_status epwa_raster_values(const epwa_raster* r, const double** values,
                                        size_t* count);
/* method: nearest | block_mean | area_weighted_mean */
EPWA_API epwa_status epwa_raster_resample(const epwa_raster* src,
                                          const epwa_gridspec* target, const char* method,
                                          epwa_raster** out);
EPWA_API epwa_status epwa_population_interpolate(const epwa_raster* p1,
                                                 const epwa_raster* p2, int t1, int t2,
                                                 int t, epwa_raster** out);
EPWA_API void epwa_raster_free(epwa_raster* r);

/* ---- zone maps (id raster + legend CSV zone_id,unit_id,country_iso3,region_code) */
EPWA_API epwa_status epwa_zonemap_read(const char* raster_path, const char* legend_csv,
                                       epwa_zonemap** out);
EPWA_API void epwa_zonemap_free(epwa_zonemap* z);
/* stat: mean | median | sum; returns CSV text "unit_id,value" (caller frees) */
EPWA_API epwa_status epwa_zonal_stat_csv(const epwa_raster* value,
                                         const epwa_zonemap* zones, const char* stat,
                                         char** csv);

/* ---- models ---- */
/* model_spec_json: same object as the "model" section of the run config;
   NULL or "" selects the defaults. */
EPWA_API epwa_status epwa_fit(const char* labels_csv_path, const char* features_csv_path,
                              const char* model_spec_json, epwa_model** out);
EPWA_API epwa_status epwa_model_load(const char* path, epwa_model** out);
EPWA_API epwa_status epwa_model_save(const epwa_model* m, const char* path);
/* features in order ln_rural_prop, ln_pop_density, ln_gdp_median, ln_agland.
   effect_source (may be NULL): 0 country, 1 region, 2 none, 3 fixed-only */
EPWA_API epwa_status epwa_model_predict(const epwa_model* m, const double features[4],
                                        const char* country_iso3, const char* region_code,
                                        double* mu, int* effect_source);
EPWA_API epwa_status epwa_model_metrics_json(const epwa_model* m, char** json_out);
EPWA_API void epwa_model_free(epwa_model* m);

/* ---- pipeline commands (the CLI is a thin wrapper over these) ----
   out_dir == NULL, seed < 0 or threads <= 0 fall back to the config values. */
EPWA_API epwa_status epwa_run_features(const char* config_path, const char* out_dir,
                                       int64_t seed, int threads);
EPWA_API epwa_status epwa_run_fit(const char* config_path, const char* out_dir,
                                  int64_t seed, int threads);
EPWA_API epwa_status epwa_run_validate(const char* config_path, const char* out_dir,
                                       int64_t seed, int threads);
EPWA_API epwa_status epwa_run_deploy(const char* config_path, const char* out_dir,
                                     int64_t seed, int threads);
/* full default config as JSON text (caller frees) */
EPWA_API epwa_status epwa_config_defaults(char** json_out);

EPWA_API void epwa_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* EPWA_H */

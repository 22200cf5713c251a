#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epwa/basis.hpp"
#include "epwa/features.hpp"
#include "epwa/labels.hpp"

namespace epwa {

// Model structures compared in the structure-exploration table.
enum class ModelStructure { linear, smooths, smooths_re, smooths_re_int };
enum class Grouping { country, region };

std::string to_string(ModelStructure s);
ModelStructure parse_structure(const std::string& s);
std::string to_string(Grouping g);
Grouping parse_grouping(const std::string& s);

// Canonical feature order used to assemble design matrices.
inline const std::array<std::string, 4> kFeatureNames = {
    "ln_rural_prop", "ln_pop_density", "ln_gdp_median", "ln_agland"};

// Interaction smooths pair GDP with rural proportion and population density.
inline const std::array<std::pair<int, int>, 2> kTensorPairs = {{{2, 0}, {2, 1}}};

struct LambdaGrid {
  double log10_min = -4.0;
  double log10_max = 6.0;
  int points = 11;
  int sweeps = 2;
};

struct ModelSpec {
  ModelStructure structure = ModelStructure::smooths_re_int;
  Grouping grouping = Grouping::country;
  int univariate_rank = 10;
  int tensor_rank = 5;  // per margin
  LambdaGrid lambda_grid;
  std::optional<double> fixed_lambda;  // force every penalty; skips the GCV search
  double tol = 1e-8;
  int max_inner = 200;
  double phi_init = 10.0;
};

// Joined label/feature rows ready for fitting.
struct ModelData {
  Eigen::VectorXd y;   // squeezed responses in (0,1)
  Eigen::MatrixXd x;   // n x 4, kFeatureNames order
  std::vector<std::string> unit, country, region;
  std::vector<int> year;
  long n() const { return y.size(); }
};

// Inner join on (unit_id, year); any label without a feature row is an error
// listing the offenders.
ModelData join_labels_features(const LabelSet& labels,
                               const std::vector<UnitFeatures>& features);

struct FitMetrics {
  double gcv = 0.0;
  double aic = 0.0;
  double explained_variance = 0.0;
  double r2 = 0.0;
  double rmse = 0.0;
};

struct FitDiagnostics {
  double deviance = 0.0;
  double edf = 0.0;
  double loglik = 0.0;
  int irls_iterations = 0;
  int phi_updates = 0;
  bool converged = false;
  // Penalized log-likelihood after every accepted step of the final fit
  // (phi updates included; the sequence is non-decreasing).
  std::vector<double> penalized_loglik_trace;
};

enum class EffectSource { country, region, none, fixed_only };

struct Prediction {
  double mu = 0.0;
  EffectSource source = EffectSource::fixed_only;
};

struct FittedModel {
  ModelSpec spec;
  std::vector<BasisBlock> blocks;  // canonical order per structure
  Eigen::VectorXd coef;            // intercept first, then block segments
  std::vector<double> lambda;      // one per penalty component
  double phi = 1.0;
  std::map<std::string, double> country_effects;
  std::map<std::string, double> region_effects;
  std::map<std::string, std::pair<double, double>> train_range;  // feature -> (min,max)
  Eigen::MatrixXd coef_cov;  // (X'WX + S)^-1 at convergence
  FitDiagnostics diagnostics;
  FitMetrics train_metrics;

  double intercept() const { return coef[0]; }
  bool has_random_effects() const {
    return spec.structure == ModelStructure::smooths_re ||
           spec.structure == ModelStructure::smooths_re_int;
  }

  // Linear predictor without the random effect, for one feature vector in
  // kFeatureNames order.
  double link_fixed(const std::array<double, 4>& feats) const;

  // Random effect on the link scale: country table first, then the region
  // table, else zero.
  std::pair<double, EffectSource> random_effect(const std::string& country_iso3,
                                                const std::string& region_code) const;

  Prediction predict_one(const std::array<double, 4>& feats,
                         const std::string& country_iso3,
                         const std::string& region_code) const;

  Eigen::VectorXd predict_mu(const ModelData& data) const;
};

// Penalized maximum likelihood: penalized IRLS on the logit-link Beta working
// model, phi profiled by Newton on ln(phi), smoothing parameters selected by
// a coordinate-wise GCV grid search (ties resolve to the smallest lambda).
FittedModel fit_model_data(const ModelSpec& spec, const ModelData& data);
FittedModel fit_model(const ModelSpec& spec, const LabelSet& labels,
                      const std::vector<UnitFeatures>& features);

// Fits the requested grouping plus the region-grouped equivalent model and
// carries the region effect table alongside the primary one.
FittedModel fit_with_region_table(const ModelSpec& spec, const LabelSet& labels,
                                  const std::vector<UnitFeatures>& features);
FittedModel fit_with_region_table_data(const ModelSpec& spec, const ModelData& data);

// rmse/r2/explained variance are recomputed on the given rows; aic and gcv
// use the converged fit's edf and the given rows' likelihood (training rows
// reproduce the structure-comparison table semantics).
FitMetrics compute_metrics(const FittedModel& model, const ModelData& data);

struct PartialEffectRow {
  double x = 0.0;
  double effect = 0.0;
  double se_lo = 0.0;
  double se_hi = 0.0;
};

// Centered smooth effect over an even grid spanning the training range, with
// a pointwise +-2 standard error band from the penalized coefficient
// covariance.
std::vector<PartialEffectRow> export_partial_effects(const FittedModel& model,
                                                     const std::string& variable,
                                                     int grid_size = 200);
void write_partial_effects_csv(const std::vector<PartialEffectRow>& rows,
                               const std::string& path);

// Versioned self-describing artifact; canonical field order, bitwise
// round-trip for all numeric content.
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

}  // namespace epwa

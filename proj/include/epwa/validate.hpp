#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "epwa/labels.hpp"
#include "epwa/model.hpp"

namespace epwa {

enum class SplitStrategy { spatial, time_forward, time_backward, multiscale };

std::string to_string(SplitStrategy s);
SplitStrategy parse_strategy(const std::string& s);

struct SplitPlan {
  SplitStrategy strategy = SplitStrategy::spatial;
  std::string region;  // multiscale only
  std::uint64_t seed = 0;
  std::vector<LabelRecord> train_records;
  std::vector<LabelRecord> valid_records;
  std::vector<std::string> flagged_countries;  // fewer than 5 subnational units
};

// Random stratified 80/20 split by subnational unit within each country
// (all years of a unit stay together); national-only records all train.
// Countries with fewer than 5 units still contribute at least one valid
// unit and are flagged. Deterministic under the seed.
SplitPlan split_spatial(const LabelSet& labels, std::uint64_t seed);

// Forward: train years [2000,2017], valid [2018,2020].
// Backward: train [2005,2020], valid [2000,2004].
SplitPlan split_temporal(const LabelSet& labels, SplitStrategy direction);

// Replace the subnational records of the region's countries with their
// national records; validate on the withheld subnational records.
SplitPlan split_multiscale(const LabelSet& labels, const std::string& region);

struct CountryResidual {
  long n = 0;
  double rmse = 0.0;
  double mean_residual = 0.0;
};

struct ValidationReport {
  std::string strategy;
  std::string region;
  double rmse = 0.0;
  long n_train = 0;
  long n_valid = 0;
  std::map<std::string, CountryResidual> per_country;
};

// Fit on the train side only, predict the valid side (country -> region
// fallback applies), RMSE on the response scale.
ValidationReport evaluate_split(const ModelSpec& spec, const SplitPlan& plan,
                                const std::vector<UnitFeatures>& features);

// Report CSV: strategy,region,rmse,n_train,n_valid
void write_validation_csv(const std::vector<ValidationReport>& reports,
                          const std::string& path);

// Regions that contain at least one subnational country, sorted.
std::vector<std::string> subnational_regions(const LabelSet& labels);

}  // namespace epwa

#include "epwa/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "epwa/errors.hpp"

namespace epwa {

std::string to_string(SplitStrategy s) {
  switch (s) {
    case SplitStrategy::spatial: return "spatial";
    case SplitStrategy::time_forward: return "time_forward";
    case SplitStrategy::time_backward: return "time_backward";
    case SplitStrategy::multiscale: return "multiscale";
  }
  return "?";
}

SplitStrategy parse_strategy(const std::string& s) {
  if (s == "spatial") return SplitStrategy::spatial;
  if (s == "time_forward") return SplitStrategy::time_forward;
  if (s == "time_backward") return SplitStrategy::time_backward;
  if (s == "multiscale") return SplitStrategy::multiscale;
  fail_invalid("unknown validation strategy: " + s);
}

SplitPlan split_spatial(const LabelSet& labels, std::uint64_t seed) {
  labels.validate();
  // Subnational units per country, sorted for a deterministic shuffle base.
  std::map<std::string, std::set<std::string>> units_by_country;
  for (const auto& r : labels.records)
    if (r.admin_level >= 1) units_by_country[r.country_iso3].insert(r.unit_id);
  if (units_by_country.empty())
    fail_invalid("split_spatial: label set has no subnational countries");

  SplitPlan plan;
  plan.strategy = SplitStrategy::spatial;
  plan.seed = seed;
  std::mt19937_64 rng(seed);
  std::set<std::string> valid_units;
  for (const auto& [country, unit_set] : units_by_country) {
    std::vector<std::string> units(unit_set.begin(), unit_set.end());
    std::shuffle(units.begin(), units.end(), rng);
    const long n_valid = std::max<long>(1, std::lround(0.2 * double(units.size())));
    if (units.size() < 5) plan.flagged_countries.push_back(country);
    for (long i = 0; i < n_valid; ++i) valid_units.insert(units[std::size_t(i)]);
  }
  for (const auto& r : labels.records)
    (r.admin_level >= 1 && valid_units.count(r.unit_id) ? plan.valid_records
                                                        : plan.train_records)
        .push_back(r);
  return plan;
}

SplitPlan split_temporal(const LabelSet& labels, SplitStrategy direction) {
  if (direction != SplitStrategy::time_forward && direction != SplitStrategy::time_backward)
    fail_invalid("split_temporal: direction must be time_forward or time_backward");
  SplitPlan plan;
  plan.strategy = direction;
  const bool forward = direction == SplitStrategy::time_forward;
  for (const auto& r : labels.records) {
    const bool train = forward ? (r.year >= 2000 && r.year <= 2017)
                               : (r.year >= 2005 && r.year <= 2020);
    (train ? plan.train_records : plan.valid_records).push_back(r);
  }
  if (plan.train_records.empty() || plan.valid_records.empty())
    fail_invalid("split_temporal: empty train or validation side");
  return plan;
}

SplitPlan split_multiscale(const LabelSet& labels, const std::string& region) {
  labels.validate();
  // Countries with subnational data inside the region.
  std::set<std::string> swap_countries;
  for (const auto& r : labels.records)
    if (r.admin_level >= 1 && r.region_code == region) swap_countries.insert(r.country_iso3);
  if (swap_countries.empty())
    fail_invalid("split_multiscale: region " + region + " has no subnational country");

  SplitPlan plan;
  plan.strategy = SplitStrategy::multiscale;
  plan.region = region;
  for (const auto& r : labels.records) {
    if (r.admin_level >= 1 && swap_countries.count(r.country_iso3))
      plan.valid_records.push_back(r);
    else
      plan.train_records.push_back(r);
  }
  // Aggregated national data comes from the withheld national record set.
  for (const auto& r : labels.national_reserve)
    if (swap_countries.count(r.country_iso3)) plan.train_records.push_back(r);
  return plan;
}

std::vector<std::string> subnational_regions(const LabelSet& labels) {
  std::set<std::string> regions;
  for (const auto& r : labels.records)
    if (r.admin_level >= 1) regions.insert(r.region_code);
  return {regions.begin(), regions.end()};
}

ValidationReport evaluate_split(const ModelSpec& spec, const SplitPlan& plan,
                                const std::vector<UnitFeatures>& features) {
  if (plan.train_records.empty() || plan.valid_records.empty())
    fail_invalid("evaluate: split plan has an empty side");
  LabelSet train_set;
  train_set.records = plan.train_records;
  LabelSet valid_set;
  valid_set.records = plan.valid_records;

  const FittedModel model = fit_with_region_table(spec, train_set, features);
  const ModelData valid = join_labels_features(valid_set, features);
  const Eigen::VectorXd mu = model.predict_mu(valid);

  ValidationReport rep;
  rep.strategy = to_string(plan.strategy);
  rep.region = plan.region;
  rep.n_train = long(plan.train_records.size());
  rep.n_valid = long(plan.valid_records.size());

  double sse = 0.0;
  struct Acc { double sse = 0.0, sum = 0.0; long n = 0; };
  std::map<std::string, Acc> by_country;
  for (long i = 0; i < valid.n(); ++i) {
    const double e = valid.y[i] - mu[i];
    sse += e * e;
    Acc& a = by_country[valid.country[std::size_t(i)]];
    a.sse += e * e;
    a.sum += e;
    ++a.n;
  }
  rep.rmse = std::sqrt(sse / double(valid.n()));
  for (const auto& [c, a] : by_country)
    rep.per_country[c] = {a.n, std::sqrt(a.sse / double(a.n)), a.sum / double(a.n)};
  return rep;
}

void write_validation_csv(const std::vector<ValidationReport>& reports,
                          const std::string& path) {
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  os << "strategy,region,rmse,n_train,n_valid\n";
  char buf[32];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%.17g", r.rmse);
    os << r.strategy << ',' << r.region << ',' << buf << ',' << r.n_train << ','
       << r.n_valid << "\n";
  }
  if (!os) fail_io("write failed: " + path);
}

}  // namespace epwa

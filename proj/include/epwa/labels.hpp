#pragma once

#include <map>
#include <string>
#include <vector>

namespace epwa {

// One observed share of employed population working in agriculture for a
// geographic unit in a year. Admin level 0 records use the ISO3 code as
// unit_id.
struct LabelRecord {
  std::string unit_id;
  std::string country_iso3;
  std::string region_code;  // UN geoscheme subregion
  int admin_level = 0;      // 0 = national, 1-2 = subnational
  int year = 0;
  double epwa = 0.0;        // in [0,1]

  void validate() const;
};

enum class Provenance { national_only, subnational };

// Merged training label set: per country, records come from exactly one
// source (subnational where available, national otherwise). National records
// displaced by subnational coverage are kept aside for the multiscale
// validation swap.
struct LabelSet {
  std::vector<LabelRecord> records;
  std::map<std::string, Provenance> provenance;     // country_iso3 -> flag
  std::vector<LabelRecord> national_reserve;        // excluded national records

  void validate() const;
  std::vector<std::string> countries() const;
};

// National data is used only where no subnational data exists for a country.
// Duplicate (unit_id, year) pairs in the merged output are an error.
LabelSet merge_labels(const std::vector<LabelRecord>& national,
                      const std::vector<LabelRecord>& subnational);

// labels.csv: unit_id,country_iso3,region_code,admin_level,year,epwa
std::vector<LabelRecord> read_labels_csv(const std::string& path);
void write_labels_csv(const std::vector<LabelRecord>& records, const std::string& path);

// Split a mixed record list by admin level and merge.
LabelSet merge_labels_from_records(const std::vector<LabelRecord>& all);

}  // namespace epwa

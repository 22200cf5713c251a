#include "epwa/labels.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "epwa/errors.hpp"

namespace epwa {

void LabelRecord::validate() const {
  if (!(epwa >= 0.0 && epwa <= 1.0))
    fail_invalid("label " + unit_id + "/" + std::to_string(year) + ": epwa outside [0,1]");
  if (year < 2000 || year > 2020)
    fail_invalid("label " + unit_id + ": year " + std::to_string(year) +
                 " outside the observation window [2000,2020]");
  if (admin_level < 0 || admin_level > 2)
    fail_invalid("label " + unit_id + ": admin_level must be 0, 1 or 2");
  if (admin_level == 0 && unit_id != country_iso3)
    fail_invalid("label " + unit_id + ": admin level 0 requires unit_id == country_iso3");
}

void LabelSet::validate() const {
  std::set<std::string> with_national, with_sub;
  for (const auto& r : records) {
    r.validate();
    (r.admin_level == 0 ? with_national : with_sub).insert(r.country_iso3);
  }
  for (const auto& c : with_national)
    if (with_sub.count(c))
      fail_invalid("label set: country " + c + " mixes national and subnational records");
}

std::vector<std::string> LabelSet::countries() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.country_iso3);
  return {s.begin(), s.end()};
}

LabelSet merge_labels(const std::vector<LabelRecord>& national,
                      const std::vector<LabelRecord>& subnational) {
  for (const auto& r : national) {
    r.validate();
    if (r.admin_level != 0)
      fail_invalid("merge_labels: national list contains admin level " +
                   std::to_string(r.admin_level) + " record " + r.unit_id);
  }
  for (const auto& r : subnational) {
    r.validate();
    if (r.admin_level < 1)
      fail_invalid("merge_labels: subnational list contains admin level 0 record " + r.unit_id);
  }
  std::set<std::string> sub_countries;
  for (const auto& r : subnational) sub_countries.insert(r.country_iso3);

  LabelSet out;
  for (const auto& r : national) {
    if (sub_countries.count(r.country_iso3)) {
      out.national_reserve.push_back(r);
    } else {
      out.records.push_back(r);
      out.provenance.emplace(r.country_iso3, Provenance::national_only);
    }
  }
  for (const auto& r : subnational) {
    out.records.push_back(r);
    out.provenance[r.country_iso3] = Provenance::subnational;
  }

  std::set<std::pair<std::string, int>> seen;
  std::string dups;
  for (const auto& r : out.records)
    if (!seen.emplace(r.unit_id, r.year).second)
      dups += (dups.empty() ? "" : ", ") + r.unit_id + "/" + std::to_string(r.year);
  if (!dups.empty())
    fail_invalid("merge_labels: duplicate (unit_id, year) pairs: " + dups);

  out.validate();
  return out;
}

LabelSet merge_labels_from_records(const std::vector<LabelRecord>& all) {
  std::vector<LabelRecord> national, subnational;
  for (const auto& r : all)
    (r.admin_level == 0 ? national : subnational).push_back(r);
  return merge_labels(national, subnational);
}

// ---- CSV ----

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') { out.push_back(cur); cur.clear(); }
    else if (c != '\r') cur += c;
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<LabelRecord> read_labels_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail_io("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) fail_io("empty labels CSV: " + path);
  if (split_line(line) != std::vector<std::string>{"unit_id", "country_iso3", "region_code",
                                                    "admin_level", "year", "epwa"})
    fail_io("labels CSV header mismatch: " + path);
  std::vector<LabelRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_line(line);
    if (f.size() != 6) fail_io("labels CSV row with wrong field count: " + line);
    LabelRecord r;
    r.unit_id = f[0];
    r.country_iso3 = f[1];
    r.region_code = f[2];
    r.admin_level = std::stoi(f[3]);
    r.year = std::stoi(f[4]);
    r.epwa = std::stod(f[5]);
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

void write_labels_csv(const std::vector<LabelRecord>& records, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail_io("cannot open for writing: " + path);
  os << "unit_id,country_iso3,region_code,admin_level,year,epwa\n";
  char buf[32];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.epwa);
    os << r.unit_id << ',' << r.country_iso3 << ',' << r.region_code << ','
       << r.admin_level << ',' << r.year << ',' << buf << "\n";
  }
  if (!os) fail_io("write failed: " + path);
}

}  // namespace epwa

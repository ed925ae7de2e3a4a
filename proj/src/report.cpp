#include "kfp/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace kfp {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(std::vector<std::string> columns)
    : columns_(std::move(columns)) {}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size())
    throw std::invalid_argument("CsvWriter: row width mismatch");
  rows_.push_back(cells);
}

std::string CsvWriter::str() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(columns_[i]);
  }
  out += "\r\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(row[i]);
    }
    out += "\r\n";
  }
  return out;
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("CsvWriter: cannot open " + path);
  os << str();
}

void RunReport::check(const std::string& what, bool pass, double value,
                      double threshold, const std::string& detail) {
  assertions_.push_back({what, pass, value, threshold, detail});
}

void RunReport::note(const std::string& key, const nlohmann::json& value) {
  notes_[key] = value;
}

void RunReport::attach_csv(const std::string& stem, const CsvWriter& csv) {
  csvs_.emplace_back(stem, csv);
}

bool RunReport::all_passed() const {
  for (const auto& a : assertions_)
    if (!a.pass) return false;
  return true;
}

int RunReport::summary_to_stdout() const {
  for (const auto& a : assertions_) {
    std::printf("%s  %s (value=%s threshold=%s%s%s)\n",
                a.pass ? "PASS" : "FAIL", a.name.c_str(),
                format_double(a.value).c_str(),
                format_double(a.threshold).c_str(),
                a.detail.empty() ? "" : " ", a.detail.c_str());
  }
  return all_passed() ? 0 : 1;
}

void RunReport::write(const std::string& out_dir,
                      const std::string& format) const {
  std::filesystem::create_directories(out_dir);
  nlohmann::json j;
  j["name"] = name_;
  j["notes"] = notes_;
  j["assertions"] = nlohmann::json::array();
  for (const auto& a : assertions_) {
    nlohmann::json aj;
    aj["name"] = a.name;
    aj["pass"] = a.pass;
    aj["value"] = format_double(a.value);
    aj["threshold"] = format_double(a.threshold);
    if (!a.detail.empty()) aj["detail"] = a.detail;
    j["assertions"].push_back(aj);
  }
  if (format == "json" || format == "both") {
    std::ofstream os(out_dir + "/" + name_ + ".json", std::ios::binary);
    if (!os) throw std::runtime_error("RunReport: cannot write report json");
    os << j.dump(2) << "\n";
  }
  if (format == "csv" || format == "both") {
    CsvWriter summary({"assertion", "pass", "value", "threshold", "detail"});
    for (const auto& a : assertions_)
      summary.add_row({a.name, a.pass ? "1" : "0", format_double(a.value),
                       format_double(a.threshold), a.detail});
    summary.write(out_dir + "/" + name_ + "_assertions.csv");
  }
  for (const auto& [stem, csv] : csvs_)
    csv.write(out_dir + "/" + stem + ".csv");
}

}  // namespace kfp

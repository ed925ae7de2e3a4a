#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace kfp {

// 17 significant digits, '.' decimal separator, locale-free.
std::string format_double(double v);

// RFC-4180 field quoting.
std::string csv_escape(const std::string& s);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);
  void add_row(const std::vector<std::string>& cells);
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct Assertion {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

// Collects PASS/FAIL lines and serializes run reports.
class RunReport {
 public:
  explicit RunReport(std::string name) : name_(std::move(name)) {}

  void check(const std::string& what, bool pass, double value,
             double threshold, const std::string& detail = "");
  void note(const std::string& key, const nlohmann::json& value);
  void attach_csv(const std::string& stem, const CsvWriter& csv);

  bool all_passed() const;
  int summary_to_stdout() const;  // prints one line per assertion; 0 iff pass
  // writes <name>.json plus any attached CSVs into the directory
  void write(const std::string& out_dir, const std::string& format) const;

  const std::vector<Assertion>& assertions() const { return assertions_; }

 private:
  std::string name_;
  std::vector<Assertion> assertions_;
  nlohmann::json notes_ = nlohmann::json::object();
  std::vector<std::pair<std::string, CsvWriter>> csvs_;
};

}  // namespace kfp

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qplab/operator.hpp"

namespace qplab {

/// One [name] section of a structured key-value text file: `key = value`
/// lines plus bare data rows. `#` starts a comment, blank lines are skipped.
struct IniSection {
  std::string name;
  std::map<std::string, std::string> keys;
  std::vector<std::string> rows;

  bool has(const std::string& key) const { return keys.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback = {}) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;  // whitespace separated
};

std::vector<IniSection> parse_ini(std::istream& in);
std::vector<IniSection> parse_ini_file(const std::string& path);

/// Model document sections: [params] (epsilon, omega, rho, c0, l, optional
/// omega_digits / omega_note), [potential.j] with one `k re im` triple per row
/// (optional strip_width key), [hopping.k] with l rows of l (re, im) pairs.
OperatorModel parse_model(std::istream& in, std::vector<std::string>* warnings = nullptr);
OperatorModel parse_model_file(const std::string& path, std::vector<std::string>* warnings = nullptr);

void write_model(const OperatorModel& model, std::ostream& out);
void write_model_file(const OperatorModel& model, const std::string& path);

}  // namespace qplab

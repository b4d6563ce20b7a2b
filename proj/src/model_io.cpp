#include "qplab/model_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qplab/errors.hpp"

namespace qplab {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<double> parse_numbers(const std::string& line) {
  std::istringstream is(line);
  std::vector<double> out;
  double v = 0.0;
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw ValidationError("malformed numeric row: '" + line + "'");
  return out;
}

}  // namespace

std::string IniSection::get(const std::string& key, const std::string& fallback) const {
  auto it = keys.find(key);
  return it == keys.end() ? fallback : it->second;
}

double IniSection::get_double(const std::string& key) const {
  auto it = keys.find(key);
  if (it == keys.end()) {
    throw ValidationError("section [" + name + "] is missing key '" + key + "'");
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (trim(it->second.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("section [" + name + "] key '" + key + "' is not a number: '" +
                        it->second + "'");
}

double IniSection::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long IniSection::get_int(const std::string& key) const {
  const double v = get_double(key);
  const auto r = static_cast<long long>(std::llround(v));
  if (std::abs(v - static_cast<double>(r)) > 1e-9) {
    throw ValidationError("section [" + name + "] key '" + key + "' is not an integer");
  }
  return r;
}

long long IniSection::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::vector<double> IniSection::get_double_list(const std::string& key) const {
  auto it = keys.find(key);
  if (it == keys.end()) {
    throw ValidationError("section [" + name + "] is missing key '" + key + "'");
  }
  return parse_numbers(it->second);
}

std::vector<IniSection> parse_ini(std::istream& in) {
  std::vector<IniSection> sections;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        std::ostringstream os;
        os << "line " << lineno << ": unterminated section header";
        throw ValidationError(os.str());
      }
      sections.push_back({trim(line.substr(1, line.size() - 2)), {}, {}});
      continue;
    }
    if (sections.empty()) {
      std::ostringstream os;
      os << "line " << lineno << ": content before any [section]";
      throw ValidationError(os.str());
    }
    if (auto eq = line.find('='); eq != std::string::npos) {
      sections.back().keys[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    } else {
      sections.back().rows.push_back(line);
    }
  }
  return sections;
}

std::vector<IniSection> parse_ini_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  return parse_ini(in);
}

OperatorModel parse_model(std::istream& in, std::vector<std::string>* warnings) {
  const auto sections = parse_ini(in);
  OperatorModel model;
  const IniSection* params = nullptr;
  for (const auto& s : sections) {
    if (s.name == "params") params = &s;
  }
  if (params == nullptr) throw ValidationError("model file has no [params] section");

  model.epsilon = params->get_double("epsilon");
  model.omega = params->get_double("omega");
  model.omega_digits = params->get("omega_digits");
  model.omega_note = params->get("omega_note");
  model.hopping.decay_rate = params->get_double("rho");
  model.hopping.decay_amp = params->get_double("c0", 1.0);
  const auto l = static_cast<int>(params->get_int("l"));
  if (l < 1) throw ValidationError("[params] l must be >= 1");

  model.potential.components.resize(l);
  std::vector<bool> seen(l, false);
  for (const auto& s : sections) {
    if (s.name.rfind("potential.", 0) == 0) {
      int j = 0;
      try {
        j = std::stoi(s.name.substr(10));
      } catch (const std::exception&) {
        throw ValidationError("bad potential section name [" + s.name + "]");
      }
      if (j < 1 || j > l) {
        throw ValidationError("potential index out of range in [" + s.name + "]");
      }
      PotentialSpec& spec = model.potential.components[j - 1];
      spec.strip_width = s.get_double("strip_width", model.hopping.decay_rate);
      for (const auto& row : s.rows) {
        const auto nums = parse_numbers(row);
        if (nums.size() != 3) {
          throw ValidationError("[" + s.name + "] rows must be 'k re im' triples");
        }
        const auto k = static_cast<int>(std::llround(nums[0]));
        spec.coeffs[k] = Complex(nums[1], nums[2]);
      }
      seen[j - 1] = true;
    } else if (s.name.rfind("hopping.", 0) == 0) {
      int k = 0;
      try {
        k = std::stoi(s.name.substr(8));
      } catch (const std::exception&) {
        throw ValidationError("bad hopping section name [" + s.name + "]");
      }
      if (k < 0) throw ValidationError("hopping sections carry k >= 0 only");
      if (static_cast<int>(s.rows.size()) != l) {
        throw ValidationError("[" + s.name + "] needs exactly l rows");
      }
      Eigen::MatrixXcd w(l, l);
      for (int r = 0; r < l; ++r) {
        const auto nums = parse_numbers(s.rows[r]);
        if (static_cast<int>(nums.size()) != 2 * l) {
          throw ValidationError("[" + s.name + "] rows need l (re, im) pairs");
        }
        for (int c = 0; c < l; ++c) w(r, c) = Complex(nums[2 * c], nums[2 * c + 1]);
      }
      model.hopping.blocks[k] = w;
    } else if (s.name != "params") {
      throw ValidationError("unknown model section [" + s.name + "]");
    }
  }
  for (int j = 0; j < l; ++j) {
    if (!seen[j]) {
      std::ostringstream os;
      os << "model file is missing section [potential." << j + 1 << "]";
      throw ValidationError(os.str());
    }
  }
  const auto warn = model.validate();
  if (warnings) *warnings = warn;
  return model;
}

OperatorModel parse_model_file(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file: " + path);
  return parse_model(in, warnings);
}

void write_model(const OperatorModel& model, std::ostream& out) {
  out << std::setprecision(17);
  out << "[params]\n";
  out << "epsilon = " << model.epsilon << "\n";
  out << "omega = " << model.omega << "\n";
  if (!model.omega_digits.empty()) out << "omega_digits = " << model.omega_digits << "\n";
  if (!model.omega_note.empty()) out << "omega_note = " << model.omega_note << "\n";
  out << "rho = " << model.hopping.decay_rate << "\n";
  out << "c0 = " << model.hopping.decay_amp << "\n";
  out << "l = " << model.block_size() << "\n";
  for (int j = 0; j < model.block_size(); ++j) {
    const auto& spec = model.potential.components[j];
    out << "\n[potential." << j + 1 << "]\n";
    out << "strip_width = " << spec.strip_width << "\n";
    for (const auto& [k, c] : spec.coeffs) {
      out << k << " " << c.real() << " " << c.imag() << "\n";
    }
  }
  for (const auto& [k, w] : model.hopping.blocks) {
    out << "\n[hopping." << k << "]\n";
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        out << w(r, c).real() << " " << w(r, c).imag();
        out << (c + 1 == w.cols() ? "\n" : " ");
      }
    }
  }
}

void write_model_file(const OperatorModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model file: " + path);
  write_model(model, out);
}

}  // namespace qplab

#include "clef/condition_registry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "clef/errors.hpp"

namespace clef {

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ConditionRegistry ConditionRegistry::hashed(std::size_t dim, std::uint64_t salt) {
  if (dim == 0) throw InvalidArgument("condition embedding dimension must be positive");
  ConditionRegistry r;
  r.dim_ = dim;
  r.mode_ = Mode::hashed;
  r.salt_ = salt;
  return r;
}

ConditionRegistry ConditionRegistry::strict(std::size_t dim) {
  ConditionRegistry r = hashed(dim);
  r.mode_ = Mode::strict;
  return r;
}

void ConditionRegistry::insert(const std::string& token, std::vector<double> vector) {
  if (token.empty()) throw InvalidArgument("empty condition token");
  if (token == kNullCondition) throw InvalidArgument("'none' is reserved");
  if (vector.size() != dim_) {
    throw ShapeMismatch("condition '" + token + "' has dimension " + std::to_string(vector.size()) +
                        ", expected " + std::to_string(dim_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw NonFiniteValue("condition '" + token + "' is not finite");
  }
  table_[token] = std::move(vector);
}

std::vector<double> ConditionRegistry::hashed_vector(std::string_view token) const {
  std::mt19937_64 rng(stable_hash(token) ^ (salt_ * 0x9E3779B97F4A7C15ull));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim_);
  double norm = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> ConditionRegistry::get(std::string_view token) const {
  if (token.empty()) throw InvalidArgument("empty condition token");
  if (token == kNullCondition) return std::vector<double>(dim_, 0.0);
  if (auto it = table_.find(token); it != table_.end()) return it->second;
  if (mode_ == Mode::strict) throw UnknownCondition("unknown condition '" + std::string(token) + "'");
  return hashed_vector(token);
}

std::vector<double> ConditionRegistry::combine(std::span<const std::string> tokens) const {
  std::vector<double> out(dim_, 0.0);
  if (tokens.empty()) return out;
  for (const auto& t : tokens) {
    auto v = get(t);
    for (std::size_t k = 0; k < dim_; ++k) out[k] += v[k];
  }
  const double n = static_cast<double>(tokens.size());
  for (double& x : out) x /= n;
  return out;
}

ConditionRegistry ConditionRegistry::read(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty condition file", 1);
  std::istringstream header(line);
  std::string magic, version;
  std::size_t dim = 0;
  if (!(header >> magic >> version >> dim) || magic != "clef-cond" || version != "v1" || dim == 0) {
    throw ParseError("expected header 'clef-cond v1 <d_z>'", 1);
  }
  ConditionRegistry r = strict(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected '<identifier>\\t<values>'", line_no);
    std::string token = line.substr(0, tab);
    std::istringstream values(line.substr(tab + 1));
    std::vector<double> v;
    std::string field;
    while (values >> field) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("bad number '" + field + "'", line_no);
      }
    }
    if (v.size() != dim) {
      throw ParseError("expected " + std::to_string(dim) + " values, got " + std::to_string(v.size()), line_no);
    }
    try {
      r.insert(token, std::move(v));
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return r;
}

ConditionRegistry ConditionRegistry::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open condition file " + path);
  return read(in);
}

void ConditionRegistry::write(std::ostream& out, std::span<const std::string> extra) const {
  std::map<std::string, std::vector<double>, std::less<>> rows = table_;
  for (const auto& t : extra) {
    if (t != kNullCondition) rows.emplace(t, get(t));
  }
  out << "clef-cond v1 " << dim_ << '\n';
  out << std::setprecision(17);
  for (const auto& [token, v] : rows) {
    out << token << '\t';
    for (std::size_t k = 0; k < v.size(); ++k) out << (k ? " " : "") << v[k];
    out << '\n';
  }
}

}  // namespace clef

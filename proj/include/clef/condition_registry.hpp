#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clef {

using ConditionToken = std::string;

/// Reserved null condition; always maps to the zero vector.
inline constexpr std::string_view kNullCondition = "none";

/// Frozen condition embeddings z_s. In hashed mode an unknown identifier maps
/// to a deterministic unit-norm vector derived from a stable hash, so unseen
/// conditions still get an embedding. Strict mode (file-loaded) only knows the
/// tokens it was given.
class ConditionRegistry {
 public:
  enum class Mode { hashed, strict };

  ConditionRegistry() = default;
  static ConditionRegistry hashed(std::size_t dim, std::uint64_t salt = 0);
  static ConditionRegistry strict(std::size_t dim);

  /// Reads the `clef-cond v1 <d_z>` format; the result is strict.
  static ConditionRegistry read(std::istream& in);
  static ConditionRegistry read_file(const std::string& path);
  /// Writes the stored tokens, plus `extra` tokens resolved through this registry.
  void write(std::ostream& out, std::span<const std::string> extra = {}) const;

  void insert(const std::string& token, std::vector<double> vector);

  std::vector<double> get(std::string_view token) const;
  /// Arithmetic mean of the member embeddings; zero vector when empty.
  std::vector<double> combine(std::span<const std::string> tokens) const;

  std::size_t dim() const { return dim_; }
  Mode mode() const { return mode_; }
  std::uint64_t salt() const { return salt_; }
  const std::map<std::string, std::vector<double>, std::less<>>& stored() const { return table_; }

 private:
  std::vector<double> hashed_vector(std::string_view token) const;

  std::size_t dim_ = 0;
  Mode mode_ = Mode::hashed;
  std::uint64_t salt_ = 0;
  std::map<std::string, std::vector<double>, std::less<>> table_;
};

std::uint64_t stable_hash(std::string_view text);

}  // namespace clef

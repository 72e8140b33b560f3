#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polyforge/records.hpp"
#include "polyforge/rng.hpp"

namespace polyforge {

struct LanguageEntry {
  LanguageTag tag;
  std::string name;
  std::uint64_t population = 0;  // speakers, any consistent unit
};

/// Languages known to the toolkit, with speaker populations used as
/// sampling weights. Immutable once built.
class LanguageRegistry {
 public:
  LanguageRegistry() = default;
  /// Throws Error(kConfig) on duplicate tags or zero populations.
  explicit LanguageRegistry(std::vector<LanguageEntry> entries);

  /// Reads `tag<TAB>name<TAB>population` lines; '#' starts a comment line.
  static LanguageRegistry load(const std::filesystem::path& path);
  static LanguageRegistry parse(std::string_view table);

  const std::vector<LanguageEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const LanguageTag& tag) const noexcept;
  const LanguageEntry* find(const LanguageTag& tag) const noexcept;
  /// Display name, or the tag itself when unregistered.
  std::string display_name(const LanguageTag& tag) const;

 private:
  std::vector<LanguageEntry> entries_;
};

/// Categorical distribution over language tags with an inverse-CDF table.
class LanguageDistribution {
 public:
  /// Weights are normalised here; throws Error(kEmptySupport) if nothing has
  /// positive weight and Error(kPrecondition) on negative weights or
  /// duplicate tags.
  LanguageDistribution(std::vector<LanguageTag> support, std::vector<double> weights);

  const std::vector<LanguageTag>& support() const noexcept { return support_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double weight(const LanguageTag& tag) const noexcept;

  /// Inverse-CDF draw: one unit real from `rng`, then a binary search.
  const LanguageTag& sample(SeededRng& rng) const;

 private:
  std::vector<LanguageTag> support_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
};

/// weight(tag) = population(tag) / sum of populations over the filtered
/// support. `include`, when given, restricts the support to those tags
/// (each must be registered); `exclude` then removes tags.
LanguageDistribution build_distribution(const LanguageRegistry& registry,
                                        const std::optional<std::vector<LanguageTag>>& include = std::nullopt,
                                        const std::optional<std::vector<LanguageTag>>& exclude = std::nullopt);

inline const LanguageTag& sample_language(const LanguageDistribution& dist, SeededRng& rng) {
  return dist.sample(rng);
}

struct LanguageShare {
  LanguageTag tag;
  std::size_t count = 0;
  double fraction = 0.0;

  bool operator==(const LanguageShare&) const = default;
};

/// Record counts per language, descending by count with ties broken by tag,
/// truncated to `top_k`. Fractions are relative to the whole corpus.
/// Throws Error(kEmptyCorpus) and Error(kPrecondition) for top_k == 0.
std::vector<LanguageShare> language_report(const Corpus& corpus, std::size_t top_k);

}  // namespace polyforge

#include "polyforge/languages.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <set>

#include "polyforge/error.hpp"
#include "text_util.hpp"

namespace polyforge {

LanguageRegistry::LanguageRegistry(std::vector<LanguageEntry> entries) : entries_(std::move(entries)) {
  std::set<LanguageTag> seen;
  for (const auto& e : entries_) {
    if (e.tag.empty()) fail(Errc::kConfig, "language entry without a tag");
    if (!seen.insert(e.tag).second) fail(Errc::kConfig, "duplicate language tag '" + e.tag.str() + "'");
    if (e.population == 0) fail(Errc::kConfig, "language '" + e.tag.str() + "' has zero population");
  }
}

LanguageRegistry LanguageRegistry::load(const std::filesystem::path& path) {
  try {
    return parse(detail::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

LanguageRegistry LanguageRegistry::parse(std::string_view table) {
  std::vector<LanguageEntry> entries;
  std::size_t lineno = 0;
  for (auto raw : detail::split_lines(table)) {
    ++lineno;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto where = "line " + std::to_string(lineno);
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string_view::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string_view::npos || line.find('\t', tab2 + 1) != std::string_view::npos) {
      fail(Errc::kConfig, where + ": expected tag<TAB>name<TAB>population");
    }
    const auto code = line.substr(0, tab1);
    if (!LanguageTag::is_valid(code)) fail(Errc::kConfig, where + ": bad tag '" + std::string(code) + "'");
    const auto pop_text = detail::trim(line.substr(tab2 + 1));
    std::uint64_t population = 0;
    auto [ptr, ec] = std::from_chars(pop_text.data(), pop_text.data() + pop_text.size(), population);
    if (ec != std::errc{} || ptr != pop_text.data() + pop_text.size()) {
      fail(Errc::kConfig, where + ": population is not a positive integer");
    }
    entries.push_back({LanguageTag(code), std::string(detail::trim(line.substr(tab1 + 1, tab2 - tab1 - 1))),
                       population});
  }
  return LanguageRegistry(std::move(entries));
}

bool LanguageRegistry::contains(const LanguageTag& tag) const noexcept { return find(tag) != nullptr; }

const LanguageEntry* LanguageRegistry::find(const LanguageTag& tag) const noexcept {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.tag == tag; });
  return it == entries_.end() ? nullptr : &*it;
}

std::string LanguageRegistry::display_name(const LanguageTag& tag) const {
  const auto* e = find(tag);
  return e ? e->name : tag.str();
}

LanguageDistribution::LanguageDistribution(std::vector<LanguageTag> support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  require(support_.size() == weights_.size(), "support and weights differ in length");
  std::set<LanguageTag> seen;
  for (const auto& t : support_) require(seen.insert(t).second, "duplicate tag '" + t.str() + "' in support");
  double total = 0.0;
  for (double w : weights_) {
    require(w >= 0.0, "negative language weight");
    total += w;
  }
  if (support_.empty() || !(total > 0.0)) fail(Errc::kEmptySupport, "distribution has no positive weight");
  cdf_.resize(weights_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    running += weights_[i];
    cdf_[i] = running;
  }
  // Pin the tail to exactly 1 so a draw just below 1.0 always lands on the
  // last positive-weight entry.
  for (std::size_t i = cdf_.size(); i-- > 0;) {
    if (weights_[i] > 0.0) {
      for (std::size_t k = i; k < cdf_.size(); ++k) cdf_[k] = 1.0;
      break;
    }
  }
}

double LanguageDistribution::weight(const LanguageTag& tag) const noexcept {
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (support_[i] == tag) return weights_[i];
  }
  return 0.0;
}

const LanguageTag& LanguageDistribution::sample(SeededRng& rng) const {
  const double u = rng.next_unit();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;  // unreachable: u < 1 == cdf_.back()
  return support_[static_cast<std::size_t>(it - cdf_.begin())];
}

LanguageDistribution build_distribution(const LanguageRegistry& registry,
                                        const std::optional<std::vector<LanguageTag>>& include,
                                        const std::optional<std::vector<LanguageTag>>& exclude) {
  std::vector<const LanguageEntry*> chosen;
  if (include) {
    for (const auto& tag : *include) {
      const auto* e = registry.find(tag);
      if (e == nullptr) fail(Errc::kBadLanguage, "'" + tag.str() + "' is not in the language registry");
      if (std::find(chosen.begin(), chosen.end(), e) == chosen.end()) chosen.push_back(e);
    }
  } else {
    for (const auto& e : registry.entries()) chosen.push_back(&e);
  }
  if (exclude) {
    std::erase_if(chosen, [&](const LanguageEntry* e) {
      return std::find(exclude->begin(), exclude->end(), e->tag) != exclude->end();
    });
  }
  if (chosen.empty()) fail(Errc::kEmptySupport, "no languages left after include/exclude filtering");

  std::uint64_t total = 0;
  for (const auto* e : chosen) total += e->population;
  std::vector<LanguageTag> support;
  std::vector<double> weights;
  for (const auto* e : chosen) {
    support.push_back(e->tag);
    weights.push_back(static_cast<double>(e->population) / static_cast<double>(total));
  }
  return LanguageDistribution(std::move(support), std::move(weights));
}

std::vector<LanguageShare> language_report(const Corpus& corpus, std::size_t top_k) {
  require(top_k >= 1, "top_k must be positive");
  if (corpus.empty()) fail(Errc::kEmptyCorpus, "cannot report languages of an empty corpus");
  std::map<LanguageTag, std::size_t> counts;
  for (const auto& r : corpus.records()) ++counts[record_language(r)];

  std::vector<LanguageShare> rows;
  const auto n = static_cast<double>(corpus.size());
  for (const auto& [tag, count] : counts) {
    rows.push_back({tag, count, static_cast<double>(count) / n});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.tag < b.tag;
  });
  if (rows.size() > top_k) rows.resize(top_k);
  return rows;
}

}  // namespace polyforge

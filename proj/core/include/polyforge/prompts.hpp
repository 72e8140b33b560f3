#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "polyforge/gateway.hpp"
#include "polyforge/records.hpp"

namespace polyforge {

class LanguageRegistry;

/// Generation prompts used by the synthesis pipeline. Placeholders are
/// written `{name}`; unknown placeholders are left as they are.
struct PromptTemplates {
  std::string version = "v1";
  std::string translate;
  std::string generate;
  std::string generate_role;   // prefixed to `generate` when a role is set
  std::string generate_input;  // inserted into `generate` when an input is set
  std::string roles;
  std::string expand;
  std::string expand_role;     // inserted into `expand` when a role is set
  std::string expand_example;

  static PromptTemplates defaults();

  /// Reads `<name>.txt` files from `dir` (one trailing newline stripped);
  /// files that are absent keep their built-in text. The directory name
  /// becomes the version label.
  static PromptTemplates load(const std::filesystem::path& dir);
};

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

struct ModelSettings {
  std::string model;
  double temperature = 0.0;
  std::int64_t max_tokens = 2048;
};

struct TranslationConfig {
  ModelSettings model;
  std::string prompt_template = PromptTemplates::defaults().translate;
  const LanguageRegistry* registry = nullptr;  // for display names; may be null
};

/// Translates `text` into `target` through the gateway. When `target`
/// equals `source` the text comes back untouched without any call. The
/// request metadata carries `purpose` (default "translate") and the target.
/// Throws Error(kPrecondition) for empty text, otherwise whatever chat throws.
std::string translate(Gateway& gateway, std::string_view text, const LanguageTag& source,
                      const LanguageTag& target, const TranslationConfig& config,
                      std::string_view purpose = "translate");

/// The request translate() would send, for tests and provenance checks.
ChatRequest translation_request(std::string_view text, const LanguageTag& target,
                                const TranslationConfig& config, std::string_view purpose = "translate");

}  // namespace polyforge

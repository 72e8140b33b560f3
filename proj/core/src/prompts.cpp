#include "polyforge/prompts.hpp"

#include "polyforge/languages.hpp"
#include "text_util.hpp"

namespace polyforge {

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.version = "v1";
  t.translate = "Translate the following into {language}. Output only the translation.\n\n{text}";
  t.generate =
      "{role_clause}Below is an instruction that describes a task. Write a response in {language} that "
      "appropriately completes the request.\n\n### Instruction:\n{instruction}\n{input_clause}\n### Response:";
  t.generate_role = "Role: {role}\n\n";
  t.generate_input = "\n### Input:\n{input}\n";
  t.roles =
      "List {count} different roles of people who might give an AI assistant a task or be asked to perform "
      "one, such as occupations, hobbies or life situations. Output one role per line with no numbering and "
      "no explanations.";
  t.expand =
      "Come up with {count} new and diverse task instructions{role_clause}. The tasks must differ from each "
      "other and from the examples. If a task needs context, give it as the input; otherwise leave the input "
      "empty.\n\nWrite every task in exactly this format and separate tasks with a line containing only "
      "###:\nInstruction: <task>\nInput: <context or empty>\n\nExamples:\n{examples}";
  t.expand_role = " that a person with the role \"{role}\" might ask for";
  t.expand_example = "Instruction: {instruction}\nInput: {input}\n###";
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(Errc::kConfig, "templates directory " + dir.string() + " not found");
  PromptTemplates t = defaults();
  t.version = dir.filename().string();
  const std::pair<const char*, std::string*> files[] = {
      {"translate", &t.translate},         {"generate", &t.generate}, {"generate_role", &t.generate_role},
      {"generate_input", &t.generate_input}, {"roles", &t.roles},       {"expand", &t.expand},
      {"expand_role", &t.expand_role},     {"expand_example", &t.expand_example},
  };
  for (const auto& [name, slot] : files) {
    const auto path = dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::string text = detail::read_file(path);
    if (!text.empty() && text.back() == '\n') text.pop_back();
    *slot = std::move(text);
  }
  return t;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

ChatRequest translation_request(std::string_view text, const LanguageTag& target, const TranslationConfig& config,
                                std::string_view purpose) {
  const std::string language = config.registry ? config.registry->display_name(target) : target.str();
  ChatRequest req;
  req.model = config.model.model;
  req.temperature = config.model.temperature;
  req.max_tokens = config.model.max_tokens;
  req.messages.push_back(
      {MessageRole::kUser, render(config.prompt_template, {{"language", language}, {"text", std::string(text)}})});
  req.metadata["purpose"] = std::string(purpose);
  req.metadata["target"] = target.str();
  return req;
}

std::string translate(Gateway& gateway, std::string_view text, const LanguageTag& source, const LanguageTag& target,
                      const TranslationConfig& config, std::string_view purpose) {
  require(!detail::trim(text).empty(), "cannot translate empty text");
  if (source == target) return std::string(text);
  return std::string(detail::trim(gateway.chat(translation_request(text, target, config, purpose)).text));
}

}  // namespace polyforge

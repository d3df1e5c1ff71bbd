#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace crossicl {

// The answer-format line appended to every rendered query block.
extern const std::string kAnswerFormatLine;
extern const std::string kFinalAnswerMarker;  // "The final answer is:"

// "Input:\n{x}\n\n" + answer-format line. Configurable off via
// PromptLibrary::set_answer_format_enabled for providers that over-trigger.
std::string render_query_block(const std::string& input,
                               bool with_answer_format = true);

// Prompt templates are checked-in text assets with {{named}} placeholders.
class PromptLibrary {
 public:
  // Loads from `dir`; defaults to the asset directory baked in at build time.
  explicit PromptLibrary(std::filesystem::path dir = {});

  const std::string& raw(const std::string& name) const;
  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& vars) const;

  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::string> templates_;
};

// Innermost <tag>...</tag> extraction, trimmed. Throws AdaptError(tag_missing)
// when either side is absent.
std::string extract_tag(const std::string& text, const std::string& tag);

std::filesystem::path default_asset_dir();

}  // namespace crossicl

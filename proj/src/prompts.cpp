#include "crossicl/prompts.hpp"

#include "crossicl/errors.hpp"
#include "crossicl/util.hpp"

namespace crossicl {

const std::string kFinalAnswerMarker = "The final answer is:";
const std::string kAnswerFormatLine =
    "Give your final answer in the following format: \"The final answer is: "
    "[your answer]\"";

std::string render_query_block(const std::string& input, bool with_answer_format) {
  std::string out = "Input:\n" + input;
  if (with_answer_format) out += "\n\n" + kAnswerFormatLine;
  return out;
}

std::filesystem::path default_asset_dir() {
#ifdef CROSSICL_ASSET_DIR
  return std::filesystem::path(CROSSICL_ASSET_DIR);
#else
  return std::filesystem::path("assets");
#endif
}

PromptLibrary::PromptLibrary(std::filesystem::path dir) {
  if (dir.empty()) dir = default_asset_dir() / "prompts";
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("no_prompts", "prompt directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::string text = read_file(entry.path());
    if (!text.empty() && text.back() == '\n') text.pop_back();
    templates_[entry.path().stem().string()] = std::move(text);
  }
  if (templates_.empty())
    throw ConfigError("no_prompts", "no templates in " + dir.string());
}

const std::string& PromptLibrary::raw(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end())
    throw ConfigError("no_prompts", "unknown template " + name);
  return it->second;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& vars) const {
  std::string text = raw(name);
  for (const auto& [key, value] : vars)
    text = replace_all(std::move(text), "{{" + key + "}}", value);
  if (text.find("{{") != std::string::npos)
    throw ConfigError("unbound_placeholder",
                      name + " rendered with unbound placeholder");
  return text;
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

std::string extract_tag(const std::string& text, const std::string& tag) {
  std::string open = "<" + tag + ">";
  std::string close = "</" + tag + ">";
  // Innermost pair: the first close tag and the nearest preceding open tag.
  auto close_pos = text.find(close);
  if (close_pos == std::string::npos)
    throw AdaptError("tag_missing", "no " + close + " in response: " + text);
  auto open_pos = text.rfind(open, close_pos);
  if (open_pos == std::string::npos)
    throw AdaptError("tag_missing", "no " + open + " in response: " + text);
  auto begin = open_pos + open.size();
  return trim(text.substr(begin, close_pos - begin));
}

}  // namespace crossicl

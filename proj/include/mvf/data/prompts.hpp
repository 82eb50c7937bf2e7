#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mvf/types.hpp"

namespace mvf {

// The pipeline prompt templates. Each template is versioned ("_v1") and the
// copies under prompts/ are the shipping artifacts; prompt_text() is the same
// content compiled in so library users need no path configuration. A test
// keeps the two in sync byte for byte.
enum class PromptKind {
  summarize,
  integrate,
  critique_verdict,
  conversation,
  qa_verdict,
  vqa,
  blind_answer,
  score,
};

const std::vector<PromptKind>& all_prompt_kinds();
std::string prompt_name(PromptKind kind);       // e.g. "summarize_v1"
const std::string& prompt_text(PromptKind kind);

// Replaces every {{key}} with its value. Unknown placeholders left behind are
// template bugs, so they throw rather than leak braces into an LLM prompt.
std::string render_prompt(const std::string& templ,
                          const std::map<std::string, std::string>& values);
std::string render_prompt(PromptKind kind,
                          const std::map<std::string, std::string>& values);

// Writes every template to dir/<name>.txt (the committed prompts/ directory).
void export_prompt_files(const std::filesystem::path& dir);

}  // namespace mvf

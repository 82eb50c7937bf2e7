#include "mvf/data/prompts.hpp"

#include <fstream>

namespace mvf {
namespace {

const std::string kSummarize =
    R"(You are an experienced photography critic. Summarize the aesthetic observations made in the user comments below about a single photograph. Work from the comments only; do not invent observations of your own. Keep every distinct point about lighting, composition, color, emotion, narrative, technique, or post-processing, and drop greetings, chatter, and duplicate remarks.

Title: {{title}}

Comments:
{{comments}}

Summarized observations:)";

const std::string kIntegrate =
    R"(Rewrite the summarized observations below into one cohesive, unified photo critique written in flowing prose. Preserve every aesthetic point, resolve contradictions by attributing them ("some viewers felt..."), and do not add observations that are not present. Respond with the critique text only.

Observations:
{{summary}}

Critique:)";

const std::string kCritiqueVerdict =
    R"(You are screening training data. Does the following photo critique convey enough aesthetics-related information to teach from (concrete observations about lighting, composition, color, emotion, narrative, technique, or post-processing)? Respond with YES or NO as the first word, optionally followed by a short justification.

Critique:
{{critique}})";

const std::string kConversation =
    R"(Based only on the critique below, write one question a photography student might ask about the {{aspect}} of the photograph, and answer it using only information from the critique. Use exactly this format:
Q: <question>
A: <answer>

Critique:
{{critique}})";

const std::string kQaVerdict =
    R"(You are screening training data. Does the following question-answer pair convey enough aesthetics-related information to teach from? Respond with YES or NO as the first word.

Question: {{question}}
Answer: {{answer}})";

const std::string kVqa =
    R"(Generate exactly five multiple-choice questions grounded in the critique below. Every question must be answerable from the critique alone, and each must have exactly four options of which exactly one is correct. Use exactly this format for each question, numbered 1 to 5:

Q<n>. <question>
A) <option>
B) <option>
C) <option>
D) <option>
Answer: <letter>
Topics: <one or more comma-separated topic tags>

Critique:
{{critique}})";

const std::string kBlindAnswer =
    R"(Answer the following multiple-choice question. Respond with the letter of your chosen option only.

{{question}}
A) {{option_a}}
B) {{option_b}}
C) {{option_c}}
D) {{option_d}})";

const std::string kScore =
    R"(Rate the following benchmark question on three axes, each as an integer from 1 to 10: aesthetics relevance, visual dependency (how much seeing the photograph is required), and expertise (how much photographic knowledge is required). Respond with the three integers separated by commas, in that order.

{{question}}
A) {{option_a}}
B) {{option_b}}
C) {{option_c}}
D) {{option_d}})";

}  // namespace

const std::vector<PromptKind>& all_prompt_kinds() {
  static const std::vector<PromptKind> kinds = {
      PromptKind::summarize,   PromptKind::integrate, PromptKind::critique_verdict,
      PromptKind::conversation, PromptKind::qa_verdict, PromptKind::vqa,
      PromptKind::blind_answer, PromptKind::score};
  return kinds;
}

std::string prompt_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::summarize: return "summarize_v1";
    case PromptKind::integrate: return "integrate_v1";
    case PromptKind::critique_verdict: return "critique_verdict_v1";
    case PromptKind::conversation: return "conversation_v1";
    case PromptKind::qa_verdict: return "qa_verdict_v1";
    case PromptKind::vqa: return "vqa_v1";
    case PromptKind::blind_answer: return "blind_answer_v1";
    case PromptKind::score: return "score_v1";
  }
  throw config_error("prompt_name: unknown kind");
}

const std::string& prompt_text(PromptKind kind) {
  switch (kind) {
    case PromptKind::summarize: return kSummarize;
    case PromptKind::integrate: return kIntegrate;
    case PromptKind::critique_verdict: return kCritiqueVerdict;
    case PromptKind::conversation: return kConversation;
    case PromptKind::qa_verdict: return kQaVerdict;
    case PromptKind::vqa: return kVqa;
    case PromptKind::blind_answer: return kBlindAnswer;
    case PromptKind::score: return kScore;
  }
  throw config_error("prompt_text: unknown kind");
}

std::string render_prompt(const std::string& templ,
                          const std::map<std::string, std::string>& values) {
  std::string out = templ;
  for (const auto& [key, value] : values) {
    const std::string needle = "{{" + key + "}}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  const std::size_t leftover = out.find("{{");
  if (leftover != std::string::npos && out.find("}}", leftover) != std::string::npos) {
    throw config_error("render_prompt: unresolved placeholder near '" +
                       out.substr(leftover, 24) + "'");
  }
  return out;
}

std::string render_prompt(PromptKind kind,
                          const std::map<std::string, std::string>& values) {
  return render_prompt(prompt_text(kind), values);
}

void export_prompt_files(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (PromptKind kind : all_prompt_kinds()) {
    std::ofstream out(dir / (prompt_name(kind) + ".txt"),
                      std::ios::binary | std::ios::trunc);
    out << prompt_text(kind) << "\n";
  }
}

}  // namespace mvf

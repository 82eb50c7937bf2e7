#include "mvf/data/records.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mvf {

using nlohmann::json;

namespace {

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

}  // namespace

json CommentThread::to_json() const {
  json j = {{"image_id", image_id}, {"comments", comments}};
  if (image_path) j["image_path"] = *image_path;
  if (title) j["title"] = *title;
  return j;
}

CommentThread CommentThread::from_json(const json& j) {
  CommentThread t;
  t.image_id = j.at("image_id").get<std::string>();
  if (j.contains("comments")) t.comments = j["comments"].get<std::vector<std::string>>();
  read_optional(j, "image_path", t.image_path);
  read_optional(j, "title", t.title);
  t.validate();
  return t;
}

json CritiqueRecord::to_json() const {
  json j = {{"image_id", image_id},
            {"critique", critique},
            {"source_comment_count", source_comment_count},
            {"accepted", accepted}};
  if (reject_reason) j["reject_reason"] = *reject_reason;
  return j;
}

CritiqueRecord CritiqueRecord::from_json(const json& j) {
  CritiqueRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.critique = j.value("critique", std::string());
  r.source_comment_count = j.value("source_comment_count", 0);
  r.accepted = j.value("accepted", false);
  read_optional(j, "reject_reason", r.reject_reason);
  r.validate();
  return r;
}

const std::vector<std::string>& qa_aspects() {
  static const std::vector<std::string> aspects = {
      "lighting",  "composition",     "color", "emotion",
      "narrative", "technique",       "post-processing", "other"};
  return aspects;
}

void QaPair::validate() const {
  if (image_id.empty()) throw config_error("QaPair: image_id must be nonempty");
  const auto& aspects = qa_aspects();
  if (std::find(aspects.begin(), aspects.end(), aspect) == aspects.end()) {
    throw config_error("QaPair: unknown aspect '" + aspect + "'");
  }
}

json QaPair::to_json() const {
  return {{"image_id", image_id},
          {"aspect", aspect},
          {"question", question},
          {"answer", answer},
          {"accepted", accepted}};
}

QaPair QaPair::from_json(const json& j) {
  QaPair p;
  p.image_id = j.at("image_id").get<std::string>();
  p.aspect = j.at("aspect").get<std::string>();
  p.question = j.value("question", std::string());
  p.answer = j.value("answer", std::string());
  p.accepted = j.value("accepted", true);
  p.validate();
  return p;
}

void McqItem::validate() const {
  if (id.empty()) throw config_error("McqItem: id must be nonempty");
  if (image_id.empty()) throw config_error("McqItem: image_id must be nonempty");
  if (options.size() != 4 || !options.count("A") || !options.count("B") ||
      !options.count("C") || !options.count("D")) {
    throw config_error("McqItem " + id + ": options must be exactly A,B,C,D");
  }
  if (answer.size() != 1 || answer[0] < 'A' || answer[0] > 'D') {
    throw config_error("McqItem " + id + ": answer must be one of A,B,C,D");
  }
  if (scores && !scores->in_range()) {
    throw config_error("McqItem " + id + ": scores must lie in 1..10");
  }
}

json McqItem::to_json() const {
  json j = {{"id", id},
            {"image_id", image_id},
            {"question", question},
            {"options", options},
            {"answer", answer},
            {"topics", topics}};
  if (scores) {
    j["scores"] = {{"relevance", scores->relevance},
                   {"visual_dependency", scores->visual_dependency},
                   {"expertise", scores->expertise}};
  }
  if (!filter_log.empty()) {
    json log = json::array();
    for (const auto& f : filter_log) {
      log.push_back({{"stage", f.stage}, {"passed", f.passed}, {"detail", f.detail}});
    }
    j["filter_log"] = log;
  }
  return j;
}

McqItem McqItem::from_json(const json& j) {
  McqItem item;
  item.id = j.at("id").get<std::string>();
  item.image_id = j.at("image_id").get<std::string>();
  item.question = j.value("question", std::string());
  item.options = j.at("options").get<std::map<std::string, std::string>>();
  item.answer = j.at("answer").get<std::string>();
  if (j.contains("topics")) item.topics = j["topics"].get<std::vector<std::string>>();
  if (j.contains("scores")) {
    McqScores s;
    s.relevance = j["scores"].value("relevance", 0);
    s.visual_dependency = j["scores"].value("visual_dependency", 0);
    s.expertise = j["scores"].value("expertise", 0);
    item.scores = s;
  }
  if (j.contains("filter_log")) {
    for (const auto& f : j["filter_log"]) {
      item.filter_log.push_back(FilterStageResult{f.value("stage", std::string()),
                                                  f.value("passed", false),
                                                  f.value("detail", std::string())});
    }
  }
  item.validate();
  return item;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_jsonl: cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded()) {
      throw std::runtime_error("read_jsonl: bad JSON at " + path.string() + ":" +
                               std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_jsonl: cannot write " + tmp);
    for (const auto& row : rows) out << row.dump() << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mvf

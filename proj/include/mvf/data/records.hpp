#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvf/types.hpp"

namespace mvf {

// One uploaded image plus its raw comment thread, as read from comments.jsonl.
struct CommentThread {
  std::string image_id;
  std::optional<std::string> image_path;
  std::optional<std::string> title;
  std::vector<std::string> comments;

  void validate() const {
    if (image_id.empty()) throw config_error("CommentThread: image_id must be nonempty");
  }
  nlohmann::json to_json() const;
  static CommentThread from_json(const nlohmann::json& j);
};

// A unified critique distilled from one thread. accepted=false always carries
// the reason so rejected rows remain auditable.
struct CritiqueRecord {
  std::string image_id;
  std::string critique;
  int source_comment_count = 0;
  bool accepted = false;
  std::optional<std::string> reject_reason;

  void validate() const {
    if (image_id.empty()) throw config_error("CritiqueRecord: image_id must be nonempty");
    if (!accepted && (!reject_reason || reject_reason->empty())) {
      throw config_error("CritiqueRecord: rejected records need a reject_reason");
    }
  }
  nlohmann::json to_json() const;
  static CritiqueRecord from_json(const nlohmann::json& j);
};

// The aspects a conversation prompt may target; fixed set plus "other".
const std::vector<std::string>& qa_aspects();

struct QaPair {
  std::string image_id;
  std::string aspect;
  std::string question;
  std::string answer;
  bool accepted = true;

  void validate() const;
  nlohmann::json to_json() const;
  static QaPair from_json(const nlohmann::json& j);
};

struct McqScores {
  int relevance = 0;
  int visual_dependency = 0;
  int expertise = 0;

  bool in_range() const {
    auto ok = [](int s) { return s >= 1 && s <= 10; };
    return ok(relevance) && ok(visual_dependency) && ok(expertise);
  }
  double mean() const { return (relevance + visual_dependency + expertise) / 3.0; }
};

struct FilterStageResult {
  std::string stage;  // visual_dependency | scoring | topk
  bool passed = false;
  std::string detail;
};

// One benchmark question. Options are exactly A-D; topics may overlap across
// items and drive the per-topic evaluation denominators.
struct McqItem {
  std::string id;
  std::string image_id;
  std::string question;
  std::map<std::string, std::string> options;
  std::string answer;  // "A".."D"
  std::vector<std::string> topics;
  std::optional<McqScores> scores;
  std::vector<FilterStageResult> filter_log;

  void validate() const;
  nlohmann::json to_json() const;
  static McqItem from_json(const nlohmann::json& j);
};

// Line-delimited JSON. Writes are atomic (temp file + rename) and the
// serialization is key-sorted, so identical data always produces identical
// bytes — the property the warm-cache re-run tests pin down.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& rows);

template <typename T>
std::vector<T> read_jsonl_as(const std::filesystem::path& path) {
  std::vector<T> out;
  for (const auto& row : read_jsonl(path)) out.push_back(T::from_json(row));
  return out;
}

template <typename T>
void write_jsonl_records(const std::filesystem::path& path, const std::vector<T>& rows) {
  std::vector<nlohmann::json> encoded;
  encoded.reserve(rows.size());
  for (const auto& r : rows) encoded.push_back(r.to_json());
  write_jsonl(path, encoded);
}

}  // namespace mvf

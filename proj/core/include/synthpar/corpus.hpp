#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthpar/errors.hpp"

namespace synthpar {

/// Language tag with script suffix, e.g. "hau_Latn".
class LangCode {
 public:
  LangCode() = default;
  explicit LangCode(std::string code);

  static bool is_valid(std::string_view code);

  const std::string& str() const { return code_; }
  /// Four-letter script suffix ("Latn", "Deva", ...).
  std::string_view script() const { return std::string_view(code_).substr(4); }
  bool empty() const { return code_.empty(); }

  friend bool operator==(const LangCode&, const LangCode&) = default;
  friend auto operator<=>(const LangCode&, const LangCode&) = default;

 private:
  std::string code_;
};

/// Ordered (source, target) language pair; the two must differ.
struct Direction {
  LangCode source;
  LangCode target;

  Direction() = default;
  Direction(LangCode src, LangCode tgt);

  Direction reversed() const { return Direction(target, source); }
  std::string str() const { return source.str() + "->" + target.str(); }

  friend bool operator==(const Direction&, const Direction&) = default;
};

struct Topic {
  std::int64_t id = 0;
  std::string label;
};

struct SeedParagraph {
  LangCode lang;
  std::string text;
};

struct SeedPools {
  std::vector<Topic> topics;
  std::vector<SeedParagraph> seed_paragraphs;
  std::map<LangCode, std::vector<std::string>> seed_sentences;

  /// Throws ContractError unless every pool a run for `target` reads is
  /// non-empty and topic ids are unique with non-empty labels.
  void validate_for(const LangCode& target) const;
};

struct GeneratedParagraph {
  std::string id;
  std::int64_t seq = 0;  // attempt index that produced it
  Topic topic;
  LangCode target_lang;
  std::string text;
  std::string prompt_fingerprint;
  std::string backend_id;
  double temperature = 0.0;
  double max_pool_overlap = 0.0;
};

enum class SentenceStatus { kept, dropped_langid, dropped_decontaminated, dropped_length };

std::string_view to_string(SentenceStatus s);
SentenceStatus sentence_status_from_string(std::string_view s);

struct SentenceRecord {
  std::string paragraph_id;
  std::int64_t position = 0;
  std::string text;
  LangCode langid_label;
  double langid_confidence = 0.0;
  SentenceStatus status = SentenceStatus::kept;

  /// Reference used by ParallelPair::sentence_ref.
  std::string ref() const { return paragraph_id + ":" + std::to_string(position); }
};

enum class BtMode { supervised_mt, fewshot_generator, student };

struct ParallelPair {
  std::string lrl_text;
  std::string hrl_text;
  /// (HRL, LRL): the pair reads as a translation from the HRL into the LRL.
  Direction direction;
  std::string sentence_ref;
  std::string bt_backend_id;
  BtMode bt_mode = BtMode::supervised_mt;
  int student_round = 0;  // meaningful for BtMode::student
  /// Set when the pair failed (backend error, HRL-side contamination). Failed
  /// pairs stay in the file for audit but are excluded from counts.
  std::optional<std::string> failure;

  bool ok() const { return !failure.has_value(); }
  const LangCode& hrl_lang() const { return direction.source; }
  const LangCode& lrl_lang() const { return direction.target; }
};

std::string bt_mode_label(BtMode mode, int round);

struct StageCounts {
  std::int64_t paragraphs = 0;
  std::int64_t sentences_raw = 0;
  std::int64_t sentences_after_langid = 0;
  std::int64_t sentences_after_decon = 0;
  std::int64_t pairs = 0;

  friend bool operator==(const StageCounts&, const StageCounts&) = default;
};

struct StageRecord {
  std::string status;  // "complete" or "partial"
  std::string started_at;
  std::string finished_at;
  std::int64_t shortfall = 0;
  /// Fingerprint of the effective configuration the stage ran under.
  std::string config_fingerprint;

  friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct RunManifest {
  std::string run_id;
  std::string config_fingerprint;
  std::string created_at;
  std::string updated_at;
  std::map<std::string, StageCounts> counts;   // keyed by language code
  std::map<std::string, StageRecord> stages;   // keyed by "<stage>/<lang>"

  static std::string stage_key(std::string_view stage, const LangCode& lang) {
    return std::string(stage) + "/" + lang.str();
  }
  bool stage_complete(std::string_view stage, const LangCode& lang) const;
};

struct Violation {
  std::string field;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Internal-consistency check of a manifest. Empty result means valid.
std::vector<Violation> validate_manifest(const RunManifest& manifest);

struct EvalSegment {
  std::string source;
  std::string reference;
};

struct EvalSegmentSet {
  std::string name;
  std::vector<EvalSegment> segments;

  void validate() const;
};

/// ISO-8601 UTC timestamp with second precision.
std::string utc_now();

// JSON mapping (field names follow the on-disk schema).
void to_json(nlohmann::json& j, const LangCode& v);
void from_json(const nlohmann::json& j, LangCode& v);
void to_json(nlohmann::json& j, const Direction& v);
void from_json(const nlohmann::json& j, Direction& v);
void to_json(nlohmann::json& j, const Topic& v);
void from_json(const nlohmann::json& j, Topic& v);
void to_json(nlohmann::json& j, const SeedParagraph& v);
void from_json(const nlohmann::json& j, SeedParagraph& v);
void to_json(nlohmann::json& j, const GeneratedParagraph& v);
void from_json(const nlohmann::json& j, GeneratedParagraph& v);
void to_json(nlohmann::json& j, const SentenceRecord& v);
void from_json(const nlohmann::json& j, SentenceRecord& v);
void to_json(nlohmann::json& j, const ParallelPair& v);
void from_json(const nlohmann::json& j, ParallelPair& v);
void to_json(nlohmann::json& j, const StageCounts& v);
void from_json(const nlohmann::json& j, StageCounts& v);
void to_json(nlohmann::json& j, const StageRecord& v);
void from_json(const nlohmann::json& j, StageRecord& v);
void to_json(nlohmann::json& j, const RunManifest& v);
void from_json(const nlohmann::json& j, RunManifest& v);
void to_json(nlohmann::json& j, const EvalSegment& v);
void from_json(const nlohmann::json& j, EvalSegment& v);

/// Serialized form written to JSONL: compact, keys sorted.
std::string to_jsonl_line(const nlohmann::json& j);

/// Reads every record of a JSON Lines file. Blank lines are skipped; any
/// malformed line raises ParseError naming file and line.
template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ContractError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Append-only JSON Lines writer; each record is flushed so an interrupted
/// stage leaves a readable prefix.
class JsonlWriter {
 public:
  JsonlWriter(const std::filesystem::path& path, bool append);

  template <typename T>
  void write(const T& record) {
    write_json(nlohmann::json(record));
  }
  void write_json(const nlohmann::json& j);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  JsonlWriter w(path, false);
  for (const auto& r : records) w.write(r);
}

RunManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

EvalSegmentSet read_eval_set(const std::filesystem::path& path);

/// Paths of one run directory.
struct RunLayout {
  std::filesystem::path dir;

  std::filesystem::path paragraphs() const { return dir / "paragraphs.jsonl"; }
  std::filesystem::path sentences() const { return dir / "sentences.jsonl"; }
  std::filesystem::path pairs() const { return dir / "pairs.jsonl"; }
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path finetune() const { return dir / "finetune.jsonl"; }
  std::filesystem::path stats() const { return dir / "stats.json"; }
  std::filesystem::path selfloop() const { return dir / "selfloop"; }
};

/// Checks manifest counts and cross-file references against the data files
/// in a run directory. Includes validate_manifest's violations.
std::vector<Violation> validate_run_data(const RunLayout& layout);

}  // namespace synthpar

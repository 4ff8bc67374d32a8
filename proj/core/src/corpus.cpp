#include "synthpar/corpus.hpp"

#include <chrono>
#include <ctime>
#include <regex>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace synthpar {

using nlohmann::json;

LangCode::LangCode(std::string code) : code_(std::move(code)) {
  if (!is_valid(code_)) {
    throw ContractError("invalid language code '" + code_ + "' (expected xxx_Scrp)");
  }
}

bool LangCode::is_valid(std::string_view code) {
  if (code.size() != 8 || code[3] != '_') return false;
  for (std::size_t i = 0; i < 3; ++i) {
    if (code[i] < 'a' || code[i] > 'z') return false;
  }
  // ISO 15924 script codes are title case: one capital, three lowercase.
  if (code[4] < 'A' || code[4] > 'Z') return false;
  for (std::size_t i = 5; i < 8; ++i) {
    if (code[i] < 'a' || code[i] > 'z') return false;
  }
  return true;
}

Direction::Direction(LangCode src, LangCode tgt) : source(std::move(src)), target(std::move(tgt)) {
  if (source == target) {
    throw ContractError("direction source and target must differ: " + source.str());
  }
}

void SeedPools::validate_for(const LangCode& target) const {
  if (topics.empty()) throw ContractError("topic list is empty");
  std::unordered_set<std::int64_t> ids;
  for (const auto& t : topics) {
    if (t.label.empty()) throw ContractError("topic " + std::to_string(t.id) + " has an empty label");
    if (!ids.insert(t.id).second) throw ContractError("duplicate topic id " + std::to_string(t.id));
  }
  const bool has_foreign_paragraph = std::any_of(
      seed_paragraphs.begin(), seed_paragraphs.end(),
      [&](const SeedParagraph& p) { return p.lang != target; });
  if (!has_foreign_paragraph) throw ContractError("no seed paragraphs outside " + target.str());
  const auto it = seed_sentences.find(target);
  if (it == seed_sentences.end() || it->second.empty()) {
    throw ContractError("no seed sentences for " + target.str());
  }
}

std::string_view to_string(SentenceStatus s) {
  switch (s) {
    case SentenceStatus::kept: return "kept";
    case SentenceStatus::dropped_langid: return "dropped_langid";
    case SentenceStatus::dropped_decontaminated: return "dropped_decontaminated";
    case SentenceStatus::dropped_length: return "dropped_length";
  }
  return "kept";
}

SentenceStatus sentence_status_from_string(std::string_view s) {
  if (s == "kept") return SentenceStatus::kept;
  if (s == "dropped_langid") return SentenceStatus::dropped_langid;
  if (s == "dropped_decontaminated") return SentenceStatus::dropped_decontaminated;
  if (s == "dropped_length") return SentenceStatus::dropped_length;
  throw ContractError("unknown sentence status '" + std::string(s) + "'");
}

std::string bt_mode_label(BtMode mode, int round) {
  switch (mode) {
    case BtMode::supervised_mt: return "supervised_mt";
    case BtMode::fewshot_generator: return "fewshot_generator";
    case BtMode::student: return "student_round_" + std::to_string(round);
  }
  return "supervised_mt";
}

namespace {

std::pair<BtMode, int> parse_bt_mode(const std::string& s) {
  if (s == "supervised_mt") return {BtMode::supervised_mt, 0};
  if (s == "fewshot_generator") return {BtMode::fewshot_generator, 0};
  constexpr std::string_view prefix = "student_round_";
  if (s.rfind(prefix, 0) == 0 && s.size() > prefix.size()) {
    const auto digits = s.substr(prefix.size());
    if (digits.find_first_not_of("0123456789") == std::string::npos) {
      return {BtMode::student, std::stoi(digits)};
    }
  }
  throw ContractError("unknown bt_mode '" + s + "'");
}

}  // namespace

bool RunManifest::stage_complete(std::string_view stage, const LangCode& lang) const {
  const auto it = stages.find(stage_key(stage, lang));
  return it != stages.end() && it->second.status == "complete";
}

std::vector<Violation> validate_manifest(const RunManifest& m) {
  std::vector<Violation> out;
  if (m.run_id.empty()) out.push_back({"run_id", "run_id is empty"});
  for (const auto& [lang, c] : m.counts) {
    const std::string base = "counts." + lang + ".";
    if (!LangCode::is_valid(lang)) out.push_back({"counts." + lang, "not a language code"});
    const std::pair<const char*, std::int64_t> fields[] = {
        {"paragraphs", c.paragraphs},
        {"sentences_raw", c.sentences_raw},
        {"sentences_after_langid", c.sentences_after_langid},
        {"sentences_after_decon", c.sentences_after_decon},
        {"pairs", c.pairs}};
    for (const auto& [name, value] : fields) {
      if (value < 0) out.push_back({base + name, "negative count"});
    }
    if (c.sentences_after_langid > c.sentences_raw) {
      out.push_back({base + "sentences_after_langid", "exceeds sentences_raw"});
    }
    if (c.sentences_after_decon > c.sentences_after_langid) {
      out.push_back({base + "sentences_after_decon", "exceeds sentences_after_langid"});
    }
    if (c.pairs > c.sentences_after_decon) {
      out.push_back({base + "pairs", "exceeds sentences_after_decon"});
    }
  }
  return out;
}

void EvalSegmentSet::validate() const {
  if (segments.empty()) throw ContractError("evaluation set '" + name + "' is empty");
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- JSON mapping ---------------------------------------------------------

void to_json(json& j, const LangCode& v) { j = v.str(); }
void from_json(const json& j, LangCode& v) { v = LangCode(j.get<std::string>()); }

void to_json(json& j, const Direction& v) { j = json::array({v.source.str(), v.target.str()}); }
void from_json(const json& j, Direction& v) {
  if (!j.is_array() || j.size() != 2) throw ContractError("direction must be a two-element array");
  v = Direction(j[0].get<LangCode>(), j[1].get<LangCode>());
}

void to_json(json& j, const Topic& v) { j = json{{"id", v.id}, {"label", v.label}}; }
void from_json(const json& j, Topic& v) {
  j.at("id").get_to(v.id);
  j.at("label").get_to(v.label);
}

void to_json(json& j, const SeedParagraph& v) { j = json{{"lang", v.lang}, {"text", v.text}}; }
void from_json(const json& j, SeedParagraph& v) {
  j.at("lang").get_to(v.lang);
  j.at("text").get_to(v.text);
}

void to_json(json& j, const GeneratedParagraph& v) {
  j = json{{"id", v.id},
           {"seq", v.seq},
           {"topic", v.topic},
           {"target_lang", v.target_lang},
           {"text", v.text},
           {"prompt_fingerprint", v.prompt_fingerprint},
           {"backend_id", v.backend_id},
           {"temperature", v.temperature},
           {"max_pool_overlap", v.max_pool_overlap}};
}
void from_json(const json& j, GeneratedParagraph& v) {
  j.at("id").get_to(v.id);
  j.at("seq").get_to(v.seq);
  j.at("topic").get_to(v.topic);
  j.at("target_lang").get_to(v.target_lang);
  j.at("text").get_to(v.text);
  j.at("prompt_fingerprint").get_to(v.prompt_fingerprint);
  j.at("backend_id").get_to(v.backend_id);
  j.at("temperature").get_to(v.temperature);
  j.at("max_pool_overlap").get_to(v.max_pool_overlap);
}

void to_json(json& j, const SentenceRecord& v) {
  j = json{{"paragraph_id", v.paragraph_id},
           {"position", v.position},
           {"text", v.text},
           {"langid_label", v.langid_label},
           {"langid_confidence", v.langid_confidence},
           {"status", std::string(to_string(v.status))}};
}
void from_json(const json& j, SentenceRecord& v) {
  j.at("paragraph_id").get_to(v.paragraph_id);
  j.at("position").get_to(v.position);
  j.at("text").get_to(v.text);
  j.at("langid_label").get_to(v.langid_label);
  j.at("langid_confidence").get_to(v.langid_confidence);
  v.status = sentence_status_from_string(j.at("status").get<std::string>());
}

void to_json(json& j, const ParallelPair& v) {
  j = json{{"lrl_text", v.lrl_text},
           {"hrl_text", v.hrl_text},
           {"direction", v.direction},
           {"sentence_ref", v.sentence_ref},
           {"bt_backend_id", v.bt_backend_id},
           {"bt_mode", bt_mode_label(v.bt_mode, v.student_round)}};
  if (v.failure) j["failure"] = *v.failure;
}
void from_json(const json& j, ParallelPair& v) {
  j.at("lrl_text").get_to(v.lrl_text);
  j.at("hrl_text").get_to(v.hrl_text);
  j.at("direction").get_to(v.direction);
  j.at("sentence_ref").get_to(v.sentence_ref);
  j.at("bt_backend_id").get_to(v.bt_backend_id);
  std::tie(v.bt_mode, v.student_round) = parse_bt_mode(j.at("bt_mode").get<std::string>());
  if (const auto it = j.find("failure"); it != j.end() && !it->is_null()) {
    v.failure = it->get<std::string>();
  } else {
    v.failure.reset();
  }
}

void to_json(json& j, const StageCounts& v) {
  j = json{{"paragraphs", v.paragraphs},
           {"sentences_raw", v.sentences_raw},
           {"sentences_after_langid", v.sentences_after_langid},
           {"sentences_after_decon", v.sentences_after_decon},
           {"pairs", v.pairs}};
}
void from_json(const json& j, StageCounts& v) {
  j.at("paragraphs").get_to(v.paragraphs);
  j.at("sentences_raw").get_to(v.sentences_raw);
  j.at("sentences_after_langid").get_to(v.sentences_after_langid);
  j.at("sentences_after_decon").get_to(v.sentences_after_decon);
  j.at("pairs").get_to(v.pairs);
}

void to_json(json& j, const StageRecord& v) {
  j = json{{"status", v.status},
           {"started_at", v.started_at},
           {"finished_at", v.finished_at},
           {"shortfall", v.shortfall},
           {"config_fingerprint", v.config_fingerprint}};
}
void from_json(const json& j, StageRecord& v) {
  j.at("status").get_to(v.status);
  j.at("started_at").get_to(v.started_at);
  j.at("finished_at").get_to(v.finished_at);
  v.shortfall = j.value("shortfall", std::int64_t{0});
  v.config_fingerprint = j.value("config_fingerprint", std::string{});
}

void to_json(json& j, const RunManifest& v) {
  j = json{{"run_id", v.run_id},
           {"config_fingerprint", v.config_fingerprint},
           {"created_at", v.created_at},
           {"updated_at", v.updated_at},
           {"counts", v.counts},
           {"stages", v.stages}};
}
void from_json(const json& j, RunManifest& v) {
  j.at("run_id").get_to(v.run_id);
  j.at("config_fingerprint").get_to(v.config_fingerprint);
  v.created_at = j.value("created_at", std::string{});
  v.updated_at = j.value("updated_at", std::string{});
  j.at("counts").get_to(v.counts);
  v.stages = j.value("stages", std::map<std::string, StageRecord>{});
}

void to_json(json& j, const EvalSegment& v) {
  j = json{{"source", v.source}, {"reference", v.reference}};
}
void from_json(const json& j, EvalSegment& v) {
  j.at("source").get_to(v.source);
  j.at("reference").get_to(v.reference);
}

std::string to_jsonl_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool append) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw NotFoundError("cannot open for writing: " + path.string());
}

void JsonlWriter::write_json(const json& j) {
  out_ << to_jsonl_line(j) << '\n';
  out_.flush();
  if (!out_) throw Error("write failed: " + path_.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("manifest not found: " + path.string());
  try {
    return json::parse(in).get<RunManifest>();
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ContractError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw NotFoundError("cannot write manifest: " + path.string());
    out << json(manifest).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

EvalSegmentSet read_eval_set(const std::filesystem::path& path) {
  EvalSegmentSet set;
  set.name = path.stem().string();
  set.segments = read_jsonl<EvalSegment>(path);
  set.validate();
  return set;
}

std::vector<Violation> validate_run_data(const RunLayout& layout) {
  const auto manifest = read_manifest(layout.manifest());
  auto out = validate_manifest(manifest);

  std::map<std::string, StageCounts> actual;
  std::unordered_map<std::string, std::string> paragraph_lang;
  if (std::filesystem::exists(layout.paragraphs())) {
    for (const auto& p : read_jsonl<GeneratedParagraph>(layout.paragraphs())) {
      paragraph_lang[p.id] = p.target_lang.str();
      ++actual[p.target_lang.str()].paragraphs;
    }
  }

  std::unordered_set<std::string> kept_refs;
  if (std::filesystem::exists(layout.sentences())) {
    const auto sentences = read_jsonl<SentenceRecord>(layout.sentences());
    std::unordered_map<std::string, std::int64_t> next_position;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto& s = sentences[i];
      const auto it = paragraph_lang.find(s.paragraph_id);
      if (it == paragraph_lang.end()) {
        out.push_back({"sentences[" + std::to_string(i) + "].paragraph_id",
                       "references unknown paragraph " + s.paragraph_id});
        continue;
      }
      auto& expected = next_position[s.paragraph_id];
      if (s.position != expected) {
        out.push_back({"sentences[" + std::to_string(i) + "].position",
                       "expected position " + std::to_string(expected)});
      }
      expected = s.position + 1;
      auto& c = actual[it->second];
      ++c.sentences_raw;
      if (s.status != SentenceStatus::dropped_langid) ++c.sentences_after_langid;
      if (s.status == SentenceStatus::kept) {
        ++c.sentences_after_decon;
        kept_refs.insert(s.ref());
      }
    }
  }

  if (std::filesystem::exists(layout.pairs())) {
    const auto pairs = read_jsonl<ParallelPair>(layout.pairs());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      if (!kept_refs.contains(p.sentence_ref)) {
        out.push_back({"pairs[" + std::to_string(i) + "].sentence_ref",
                       "does not reference a kept sentence: " + p.sentence_ref});
      }
      if (p.ok()) {
        if (p.lrl_text.empty() || p.hrl_text.empty()) {
          out.push_back({"pairs[" + std::to_string(i) + "]", "empty side in a successful pair"});
        }
        ++actual[p.lrl_lang().str()].pairs;
      }
    }
  }

  std::set<std::string> langs;
  for (const auto& [lang, _] : manifest.counts) langs.insert(lang);
  for (const auto& [lang, _] : actual) langs.insert(lang);
  for (const auto& lang : langs) {
    const auto m_it = manifest.counts.find(lang);
    const StageCounts m = m_it == manifest.counts.end() ? StageCounts{} : m_it->second;
    const StageCounts a = actual.contains(lang) ? actual.at(lang) : StageCounts{};
    const std::tuple<const char*, std::int64_t, std::int64_t> fields[] = {
        {"paragraphs", m.paragraphs, a.paragraphs},
        {"sentences_raw", m.sentences_raw, a.sentences_raw},
        {"sentences_after_langid", m.sentences_after_langid, a.sentences_after_langid},
        {"sentences_after_decon", m.sentences_after_decon, a.sentences_after_decon},
        {"pairs", m.pairs, a.pairs}};
    for (const auto& [name, claimed, found] : fields) {
      if (claimed != found) {
        out.push_back({"counts." + lang + "." + name,
                       "manifest says " + std::to_string(claimed) + ", files contain " +
                           std::to_string(found)});
      }
    }
  }
  return out;
}

}  // namespace synthpar

#include "synthpar/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "synthpar/hashing.hpp"
#include "synthpar/log.hpp"
#include "synthpar/mock.hpp"
#include "synthpar/retrieval.hpp"
#include "synthpar/rng.hpp"
#include "synthpar/text.hpp"

namespace synthpar {

namespace fs = std::filesystem;

// ---- Configuration --------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  c.source = j;
  try {
    if (const auto it = j.find("seed"); it != j.end() && !it->is_null()) c.seed = it->get<std::uint64_t>();
    read_opt(j, "run_id", c.run_id);
    if (const auto it = j.find("output_dir"); it != j.end()) c.output_dir = resolve(base_dir, it->get<std::string>());
    else c.output_dir = resolve(base_dir, "runs");
    if (const auto it = j.find("hrl"); it != j.end()) c.hrl = LangCode(it->get<std::string>());
    for (const auto& l : j.at("languages")) c.languages.emplace_back(l.get<std::string>());

    std::map<LangCode, std::string> names;
    for (const auto& [code, name] : j.at("language_names").items()) names.emplace(LangCode(code), name.get<std::string>());
    c.names = LanguageNames(std::move(names));

    c.backends = j.at("backends").get<std::vector<BackendProfile>>();
    const auto& roles = j.at("roles");
    roles.at("generator").get_to(c.generator);
    roles.at("back_translator").get_to(c.back_translator);
    read_opt(roles, "student", c.student);

    if (const auto it = j.find("generation"); it != j.end()) {
      auto& g = c.generation;
      read_opt(*it, "n_target_paragraphs", g.n_target_paragraphs);
      read_opt(*it, "rouge_threshold", g.rouge_threshold);
      read_opt(*it, "temperature", g.temperature);
      read_opt(*it, "max_attempts_per_slot", g.max_attempts_per_slot);
      read_opt(*it, "k_seed_paragraphs", g.k_seed_paragraphs);
      read_opt(*it, "m_seed_sentences", g.m_seed_sentences);
      read_opt(*it, "max_new_tokens", g.max_new_tokens);
    }
    if (const auto it = j.find("splitter"); it != j.end()) {
      read_opt(*it, "min_tokens", c.splitter.min_tokens);
      read_opt(*it, "max_tokens", c.splitter.max_tokens);
      if (const auto ab = it->find("abbreviations"); ab != it->end()) {
        for (const auto& [lang, list] : ab->items()) {
          auto& set = c.splitter.abbreviations[lang];
          for (const auto& a : list) set.insert(a.get<std::string>());
        }
      }
    }
    if (const auto it = j.find("filter"); it != j.end()) {
      read_opt(*it, "langid_threshold", c.langid_threshold);
      if (const auto ext = it->find("external_classifier"); ext != it->end() && !ext->is_null()) {
        c.external_classifier = ext->get<std::string>();
      }
    }
    if (const auto it = j.find("backtranslation"); it != j.end()) {
      if (const auto m = it->find("mode"); m != it->end()) c.bt.mode = bt_mode_from_string(m->get<std::string>());
      if (const auto b = it->find("beam_size"); b != it->end()) c.bt.decode = DecodeParams::beam(b->get<int>());
      read_opt(*it, "shots", c.bt.shots);
      read_opt(*it, "max_failure_rate", c.bt.max_failure_rate);
      if (const auto p = it->find("pool"); p != it->end() && !p->is_null()) {
        c.bt.pool_ref = resolve(base_dir, p->get<std::string>());
      }
    }
    if (const auto it = j.find("metrics"); it != j.end()) {
      if (const auto s = it->find("bleu_smoothing"); s != it->end()) {
        const auto v = s->get<std::string>();
        if (v == "exp") c.bleu_params.smoothing = BleuSmoothing::exp;
        else if (v == "none") c.bleu_params.smoothing = BleuSmoothing::none;
        else throw ConfigError("bleu_smoothing must be 'exp' or 'none'");
      }
      read_opt(*it, "bleu_max_order", c.bleu_params.max_order);
      read_opt(*it, "chrf_char_order", c.chrf_params.char_order);
      read_opt(*it, "chrf_word_order", c.chrf_params.word_order);
      read_opt(*it, "chrf_beta", c.chrf_params.beta);
      if (const auto b = it->find("bootstrap"); b != it->end()) {
        read_opt(*b, "n_samples", c.bootstrap.n_samples);
        read_opt(*b, "sample_size", c.bootstrap.sample_size);
        read_opt(*b, "alpha", c.bootstrap.alpha);
        read_opt(*b, "seed", c.bootstrap.seed);
      }
      if (const auto t = it->find("token_counter"); t != it->end() && !t->is_null()) c.token_counter = t->get<std::string>();
      if (const auto t = it->find("scorer"); t != it->end() && !t->is_null()) c.scorer = t->get<std::string>();
    }

    const auto& paths = j.at("paths");
    c.paths.topics = resolve(base_dir, paths.at("topics").get<std::string>());
    c.paths.seed_paragraphs = resolve(base_dir, paths.at("seed_paragraphs").get<std::string>());
    for (const auto& [code, p] : paths.at("seed_sentences").items()) {
      c.paths.seed_sentences.emplace(LangCode(code), resolve(base_dir, p.get<std::string>()));
    }
    if (const auto it = paths.find("eval_sets"); it != paths.end()) {
      for (const auto& p : *it) c.paths.eval_sets.push_back(resolve(base_dir, p.get<std::string>()));
    }
    if (const auto it = paths.find("generation_template"); it != paths.end() && !it->is_null()) {
      c.paths.generation_template = resolve(base_dir, it->get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("config not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void RunConfig::validate() const {
  if (!seed) throw ConfigError("no master seed: set \"seed\" in the config or pass --seed");
  if (languages.empty()) throw ConfigError("no languages configured");
  std::set<LangCode> seen;
  for (const auto& l : languages) {
    if (l == hrl) throw ConfigError(l.str() + " is both the HRL and a target language");
    if (!seen.insert(l).second) throw ConfigError("language " + l.str() + " listed twice");
    names.name(l);
    if (!paths.seed_sentences.contains(l)) throw ConfigError("no seed sentences configured for " + l.str());
  }
  names.name(hrl);
  std::set<std::string> ids;
  for (const auto& b : backends) {
    b.validate();
    if (!ids.insert(b.backend_id).second) throw ConfigError("backend '" + b.backend_id + "' defined twice");
  }
  profile(generator);
  profile(back_translator);
  if (!student.empty()) profile(student);
  if (bt.mode == BtMode::student && student.empty()) {
    throw ConfigError("student back-translation needs roles.student");
  }
  bt.validate();
  if (generation.n_target_paragraphs < 1) throw ConfigError("generation.n_target_paragraphs must be >= 1");
  splitter.validate();
  if (!(langid_threshold >= 0.0 && langid_threshold <= 1.0)) throw ConfigError("langid_threshold must be in [0, 1]");
  bleu_params.validate();
  chrf_params.validate();
  bootstrap.validate();
}

std::string RunConfig::fingerprint() const {
  auto canonical = source;
  canonical.erase("run_id");
  canonical.erase("output_dir");
  return hash128(canonical.dump()).hex();
}

std::string RunConfig::effective_run_id() const {
  return run_id.empty() ? "run-" + fingerprint().substr(0, 12) : run_id;
}

const BackendProfile& RunConfig::profile(const std::string& backend_id) const {
  for (const auto& b : backends) {
    if (b.backend_id == backend_id) return b;
  }
  throw ConfigError("unknown backend profile '" + backend_id + "'");
}

void RunConfig::override_seed(std::uint64_t s) {
  seed = s;
  source["seed"] = s;
}

void RunConfig::override_backend(const std::string& backend_id) {
  profile(backend_id);
  generator = back_translator = backend_id;
  if (!student.empty()) student = backend_id;
  source["roles"]["generator"] = backend_id;
  source["roles"]["back_translator"] = backend_id;
  if (!student.empty()) source["roles"]["student"] = backend_id;
}

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

RunInputs RunInputs::load(const RunConfig& config) {
  RunInputs in;
  std::int64_t id = 0;
  for (auto& label : read_lines(config.paths.topics)) in.pools.topics.push_back({++id, std::move(label)});
  in.pools.seed_paragraphs = read_jsonl<SeedParagraph>(config.paths.seed_paragraphs);
  for (const auto& [lang, path] : config.paths.seed_sentences) in.pools.seed_sentences[lang] = read_lines(path);
  for (const auto& p : config.paths.eval_sets) {
    in.eval_sets.push_back(read_eval_set(p));
    in.eval_sets.back().validate();
  }
  in.generation_template = config.paths.generation_template
                               ? TemplateFile::load(*config.paths.generation_template)
                               : TemplateFile::parse(builtin_generation_template());
  return in;
}

// ---- Stages ---------------------------------------------------------------

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::generate: return "generate";
    case Stage::process: return "process";
    case Stage::backtranslate: return "backtranslate";
    case Stage::assemble: return "assemble";
    case Stage::evaluate: return "evaluate";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (const auto st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown stage '" + std::string(s) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::generate, Stage::process, Stage::backtranslate, Stage::assemble,
                                         Stage::evaluate};
  return stages;
}

RunManifest load_run_manifest(const fs::path& run_dir) {
  const RunLayout layout{run_dir};
  if (!fs::exists(layout.manifest())) throw NotFoundError("no manifest in " + run_dir.string());
  return read_manifest(layout.manifest());
}

Pipeline::Pipeline(RunConfig config, Gateway& gateway, PipelineOptions options)
    : config_(std::move(config)), gateway_(gateway), options_(std::move(options)) {
  config_.validate();
  layout_.dir = config_.output_dir / config_.effective_run_id();
  for (const auto& l : options_.languages) {
    if (std::find(config_.languages.begin(), config_.languages.end(), l) == config_.languages.end()) {
      throw ConfigError("language " + l.str() + " is not configured for this run");
    }
  }
  if (fs::exists(layout_.manifest())) {
    manifest_ = read_manifest(layout_.manifest());
  } else {
    manifest_.run_id = config_.effective_run_id();
    manifest_.config_fingerprint = config_.fingerprint();
    manifest_.created_at = utc_now();
  }
}

const RunInputs& Pipeline::inputs() {
  if (!inputs_) inputs_ = RunInputs::load(config_);
  return *inputs_;
}

void Pipeline::save_manifest() {
  fs::create_directories(layout_.dir);
  manifest_.updated_at = utc_now();
  write_manifest(layout_.manifest(), manifest_);
}

PipelineResult Pipeline::run(const std::set<Stage>& stages) {
  fs::create_directories(layout_.dir);
  const auto& langs = options_.languages.empty() ? config_.languages : options_.languages;
  for (const auto stage : all_stages()) {
    if (!stages.contains(stage)) continue;
    for (const auto& lang : langs) run_stage(stage, lang);
  }
  PipelineResult result;
  result.manifest = manifest_;
  for (const auto& lang : langs) {
    const auto it = manifest_.stages.find(RunManifest::stage_key("generate", lang));
    if (it != manifest_.stages.end() && it->second.status != "complete") result.partial = true;
  }
  return result;
}

void Pipeline::require(Stage prerequisite, Stage stage, const LangCode& lang) const {
  if (!manifest_.stages.contains(RunManifest::stage_key(to_string(prerequisite), lang))) {
    throw PreconditionError(std::string(to_string(stage)) + " for " + lang.str() + " needs the output of " +
                            std::string(to_string(prerequisite)) + "; run that stage first");
  }
}

void Pipeline::invalidate_after(Stage stage, const LangCode& lang) {
  bool later = false;
  for (const auto s : all_stages()) {
    if (later) manifest_.stages.erase(RunManifest::stage_key(to_string(s), lang));
    if (s == stage) later = true;
  }
}

void Pipeline::run_stage(Stage stage, const LangCode& lang) {
  const auto name = std::string(to_string(stage));
  const auto fingerprint = config_.fingerprint();
  if (options_.resume && manifest_.stage_complete(name, lang)) {
    const auto& done = manifest_.stages.at(RunManifest::stage_key(name, lang));
    if (done.config_fingerprint == fingerprint) {
      log_event("stage_skipped", {{"stage", name}, {"lang", lang.str()}, {"reason", "complete"}});
      return;
    }
    log_event("stage_rerun", {{"stage", name}, {"lang", lang.str()}, {"reason", "configuration changed"}});
  }
  StageRecord record;
  record.config_fingerprint = fingerprint;
  record.started_at = utc_now();
  record.status = "complete";
  log_event("stage_start", {{"stage", name}, {"lang", lang.str()}});
  switch (stage) {
    case Stage::generate: generate(lang, record); break;
    case Stage::process: process(lang, record); break;
    case Stage::backtranslate: backtranslate(lang, record); break;
    case Stage::assemble: assemble(lang, record); break;
    case Stage::evaluate: evaluate(lang, record); break;
  }
  record.finished_at = utc_now();
  invalidate_after(stage, lang);
  manifest_.stages[RunManifest::stage_key(name, lang)] = record;
  manifest_.config_fingerprint = fingerprint;
  save_manifest();
  log_event("stage_done", {{"stage", name}, {"lang", lang.str()}, {"status", record.status}});
}

namespace {

/// Rewrites a shared JSONL file: records for which `owned` holds are
/// replaced by `fresh`, which is appended after the others.
template <typename T, typename Owned>
void replace_records(const fs::path& path, Owned&& owned, const std::vector<T>& fresh) {
  std::vector<T> all;
  if (fs::exists(path)) all = read_jsonl<T>(path);
  std::erase_if(all, owned);
  all.insert(all.end(), fresh.begin(), fresh.end());
  const auto tmp = fs::path(path.string() + ".tmp");
  write_jsonl(tmp, all);
  fs::rename(tmp, path);
}

template <typename T, typename Pred>
std::vector<T> read_matching(const fs::path& path, Pred&& pred) {
  std::vector<T> out;
  if (!fs::exists(path)) return out;
  for (auto& r : read_jsonl<T>(path)) {
    if (pred(r)) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

void Pipeline::generate(const LangCode& lang, StageRecord& record) {
  const auto& in = inputs();
  // A fresh (non-resumed) generation starts from an empty slate for `lang`.
  if (!options_.resume) {
    replace_records<GeneratedParagraph>(
        layout_.paragraphs(), [&](const GeneratedParagraph& p) { return p.target_lang == lang; }, {});
  }
  GenerationConfig gc;
  gc.target_lang = lang;
  gc.n_target_paragraphs = config_.generation.n_target_paragraphs;
  gc.rouge_threshold = config_.generation.rouge_threshold;
  gc.temperature = config_.generation.temperature;
  gc.max_attempts_per_slot = config_.generation.max_attempts_per_slot;
  gc.seed = *config_.seed;
  gc.k_seed_paragraphs = config_.generation.k_seed_paragraphs;
  gc.m_seed_sentences = config_.generation.m_seed_sentences;
  gc.max_new_tokens = config_.generation.max_new_tokens;
  const GenerationContext ctx{in.pools, config_.names, in.generation_template, gateway_,
                              config_.profile(config_.generator), manifest_.run_id};
  const auto outcome = run_generation(gc, ctx, layout_.paragraphs());
  manifest_.counts[lang.str()] = StageCounts{};
  manifest_.counts[lang.str()].paragraphs = outcome.accepted_total;
  record.shortfall = outcome.shortfall;
  if (outcome.accepted_total < gc.n_target_paragraphs) record.status = "partial";
  log_event("generation", {{"lang", lang.str()},
                           {"accepted", outcome.accepted_total},
                           {"attempts", outcome.attempts},
                           {"rejected", outcome.rejected},
                           {"failed", outcome.failed},
                           {"shortfall", outcome.shortfall}});
}

void Pipeline::process(const LangCode& lang, StageRecord&) {
  require(Stage::generate, Stage::process, lang);
  const auto& in = inputs();
  const auto paragraphs = read_matching<GeneratedParagraph>(
      layout_.paragraphs(), [&](const GeneratedParagraph& p) { return p.target_lang == lang; });

  // The built-in classifier knows every seeded language plus the HRL, whose
  // sentences come from the seed paragraphs.
  std::unique_ptr<LangClassifier> classifier;
  if (config_.external_classifier) {
    classifier = std::make_unique<ExternalLangId>(*config_.external_classifier);
  } else {
    auto seeds = in.pools.seed_sentences;
    for (const auto& p : in.pools.seed_paragraphs) {
      auto& bucket = seeds[p.lang];
      for (auto& s : split_sentences(p.text, config_.splitter, p.lang)) bucket.push_back(std::move(s));
    }
    classifier = std::make_unique<NgramLangId>(NgramLangId::train(seeds));
  }
  NgramBlocklist blocklist;
  for (const auto& set : in.eval_sets) blocklist.add_eval_set(set);

  const auto result = apply_filters(paragraphs, config_.splitter, *classifier, blocklist,
                                    FilterConfig{lang, config_.langid_threshold});
  std::unordered_set<std::string> ids;
  for (const auto& p : paragraphs) ids.insert(p.id);
  replace_records<SentenceRecord>(
      layout_.sentences(), [&](const SentenceRecord& s) { return ids.contains(s.paragraph_id); }, result.records);

  auto& c = manifest_.counts[lang.str()];
  c.sentences_raw = result.counts.sentences_raw;
  c.sentences_after_langid = result.counts.sentences_after_langid;
  c.sentences_after_decon = result.counts.sentences_after_decon;
  c.pairs = 0;
}

void Pipeline::backtranslate(const LangCode& lang, StageRecord&) {
  require(Stage::process, Stage::backtranslate, lang);
  const auto& in = inputs();
  std::unordered_set<std::string> ids;
  for (const auto& p : read_matching<GeneratedParagraph>(
           layout_.paragraphs(), [&](const GeneratedParagraph& p) { return p.target_lang == lang; })) {
    ids.insert(p.id);
  }
  const auto kept = read_matching<SentenceRecord>(layout_.sentences(), [&](const SentenceRecord& s) {
    return ids.contains(s.paragraph_id) && s.status == SentenceStatus::kept;
  });

  const Direction dir(config_.hrl, lang);
  std::optional<ExamplePool> pool;
  const auto pool_path = options_.bt_pool ? options_.bt_pool : config_.bt.pool_ref;
  if (config_.bt.mode != BtMode::supervised_mt) {
    if (!pool_path) throw PreconditionError("backtranslate: prompted modes need a few-shot pool file");
    auto pairs = read_jsonl<ParallelPair>(*pool_path);
    std::erase_if(pairs, [&](const ParallelPair& p) { return p.direction != dir; });
    if (std::none_of(pairs.begin(), pairs.end(), [](const ParallelPair& p) { return p.ok(); })) {
      throw PreconditionError("backtranslate: pool " + pool_path->string() + " has no usable " + dir.str() + " pairs");
    }
    pool.emplace(std::move(pairs), PoolSide::lrl);
  }
  const auto& profile =
      config_.profile(config_.bt.mode == BtMode::student ? config_.student : config_.back_translator);
  const auto pairs = synthpar::backtranslate(kept, config_.bt, gateway_, profile, config_.names, dir,
                                             pool ? &*pool : nullptr);
  (void)in;
  replace_records<ParallelPair>(
      layout_.pairs(), [&](const ParallelPair& p) { return p.lrl_lang() == lang; }, pairs);
  manifest_.counts[lang.str()].pairs =
      std::count_if(pairs.begin(), pairs.end(), [](const ParallelPair& p) { return p.ok(); });
}

void Pipeline::assemble(const LangCode& lang, StageRecord&) {
  require(Stage::backtranslate, Stage::assemble, lang);
  const auto& in = inputs();
  auto pairs = read_matching<ParallelPair>(layout_.pairs(), [&](const ParallelPair& p) { return p.lrl_lang() == lang; });

  // The HRL side gets the same 10-gram screen, against the evaluation data
  // and the HRL seed paragraphs shown to the generator.
  NgramBlocklist hrl_blocklist;
  for (const auto& set : in.eval_sets) hrl_blocklist.add_eval_set(set);
  for (const auto& p : in.pools.seed_paragraphs) {
    if (p.lang == config_.hrl) hrl_blocklist.add_text(p.text);
  }
  const auto dropped = decontaminate_hrl(pairs, hrl_blocklist);
  replace_records<ParallelPair>(
      layout_.pairs(), [&](const ParallelPair& p) { return p.lrl_lang() == lang; }, pairs);

  // finetune.jsonl always mirrors every successful pair in pairs.jsonl.
  auto all = read_jsonl<ParallelPair>(layout_.pairs());
  std::erase_if(all, [](const ParallelPair& p) { return !p.ok(); });
  write_jsonl(layout_.finetune(), emit_finetune_records(config_.names, all));

  manifest_.counts[lang.str()].pairs =
      std::count_if(pairs.begin(), pairs.end(), [](const ParallelPair& p) { return p.ok(); });
  log_event("assemble", {{"lang", lang.str()}, {"hrl_decontaminated", dropped}});
}

void Pipeline::evaluate(const LangCode& lang, StageRecord&) {
  require(Stage::assemble, Stage::evaluate, lang);
  const auto pairs =
      read_matching<ParallelPair>(layout_.pairs(), [&](const ParallelPair& p) { return p.lrl_lang() == lang; });
  nlohmann::json stats = nlohmann::json::object();
  if (fs::exists(layout_.stats())) {
    std::ifstream f(layout_.stats());
    stats = nlohmann::json::parse(f);
  }
  const bool any_ok = std::any_of(pairs.begin(), pairs.end(), [](const ParallelPair& p) { return p.ok(); });
  nlohmann::json entry;
  if (any_ok) {
    entry["corpus"] = corpus_stats(pairs, config_.token_counter);
  } else {
    entry["corpus"] = nullptr;
  }
  entry["counts"] = manifest_.counts[lang.str()];
  stats[lang.str()] = entry;
  std::ofstream out(layout_.stats(), std::ios::trunc);
  out << stats.dump(2) << '\n';
}

// ---- Stats ----------------------------------------------------------------

std::string with_thousands(std::int64_t v) {
  const bool neg = v < 0;
  auto digits = std::to_string(neg ? -v : v);
  std::string out;
  const auto n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return neg ? "-" + out : out;
}

std::string render_stats(const RunManifest& manifest) {
  const std::vector<std::string> header{"Language", "Paragraphs", "Sentences", "After decontamination"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& [lang, c] : manifest.counts) {  // std::map: sorted by language
    rows.push_back({lang, with_thousands(c.paragraphs), with_thousands(c.sentences_after_langid),
                    with_thousands(c.sentences_after_decon)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  const auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i > 0) out << "  ";
      if (i == 0) {
        out << r[i] << std::string(width[i] - r[i].size(), ' ');
      } else {
        out << std::string(width[i] - r[i].size(), ' ') << r[i];
      }
    }
    out << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return out.str();
}

// ---- Demo workspace -------------------------------------------------------

fs::path write_demo_workspace(const fs::path& dir, std::uint64_t seed, std::int64_t n_paragraphs,
                              const std::vector<LangCode>& languages) {
  fs::create_directories(dir / "inputs");
  const LangCode hrl("eng_Latn");
  const auto& eng = mock::vocabulary(hrl);

  static const std::map<std::string, std::string> kKnownNames{
      {"eng_Latn", "English"}, {"hau_Latn", "Hausa"},   {"sun_Latn", "Sundanese"}, {"hin_Deva", "Hindi"},
      {"amh_Ethi", "Amharic"}, {"arb_Arab", "Arabic"}, {"kin_Latn", "Kinyarwanda"}, {"ibo_Latn", "Igbo"},
      {"rus_Cyrl", "Russian"}, {"fra_Latn", "French"}};
  nlohmann::json names = {{"eng_Latn", "English"}};

  {
    std::ofstream topics(dir / "inputs" / "topics.txt");
    Rng rng(derive_seed(seed, "demo/topics", 0));
    for (int i = 0; i < 400; ++i) {
      topics << eng.words()[rng.below(eng.words().size())] << ' ' << eng.words()[rng.below(eng.words().size())]
             << '\n';
    }
  }
  {
    std::vector<SeedParagraph> paras;
    Rng rng(derive_seed(seed, "demo/seed_paragraphs", 0));
    for (int i = 0; i < 24; ++i) paras.push_back({hrl, eng.paragraph(rng)});
    write_jsonl(dir / "inputs" / "seed_paragraphs.jsonl", paras);
  }
  nlohmann::json seed_sentences = nlohmann::json::object();
  nlohmann::json eval_sets = nlohmann::json::array();
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& lang : languages) {
    langs.push_back(lang.str());
    const auto known = kKnownNames.find(lang.str());
    names[lang.str()] = known != kKnownNames.end() ? known->second : lang.str();
    const auto& vocab = mock::vocabulary(lang);
    const auto seeds_file = "inputs/seed_sentences." + lang.str() + ".txt";
    {
      std::ofstream out(dir / seeds_file);
      Rng rng(derive_seed(seed, "demo/seed_sentences/" + lang.str(), 0));
      for (int i = 0; i < 200; ++i) out << vocab.sentence(rng) << '\n';
    }
    seed_sentences[lang.str()] = seeds_file;
    const auto eval_file = "inputs/eval." + lang.str() + ".jsonl";
    {
      JsonlWriter w(dir / eval_file, false);
      Rng rng(derive_seed(seed, "demo/eval/" + lang.str(), 0));
      for (int i = 0; i < 50; ++i) {
        w.write_json({{"source", eng.sentence(rng)}, {"reference", vocab.sentence(rng)}});
      }
    }
    eval_sets.push_back(eval_file);
  }

  nlohmann::json config = {
      {"seed", seed},
      {"output_dir", "runs"},
      {"hrl", hrl.str()},
      {"languages", langs},
      {"language_names", names},
      {"backends",
       {{{"backend_id", "mock-generator"}, {"kind", "mock"}, {"model_name", "mock-llm"}, {"max_parallel_requests", 4}},
        {{"backend_id", "mock-mt"}, {"kind", "mock"}, {"model_name", "mock-nmt"}, {"max_parallel_requests", 4}},
        {{"backend_id", "mock-student"}, {"kind", "mock"}, {"model_name", "student-base"}, {"max_parallel_requests", 4}}}},
      {"roles", {{"generator", "mock-generator"}, {"back_translator", "mock-mt"}, {"student", "mock-student"}}},
      {"generation", {{"n_target_paragraphs", n_paragraphs}, {"rouge_threshold", 0.7}, {"temperature", 1.0}}},
      {"filter", {{"langid_threshold", 0.5}}},
      {"backtranslation", {{"mode", "mt"}, {"beam_size", 5}, {"shots", 5}}},
      {"paths",
       {{"topics", "inputs/topics.txt"},
        {"seed_paragraphs", "inputs/seed_paragraphs.jsonl"},
        {"seed_sentences", seed_sentences},
        {"eval_sets", eval_sets}}}};
  const auto path = dir / "config.json";
  std::ofstream(path, std::ios::trunc) << config.dump(2) << '\n';
  return path;
}

}  // namespace synthpar

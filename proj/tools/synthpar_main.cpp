// synthpar: command-line front end for the synthetic parallel-corpus pipeline.
//
// Exit codes: 0 success, 1 error, 2 usage error, 3 partial result (a
// generation stage fell short of its paragraph target).

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "synthpar/corpus.hpp"
#include "synthpar/gateway.hpp"
#include "synthpar/log.hpp"
#include "synthpar/metrics.hpp"
#include "synthpar/pipeline.hpp"
#include "synthpar/retrieval.hpp"
#include "synthpar/translate.hpp"

namespace fs = std::filesystem;
using namespace synthpar;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;

struct GlobalOptions {
  std::string config;
  std::string run_id;
  std::optional<std::uint64_t> seed;
  std::string resume;
  std::string backend;
  bool quiet = false;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Config with CLI overrides applied: --seed, --backend, and the run id from
/// --resume, --run-id or a command's --run.
RunConfig load_config(const GlobalOptions& g, const std::string& run = {}) {
  if (g.config.empty()) throw UsageError("--config is required for this command");
  auto cfg = RunConfig::load(g.config);
  if (g.seed) cfg.override_seed(*g.seed);
  if (!g.backend.empty()) cfg.override_backend(g.backend);
  for (const auto& id : {run, g.resume, g.run_id}) {
    if (!id.empty()) {
      cfg.run_id = id;
      break;
    }
  }
  return cfg;
}

/// A run given as a directory, or as an id under the config's output_dir.
fs::path run_dir(const GlobalOptions& g, const std::string& run) {
  if (!run.empty() && fs::is_directory(run)) return run;
  const auto cfg = load_config(g, run);
  return cfg.output_dir / cfg.effective_run_id();
}

std::vector<std::string> read_segments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::vector<LangCode> parse_langs(const std::vector<std::string>& codes) {
  std::vector<LangCode> out;
  for (const auto& c : codes) out.emplace_back(c);
  return out;
}

int finish(const PipelineResult& result) {
  std::cout << render_stats(result.manifest);
  if (result.partial) {
    std::cerr << "warning: generation fell short of its target; run is partial\n";
    return kExitPartial;
  }
  return kExitOk;
}

std::string absolute_string(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize and evaluate parallel corpora for low-resource languages"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--run-id", g.run_id, "Run identifier (default: derived from the config fingerprint)");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--resume", g.resume, "Resume this run, skipping completed stages");
  app.add_option("--backend", g.backend, "Use this backend profile for every role");
  app.add_flag("-q,--quiet", g.quiet, "Suppress structured log lines on stderr");

  // generate
  auto* generate = app.add_subcommand("generate", "Generate target-language paragraphs");
  std::string gen_lang;
  std::optional<std::int64_t> gen_n;
  generate->add_option("--lang", gen_lang, "Target language code")->required();
  generate->add_option("--n", gen_n, "Number of paragraphs to accept");

  // process
  auto* process = app.add_subcommand("process", "Split, language-filter and decontaminate sentences");
  std::string proc_run, proc_lang;
  std::vector<std::string> proc_eval;
  process->add_option("--run", proc_run, "Run id or directory");
  process->add_option("--eval-sets", proc_eval, "Evaluation sets (JSONL) used for decontamination");
  process->add_option("--lang", proc_lang, "Restrict to one language");

  // backtranslate
  auto* bt = app.add_subcommand("backtranslate", "Back-translate kept sentences into the HRL");
  std::string bt_run, bt_mode, bt_pool, bt_lang;
  bt->add_option("--run", bt_run, "Run id or directory");
  bt->add_option("--mode", bt_mode, "mt | fewshot | student")->check(CLI::IsMember({"mt", "fewshot", "student"}));
  bt->add_option("--pool", bt_pool, "Parallel pool (pairs JSONL) for few-shot retrieval");
  bt->add_option("--lang", bt_lang, "Restrict to one language");

  // assemble
  auto* assemble = app.add_subcommand("assemble", "Screen HRL sides and write the fine-tune file");
  std::string asm_run, asm_lang;
  assemble->add_option("--run", asm_run, "Run id or directory");
  assemble->add_option("--lang", asm_lang, "Restrict to one language");

  // run
  auto* run = app.add_subcommand("run", "Run pipeline stages in order");
  std::string run_stages = "generate,process,backtranslate,assemble,evaluate";
  std::vector<std::string> run_langs;
  run->add_option("--stages", run_stages, "Comma-separated stages")->capture_default_str();
  run->add_option("--lang", run_langs, "Restrict to these languages");

  // select
  auto* select = app.add_subcommand("select", "Rank few-shot examples with BM25");
  std::string sel_pool, sel_queries, sel_side = "lrl", sel_index;
  std::size_t sel_k = 5;
  select->add_option("--pool", sel_pool, "Pairs JSONL")->required();
  select->add_option("--queries", sel_queries, "Query file, one per line")->required();
  select->add_option("--k", sel_k, "Examples per query")->capture_default_str()->check(CLI::PositiveNumber);
  select->add_option("--side", sel_side, "Indexed side")->capture_default_str()->check(CLI::IsMember({"hrl", "lrl"}));
  select->add_option("--save-index", sel_index, "Also write the index to this file");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score hypotheses against references");
  std::string ev_hyp, ev_ref, ev_hyp_b, ev_metric = "both", ev_src, ev_scorer;
  bool ev_sig = false;
  std::vector<double> ev_range;
  evaluate->add_option("--hyp", ev_hyp, "Hypotheses, one per line")->required();
  evaluate->add_option("--ref", ev_ref, "References, one per line")->required();
  evaluate->add_option("--hyp-b", ev_hyp_b, "Second system for significance testing");
  evaluate->add_flag("--significance", ev_sig, "Paired bootstrap of --hyp against --hyp-b");
  evaluate->add_option("--metric", ev_metric, "bleu | chrf | both")->capture_default_str()
      ->check(CLI::IsMember({"bleu", "chrf", "both"}));
  evaluate->add_option("--src", ev_src, "Sources, for the external scorer");
  evaluate->add_option("--scorer-cmd", ev_scorer, "External scorer (source<TAB>hyp<TAB>ref lines in, scores out)");
  evaluate->add_option("--scorer-range", ev_range, "Declared score range: lo hi")->expected(2);

  // selfloop
  auto* selfloop = app.add_subcommand("selfloop", "Iterative back-translation with re-fine-tuning");
  std::string sl_run, sl_trainer, sl_eval, sl_lang, sl_pool;
  int sl_rounds = 1;
  std::size_t sl_shots = 5;
  selfloop->add_option("--run", sl_run, "Run id or directory");
  selfloop->add_option("--rounds", sl_rounds, "Rounds")->required()->check(CLI::PositiveNumber);
  selfloop->add_option("--trainer-cmd", sl_trainer, "Trainer hook ({finetune} {base} {round} {output})")->required();
  selfloop->add_option("--eval", sl_eval, "Evaluation set (JSONL source=HRL, reference=LRL)")->required();
  selfloop->add_option("--lang", sl_lang, "Target language (default: the run's only language)");
  selfloop->add_option("--pool", sl_pool, "Parallel pool for few-shot retrieval");
  selfloop->add_option("--shots", sl_shots, "Few-shot examples")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Per-language dataset statistics");
  std::string st_run, st_manifest;
  stats->add_option("--run", st_run, "Run id or directory");
  stats->add_option("--manifest", st_manifest, "Manifest file");

  // validate
  auto* validate = app.add_subcommand("validate", "Check manifest consistency against run data");
  std::string va_run, va_manifest;
  validate->add_option("--run", va_run, "Run id or directory");
  validate->add_option("--manifest", va_manifest, "Manifest file (counts only)");

  // demo
  auto* demo = app.add_subcommand("demo", "Write an offline mock workspace and run the full pipeline");
  std::string demo_dir = "synthpar-demo";
  std::int64_t demo_n = 200;
  std::uint64_t demo_seed = 42;
  std::vector<std::string> demo_langs{"hau_Latn"};
  demo->add_option("--dir", demo_dir, "Workspace directory")->capture_default_str();
  demo->add_option("--n", demo_n, "Paragraphs per language")->capture_default_str();
  demo->add_option("--demo-seed", demo_seed, "Seed written into the demo config")->capture_default_str();
  demo->add_option("--lang", demo_langs, "Target languages")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  set_logging_enabled(!g.quiet);

  try {
    Gateway gateway;
    const bool resume = !g.resume.empty();

    if (*generate) {
      auto cfg = load_config(g);
      if (gen_n) {
        cfg.generation.n_target_paragraphs = *gen_n;
        cfg.source["generation"]["n_target_paragraphs"] = *gen_n;
      }
      Pipeline p(std::move(cfg), gateway, {resume, {LangCode(gen_lang)}, {}});
      return finish(p.run({Stage::generate}));
    }
    if (*process) {
      auto cfg = load_config(g, proc_run);
      if (!proc_eval.empty()) {
        cfg.paths.eval_sets.clear();
        cfg.source["paths"]["eval_sets"] = nlohmann::json::array();
        for (const auto& e : proc_eval) {
          cfg.paths.eval_sets.emplace_back(e);
          cfg.source["paths"]["eval_sets"].push_back(absolute_string(e));
        }
      }
      PipelineOptions opts{resume, {}, {}};
      if (!proc_lang.empty()) opts.languages = {LangCode(proc_lang)};
      Pipeline p(std::move(cfg), gateway, opts);
      return finish(p.run({Stage::process}));
    }
    if (*bt) {
      auto cfg = load_config(g, bt_run);
      if (!bt_mode.empty()) {
        cfg.bt.mode = bt_mode_from_string(bt_mode);
        cfg.source["backtranslation"]["mode"] = bt_mode;
      }
      PipelineOptions opts{resume, {}, {}};
      if (!bt_pool.empty()) {
        opts.bt_pool = bt_pool;
        cfg.source["backtranslation"]["pool"] = absolute_string(bt_pool);
      }
      if (!bt_lang.empty()) opts.languages = {LangCode(bt_lang)};
      Pipeline p(std::move(cfg), gateway, opts);
      return finish(p.run({Stage::backtranslate}));
    }
    if (*assemble) {
      auto cfg = load_config(g, asm_run);
      PipelineOptions opts{resume, {}, {}};
      if (!asm_lang.empty()) opts.languages = {LangCode(asm_lang)};
      Pipeline p(std::move(cfg), gateway, opts);
      return finish(p.run({Stage::assemble, Stage::evaluate}));
    }
    if (*run) {
      std::set<Stage> stages;
      std::stringstream ss(run_stages);
      for (std::string s; std::getline(ss, s, ',');) {
        if (!s.empty()) stages.insert(stage_from_string(s));
      }
      Pipeline p(load_config(g), gateway, {resume, parse_langs(run_langs), {}});
      return finish(p.run(stages));
    }
    if (*select) {
      const ExamplePool pool(read_jsonl<ParallelPair>(sel_pool), pool_side_from_string(sel_side));
      if (!sel_index.empty()) pool.index().save(sel_index);
      for (const auto& q : read_segments(sel_queries)) {
        nlohmann::json hits = nlohmann::json::array();
        for (const auto& hit : pool.rank(q, sel_k)) {
          const auto& pair = pool.pairs()[hit.doc];
          hits.push_back({{"doc", hit.doc}, {"score", hit.score}, {"hrl", pair.hrl_text}, {"lrl", pair.lrl_text}});
        }
        std::cout << nlohmann::json{{"query", q}, {"hits", hits}}.dump() << '\n';
      }
      return kExitOk;
    }
    if (*evaluate) {
      const auto hyps = read_segments(ev_hyp);
      const auto refs = read_segments(ev_ref);
      nlohmann::json out;
      const bool want_bleu = ev_metric != "chrf";
      const bool want_chrf = ev_metric != "bleu";
      if (want_bleu) out["bleu"] = bleu(hyps, refs);
      if (want_chrf) out["chrf_pp"] = chrf_pp(hyps, refs);
      if (ev_sig) {
        if (ev_hyp_b.empty()) throw UsageError("--significance needs --hyp-b");
        const auto hyps_b = read_segments(ev_hyp_b);
        BootstrapParams params;
        if (!g.config.empty()) params = load_config(g).bootstrap;
        if (g.seed) params.seed = *g.seed;
        const auto report = [&](const AdditiveMetric& m) {
          const auto r = paired_bootstrap(hyps, hyps_b, refs, m, params);
          return nlohmann::json{{"score_a", r.score_a}, {"score_b", r.score_b}, {"p_value", r.p_value},
                                {"wins_a", r.wins_a},   {"wins_b", r.wins_b},   {"ties", r.ties},
                                {"significant", r.significant(params.alpha)}};
        };
        nlohmann::json sig{{"samples", params.n_samples}, {"sample_size", params.sample_size}, {"seed", params.seed}};
        if (want_bleu) sig["bleu"] = report(bleu_metric());
        if (want_chrf) sig["chrf_pp"] = report(chrf_metric());
        out["significance"] = sig;
      }
      if (!ev_scorer.empty()) {
        if (ev_src.empty()) throw UsageError("--scorer-cmd needs --src");
        const auto srcs = read_segments(ev_src);
        if (srcs.size() != hyps.size() || refs.size() != hyps.size()) {
          throw UsageError("--src, --hyp and --ref must have the same number of lines");
        }
        std::vector<ScoreTriple> triples;
        for (std::size_t i = 0; i < hyps.size(); ++i) triples.push_back({srcs[i], hyps[i], refs[i]});
        ExternalScorer scorer{ev_scorer, std::nullopt};
        if (ev_range.size() == 2) scorer.range = std::make_pair(ev_range[0], ev_range[1]);
        const auto scores = external_score(triples, scorer);
        RunningMean mean;
        for (const auto s : scores) mean.add(s);
        out["external"] = {{"mean", mean.mean()}, {"segments", scores}};
      }
      std::cout << out.dump(2) << '\n';
      return kExitOk;
    }
    if (*selfloop) {
      auto cfg = load_config(g, sl_run);
      cfg.validate();
      if (cfg.student.empty()) throw ConfigError("selfloop needs roles.student in the config");
      const LangCode lang = sl_lang.empty() ? cfg.languages.front() : LangCode(sl_lang);
      if (sl_lang.empty() && cfg.languages.size() > 1) throw UsageError("--lang is required for multi-language runs");
      const RunLayout layout{cfg.output_dir / cfg.effective_run_id()};
      std::set<std::string> paragraph_ids;
      for (const auto& p : read_jsonl<GeneratedParagraph>(layout.paragraphs())) {
        if (p.target_lang == lang) paragraph_ids.insert(p.id);
      }
      std::vector<SentenceRecord> y;
      for (auto& s : read_jsonl<SentenceRecord>(layout.sentences())) {
        if (s.status == SentenceStatus::kept && paragraph_ids.contains(s.paragraph_id)) y.push_back(std::move(s));
      }
      if (y.empty()) throw PreconditionError("selfloop: no kept sentences for " + lang.str() + "; run process first");
      const Direction dir(cfg.hrl, lang);
      // Few-shot pool: --pool, else the configured pool, else this run's pairs.
      fs::path pool_path = layout.pairs();
      if (!sl_pool.empty()) {
        pool_path = sl_pool;
      } else if (cfg.bt.pool_ref) {
        pool_path = *cfg.bt.pool_ref;
      }
      std::optional<ExamplePool> pool;
      if (sl_shots > 0) {
        if (!fs::exists(pool_path)) {
          throw PreconditionError("selfloop: no few-shot pool (" + pool_path.string() + "); pass --pool or run backtranslate");
        }
        auto pairs = read_jsonl<ParallelPair>(pool_path);
        std::erase_if(pairs, [&](const ParallelPair& p) { return !p.ok() || p.direction != dir; });
        if (pairs.empty()) throw PreconditionError("selfloop: pool " + pool_path.string() + " has no usable pairs");
        pool.emplace(std::move(pairs), PoolSide::lrl);
      }
      SelfImproveConfig sc;
      sc.rounds = sl_rounds;
      sc.trainer_command = sl_trainer;
      sc.student = cfg.profile(cfg.student);
      sc.shots = sl_shots;
      sc.work_dir = layout.selfloop() / lang.str();
      sc.max_failure_rate = cfg.bt.max_failure_rate;
      const auto states = self_improve(y, sc, gateway, cfg.names, dir, read_eval_set(sl_eval), pool ? &*pool : nullptr);
      for (const auto& s : states) std::cout << nlohmann::json(s).dump() << '\n';
      return kExitOk;
    }
    if (*stats) {
      const auto manifest = !st_manifest.empty() ? read_manifest(st_manifest) : load_run_manifest(run_dir(g, st_run));
      std::cout << render_stats(manifest);
      return kExitOk;
    }
    if (*validate) {
      std::vector<Violation> violations;
      if (!va_manifest.empty()) {
        violations = validate_manifest(read_manifest(va_manifest));
      } else {
        const RunLayout layout{run_dir(g, va_run)};
        if (!fs::exists(layout.manifest())) throw NotFoundError("no manifest in " + layout.dir.string());
        violations = validate_run_data(layout);
      }
      for (const auto& v : violations) std::cout << v.field << ": " << v.message << '\n';
      if (violations.empty()) std::cout << "ok\n";
      return violations.empty() ? kExitOk : kExitError;
    }
    if (*demo) {
      const auto config_path = write_demo_workspace(demo_dir, demo_seed, demo_n, parse_langs(demo_langs));
      auto cfg = RunConfig::load(config_path);
      if (g.seed) cfg.override_seed(*g.seed);
      Pipeline p(std::move(cfg), gateway, {resume, {}, {}});
      const auto result = p.run({all_stages().begin(), all_stages().end()});
      std::cerr << "demo run written to " << p.layout().dir.string() << '\n';
      return finish(result);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}

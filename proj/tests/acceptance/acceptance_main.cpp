// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each check compares the library against an independent oracle or
// an exact expected value; none of them loosen a tolerance to pass.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "oracles.hpp"
#include "synthpar/generation.hpp"
#include "synthpar/log.hpp"
#include "synthpar/metrics.hpp"
#include "synthpar/mock.hpp"
#include "synthpar/pipeline.hpp"
#include "synthpar/prompting.hpp"
#include "synthpar/retrieval.hpp"
#include "synthpar/text.hpp"
#include "synthpar/text_pipeline.hpp"
#include "synthpar/translate.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace synthpar;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + SYNTHPAR_CLI_PATH + "' -q " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(12);
  o << v;
  return o.str();
}

const LangCode kEng("eng_Latn");
const LangCode kHau("hau_Latn");
const LangCode kHin("hin_Deva");

// 1 ----------------------------------------------------------------------------
Outcome offline_determinism() {
  const auto start = Clock::now();
  std::vector<std::array<std::string, 3>> artifacts;
  for (int rep = 0; rep < 2; ++rep) {
    testing_support::TempDir dir("det");
    const auto cfg = RunConfig::load(write_demo_workspace(dir.path(), 42, 200, {kHau}));
    Gateway gateway;
    Pipeline pipeline(cfg, gateway);
    const auto result = pipeline.run({all_stages().begin(), all_stages().end()});
    if (result.manifest.counts.at(kHau.str()).paragraphs != 200) return {false, "fewer than 200 paragraphs"};
    const auto& l = pipeline.layout();
    artifacts.push_back({slurp(l.paragraphs()), slurp(l.sentences()), slurp(l.pairs())});
  }
  const double secs = seconds_since(start);
  const bool same = artifacts[0] == artifacts[1];
  const bool nonempty = !artifacts[0][2].empty();
  return {same && nonempty && secs < 60.0,
          std::string(same ? "paragraphs/sentences/pairs identical" : "artifacts differ") + ", two runs in " +
              fmt(secs) + " s"};
}

// 2 ----------------------------------------------------------------------------
Outcome decontamination() {
  Rng rng(2024);
  const auto lex = oracle::random_lexicon(3000, 77);
  EvalSegmentSet eval{"eval", {}};
  for (int i = 0; i < 100; ++i) eval.segments.push_back({oracle::random_text(lex, 20, rng), oracle::random_text(lex, 20, rng)});
  std::vector<std::vector<std::string>> eval_words;
  for (const auto& s : eval.segments) {
    eval_words.push_back(text::normalize_words(s.source));
    eval_words.push_back(text::normalize_words(s.reference));
  }

  std::vector<SentenceRecord> corpus;
  std::set<std::size_t> planted;
  for (std::size_t i = 0; i < 5000; ++i) {
    SentenceRecord r;
    r.paragraph_id = "p" + std::to_string(i / 10);
    r.position = static_cast<std::int64_t>(i % 10);
    r.langid_label = kHau;
    r.text = oracle::random_text(lex, 8 + rng.below(20), rng);
    if (i % 200 == 17) {
      // A 10-word window of an eval text, re-cased and punctuated, inside random words.
      const auto& src = eval_words[rng.below(eval_words.size())];
      const auto at = rng.below(src.size() - 10 + 1);
      std::string window;
      for (std::size_t k = 0; k < 10; ++k) {
        auto w = src[at + k];
        if (k == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
        window += (k ? " " : "") + w + (k == 5 ? "," : "");
      }
      r.text = oracle::random_text(lex, 4, rng) + " " + window + ". " + oracle::random_text(lex, 3, rng);
      planted.insert(i);
    }
    corpus.push_back(std::move(r));
  }

  const auto start = Clock::now();
  NgramBlocklist blocklist;
  blocklist.add_eval_set(eval);
  const auto out = decontaminate(corpus, blocklist);
  const double secs = seconds_since(start);

  std::set<std::size_t> dropped, scan;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].status == SentenceStatus::dropped_decontaminated) dropped.insert(i);
    if (oracle::shares_ngram(text::normalize_words(corpus[i].text), eval_words)) scan.insert(i);
  }
  const bool ok = planted.size() == 25 && dropped == planted && dropped == scan && secs < 5.0;
  return {ok, std::to_string(dropped.size()) + "/5000 dropped (planted 25, scan " + std::to_string(scan.size()) +
                  "), decontamination " + fmt(secs) + " s"};
}

// 3 ----------------------------------------------------------------------------
Outcome rouge_oracle() {
  Rng rng(31337);
  const auto lex = oracle::random_lexicon(400, 5);
  std::vector<std::string> paragraphs;
  for (int i = 0; i < 500; ++i) paragraphs.push_back(oracle::random_text(lex, 30 + rng.below(90), rng));
  AcceptedPool pool;
  std::vector<std::vector<std::string>> accepted;
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    const auto tokens = text::normalize_words(paragraphs[i]);
    const double got = max_pool_overlap(paragraphs[i], pool).score;
    const double want = oracle::max_rouge1(tokens, accepted);
    if (got != want) ++mismatches;
    pool.add("p" + std::to_string(i), tokens);
    accepted.push_back(tokens);
  }
  return {mismatches == 0, std::to_string(500 - mismatches) + "/500 candidates exactly equal to all-pairs max"};
}

// 4 ----------------------------------------------------------------------------
Outcome bm25_oracle() {
  Rng rng(4242);
  const auto lex = oracle::random_lexicon(800, 6);
  std::vector<std::string> docs;
  std::vector<std::vector<std::string>> tokens;
  for (int i = 0; i < 997; ++i) {
    docs.push_back(oracle::random_text(lex, 5 + rng.below(40), rng));
    tokens.push_back(text::normalize_words(docs.back()));
  }
  const auto index = Bm25Index::build(docs);
  int exact = 0;
  for (int q = 0; q < 100; ++q) {
    const auto query = oracle::random_text(lex, 2 + rng.below(8), rng);
    const auto got = index.query(query, 5);
    const auto want = oracle::bm25_exhaustive(tokens, text::normalize_words(query), 5);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i].doc == want[i].doc;
    exact += same ? 1 : 0;
  }
  return {exact == 100, std::to_string(exact) + "/100 queries with identical top-5 ids and order"};
}

// 5 ----------------------------------------------------------------------------
Outcome metric_identities() {
  Rng rng(5);
  // Mixed scripts, punctuation and digits so tokenization edge cases appear.
  const std::vector<std::string> alphabet{"a", "b", "k", "z", "é", "ŋ", "ɗ", "ƙ", "क", "ा", "ह", "ж", "я",
                                          "7", "0", ",", ".", "!", "?", "'", "-", "«", "»", "ع"};
  int identity_ok = 0;
  for (int c = 0; c < 1000; ++c) {
    std::vector<std::string> corpus;
    const auto n_seg = 1 + rng.below(8);
    for (std::uint64_t s = 0; s < n_seg; ++s) {
      std::string seg;
      const auto n_words = 1 + rng.below(15);
      for (std::uint64_t w = 0; w < n_words; ++w) {
        if (w) seg += ' ';
        const auto len = 1 + rng.below(7);
        for (std::uint64_t k = 0; k < len; ++k) seg += alphabet[rng.below(alphabet.size())];
      }
      corpus.push_back(seg);
    }
    const double b = bleu(corpus, corpus);
    const double f = chrf_pp(corpus, corpus);
    if (std::abs(b - 100.0) < 1e-9 && std::abs(f - 100.0) < 1e-9) ++identity_ok;
  }

  // Disjoint alphabets: nothing can overlap at character or word level.
  int zero_ok = 0;
  for (int c = 0; c < 100; ++c) {
    std::vector<std::string> hyp, ref;
    for (int s = 0; s < 5; ++s) {
      std::string h, r;
      for (int w = 0; w < 6; ++w) {
        for (int k = 0; k < 4; ++k) {
          h += static_cast<char>('a' + rng.below(13));
          r += static_cast<char>('n' + rng.below(13));
        }
        h += ' ';
        r += ' ';
      }
      hyp.push_back(h);
      ref.push_back(r);
    }
    zero_ok += (bleu(hyp, ref) == 0.0 && chrf_pp(hyp, ref) == 0.0) ? 1 : 0;
  }

  // Hand-computed goldens (independently confirmed with sacreBLEU).
  const std::vector<std::string> h1{"the cat sat on the mat"}, r1{"the cat sat on a mat"};
  const std::vector<std::string> h2{"the cat sat on the mat", "a dog ran"}, r2{"the cat sat on a mat", "the dog ran"};
  const bool goldens = std::abs(bleu(h1, r1) - 100.0 * std::pow(1.0 / 12.0, 0.25)) < 1e-9 &&
                       std::abs(bleu(h2, r2) - 49.33885363281903) < 1e-9 &&
                       std::abs(chrf_pp(h1, r1) - 72.03039245302905) < 1e-9 &&
                       std::abs(chrf_pp(h2, r2) - 66.61097582972583) < 1e-9 &&
                       std::abs(chrf_pp(std::vector<std::string>{"Hello, world!"},
                                        std::vector<std::string>{"Hello world."}) -
                                46.53925281333129) < 1e-9;
  return {identity_ok == 1000 && zero_ok == 100 && goldens,
          "identity " + std::to_string(identity_ok) + "/1000, zero-overlap " + std::to_string(zero_ok) +
              "/100, goldens " + (goldens ? "match" : "differ")};
}

// 6 ----------------------------------------------------------------------------
Outcome bootstrap() {
  Rng rng(66);
  const auto lex = oracle::random_lexicon(500, 8);
  std::vector<std::string> refs, good, noisy_a, noisy_b, bad;
  for (int i = 0; i < 600; ++i) {
    refs.push_back(oracle::random_text(lex, 12, rng));
    good.push_back(refs.back());
    bad.push_back(oracle::random_text(lex, 12, rng));
    noisy_a.push_back(rng.below(2) ? refs.back() : bad.back());
    noisy_b.push_back(rng.below(2) ? refs.back() : oracle::random_text(lex, 12, rng));
  }
  const BootstrapParams params{300, 500, 0.05, 12345};
  const auto metric = bleu_metric();
  const auto same = paired_bootstrap(good, good, refs, metric, params);
  const auto dominant = paired_bootstrap(good, bad, refs, metric, params);
  const auto r1 = paired_bootstrap(noisy_a, noisy_b, refs, metric, params);
  const auto r2 = paired_bootstrap(noisy_a, noisy_b, refs, metric, params);
  const bool ok = same.p_value == 1.0 && dominant.p_value == 0.0 && r1.p_value == r2.p_value &&
                  r1.wins_a == r2.wins_a && r1.wins_b == r2.wins_b;
  return {ok, "identical p=" + fmt(same.p_value) + ", dominant p=" + fmt(dominant.p_value) + ", repeat p=" +
                  fmt(r1.p_value) + "/" + fmt(r2.p_value)};
}

// 7 ----------------------------------------------------------------------------
Outcome vendi() {
  double worst = 0.0;
  bool ok = true;
  for (const int n : {1, 2, 3, 10, 64, 200, 500}) {
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, n);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const double v1 = vendi_score(ones);
    const double vn = vendi_score(id);
    std::vector<std::vector<double>> ko(n, std::vector<double>(n, 1.0));
    std::vector<std::vector<double>> ki(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) ki[i][i] = 1.0;
    const double o1 = oracle::vendi_oracle(ko);
    const double on = oracle::vendi_oracle(ki);
    for (const double d : {std::abs(v1 - o1), std::abs(vn - on), std::abs(v1 - 1.0), std::abs(vn - n)}) {
      worst = std::max(worst, d);
      ok = ok && d <= 1e-8;
    }
  }
  return {ok, "n in {1..500}: max deviation from oracle and closed form " + fmt(worst)};
}

// 8 ----------------------------------------------------------------------------
Outcome self_improvement() {
  testing_support::TempDir dir("selfloop");
  const auto cfg_path = write_demo_workspace(dir.path(), 42, 40, {kHau});
  const auto cfg = "--config '" + cfg_path.string() + "'";
  if (run_cli(cfg + " run").exit_code != 0) return {false, "pipeline run failed"};
  const auto eval = (dir / "inputs" / "eval.hau_Latn.jsonl").string();
  const auto r = run_cli(cfg + " selfloop --rounds 2 --trainer-cmd 'echo {base}' --eval '" + eval + "'");
  if (r.exit_code != 0) return {false, "selfloop exited " + std::to_string(r.exit_code)};

  const auto config = RunConfig::load(cfg_path);
  const auto work = config.output_dir / config.effective_run_id() / "selfloop" / kHau.str();
  const auto log = read_jsonl<TrainerInvocation>(work / "trainer_log.jsonl");
  const auto base = config.profile(config.student).model_name;
  bool from_base = log.size() == 2;
  for (const auto& inv : log) from_base = from_base && inv.base_model == base && inv.exit_code == 0 &&
                                          inv.command.find(base) != std::string::npos;
  // X_k is the back-translated text; pairs also carry their round's
  // provenance (bt_mode, student_round), which differs by construction.
  const auto p0 = read_jsonl<ParallelPair>(work / "round_0" / "pairs.jsonl");
  const auto p1 = read_jsonl<ParallelPair>(work / "round_1" / "pairs.jsonl");
  bool same = !p0.empty() && p0.size() == p1.size();
  for (std::size_t i = 0; same && i < p0.size(); ++i) {
    same = p0[i].sentence_ref == p1[i].sentence_ref && p0[i].lrl_text == p1[i].lrl_text &&
           p0[i].hrl_text == p1[i].hrl_text && p0[i].failure == p1[i].failure && p0[i].student_round == 0 &&
           p1[i].student_round == 1;
  }
  return {from_base && same, std::string("X_1 ") + (same ? "==" : "!=") + " X_0 over " + std::to_string(p0.size()) + " pairs; " + std::to_string(log.size()) +
                                 " trainer invocations, all from base: " + (from_base ? "yes" : "no")};
}

// 9 ----------------------------------------------------------------------------
Outcome finetune_emission() {
  Rng rng(9);
  const LanguageNames names({{kEng, "English"}, {kHau, "Hausa"}});
  std::vector<ParallelPair> pairs;
  for (int i = 0; i < 10000; ++i) {
    ParallelPair p;
    p.hrl_text = mock::vocabulary(kEng).sentence(rng);
    p.lrl_text = mock::vocabulary(kHau).sentence(rng);
    p.direction = Direction(kEng, kHau);
    pairs.push_back(std::move(p));
  }
  const auto recs = emit_finetune_records(names, pairs);
  std::size_t leaks = 0, wrong = 0;
  for (const auto& r : recs) leaks += r.prompt.find(r.completion) != std::string::npos ? 1 : 0;
  for (std::size_t i = 0; i < pairs.size() && recs.size() == 2 * pairs.size(); ++i) {
    const auto& fwd = recs[2 * i];
    const auto& bwd = recs[2 * i + 1];
    const bool ok = fwd.completion == pairs[i].lrl_text && bwd.completion == pairs[i].hrl_text &&
                    fwd.direction == pairs[i].direction && bwd.direction == pairs[i].direction.reversed() &&
                    fwd.prompt.find(pairs[i].hrl_text) != std::string::npos &&
                    bwd.prompt.find(pairs[i].lrl_text) != std::string::npos;
    wrong += ok ? 0 : 1;
  }
  return {recs.size() == 20000 && leaks == 0 && wrong == 0,
          std::to_string(recs.size()) + " records for 10000 pairs, " + std::to_string(leaks) + " leaks, " +
              std::to_string(wrong) + " malformed"};
}

// 10 ---------------------------------------------------------------------------
Outcome language_id() {
  Rng rng(10);
  std::map<LangCode, std::vector<std::string>> seeds;
  for (const auto& l : {kHau, kHin}) {
    for (int i = 0; i < 300; ++i) seeds[l].push_back(mock::vocabulary(l).sentence(rng));
  }
  const auto model = NgramLangId::train(seeds);
  int agree = 0, total = 0;
  for (const auto& [lang, ss] : seeds) {
    for (const auto& s : ss) {
      agree += model.classify_one(s).label == lang ? 1 : 0;
      ++total;
    }
  }
  const double consistency = static_cast<double>(agree) / total;

  // Hausa paragraphs with planted Hindi sentences.
  std::vector<GeneratedParagraph> paras;
  std::set<std::string> planted;
  for (int i = 0; i < 100; ++i) {
    GeneratedParagraph g;
    g.id = "p" + std::to_string(i);
    g.target_lang = kHau;
    g.text = mock::vocabulary(kHau).paragraph(rng);
    if (i % 4 == 0) {
      const auto s = mock::vocabulary(kHin).sentence(rng);
      g.text += " " + s;
      planted.insert(s);
    }
    paras.push_back(std::move(g));
  }
  const auto res = apply_filters(paras, SplitterRules::defaults(), model, NgramBlocklist{}, {kHau, 0.5});
  std::size_t planted_found = 0, planted_dropped = 0;
  for (const auto& r : res.records) {
    if (planted.contains(r.text)) {
      ++planted_found;
      planted_dropped += r.status == SentenceStatus::dropped_langid ? 1 : 0;
    }
  }
  const bool ok = consistency >= 0.99 && planted_found == planted.size() && planted_dropped == planted_found;
  return {ok, "self-consistency " + fmt(100.0 * consistency) + "% on hau_Latn/hin_Deva seeds; planted " +
                  std::to_string(planted_dropped) + "/" + std::to_string(planted.size()) + " dropped"};
}

// 11 ---------------------------------------------------------------------------
Outcome manifest() {
  testing_support::TempDir dir("manifest");
  const auto cfg_path = write_demo_workspace(dir.path(), 7, 60, {kHau, kHin});
  if (run_cli("--config '" + cfg_path.string() + "' run").exit_code != 0) return {false, "pipeline run failed"};
  const auto config = RunConfig::load(cfg_path);
  const auto m = load_run_manifest(config.output_dir / config.effective_run_id());
  bool monotone = m.counts.size() == 2;
  for (const auto& [lang, c] : m.counts) {
    monotone = monotone && c.paragraphs > 0 && c.sentences_raw >= c.sentences_after_langid &&
               c.sentences_after_langid >= c.sentences_after_decon && c.sentences_after_decon >= c.pairs &&
               c.pairs > 0;
  }
  monotone = monotone && validate_manifest(m).empty() &&
             validate_run_data(RunLayout{config.output_dir / config.effective_run_id()}).empty();

  const auto fixture = fs::path(SYNTHPAR_FIXTURE_DIR) / "manifest_hausa.json";
  const auto r = run_cli("stats --manifest '" + fixture.string() + "'");
  const std::string row = "hau_Latn      14,981    101,488                101,466";
  const bool rendered = r.exit_code == 0 && r.out.find("\n" + row + "\n") != std::string::npos;
  return {monotone && rendered, std::string("counts chain ") + (monotone ? "monotone" : "broken") +
                                    "; stats row " + (rendered ? "\"" + row + "\"" : "missing")};
}

}  // namespace

int main() {
  set_logging_enabled(false);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"offline-determinism", offline_determinism},
      {"decontamination-oracle", decontamination},
      {"rouge-oracle", rouge_oracle},
      {"bm25-oracle", bm25_oracle},
      {"metric-identities", metric_identities},
      {"bootstrap", bootstrap},
      {"vendi", vendi},
      {"self-improvement", self_improvement},
      {"finetune-emission", finetune_emission},
      {"language-id", language_id},
      {"manifest", manifest},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    const auto start = Clock::now();
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << checks[i].first << ": " << o.detail << " ["
              << fmt(seconds_since(start)) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

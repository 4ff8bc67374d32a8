#include <doctest.h>

#include <string>
#include <vector>

#include "oracles.hpp"
#include "synthpar/errors.hpp"
#include "synthpar/generation.hpp"
#include "synthpar/mock.hpp"
#include "synthpar/prompting.hpp"
#include "synthpar/text.hpp"
#include "temp_dir.hpp"

using namespace synthpar;

namespace {

const LangCode kEng("eng_Latn");
const LangCode kHau("hau_Latn");

LanguageNames names() { return LanguageNames({{kEng, "English"}, {kHau, "Hausa"}}); }

SeedPools pools(std::size_t n_topics = 50) {
  SeedPools p;
  for (std::size_t i = 0; i < n_topics; ++i) p.topics.push_back({static_cast<std::int64_t>(i), "topic " + std::to_string(i)});
  for (int i = 0; i < 6; ++i) p.seed_paragraphs.push_back({kEng, "English paragraph number " + std::to_string(i) + "."});
  p.seed_paragraphs.push_back({kHau, "Hausa seed paragraph that must never be a demonstration."});
  Rng rng(3);
  for (int i = 0; i < 20; ++i) p.seed_sentences[kHau].push_back(mock::vocabulary(kHau).sentence(rng));
  return p;
}

ParallelPair pair(std::string hrl, std::string lrl) {
  ParallelPair p;
  p.hrl_text = std::move(hrl);
  p.lrl_text = std::move(lrl);
  p.direction = Direction(kEng, kHau);
  return p;
}

}  // namespace

TEST_CASE("template filling is a single pass") {
  CHECK(fill_template("{a} and {b} {c}", {{"a", "{b}"}, {"b", "x"}}) == "{b} and x {c}");
  CHECK(fill_template("{", {}) == "{");
  const auto t = TemplateFile::parse("@@ one\nfirst\nline\n@@ two\nsecond\n");
  CHECK(t.section("one") == "first\nline");
  CHECK(t.section("two") == "second");
  CHECK_THROWS_AS(t.section("three"), ConfigError);
}

TEST_CASE("zero-shot and few-shot translation prompts") {
  const auto n = names();
  CHECK(build_zero_shot_mt_prompt(n, kEng, kHau, "Good morning.") ==
        "Translate this from English to Hausa:\nEnglish: Good morning.\nHausa:");
  CHECK(build_few_shot_mt_prompt(n, {}, kHau, kEng, "Ina kwana.") == build_zero_shot_mt_prompt(n, kHau, kEng, "Ina kwana."));
  const std::vector<ParallelPair> ex{pair("Hello.", "Sannu."), pair("Thanks.", "Na gode.")};
  CHECK(build_few_shot_mt_prompt(n, ex, kHau, kEng, "Ina kwana.") ==
        "Translate this from Hausa to English:\nHausa: Sannu.\nEnglish: Hello.\n\n"
        "Translate this from Hausa to English:\nHausa: Na gode.\nEnglish: Thanks.\n\n"
        "Translate this from Hausa to English:\nHausa: Ina kwana.\nEnglish:");
  CHECK_THROWS_AS(build_zero_shot_mt_prompt(n, kEng, LangCode("fra_Latn"), "x"), ConfigError);
  CHECK_THROWS_AS(build_zero_shot_mt_prompt(n, kEng, kHau, ""), ContractError);
}

TEST_CASE("generation prompt draws seeds with the documented sampler") {
  const auto p = pools();
  const auto n = names();
  PromptSpec spec;
  spec.target_lang = kHau;
  spec.topic = Topic{7, "rainy season farming"};
  spec.k_seed_paragraphs = 2;
  spec.m_seed_sentences = 3;
  Rng a(11), b(11);
  const auto prompt = build_generation_prompt(spec, p, n, a);
  const auto para_idx = b.sample_without_replacement(6, 2);  // English paragraphs only
  const auto sent_idx = b.sample_without_replacement(20, 3);
  for (const auto i : para_idx) CHECK(prompt.find(p.seed_paragraphs[i].text) != std::string::npos);
  for (const auto i : sent_idx) CHECK(prompt.find("- " + p.seed_sentences.at(kHau)[i]) != std::string::npos);
  CHECK(prompt.find("must never") == std::string::npos);
  CHECK(prompt.find("rainy season farming") != std::string::npos);
  CHECK(prompt.ends_with("Hausa:"));

  spec.m_seed_sentences = 21;
  CHECK_THROWS_AS(build_generation_prompt(spec, p, n, a), PoolExhaustedError);
}

TEST_CASE("fine-tune records: two per pair, no completion in its prompt") {
  const std::vector<ParallelPair> pairs{pair("The market opens early.", "Kasuwa tana buɗewa da wuri.")};
  const auto recs = emit_finetune_records(names(), pairs);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].direction == Direction(kEng, kHau));
  CHECK(recs[0].completion == "Kasuwa tana buɗewa da wuri.");
  CHECK(recs[0].prompt == build_zero_shot_mt_prompt(names(), kEng, kHau, "The market opens early."));
  CHECK(recs[1].direction == Direction(kHau, kEng));
  CHECK(recs[1].completion == "The market opens early.");
  for (const auto& r : recs) CHECK(r.prompt.find(r.completion) == std::string::npos);
  auto failed = pairs;
  failed[0].failure = "x";
  CHECK_THROWS_AS(emit_finetune_records(names(), failed), ContractError);
}

TEST_CASE("pooled ROUGE-1 matches the brute-force oracle") {
  Rng rng(21);
  const auto lex = oracle::random_lexicon(300, 4);
  AcceptedPool pool;
  std::vector<std::vector<std::string>> accepted;
  for (int i = 0; i < 200; ++i) {
    const auto text = oracle::random_text(lex, 20 + rng.below(40), rng);
    const auto tokens = text::normalize_words(text);
    const auto got = max_pool_overlap(text, pool).score;
    CHECK(got == oracle::max_rouge1(tokens, accepted));
    pool.add("p" + std::to_string(i), tokens);
    accepted.push_back(tokens);
  }
  CHECK(rouge1_f_from_counts(0, 3, 4) == 0.0);
  CHECK(rouge1_f_from_counts(3, 3, 3) == 1.0);
}

TEST_CASE("judge reply parsing") {
  CHECK(parse_judge_reply("Yes, it does.") == JudgeVerdict::yes);
  CHECK(parse_judge_reply("  no") == JudgeVerdict::no);
  CHECK(parse_judge_reply("maybe") == JudgeVerdict::unparseable);
  CHECK(parse_judge_reply("") == JudgeVerdict::unparseable);
}

TEST_CASE("mock generation run, resume and shortfall") {
  testing_support::TempDir dir("gen");
  const auto p = pools(400);
  const auto n = names();
  const auto tpl = TemplateFile::parse(builtin_generation_template());
  Gateway gateway;
  BackendProfile profile;
  profile.backend_id = "gen";
  profile.model_name = "mock-gen";
  profile.max_parallel_requests = 4;
  GenerationContext ctx{p, n, tpl, gateway, profile, "r"};

  GenerationConfig cfg;
  cfg.target_lang = kHau;
  cfg.n_target_paragraphs = 30;
  cfg.seed = 42;
  const auto first = run_generation(cfg, ctx, dir / "a.jsonl");
  CHECK(first.accepted_total == 30);
  const auto paras = read_jsonl<GeneratedParagraph>(dir / "a.jsonl");
  REQUIRE(paras.size() == 30);
  for (const auto& g : paras) {
    CHECK(g.target_lang == kHau);
    CHECK(g.max_pool_overlap < cfg.rouge_threshold);
  }

  // Same seed, fresh file: identical output.
  (void)run_generation(cfg, ctx, dir / "b.jsonl");
  const auto again = read_jsonl<GeneratedParagraph>(dir / "b.jsonl");
  REQUIRE(again.size() == paras.size());
  for (std::size_t i = 0; i < paras.size(); ++i) CHECK(again[i].text == paras[i].text);

  // Resuming a complete file costs no backend calls.
  const auto before = gateway.call_count();
  const auto resumed = run_generation(cfg, ctx, dir / "a.jsonl");
  CHECK(resumed.accepted_new == 0);
  CHECK(gateway.call_count() == before);

  // A generator that always says the same thing fills one slot only.
  profile.mock_fixed_response = "Always the very same paragraph about nothing.";
  cfg.n_target_paragraphs = 3;
  cfg.max_attempts_per_slot = 2;
  const auto shortfall = run_generation(cfg, ctx, dir / "c.jsonl");
  CHECK(shortfall.accepted_total == 1);
  CHECK(shortfall.shortfall == 2);
  CHECK(shortfall.rejected > 0);
}

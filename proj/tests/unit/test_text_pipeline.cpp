#include <doctest.h>

#include <string>
#include <vector>

#include "oracles.hpp"
#include "synthpar/errors.hpp"
#include "synthpar/mock.hpp"
#include "synthpar/text.hpp"
#include "synthpar/text_pipeline.hpp"
#include "temp_dir.hpp"

using namespace synthpar;

namespace {

const LangCode kHau("hau_Latn");
const LangCode kHin("hin_Deva");

std::string strip_ws(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c != ' ' && c != '\t' && c != '\n') out += c;
  }
  return out;
}

std::uint64_t constant_hash(std::string_view) { return 7; }

}  // namespace

TEST_CASE("sentence splitting") {
  const auto rules = SplitterRules::defaults();
  CHECK(split_sentences("One two three. Four five six! Seven?", rules, kHau) ==
        std::vector<std::string>{"One two three.", "Four five six!", "Seven?"});
  CHECK(split_sentences("Dr. Musa came. He left.", rules, LangCode("eng_Latn")) ==
        std::vector<std::string>{"Dr. Musa came.", "He left."});
  CHECK(split_sentences("Version 2.5 is out. ok then", rules, kHau) ==
        std::vector<std::string>{"Version 2.5 is out. ok then"});
  CHECK(split_sentences("He said \"stop.\" Then went.", rules, kHau) ==
        std::vector<std::string>{"He said \"stop.\"", "Then went."});
  CHECK(split_sentences("यह एक वाक्य है। यह दूसरा है।", rules, kHin) ==
        std::vector<std::string>{"यह एक वाक्य है।", "यह दूसरा है।"});
  CHECK(split_sentences("   ", rules, kHau).empty());

  // Non-whitespace content is preserved across random paragraphs.
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto para = mock::vocabulary(kHau).paragraph(rng);
    std::string joined;
    for (const auto& s : split_sentences(para, rules, kHau)) joined += s;
    CHECK(strip_ws(joined) == strip_ws(para));
  }
}

TEST_CASE("language identification separates two scripts") {
  Rng rng(8);
  std::map<LangCode, std::vector<std::string>> seeds;
  for (const auto& l : {kHau, kHin}) {
    for (int i = 0; i < 100; ++i) seeds[l].push_back(mock::vocabulary(l).sentence(rng));
  }
  const auto model = NgramLangId::train(seeds);
  CHECK(model.languages() == std::vector<LangCode>{kHau, kHin});
  int agree = 0;
  for (const auto& [lang, ss] : seeds) {
    for (const auto& s : ss) agree += model.classify_one(s).label == lang ? 1 : 0;
  }
  CHECK(agree == 200);
  const auto v = model.classify_one("12345 !!!");
  CHECK(v.low_confidence);
  CHECK_THROWS_AS(model.classify_one("   "), UndefinedInputError);
  CHECK_FALSE(langid_features("ab").empty());
}

TEST_CASE("external language ID hook") {
  const ExternalLangId ext("awk '{print \"hau_Latn\\t0.9\"}'");
  const std::vector<std::string> in{"a", "b"};
  const auto out = ext.classify_batch(in);
  REQUIRE(out.size() == 2);
  CHECK(out[1].label == kHau);
  CHECK(out[1].confidence == 0.9);
  CHECK_THROWS_AS(ExternalLangId("echo bad").classify_batch(in), IntegrationError);
}

TEST_CASE("decontamination agrees with the sliding-window oracle") {
  Rng rng(12);
  const auto lex = oracle::random_lexicon(80, 2);  // small lexicon: many near misses
  std::vector<std::vector<std::string>> eval_words;
  NgramBlocklist bl;
  EvalSegmentSet set{"eval", {}};
  for (int i = 0; i < 40; ++i) {
    const auto s = oracle::random_text(lex, 15, rng);
    set.segments.push_back({s, oracle::random_text(lex, 12, rng)});
  }
  bl.add_eval_set(set);
  for (const auto& seg : set.segments) {
    eval_words.push_back(text::normalize_words(seg.source));
    eval_words.push_back(text::normalize_words(seg.reference));
  }
  int contaminated = 0;
  for (int i = 0; i < 600; ++i) {
    std::string s;
    if (i % 20 == 0) {
      // Plant a 10-word window of an eval segment between random words.
      const auto& src = eval_words[rng.below(eval_words.size())];
      std::string window;
      for (std::size_t k = 0; k < 10; ++k) window += " " + src[k];
      s = oracle::random_text(lex, 3, rng) + window + ", " + oracle::random_text(lex, 3, rng);
    } else {
      s = oracle::random_text(lex, 14, rng);
    }
    const bool expected = oracle::shares_ngram(text::normalize_words(s), eval_words);
    CHECK(bl.is_contaminated(s) == expected);
    contaminated += expected ? 1 : 0;
  }
  CHECK(contaminated >= 30);
  // Case and punctuation do not hide a match.
  const auto& w = eval_words[0];
  std::string upper;
  for (std::size_t k = 0; k < 10; ++k) upper += (k ? "; " : "") + text::to_lower(w[k]) + (k == 4 ? "!" : "");
  CHECK(bl.is_contaminated(upper));
}

TEST_CASE("hash collisions are rejected by literal verification") {
  NgramBlocklist bl(&constant_hash);
  bl.add_text("a b c d e f g h i j");
  CHECK(bl.is_contaminated("A b c d e f g h i j!"));
  CHECK_FALSE(bl.is_contaminated("k l m n o p q r s t"));
  CHECK(bl.rejected_collisions() > 0);
}

TEST_CASE("blocklist save and load") {
  testing_support::TempDir dir("bl");
  NgramBlocklist bl;
  bl.add_text("one two three four five six seven eight nine ten eleven");
  bl.save(dir / "bl.bin");
  const auto back = NgramBlocklist::load(dir / "bl.bin");
  CHECK(back.size() == bl.size());
  CHECK(back.size() == 2);
  CHECK(back.is_contaminated("two three four five six seven eight nine ten eleven"));
  std::ofstream(dir / "junk.bin") << "garbage";
  CHECK_THROWS_AS(NgramBlocklist::load(dir / "junk.bin"), ParseError);
}

TEST_CASE("filters: counts chain and status of every sentence") {
  Rng rng(2);
  std::map<LangCode, std::vector<std::string>> seeds;
  for (const auto& l : {kHau, kHin}) {
    for (int i = 0; i < 100; ++i) seeds[l].push_back(mock::vocabulary(l).sentence(rng));
  }
  const auto model = NgramLangId::train(seeds);
  std::vector<GeneratedParagraph> paras;
  for (int i = 0; i < 20; ++i) {
    GeneratedParagraph g;
    g.id = "p" + std::to_string(i);
    g.target_lang = kHau;
    g.text = mock::vocabulary(kHau).paragraph(rng);
    if (i % 5 == 0) g.text += " " + mock::vocabulary(kHin).sentence(rng);
    paras.push_back(g);
  }
  NgramBlocklist bl;
  const auto planted = text::split_whitespace(paras[3].text);
  std::string window;
  for (std::size_t k = 0; k < 10 && k < planted.size(); ++k) window += planted[k] + " ";
  bl.add_text(window);

  const auto res = apply_filters(paras, SplitterRules::defaults(), model, bl, {kHau, 0.5});
  const auto& c = res.counts;
  CHECK(c.paragraphs == 20);
  CHECK(c.sentences_raw == static_cast<std::int64_t>(res.records.size()));
  CHECK(c.sentences_raw > c.sentences_after_langid);
  CHECK(c.sentences_after_langid > c.sentences_after_decon);
  for (const auto& r : res.records) {
    if (r.langid_label == kHin) CHECK(r.status == SentenceStatus::dropped_langid);
  }
}

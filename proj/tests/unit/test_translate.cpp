#include <doctest.h>

#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthpar/errors.hpp"
#include "synthpar/mock.hpp"
#include "synthpar/translate.hpp"
#include "temp_dir.hpp"

using namespace synthpar;

namespace {

const LangCode kEng("eng_Latn");
const LangCode kHau("hau_Latn");
const Direction kDir(kEng, kHau);

LanguageNames names() { return LanguageNames({{kEng, "English"}, {kHau, "Hausa"}}); }

std::vector<SentenceRecord> sentences(int n) {
  std::vector<SentenceRecord> out;
  Rng rng(4);
  for (int i = 0; i < n; ++i) {
    SentenceRecord r;
    r.paragraph_id = "p" + std::to_string(i / 5);
    r.position = i % 5;
    r.text = mock::vocabulary(kHau).sentence(rng);
    r.langid_label = kHau;
    out.push_back(r);
  }
  return out;
}

BackendProfile mock_profile(std::string id, std::string model) {
  BackendProfile p;
  p.backend_id = std::move(id);
  p.model_name = std::move(model);
  p.max_parallel_requests = 4;
  return p;
}

/// seq2seq transport that fails every `every`-th segment.
class FlakyMt : public Transport {
 public:
  explicit FlakyMt(int every) : every_(every) {}
  HttpResponse post(const std::string&, const std::string& body, const std::vector<std::pair<std::string, std::string>>&,
                    int) override {
    const auto req = nlohmann::json::parse(body);
    nlohmann::json out = nlohmann::json::array();
    std::lock_guard lock(mu_);
    for (const auto& t : req["texts"]) {
      out.push_back(++seen_ % every_ == 0 ? std::string() : "EN " + t.get<std::string>());
    }
    return {200, nlohmann::json{{"translations", out}}.dump()};
  }

 private:
  std::mutex mu_;
  int every_;
  int seen_ = 0;
};

}  // namespace

TEST_CASE("supervised back-translation produces one pair per sentence") {
  Gateway g;
  const auto in = sentences(20);
  BtConfig cfg;
  const auto pairs = backtranslate(in, cfg, g, mock_profile("mt", "nmt"), names(), kDir);
  REQUIRE(pairs.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(pairs[i].ok());
    CHECK(pairs[i].lrl_text == in[i].text);
    CHECK(pairs[i].direction == kDir);
    CHECK(pairs[i].sentence_ref == in[i].ref());
    CHECK(pairs[i].bt_mode == BtMode::supervised_mt);
    CHECK(mock::untranslate(pairs[i].hrl_text) == std::optional<std::string>(in[i].text));
  }
}

TEST_CASE("back-translation failure accounting") {
  BackendProfile mt;
  mt.backend_id = "mt";
  mt.kind = BackendKind::seq2seq_mt;
  mt.endpoint_url = "http://mt/translate";
  BtConfig cfg;
  cfg.max_failure_rate = 0.05;

  Gateway low(std::make_shared<FlakyMt>(40), [](auto) {});
  const auto pairs = backtranslate(sentences(80), cfg, low, mt, names(), kDir);
  int failed = 0;
  for (const auto& p : pairs) failed += p.ok() ? 0 : 1;
  CHECK(failed == 2);

  Gateway high(std::make_shared<FlakyMt>(10), [](auto) {});
  CHECK_THROWS_AS(backtranslate(sentences(80), cfg, high, mt, names(), kDir), RunError);

  auto dropped = sentences(3);
  dropped[1].status = SentenceStatus::dropped_langid;
  CHECK_THROWS_AS(backtranslate(dropped, cfg, low, mt, names(), kDir), ContractError);
}

TEST_CASE("few-shot back-translation uses pool hits in ranked order, greedily") {
  std::vector<ParallelPair> pool_pairs;
  for (int i = 0; i < 10; ++i) {
    ParallelPair p;
    p.hrl_text = "english " + std::to_string(i);
    p.lrl_text = "kalma" + std::to_string(i) + " gida";
    p.direction = kDir;
    pool_pairs.push_back(p);
  }
  const ExamplePool pool(pool_pairs, PoolSide::lrl);
  const auto prompt = build_bt_prompt("kalma3 gida kalma7", &pool, 2, names(), kDir);
  const auto hits = pool.select("kalma3 gida kalma7", 2);
  CHECK(prompt == build_few_shot_mt_prompt(names(), hits, kHau, kEng, "kalma3 gida kalma7"));
  CHECK(prompt.find("kalma3") < prompt.find("kalma7 gida"));

  Gateway g;
  std::vector<RequestEvent> events;
  std::mutex mu;
  g.set_observer([&](const RequestEvent& e) {
    std::lock_guard lock(mu);
    events.push_back(e);
  });
  BtConfig cfg;
  cfg.mode = BtMode::fewshot_generator;
  cfg.shots = 2;
  const auto in = sentences(6);
  const auto pairs = backtranslate(in, cfg, g, mock_profile("llm", "gen"), names(), kDir, &pool);
  REQUIRE(pairs.size() == 6);
  CHECK(events.size() == 6);
  for (const auto& e : events) {
    CHECK(e.params.temperature == 0.0);
    CHECK(e.params.beam_size == 1);
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(mock::untranslate(pairs[i].hrl_text) == std::optional<std::string>(in[i].text));
  }
  CHECK_THROWS_AS(backtranslate(in, cfg, g, mock_profile("llm", "gen"), names(), kDir, nullptr), PreconditionError);
  CHECK(first_line("\n  first \nsecond") == "first");
}

TEST_CASE("HRL-side decontamination marks pairs") {
  std::vector<ParallelPair> pairs(2);
  pairs[0].hrl_text = "one two three four five six seven eight nine ten";
  pairs[0].lrl_text = "x";
  pairs[1].hrl_text = "clean";
  pairs[1].lrl_text = "y";
  NgramBlocklist bl;
  bl.add_text("One, two three four five six seven eight nine ten.");
  CHECK(decontaminate_hrl(pairs, bl) == 1);
  CHECK(pairs[0].failure == std::optional<std::string>("decontaminated_hrl"));
  CHECK(pairs[1].ok());
}

TEST_CASE("self-improvement with an identity trainer reproduces X_0 and trains from the base") {
  testing_support::TempDir dir("selfloop");
  Gateway g;
  SelfImproveConfig cfg;
  cfg.rounds = 2;
  cfg.trainer_command = "echo {base}";
  cfg.student = mock_profile("student", "student-base");
  cfg.shots = 2;
  cfg.work_dir = dir.path();
  EvalSegmentSet eval{"dev", {{"Good morning.", "Ina kwana."}, {"Thank you.", "Na gode."}}};
  const auto corpus = sentences(15);
  BtConfig mt;
  const ExamplePool pool(backtranslate(corpus, mt, g, mock_profile("mt", "nmt"), names(), kDir), PoolSide::lrl);
  CHECK_THROWS_AS(self_improve(corpus, cfg, g, names(), kDir, eval), PreconditionError);
  const auto states = self_improve(corpus, cfg, g, names(), kDir, eval, &pool);
  REQUIRE(states.size() == 2);
  CHECK(states[0].student_model_ref == "student-base");
  CHECK(states[0].next_model_ref == "student-base");
  CHECK(states[1].student_model_ref == "student-base");
  CHECK(states[0].scores.size() == 2);

  const auto x0 = read_jsonl<ParallelPair>(states[0].pairs_path);
  const auto x1 = read_jsonl<ParallelPair>(states[1].pairs_path);
  REQUIRE(x0.size() == x1.size());
  for (std::size_t i = 0; i < x0.size(); ++i) CHECK(x0[i].hrl_text == x1[i].hrl_text);
  const auto log = read_jsonl<TrainerInvocation>(dir / "trainer_log.jsonl");
  REQUIRE(log.size() == 2);
  for (const auto& inv : log) CHECK(inv.base_model == "student-base");

  // Completed rounds are skipped on a re-run.
  const auto calls = g.call_count();
  const auto again = self_improve(corpus, cfg, g, names(), kDir, eval, &pool);
  CHECK(again.size() == 2);
  CHECK(g.call_count() == calls);

  SelfImproveConfig failing = cfg;
  failing.work_dir = dir / "fail";
  failing.trainer_command = "exit 2";
  CHECK_THROWS_AS(self_improve(corpus, failing, g, names(), kDir, eval, &pool), TrainerError);
  BackendProfile s2s = cfg.student;
  s2s.kind = BackendKind::seq2seq_mt;
  s2s.endpoint_url = "http://x";
  failing.student = s2s;
  CHECK_THROWS_AS(failing.validate(), CapabilityError);
}

TEST_CASE("a sentence is never its own demonstration") {
  std::vector<ParallelPair> pool_pairs;
  for (const auto* lrl : {"ruwa yana sanyi", "ruwa yana zafi", "kasuwa"}) {
    ParallelPair p;
    p.hrl_text = std::string("EN ") + lrl;
    p.lrl_text = lrl;
    p.direction = kDir;
    pool_pairs.push_back(p);
  }
  const ExamplePool pool(pool_pairs, PoolSide::lrl);
  const auto prompt = build_bt_prompt("ruwa yana sanyi", &pool, 2, names(), kDir);
  CHECK(prompt.find("EN ruwa yana sanyi") == std::string::npos);
  CHECK(prompt.find("EN ruwa yana zafi") != std::string::npos);
}

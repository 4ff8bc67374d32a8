#include <doctest.h>

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "synthpar/errors.hpp"
#include "synthpar/metrics.hpp"

using namespace synthpar;
using Corpus = std::vector<std::string>;

// Reference values below were produced with sacreBLEU 2.x
// (BLEU: tokenize='none', smooth_method='exp'; chrF: word_order=2).

TEST_CASE("bleu matches the hand-computed single-sentence value") {
  const Corpus hyp{"the cat sat on the mat"};
  const Corpus ref{"the cat sat on a mat"};
  // p1..p4 = 5/6, 3/5, 2/4, 1/3; product 1/12; BP = 1.
  CHECK(bleu(hyp, ref) == doctest::Approx(100.0 * std::pow(1.0 / 12.0, 0.25)).epsilon(1e-12));
  CHECK(std::abs(bleu(hyp, ref) - 53.7284965911771) < 1e-9);
}

TEST_CASE("bleu matches the reference implementation on a two-segment corpus") {
  const Corpus hyp{"the cat sat on the mat", "a dog ran"};
  const Corpus ref{"the cat sat on a mat", "the dog ran"};
  CHECK(std::abs(bleu(hyp, ref) - 49.33885363281903) < 1e-9);
}

TEST_CASE("bleu exp smoothing and orders without n-grams") {
  // Orders 3 and 4 have no hypothesis n-grams and are left out; order 2 has
  // zero matches and is smoothed to 1/(2*1). Result: sqrt(1/2 * 1/2) = 50.
  CHECK(bleu(Corpus{"the cat"}, Corpus{"the dog"}) == doctest::Approx(50.0).epsilon(1e-12));
  BleuParams none;
  none.smoothing = BleuSmoothing::none;
  CHECK(bleu(Corpus{"the cat"}, Corpus{"the dog"}, none) == 0.0);
}

TEST_CASE("bleu brevity penalty") {
  // Hypothesis is a perfect prefix: all precisions 1, BP = exp(1 - 8/4).
  const Corpus hyp{"a b c d"};
  const Corpus ref{"a b c d e f g h"};
  CHECK(bleu(hyp, ref) == doctest::Approx(100.0 * std::exp(1.0 - 2.0)).epsilon(1e-12));
}

TEST_CASE("chrF++ matches the reference implementation") {
  CHECK(std::abs(chrf_pp(Corpus{"the cat sat on the mat"}, Corpus{"the cat sat on a mat"}) - 72.03039245302905) <
        1e-9);
  CHECK(std::abs(chrf_pp(Corpus{"the cat sat on the mat", "a dog ran"}, Corpus{"the cat sat on a mat", "the dog ran"}) -
                 66.61097582972583) < 1e-9);
  // Exercises splitting punctuation off word edges.
  CHECK(std::abs(chrf_pp(Corpus{"Hello, world!"}, Corpus{"Hello world."}) - 46.53925281333129) < 1e-9);
}

TEST_CASE("metric identities and zero overlap") {
  const Corpus h{"un deux trois quatre", "cinq six"};
  CHECK(bleu(h, h) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(chrf_pp(h, h) == doctest::Approx(100.0).epsilon(1e-12));
  const Corpus a{"aaa bbb ccc"};
  const Corpus b{"xyz uvw"};
  CHECK(bleu(a, b) == 0.0);
  CHECK(chrf_pp(a, b) == 0.0);
}

TEST_CASE("metric input contracts") {
  CHECK_THROWS_AS(bleu(Corpus{"a"}, Corpus{"a", "b"}), ContractError);
  CHECK_THROWS_AS(bleu(Corpus{}, Corpus{}), ContractError);
  BleuParams bad;
  bad.max_order = 0;
  CHECK_THROWS_AS(bleu(Corpus{"a"}, Corpus{"a"}, bad), ContractError);
}

TEST_CASE("additive statistics reproduce the corpus score") {
  const Corpus hyp{"the cat sat on the mat", "a dog ran", "completely different words here"};
  const Corpus ref{"the cat sat on a mat", "the dog ran", "nothing in common at all"};
  const auto m = bleu_metric();
  CHECK(corpus_score(m, hyp, ref) == bleu(hyp, ref));
  const CorpusMetric generic = [](std::span<const std::string> x, std::span<const std::string> y) {
    return bleu(x, y);
  };
  BootstrapParams params{50, 20, 0.05, 7};
  const Corpus other{"the cat sat", "a dog ran fast", "different words"};
  const auto fast = paired_bootstrap(hyp, other, ref, m, params);
  const auto slow = paired_bootstrap(hyp, other, ref, generic, params);
  CHECK(fast.p_value == slow.p_value);
  CHECK(fast.wins_a == slow.wins_a);
  CHECK(fast.wins_b == slow.wins_b);
}

TEST_CASE("paired bootstrap behaviour") {
  Corpus refs, good, bad;
  for (int i = 0; i < 40; ++i) {
    const auto s = "sentence number " + std::to_string(i) + " has several words in it";
    refs.push_back(s);
    good.push_back(s);
    bad.push_back("nothing " + std::to_string(i * 7919) + " matches");
  }
  const BootstrapParams params{300, 500, 0.05, 99};
  const auto same = paired_bootstrap(good, good, refs, bleu_metric(), params);
  CHECK(same.p_value == 1.0);
  CHECK(same.ties == 300);
  const auto dom = paired_bootstrap(good, bad, refs, bleu_metric(), params);
  CHECK(dom.p_value == 0.0);
  CHECK(dom.significant(0.05));
  // Swapping the systems gives the same p (the winner is always tested).
  const auto swapped = paired_bootstrap(bad, good, refs, bleu_metric(), params);
  CHECK(swapped.p_value == dom.p_value);
  CHECK(swapped.wins_b == dom.wins_a);
}

TEST_CASE("paired bootstrap is reproducible and seed-sensitive") {
  synthpar::Rng rng(5);
  const auto lex = oracle::random_lexicon(60, 1);
  Corpus refs, a, b;
  for (int i = 0; i < 80; ++i) {
    refs.push_back(oracle::random_text(lex, 12, rng));
    a.push_back(rng.below(2) ? refs.back() : oracle::random_text(lex, 12, rng));
    b.push_back(rng.below(2) ? refs.back() : oracle::random_text(lex, 12, rng));
  }
  const BootstrapParams p1{300, 500, 0.05, 1};
  const auto r1 = paired_bootstrap(a, b, refs, chrf_metric(), p1);
  const auto r2 = paired_bootstrap(a, b, refs, chrf_metric(), p1);
  CHECK(r1.p_value == r2.p_value);
  CHECK(r1.wins_a == r2.wins_a);
  BootstrapParams p2 = p1;
  p2.seed = 2;
  const auto r3 = paired_bootstrap(a, b, refs, chrf_metric(), p2);
  CHECK(r3.wins_a + r3.wins_b + r3.ties == 300);
}

TEST_CASE("bootstrap parameter validation") {
  const Corpus x{"a b"};
  CHECK_THROWS_AS(paired_bootstrap(x, x, x, bleu_metric(), BootstrapParams{0, 10, 0.05, 1}), ContractError);
  CHECK_THROWS_AS(paired_bootstrap(x, x, x, bleu_metric(), BootstrapParams{10, 10, 1.5, 1}), ContractError);
}

TEST_CASE("vendi score identities against the Jacobi oracle") {
  for (const int n : {1, 2, 7, 40}) {
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, n);
    CHECK(std::abs(vendi_score(ones) - 1.0) < 1e-8);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    CHECK(std::abs(vendi_score(id) - n) < 1e-8);
  }
  // A random cosine-similarity matrix.
  synthpar::Rng rng(3);
  Eigen::MatrixXd emb(12, 5);
  for (int i = 0; i < emb.rows(); ++i) {
    for (int j = 0; j < emb.cols(); ++j) emb(i, j) = rng.uniform() - 0.5;
  }
  Eigen::MatrixXd x = emb;
  for (int i = 0; i < x.rows(); ++i) x.row(i).normalize();
  const Eigen::MatrixXd k = x * x.transpose();
  std::vector<std::vector<double>> kv(12, std::vector<double>(12));
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) kv[i][j] = i == j ? 1.0 : k(i, j);
  }
  CHECK(std::abs(vendi_score_from_embeddings(emb) - oracle::vendi_oracle(kv)) < 1e-8);
}

TEST_CASE("vendi score rejects malformed kernels") {
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(vendi_score(asym), ContractError);
  Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(3, 3) * 2.0;
  CHECK_THROWS_AS(vendi_score(diag), ContractError);
  Eigen::MatrixXd neg = Eigen::MatrixXd::Identity(2, 2);
  neg(0, 1) = neg(1, 0) = 1.5;  // eigenvalue -0.5
  CHECK_THROWS_AS(vendi_score(neg), ContractError);
  CHECK_THROWS_AS(vendi_score(Eigen::MatrixXd(0, 0)), ContractError);
}

TEST_CASE("external scorer protocol") {
  const std::vector<ScoreTriple> triples{{"s1", "h1", "r1"}, {"s\t2", "h2", "r2"}};
  // Prints the number of tab-separated fields per line: the tab inside the
  // second source must have been flattened.
  const auto fields = external_score(triples, {"awk -F'\\t' '{print NF}'", std::nullopt});
  CHECK(fields == std::vector<double>{3, 3});
  CHECK_THROWS_AS(external_score(triples, {"echo 1", std::nullopt}), IntegrationError);
  CHECK_THROWS_AS(external_score(triples, {"awk '{print 30}'", std::make_pair(0.0, 25.0)}), IntegrationError);
  CHECK_THROWS_AS(external_score(triples, {"awk '{print \"x\"}'", std::nullopt}), IntegrationError);
  CHECK_THROWS_AS(external_score(triples, {"exit 4", std::nullopt}), IntegrationError);
}

TEST_CASE("corpus statistics") {
  auto pair = [](std::string hrl, std::string lrl, bool ok = true) {
    ParallelPair p;
    p.hrl_text = std::move(hrl);
    p.lrl_text = std::move(lrl);
    p.direction = Direction(LangCode("eng_Latn"), LangCode("hau_Latn"));
    if (!ok) p.failure = "x";
    return p;
  };
  const std::vector<ParallelPair> pairs{pair("a b c", "x y"), pair("a b c d e", "x y z w"), pair("ignored", "", false)};
  const auto s = corpus_stats(pairs);
  CHECK(s.n_pairs == 2);
  CHECK(s.source_mean_words == 4.0);
  CHECK(s.target_mean_words == 3.0);
  CHECK_FALSE(s.source_mean_tokens.has_value());

  const auto t = corpus_stats(pairs, std::string("awk '{print NF * 2}'"));
  REQUIRE(t.source_mean_tokens.has_value());
  CHECK(*t.source_mean_tokens == 8.0);
  CHECK(*t.target_mean_tokens == 6.0);

  const auto failed = corpus_stats(pairs, std::string("exit 1"));
  CHECK(failed.token_hook_failed);
  CHECK(failed.source_mean_words == 4.0);
}

TEST_CASE("running mean") {
  RunningMean m;
  for (int i = 1; i <= 100; ++i) m.add(i);
  CHECK(m.mean() == doctest::Approx(50.5));
  CHECK(m.count() == 100);
}

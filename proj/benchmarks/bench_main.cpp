#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "oracles.hpp"
#include "synthpar/generation.hpp"
#include "synthpar/metrics.hpp"
#include "synthpar/retrieval.hpp"
#include "synthpar/text.hpp"
#include "synthpar/text_pipeline.hpp"

using namespace synthpar;

namespace {

std::vector<std::string> corpus(std::size_t n, std::size_t len, std::uint64_t seed) {
  synthpar::Rng rng(seed);
  const auto lex = oracle::random_lexicon(5000, seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_text(lex, len, rng));
  return out;
}

void BM_Bm25Build(benchmark::State& state) {
  const auto docs = corpus(static_cast<std::size_t>(state.range(0)), 25, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Bm25Index::build(docs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Bm25Build)->Arg(1000)->Arg(10000);

void BM_Bm25Query(benchmark::State& state) {
  const auto docs = corpus(static_cast<std::size_t>(state.range(0)), 25, 1);
  const auto queries = corpus(256, 20, 2);
  const auto index = Bm25Index::build(docs);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(index.query(queries[i++ % queries.size()], 5));
}
BENCHMARK(BM_Bm25Query)->Arg(1000)->Arg(10000);

void BM_Decontaminate(benchmark::State& state) {
  const auto evals = corpus(1000, 25, 3);
  NgramBlocklist bl;
  for (const auto& e : evals) bl.add_text(e);
  std::vector<SentenceRecord> records;
  for (const auto& s : corpus(static_cast<std::size_t>(state.range(0)), 20, 4)) {
    SentenceRecord r;
    r.paragraph_id = "p";
    r.text = s;
    records.push_back(std::move(r));
  }
  for (auto _ : state) benchmark::DoNotOptimize(decontaminate(records, bl));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Decontaminate)->Arg(5000)->Arg(50000);

void BM_RougePool(benchmark::State& state) {
  const auto paragraphs = corpus(static_cast<std::size_t>(state.range(0)), 80, 5);
  AcceptedPool pool;
  for (std::size_t i = 0; i < paragraphs.size(); ++i) pool.add(std::to_string(i), text::normalize_words(paragraphs[i]));
  const auto probes = corpus(64, 80, 6);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(max_pool_overlap(probes[i++ % probes.size()], pool));
}
BENCHMARK(BM_RougePool)->Arg(1000)->Arg(10000);

void BM_CorpusBleu(benchmark::State& state) {
  const auto hyp = corpus(2000, 20, 7);
  const auto ref = corpus(2000, 20, 8);
  for (auto _ : state) benchmark::DoNotOptimize(bleu(hyp, ref));
}
BENCHMARK(BM_CorpusBleu);

}  // namespace

BENCHMARK_MAIN();

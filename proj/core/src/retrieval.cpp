#include "synthpar/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "synthpar/hashing.hpp"
#include "synthpar/text.hpp"

namespace synthpar {

Bm25Index Bm25Index::build(std::span<const std::string> corpus, Bm25Params params) {
  if (corpus.empty()) throw ContractError("cannot build a BM25 index over an empty corpus");
  if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0) {
    throw ContractError("BM25 parameters out of range (k1 >= 0, 0 <= b <= 1)");
  }
  Bm25Index idx;
  idx.params_ = params;
  std::uint64_t total = 0;
  for (std::uint32_t doc = 0; doc < corpus.size(); ++doc) {
    const auto tokens = text::normalize_words(corpus[doc]);
    idx.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total += tokens.size();
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
      auto [it, inserted] = idx.term_ids_.try_emplace(t, static_cast<std::uint32_t>(idx.terms_.size()));
      if (inserted) {
        idx.terms_.push_back(t);
        idx.postings_.emplace_back();
      }
      ids.push_back(it->second);
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size();) {
      std::size_t j = i;
      while (j < ids.size() && ids[j] == ids[i]) ++j;
      idx.postings_[ids[i]].emplace_back(doc, static_cast<std::uint32_t>(j - i));
      i = j;
    }
  }
  idx.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(corpus.size());
  return idx;
}

double Bm25Index::idf(std::size_t df) const {
  const double n = static_cast<double>(size());
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double Bm25Index::term_score(double idf, std::uint32_t tf, std::uint32_t len) const {
  const double f = static_cast<double>(tf);
  const double norm = avg_doc_length_ > 0.0 ? static_cast<double>(len) / avg_doc_length_ : 0.0;
  return idf * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

std::span<const Bm25Index::Posting> Bm25Index::postings(const std::string& term) const {
  const auto it = term_ids_.find(term);
  if (it == term_ids_.end()) return {};
  return postings_[it->second];
}

std::vector<ScoredDoc> Bm25Index::query(std::string_view text, std::size_t k) const {
  const auto tokens = text::normalize_words(text);
  return query_tokens(tokens, k);
}

std::vector<ScoredDoc> Bm25Index::query_tokens(std::span<const std::string> tokens, std::size_t k) const {
  if (k == 0) throw ContractError("query k must be >= 1");
  std::vector<double> acc(size(), 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<bool> seen(size(), false);
  for (const auto& t : tokens) {
    const auto it = term_ids_.find(t);
    if (it == term_ids_.end()) continue;
    const auto& list = postings_[it->second];
    const double w = idf(list.size());
    for (const auto& [doc, tf] : list) {
      acc[doc] += term_score(w, tf, doc_lengths_[doc]);
      if (!seen[doc]) {
        seen[doc] = true;
        touched.push_back(doc);
      }
    }
  }
  std::vector<ScoredDoc> hits;
  hits.reserve(touched.size());
  for (const auto doc : touched) {
    if (acc[doc] > 0.0) hits.push_back({doc, acc[doc]});
  }
  const auto better = [](const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.doc < b.doc;
  };
  const auto keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
  hits.resize(keep);
  return hits;
}

bool operator==(const Bm25Index& a, const Bm25Index& b) {
  if (a.params_.k1 != b.params_.k1 || a.params_.b != b.params_.b) return false;
  if (a.doc_lengths_ != b.doc_lengths_ || a.terms_.size() != b.terms_.size()) return false;
  for (const auto& [term, id] : a.term_ids_) {
    const auto it = b.term_ids_.find(term);
    if (it == b.term_ids_.end() || a.postings_[id] != b.postings_[it->second]) return false;
  }
  return true;
}

namespace {

constexpr char kIndexMagic[4] = {'S', 'P', 'B', 'M'};
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get(std::istream& in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw ParseError("truncated BM25 index file");
    v |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

void Bm25Index::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NotFoundError("cannot write index " + path.string());
  out.write(kIndexMagic, 4);
  put<std::uint32_t>(out, kIndexVersion);
  put<std::uint64_t>(out, size());
  put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(params_.k1));
  put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(params_.b));
  put<std::uint64_t>(out, fnv1a64(text::kNormalizerSpec));
  for (const auto len : doc_lengths_) put<std::uint32_t>(out, len);

  std::vector<std::uint32_t> order(terms_.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return terms_[x] < terms_[y]; });
  put<std::uint64_t>(out, terms_.size());
  for (const auto id : order) {
    const auto& term = terms_[id];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(term.size()));
    out.write(term.data(), static_cast<std::streamsize>(term.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(postings_[id].size()));
    for (const auto& [doc, tf] : postings_[id]) {
      put<std::uint32_t>(out, doc);
      put<std::uint32_t>(out, tf);
    }
  }
  if (!out) throw Error("failed writing index " + path.string());
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("index not found: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kIndexMagic, 4) != 0) {
    throw ParseError(path.string() + " is not a BM25 index");
  }
  if (get<std::uint32_t>(in) != kIndexVersion) throw ParseError("unsupported BM25 index version");
  Bm25Index idx;
  const auto n = get<std::uint64_t>(in);
  idx.params_.k1 = std::bit_cast<double>(get<std::uint64_t>(in));
  idx.params_.b = std::bit_cast<double>(get<std::uint64_t>(in));
  if (get<std::uint64_t>(in) != fnv1a64(text::kNormalizerSpec)) {
    throw ParseError("BM25 index was built with a different tokenizer");
  }
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    idx.doc_lengths_.push_back(get<std::uint32_t>(in));
    total += idx.doc_lengths_.back();
  }
  idx.avg_doc_length_ = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
  const auto n_terms = get<std::uint64_t>(in);
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    std::string term(get<std::uint32_t>(in), '\0');
    in.read(term.data(), static_cast<std::streamsize>(term.size()));
    const auto count = get<std::uint32_t>(in);
    std::vector<Posting> list;
    list.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto doc = get<std::uint32_t>(in);
      const auto tf = get<std::uint32_t>(in);
      if (doc >= n) throw ParseError("posting references document beyond N");
      list.emplace_back(doc, tf);
    }
    idx.term_ids_.emplace(term, static_cast<std::uint32_t>(idx.terms_.size()));
    idx.terms_.push_back(std::move(term));
    idx.postings_.push_back(std::move(list));
  }
  return idx;
}

PoolSide pool_side_from_string(std::string_view s) {
  if (s == "hrl") return PoolSide::hrl;
  if (s == "lrl") return PoolSide::lrl;
  throw ConfigError("pool side must be 'hrl' or 'lrl', got '" + std::string(s) + "'");
}

namespace {

std::vector<std::string> side_texts(const std::vector<ParallelPair>& pairs, PoolSide side) {
  std::vector<std::string> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(side == PoolSide::hrl ? p.hrl_text : p.lrl_text);
  return out;
}

std::vector<ParallelPair> usable(std::vector<ParallelPair> pairs) {
  std::erase_if(pairs, [](const ParallelPair& p) { return !p.ok(); });
  return pairs;
}

}  // namespace

ExamplePool::ExamplePool(std::vector<ParallelPair> pairs, PoolSide side, Bm25Params params)
    : pairs_(usable(std::move(pairs))), side_(side), index_(Bm25Index::build(side_texts(pairs_, side), params)) {}

std::vector<ParallelPair> ExamplePool::select(std::string_view query, std::size_t k) const {
  std::vector<ParallelPair> out;
  for (const auto& hit : index_.query(query, k)) out.push_back(pairs_[hit.doc]);
  return out;
}

}  // namespace synthpar

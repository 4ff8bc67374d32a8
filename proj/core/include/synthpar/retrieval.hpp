#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "synthpar/corpus.hpp"

namespace synthpar {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

struct ScoredDoc {
  std::uint32_t doc = 0;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Okapi BM25 over documents tokenized with the shared word normalizer.
///   idf(t)     = ln(1 + (N - df + 0.5) / (df + 0.5))
///   score(q,d) = sum over query tokens t (with repetition) of
///                idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avglen))
class Bm25Index {
 public:
  using Posting = std::pair<std::uint32_t, std::uint32_t>;  // (doc, tf)

  static Bm25Index build(std::span<const std::string> corpus, Bm25Params params = {});

  /// Top-k documents with positive score, highest first, ties by ascending
  /// doc id. A query with no indexed term returns an empty list.
  std::vector<ScoredDoc> query(std::string_view text, std::size_t k) const;
  std::vector<ScoredDoc> query_tokens(std::span<const std::string> tokens, std::size_t k) const;

  std::size_t size() const { return doc_lengths_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_.at(doc); }
  const Bm25Params& params() const { return params_; }
  std::size_t vocabulary_size() const { return terms_.size(); }

  /// Postings of `term` (normalized form), empty when absent.
  std::span<const Posting> postings(const std::string& term) const;
  std::size_t document_frequency(const std::string& term) const { return postings(term).size(); }
  double idf(std::size_t df) const;

  void save(const std::filesystem::path& path) const;
  static Bm25Index load(const std::filesystem::path& path);

  friend bool operator==(const Bm25Index& a, const Bm25Index& b);

 private:
  double term_score(double idf, std::uint32_t tf, std::uint32_t len) const;

  Bm25Params params_;
  std::unordered_map<std::string, std::uint32_t> term_ids_;
  std::vector<std::string> terms_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
};

enum class PoolSide { hrl, lrl };

PoolSide pool_side_from_string(std::string_view s);

/// Parallel pairs indexed on one side for few-shot example selection.
class ExamplePool {
 public:
  ExamplePool(std::vector<ParallelPair> pairs, PoolSide side, Bm25Params params = {});

  /// Up to k pairs in ranked order.
  std::vector<ParallelPair> select(std::string_view query, std::size_t k) const;
  std::vector<ScoredDoc> rank(std::string_view query, std::size_t k) const { return index_.query(query, k); }

  const std::vector<ParallelPair>& pairs() const { return pairs_; }
  const Bm25Index& index() const { return index_; }
  PoolSide side() const { return side_; }

 private:
  std::vector<ParallelPair> pairs_;
  PoolSide side_;
  Bm25Index index_;
};

}  // namespace synthpar

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "synthpar/corpus.hpp"

namespace synthpar {

// ---- Corpus metrics -------------------------------------------------------

enum class BleuSmoothing { exp, none };

struct BleuParams {
  int max_order = 4;
  BleuSmoothing smoothing = BleuSmoothing::exp;

  void validate() const;
};

struct ChrfParams {
  int char_order = 6;
  int word_order = 2;
  double beta = 2.0;
  bool whitespace_in_chars = false;

  void validate() const;
};

/// A corpus metric expressed through additive per-segment statistics: the
/// corpus score is score(sum of segment stats). BLEU and chrF++ both have
/// this form, which lets bootstrap resampling reuse one tokenization pass.
struct AdditiveMetric {
  std::string name;
  std::function<std::vector<double>(std::string_view hyp, std::string_view ref)> segment_stats;
  std::function<double(std::span<const double> summed)> score;
};

AdditiveMetric bleu_metric(BleuParams params = {});
AdditiveMetric chrf_metric(ChrfParams params = {});

/// Corpus BLEU on lowercased, punctuation-split tokens: geometric mean of
/// clipped n-gram precisions times exp(min(0, 1 - ref_len/hyp_len)). Zero
/// unigram matches give 0; with exp smoothing each further zero-match order
/// uses 1/(2^k * total). Orders with no hypothesis n-grams are left out.
double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
            BleuParams params = {});

/// chrF++: F-beta over character n-gram (whitespace removed) and word
/// n-gram precision/recall averaged across orders present on both sides.
double chrf_pp(std::span<const std::string> hypotheses, std::span<const std::string> references,
               ChrfParams params = {});

double corpus_score(const AdditiveMetric& metric, std::span<const std::string> hypotheses,
                    std::span<const std::string> references);

// ---- Significance ---------------------------------------------------------

struct BootstrapParams {
  int n_samples = 300;
  int sample_size = 500;
  double alpha = 0.05;
  std::uint64_t seed = 12345;

  void validate() const;
};

struct BootstrapResult {
  double p_value = 1.0;
  double score_a = 0.0;
  double score_b = 0.0;
  int wins_a = 0;  // samples where A scored strictly higher
  int wins_b = 0;
  int ties = 0;

  bool significant(double alpha) const { return p_value < alpha; }
};

using CorpusMetric =
    std::function<double(std::span<const std::string> hyps, std::span<const std::string> refs)>;

/// Paired bootstrap resampling. Each sample draws sample_size segment
/// indices with replacement (per-sample seed derived from seed and sample
/// index) and rescores both systems. p is the fraction of samples where the
/// full-corpus winner fails to score strictly higher; equal full-corpus
/// scores give p = 1.
BootstrapResult paired_bootstrap(std::span<const std::string> hyps_a, std::span<const std::string> hyps_b,
                                 std::span<const std::string> refs, const AdditiveMetric& metric,
                                 const BootstrapParams& params);
BootstrapResult paired_bootstrap(std::span<const std::string> hyps_a, std::span<const std::string> hyps_b,
                                 std::span<const std::string> refs, const CorpusMetric& metric,
                                 const BootstrapParams& params);

// ---- Corpus statistics ----------------------------------------------------

/// Incremental mean; numerically stable for long streams.
class RunningMean {
 public:
  void add(double x) {
    ++n_;
    mean_ += (x - mean_) / static_cast<double>(n_);
  }
  double mean() const { return mean_; }
  std::uint64_t count() const { return n_; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
};

struct CorpusStats {
  std::size_t n_pairs = 0;
  double source_mean_words = 0.0;  // HRL side
  double target_mean_words = 0.0;  // LRL side
  std::optional<double> source_mean_tokens;
  std::optional<double> target_mean_tokens;
  bool token_hook_failed = false;
  std::string token_hook_error;
};

void to_json(nlohmann::json& j, const CorpusStats& s);

/// Mean whitespace-word counts per side over successful pairs; subword
/// means when `token_counter_hook` (lines in, one count per line out) is set.
CorpusStats corpus_stats(std::span<const ParallelPair> pairs,
                         const std::optional<std::string>& token_counter_hook = std::nullopt);

// ---- Diversity ------------------------------------------------------------

/// exp(-sum lambda_i ln lambda_i) over the eigenvalues of K/n. K must be
/// symmetric with unit diagonal and positive semidefinite (tolerance 1e-8).
double vendi_score(const Eigen::MatrixXd& similarity);

/// Vendi score with K = cosine similarities of the embedding rows.
double vendi_score_from_embeddings(const Eigen::MatrixXd& embeddings);

// ---- External neural-metric hook ------------------------------------------

struct ScoreTriple {
  std::string source;
  std::string hypothesis;
  std::string reference;
};

struct ExternalScorer {
  std::string command;
  std::optional<std::pair<double, double>> range;
};

/// Streams "source<TAB>hypothesis<TAB>reference" lines to the hook and
/// parses one decimal per output line, in input order.
std::vector<double> external_score(std::span<const ScoreTriple> triples, const ExternalScorer& scorer);

}  // namespace synthpar

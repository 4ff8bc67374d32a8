#include "synthpar/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>

#include "synthpar/hashing.hpp"
#include "synthpar/hooks.hpp"
#include "synthpar/rng.hpp"
#include "synthpar/text.hpp"

namespace synthpar {

namespace {

template <typename Token>
std::map<std::vector<Token>, std::uint64_t> count_ngrams(const std::vector<Token>& tokens, std::size_t n) {
  std::map<std::vector<Token>, std::uint64_t> out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<Token>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                             tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

/// (hyp total, ref total, clipped matches) for one order.
template <typename Token>
std::array<std::uint64_t, 3> match_stats(const std::vector<Token>& hyp, const std::vector<Token>& ref,
                                         std::size_t n) {
  const auto h = count_ngrams(hyp, n);
  const auto r = count_ngrams(ref, n);
  std::array<std::uint64_t, 3> s{0, 0, 0};
  for (const auto& [g, c] : h) {
    s[0] += c;
    if (const auto it = r.find(g); it != r.end()) s[2] += std::min(c, it->second);
  }
  for (const auto& [g, c] : r) s[1] += c;
  return s;
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ContractError("hypotheses and references differ in length (" + std::to_string(a) + " vs " +
                        std::to_string(b) + ")");
  }
}

// sacreBLEU's chrF word splitting: peel one leading or trailing ASCII
// punctuation mark off each whitespace token.
std::vector<std::string> chrf_words(std::string_view s) {
  static constexpr std::string_view kPuncts = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  std::vector<std::string> out;
  for (auto& w : text::split_whitespace(s)) {
    const auto cps = text::decode_utf8(w);
    const auto is_punct = [&](char32_t c) { return c < 128 && kPuncts.find(static_cast<char>(c)) != std::string_view::npos; };
    if (cps.size() == 1) {
      out.push_back(w);
    } else if (is_punct(cps.back())) {
      out.push_back(text::encode_utf8(std::u32string_view(cps.data(), cps.size() - 1)));
      out.push_back(text::encode_utf8(std::u32string_view(&cps.back(), 1)));
    } else if (is_punct(cps.front())) {
      out.push_back(text::encode_utf8(std::u32string_view(cps.data(), 1)));
      out.push_back(text::encode_utf8(std::u32string_view(cps.data() + 1, cps.size() - 1)));
    } else {
      out.push_back(w);
    }
  }
  return out;
}

std::vector<char32_t> chrf_chars(std::string_view s, bool keep_whitespace) {
  auto cps = text::decode_utf8(s);
  if (!keep_whitespace) std::erase_if(cps, [](char32_t c) { return text::is_whitespace(c); });
  return cps;
}

}  // namespace

void BleuParams::validate() const {
  if (max_order < 1) throw ContractError("BLEU max_order must be >= 1");
}

void ChrfParams::validate() const {
  if (char_order < 1) throw ContractError("chrF char order must be >= 1");
  if (word_order < 0) throw ContractError("chrF word order must be >= 0");
  if (beta <= 0.0) throw ContractError("chrF beta must be positive");
}

AdditiveMetric bleu_metric(BleuParams params) {
  params.validate();
  AdditiveMetric m;
  m.name = "bleu";
  // Layout: hyp_len, ref_len, matches[1..N], totals[1..N].
  m.segment_stats = [params](std::string_view hyp, std::string_view ref) {
    const auto h = text::metric_tokens(hyp);
    const auto r = text::metric_tokens(ref);
    const auto n = static_cast<std::size_t>(params.max_order);
    std::vector<double> s(2 + 2 * n, 0.0);
    s[0] = static_cast<double>(h.size());
    s[1] = static_cast<double>(r.size());
    for (std::size_t order = 1; order <= n; ++order) {
      const auto st = match_stats(h, r, order);
      s[2 + order - 1] = static_cast<double>(st[2]);
      s[2 + n + order - 1] = static_cast<double>(st[0]);
    }
    return s;
  };
  m.score = [params](std::span<const double> s) {
    const auto n = static_cast<std::size_t>(params.max_order);
    const double hyp_len = s[0];
    const double ref_len = s[1];
    if (hyp_len <= 0.0) return 0.0;
    double log_sum = 0.0;
    int used = 0;
    double smooth = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double matches = s[2 + k];
      const double total = s[2 + n + k];
      if (total <= 0.0) continue;
      double p = 0.0;
      if (matches > 0.0) {
        p = matches / total;
      } else if (k == 0 || params.smoothing == BleuSmoothing::none) {
        return 0.0;
      } else {
        smooth *= 2.0;
        p = 1.0 / (smooth * total);
      }
      log_sum += std::log(p);
      ++used;
    }
    if (used == 0) return 0.0;
    const double bp = std::exp(std::min(0.0, 1.0 - ref_len / hyp_len));
    return 100.0 * bp * std::exp(log_sum / used);
  };
  return m;
}

AdditiveMetric chrf_metric(ChrfParams params) {
  params.validate();
  AdditiveMetric m;
  m.name = "chrf++";
  // Layout: per order (chars first, then words): hyp, ref, match.
  m.segment_stats = [params](std::string_view hyp, std::string_view ref) {
    std::vector<double> s;
    s.reserve(3 * static_cast<std::size_t>(params.char_order + params.word_order));
    const auto hc = chrf_chars(hyp, params.whitespace_in_chars);
    const auto rc = chrf_chars(ref, params.whitespace_in_chars);
    for (int n = 1; n <= params.char_order; ++n) {
      const auto st = match_stats(hc, rc, static_cast<std::size_t>(n));
      s.insert(s.end(), {static_cast<double>(st[0]), static_cast<double>(st[1]), static_cast<double>(st[2])});
    }
    const auto hw = chrf_words(hyp);
    const auto rw = chrf_words(ref);
    for (int n = 1; n <= params.word_order; ++n) {
      const auto st = match_stats(hw, rw, static_cast<std::size_t>(n));
      s.insert(s.end(), {static_cast<double>(st[0]), static_cast<double>(st[1]), static_cast<double>(st[2])});
    }
    return s;
  };
  m.score = [params](std::span<const double> s) {
    const double factor = params.beta * params.beta;
    double avg_prec = 0.0;
    double avg_rec = 0.0;
    int effective = 0;
    for (std::size_t i = 0; i + 2 < s.size(); i += 3) {
      const double n_hyp = s[i];
      const double n_ref = s[i + 1];
      const double n_match = s[i + 2];
      if (n_hyp > 0.0 && n_ref > 0.0) {
        avg_prec += n_match / n_hyp;
        avg_rec += n_match / n_ref;
        ++effective;
      }
    }
    if (effective == 0) return 0.0;
    avg_prec /= effective;
    avg_rec /= effective;
    if (avg_prec + avg_rec <= 0.0) return 0.0;
    return 100.0 * (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec);
  };
  return m;
}

double corpus_score(const AdditiveMetric& metric, std::span<const std::string> hypotheses,
                    std::span<const std::string> references) {
  check_lengths(hypotheses.size(), references.size());
  if (hypotheses.empty()) throw ContractError("cannot score an empty corpus");
  std::vector<double> sum;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto s = metric.segment_stats(hypotheses[i], references[i]);
    if (sum.empty()) sum.assign(s.size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) sum[k] += s[k];
  }
  return metric.score(sum);
}

double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
            BleuParams params) {
  return corpus_score(bleu_metric(params), hypotheses, references);
}

double chrf_pp(std::span<const std::string> hypotheses, std::span<const std::string> references,
               ChrfParams params) {
  return corpus_score(chrf_metric(params), hypotheses, references);
}

// ---- Significance ---------------------------------------------------------

void BootstrapParams::validate() const {
  if (n_samples < 1) throw ContractError("bootstrap needs at least one sample");
  if (sample_size < 1) throw ContractError("bootstrap sample size must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("alpha must be in (0, 1)");
}

namespace {

/// score_pair(indices) -> (score A, score B) on the resampled segments.
template <typename ScorePair>
BootstrapResult run_bootstrap(std::size_t n, const BootstrapParams& params, double full_a, double full_b,
                              ScorePair&& score_pair) {
  params.validate();
  BootstrapResult r;
  r.score_a = full_a;
  r.score_b = full_b;
  std::vector<std::size_t> idx(static_cast<std::size_t>(params.sample_size));
  for (int s = 0; s < params.n_samples; ++s) {
    Rng rng(derive_seed(params.seed, "bootstrap", static_cast<std::uint64_t>(s)));
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    const auto [a, b] = score_pair(idx);
    if (a > b) {
      ++r.wins_a;
    } else if (b > a) {
      ++r.wins_b;
    } else {
      ++r.ties;
    }
  }
  if (full_a == full_b) {
    r.p_value = 1.0;
  } else {
    const int winner_wins = full_a > full_b ? r.wins_a : r.wins_b;
    r.p_value = static_cast<double>(params.n_samples - winner_wins) / params.n_samples;
  }
  return r;
}

void check_bootstrap_inputs(std::size_t a, std::size_t b, std::size_t refs) {
  check_lengths(a, refs);
  check_lengths(b, refs);
  if (refs == 0) throw ContractError("cannot bootstrap an empty corpus");
}

}  // namespace

BootstrapResult paired_bootstrap(std::span<const std::string> hyps_a, std::span<const std::string> hyps_b,
                                 std::span<const std::string> refs, const AdditiveMetric& metric,
                                 const BootstrapParams& params) {
  check_bootstrap_inputs(hyps_a.size(), hyps_b.size(), refs.size());
  std::vector<std::vector<double>> stats_a, stats_b;
  stats_a.reserve(refs.size());
  stats_b.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    stats_a.push_back(metric.segment_stats(hyps_a[i], refs[i]));
    stats_b.push_back(metric.segment_stats(hyps_b[i], refs[i]));
  }
  const auto sum_over = [](const std::vector<std::vector<double>>& stats, auto&& indices) {
    std::vector<double> sum(stats.front().size(), 0.0);
    for (const auto i : indices) {
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += stats[i][k];
    }
    return sum;
  };
  std::vector<std::size_t> all(refs.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double full_a = metric.score(sum_over(stats_a, all));
  const double full_b = metric.score(sum_over(stats_b, all));
  return run_bootstrap(refs.size(), params, full_a, full_b, [&](const std::vector<std::size_t>& idx) {
    return std::make_pair(metric.score(sum_over(stats_a, idx)), metric.score(sum_over(stats_b, idx)));
  });
}

BootstrapResult paired_bootstrap(std::span<const std::string> hyps_a, std::span<const std::string> hyps_b,
                                 std::span<const std::string> refs, const CorpusMetric& metric,
                                 const BootstrapParams& params) {
  check_bootstrap_inputs(hyps_a.size(), hyps_b.size(), refs.size());
  const double full_a = metric(hyps_a, refs);
  const double full_b = metric(hyps_b, refs);
  std::vector<std::string> sa, sb, sr;
  return run_bootstrap(refs.size(), params, full_a, full_b, [&](const std::vector<std::size_t>& idx) {
    sa.clear();
    sb.clear();
    sr.clear();
    for (const auto i : idx) {
      sa.push_back(hyps_a[i]);
      sb.push_back(hyps_b[i]);
      sr.push_back(refs[i]);
    }
    return std::make_pair(metric(sa, sr), metric(sb, sr));
  });
}

// ---- Corpus statistics ----------------------------------------------------

void to_json(nlohmann::json& j, const CorpusStats& s) {
  j = nlohmann::json{{"n_pairs", s.n_pairs},
                     {"source_mean_words", s.source_mean_words},
                     {"target_mean_words", s.target_mean_words},
                     {"token_hook_failed", s.token_hook_failed}};
  j["source_mean_tokens"] = s.source_mean_tokens ? nlohmann::json(*s.source_mean_tokens) : nlohmann::json(nullptr);
  j["target_mean_tokens"] = s.target_mean_tokens ? nlohmann::json(*s.target_mean_tokens) : nlohmann::json(nullptr);
  if (s.token_hook_failed) j["token_hook_error"] = s.token_hook_error;
}

namespace {

double hook_mean_tokens(const std::string& command, const std::vector<std::string>& lines) {
  const auto result = run_line_hook(command, lines);
  if (result.exit_code != 0) {
    throw IntegrationError("token counter exited with status " + std::to_string(result.exit_code));
  }
  if (result.lines.size() != lines.size()) {
    throw IntegrationError("token counter returned " + std::to_string(result.lines.size()) + " counts for " +
                           std::to_string(lines.size()) + " lines");
  }
  RunningMean mean;
  for (const auto& l : result.lines) {
    const auto trimmed = text::trim(l);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
    if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size()) {
      throw IntegrationError("token counter printed a non-number: '" + l + "'");
    }
    mean.add(v);
  }
  return mean.mean();
}

}  // namespace

CorpusStats corpus_stats(std::span<const ParallelPair> pairs, const std::optional<std::string>& token_counter_hook) {
  CorpusStats s;
  RunningMean src, tgt;
  std::vector<std::string> src_lines, tgt_lines;
  for (const auto& p : pairs) {
    if (!p.ok()) continue;
    src.add(static_cast<double>(text::split_whitespace(p.hrl_text).size()));
    tgt.add(static_cast<double>(text::split_whitespace(p.lrl_text).size()));
    if (token_counter_hook) {
      src_lines.push_back(protocol_field(p.hrl_text));
      tgt_lines.push_back(protocol_field(p.lrl_text));
    }
  }
  if (src.count() == 0) throw ContractError("corpus statistics need at least one successful pair");
  s.n_pairs = src.count();
  s.source_mean_words = src.mean();
  s.target_mean_words = tgt.mean();
  if (token_counter_hook) {
    try {
      s.source_mean_tokens = hook_mean_tokens(*token_counter_hook, src_lines);
      s.target_mean_tokens = hook_mean_tokens(*token_counter_hook, tgt_lines);
    } catch (const Error& e) {
      s.source_mean_tokens.reset();
      s.target_mean_tokens.reset();
      s.token_hook_failed = true;
      s.token_hook_error = e.what();
    }
  }
  return s;
}

// ---- Diversity ------------------------------------------------------------

double vendi_score(const Eigen::MatrixXd& k) {
  constexpr double kTol = 1e-8;
  const auto n = k.rows();
  if (n == 0 || k.cols() != n) throw ContractError("similarity matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(k(i, i) - 1.0) > kTol) throw ContractError("similarity matrix needs a unit diagonal");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(k(i, j) - k(j, i)) > kTol) throw ContractError("similarity matrix is not symmetric");
    }
  }
  const Eigen::MatrixXd scaled = k / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scaled, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw ContractError("eigendecomposition failed");
  const auto& lambda = solver.eigenvalues();
  if (lambda.minCoeff() * static_cast<double>(n) < -kTol) {
    throw ContractError("similarity matrix is not positive semidefinite");
  }
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double l = lambda(i);
    if (l > 0.0) entropy -= l * std::log(l);
  }
  return std::exp(entropy);
}

double vendi_score_from_embeddings(const Eigen::MatrixXd& embeddings) {
  if (embeddings.rows() == 0) throw ContractError("no embeddings supplied");
  Eigen::MatrixXd x = embeddings;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (norm == 0.0) throw ContractError("embedding row " + std::to_string(i) + " has zero norm");
    x.row(i) /= norm;
  }
  Eigen::MatrixXd k = x * x.transpose();
  k.diagonal().setOnes();
  k = 0.5 * (k + k.transpose()).eval();
  return vendi_score(k);
}

// ---- External neural-metric hook ------------------------------------------

std::vector<double> external_score(std::span<const ScoreTriple> triples, const ExternalScorer& scorer) {
  if (scorer.command.empty()) throw ConfigError("no external scorer command configured");
  std::vector<std::string> lines;
  lines.reserve(triples.size());
  for (const auto& t : triples) {
    lines.push_back(protocol_field(t.source) + "\t" + protocol_field(t.hypothesis) + "\t" +
                    protocol_field(t.reference));
  }
  const auto result = run_line_hook(scorer.command, lines);
  if (result.exit_code != 0) {
    throw IntegrationError("scorer exited with status " + std::to_string(result.exit_code));
  }
  if (result.lines.size() != triples.size()) {
    throw IntegrationError("scorer returned " + std::to_string(result.lines.size()) + " scores for " +
                           std::to_string(triples.size()) + " segments");
  }
  std::vector<double> out;
  out.reserve(triples.size());
  for (const auto& l : result.lines) {
    const auto trimmed = text::trim(l);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
    if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size()) {
      throw IntegrationError("scorer printed a non-number: '" + l + "'");
    }
    if (scorer.range && (v < scorer.range->first || v > scorer.range->second)) {
      throw IntegrationError("score " + trimmed + " outside the declared range");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace synthpar

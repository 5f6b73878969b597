// Reference-based GEC metrics: M2-style F-beta over span edits, GLEU without
// tuning, and the difficulty-weighted GoToScorer.
//
// Corpus-level edit metrics are micro-averaged: counts are summed over
// sentences before a single F-beta.

#ifndef GECMETA_METRICS_H_
#define GECMETA_METRICS_H_

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "gecmeta/align.h"
#include "gecmeta/corpus.h"

namespace gecmeta {

struct MatchCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn_ = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn_ += o.fn_;
    return *this;
  }
};

// Real-valued counts; GoToScorer weights make tp/fn fractional.
struct WeightedCounts {
  double tp = 0;
  double fp = 0;
  double fn_ = 0;

  WeightedCounts& operator+=(const WeightedCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn_ += o.fn_;
    return *this;
  }
};

struct MetricConfig {
  double beta = 0.5;
  int gleu_max_n = 4;
  int gleu_iterations = 500;
  uint64_t rng_seed = 0;
};

// Validates MetricConfig (beta > 0, max_n >= 1, iterations >= 1).
void validate(const MetricConfig& cfg);

// F-beta. 1.0 when there was nothing to correct and nothing was proposed
// (tp = fp = fn = 0); 0.0 when tp = 0 otherwise.
double f_beta(double tp, double fp, double fn, double beta);
inline double f_beta(const MatchCounts& c, double beta) {
  return f_beta(static_cast<double>(c.tp), static_cast<double>(c.fp), static_cast<double>(c.fn_),
                beta);
}
inline double f_beta(const WeightedCounts& c, double beta) { return f_beta(c.tp, c.fp, c.fn_, beta); }

struct AnnotatorMatch {
  int annotator_id = 0;
  MatchCounts counts;
};

// Exact (start, end, replacement) matching against each annotator; returns
// the annotator with the highest sentence F-beta, lower id on ties.
AnnotatorMatch m2_counts(const std::vector<Edit>& hyp_edits,
                         const std::vector<GoldAnnotation>& annotations, double beta);

// ------------------------------------------------------------------ GLEU

// Per-reference sufficient statistics of one sentence:
// [hyp_len, ref_len, num_1, den_1, ..., num_N, den_N].
std::vector<double> gleu_stats(const Tokens& source, const Tokens& hypothesis,
                               const Tokens& reference, int max_n);
// Score of summed statistics: BP * exp(mean_n log(num_n / den_n)), 0 if any
// precision is 0 or undefined.
double gleu_from_stats(const std::vector<double>& stats, int max_n);

double gleu_sentence(const Tokens& source, const Tokens& hypothesis,
                     const std::vector<Tokens>& references, const MetricConfig& cfg);

// Corpus GLEU per system over `sentence_ids` (all corpus sentences when
// empty). References are keyed by sentence id.
std::map<std::string, double> gleu_corpus(
    const std::vector<SystemOutput>& outputs, const std::vector<ContextedSentence>& corpus,
    const std::map<std::string, std::vector<Tokens>>& references, const MetricConfig& cfg,
    const std::vector<std::string>& sentence_ids = {});

// ------------------------------------------------------------ GoToScorer

using GoldEditKey = std::tuple<std::string, size_t, size_t, Tokens>;

struct DifficultyTable {
  std::map<GoldEditKey, double> weight;
  size_t total_systems = 0;

  double at(const std::string& sentence_id, const Edit& e) const;
};

// all_system_edits: system -> sentence id -> extracted edits.
DifficultyTable build_difficulty_table(
    const std::map<std::string, std::map<std::string, std::vector<Edit>>>& all_system_edits,
    const std::vector<GoldAnnotation>& annotations);

struct WeightedMatch {
  int annotator_id = 0;
  WeightedCounts counts;
};

WeightedMatch gotoscorer_counts(const std::string& sentence_id, const std::vector<Edit>& hyp_edits,
                                const std::vector<GoldAnnotation>& annotations,
                                const DifficultyTable& table, double beta);
double gotoscorer(const std::string& sentence_id, const std::vector<Edit>& hyp_edits,
                  const std::vector<GoldAnnotation>& annotations, const DifficultyTable& table,
                  double beta);

// Mean of sentence scores; throws DataError on an empty map.
double system_score_from_sentences(const std::map<std::string, double>& sentence_scores);

// ------------------------------------------------------------ batch API

// Sentence-level and corpus-level scores of one metric for one system.
struct SystemScores {
  std::map<std::string, double> sentence;  // sentence id -> score
  double corpus = 0;
};

// system -> sentence id -> edits extracted against the source.
std::map<std::string, std::map<std::string, std::vector<Edit>>> extract_all_edits(
    const std::vector<SystemOutput>& outputs, const std::vector<ContextedSentence>& corpus);

// M2 F-beta: sentence F per sentence, corpus F from summed counts.
std::map<std::string, SystemScores> score_m2(
    const std::map<std::string, std::map<std::string, std::vector<Edit>>>& edits,
    const std::map<std::string, std::vector<GoldAnnotation>>& gold, double beta,
    const std::vector<std::string>& sentence_ids);

std::map<std::string, SystemScores> score_gotoscorer(
    const std::map<std::string, std::map<std::string, std::vector<Edit>>>& edits,
    const std::map<std::string, std::vector<GoldAnnotation>>& gold, const DifficultyTable& table,
    double beta, const std::vector<std::string>& sentence_ids);

std::map<std::string, SystemScores> score_gleu(
    const std::vector<SystemOutput>& outputs, const std::vector<ContextedSentence>& corpus,
    const std::map<std::string, std::vector<Tokens>>& references, const MetricConfig& cfg,
    const std::vector<std::string>& sentence_ids);

}  // namespace gecmeta

#endif  // GECMETA_METRICS_H_

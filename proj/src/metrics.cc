#include "gecmeta/metrics.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

namespace gecmeta {

void validate(const MetricConfig& cfg) {
  if (!(cfg.beta > 0)) throw UsageError("metric beta must be > 0");
  if (cfg.gleu_max_n < 1) throw UsageError("gleu_max_n must be >= 1");
  if (cfg.gleu_iterations < 1) throw UsageError("gleu_iterations must be >= 1");
}

double f_beta(double tp, double fp, double fn, double beta) {
  if (tp == 0 && fp == 0 && fn == 0) return 1.0;
  if (tp <= 0) return 0.0;
  const double p = tp / (tp + fp);
  const double r = tp / (tp + fn);
  const double b2 = beta * beta;
  return (1 + b2) * p * r / (b2 * p + r);
}

namespace {

bool contains_edit(const std::vector<Edit>& edits, const Edit& e) {
  return std::any_of(edits.begin(), edits.end(), [&](const Edit& x) { return same_edit(x, e); });
}

}  // namespace

AnnotatorMatch m2_counts(const std::vector<Edit>& hyp_edits,
                         const std::vector<GoldAnnotation>& annotations, double beta) {
  if (annotations.empty()) throw DataError("m2_counts: no gold annotations for sentence");
  AnnotatorMatch best;
  double best_f = -1;
  for (const auto& ann : annotations) {
    MatchCounts c;
    for (const Edit& g : ann.edits) {
      if (contains_edit(hyp_edits, g)) ++c.tp;
    }
    c.fp = static_cast<int64_t>(hyp_edits.size()) - c.tp;
    c.fn_ = static_cast<int64_t>(ann.edits.size()) - c.tp;
    const double f = f_beta(c, beta);
    if (f > best_f || (f == best_f && ann.annotator_id < best.annotator_id)) {
      best_f = f;
      best = {ann.annotator_id, c};
    }
  }
  return best;
}

// ------------------------------------------------------------------ GLEU

namespace {

using NgramCounts = std::unordered_map<std::string, int64_t>;

NgramCounts count_ngrams(const Tokens& tokens, int n) {
  NgramCounts out;
  const size_t len = static_cast<size_t>(n);
  if (tokens.size() < len) return out;
  for (size_t i = 0; i + len <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (size_t k = 1; k < len; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++out[key];
  }
  return out;
}

int64_t lookup(const NgramCounts& counts, const std::string& key) {
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

}  // namespace

std::vector<double> gleu_stats(const Tokens& source, const Tokens& hypothesis,
                               const Tokens& reference, int max_n) {
  std::vector<double> stats(2 + 2 * static_cast<size_t>(max_n), 0.0);
  stats[0] = static_cast<double>(hypothesis.size());
  stats[1] = static_cast<double>(reference.size());
  for (int n = 1; n <= max_n; ++n) {
    const NgramCounts h = count_ngrams(hypothesis, n);
    const NgramCounts r = count_ngrams(reference, n);
    const NgramCounts s = count_ngrams(source, n);
    int64_t matched = 0;
    int64_t penalty = 0;
    for (const auto& [g, ch] : h) {
      const int64_t hr = std::min(ch, lookup(r, g));
      const int64_t hs = std::min(ch, lookup(s, g));
      matched += hr;
      penalty += std::max<int64_t>(0, hs - hr);
    }
    const int64_t den = std::max<int64_t>(0, static_cast<int64_t>(hypothesis.size()) + 1 - n);
    stats[2 * n] = static_cast<double>(std::max<int64_t>(0, matched - penalty));
    stats[2 * n + 1] = static_cast<double>(den);
  }
  return stats;
}

double gleu_from_stats(const std::vector<double>& stats, int max_n) {
  const double hyp_len = stats[0];
  const double ref_len = stats[1];
  if (hyp_len <= 0) return 0.0;
  double log_sum = 0;
  for (int n = 1; n <= max_n; ++n) {
    const double num = stats[2 * n];
    const double den = stats[2 * n + 1];
    if (num <= 0 || den <= 0) return 0.0;
    log_sum += std::log(num / den);
  }
  const double bp = std::min(1.0, std::exp(1.0 - ref_len / hyp_len));
  return bp * std::exp(log_sum / max_n);
}

namespace {

// Shared engine for sentence and corpus GLEU. `per_sentence_refs[j][k]` are
// the statistics of sentence j against its k-th reference. Every iteration
// draws one reference per sentence (in order) from a generator seeded with
// cfg.rng_seed, so all systems see the same reference sequence. Iterations
// with the same draw vector are grouped, and the mean is the draw-frequency
// weighted sum; a single possible draw therefore reproduces its score exactly.
double gleu_sampled(const std::vector<std::vector<std::vector<double>>>& per_sentence_refs,
                    const MetricConfig& cfg) {
  std::mt19937_64 rng(cfg.rng_seed);
  std::map<std::vector<uint32_t>, int64_t> draws;
  std::vector<uint32_t> pick(per_sentence_refs.size());
  for (int it = 0; it < cfg.gleu_iterations; ++it) {
    for (size_t j = 0; j < per_sentence_refs.size(); ++j) {
      pick[j] = static_cast<uint32_t>(rng() % per_sentence_refs[j].size());
    }
    ++draws[pick];
  }
  const size_t width = 2 + 2 * static_cast<size_t>(cfg.gleu_max_n);
  double mean = 0;
  for (const auto& [choice, count] : draws) {
    std::vector<double> total(width, 0.0);
    for (size_t j = 0; j < choice.size(); ++j) {
      const auto& s = per_sentence_refs[j][choice[j]];
      for (size_t k = 0; k < width; ++k) total[k] += s[k];
    }
    mean += (static_cast<double>(count) / cfg.gleu_iterations) *
            gleu_from_stats(total, cfg.gleu_max_n);
  }
  return mean;
}

}  // namespace

double gleu_sentence(const Tokens& source, const Tokens& hypothesis,
                     const std::vector<Tokens>& references, const MetricConfig& cfg) {
  validate(cfg);
  if (references.empty()) throw DataError("gleu_sentence: no references");
  if (hypothesis.empty()) return 0.0;
  std::vector<std::vector<std::vector<double>>> stats(1);
  for (const auto& r : references) stats[0].push_back(gleu_stats(source, hypothesis, r, cfg.gleu_max_n));
  return gleu_sampled(stats, cfg);
}

std::map<std::string, double> gleu_corpus(
    const std::vector<SystemOutput>& outputs, const std::vector<ContextedSentence>& corpus,
    const std::map<std::string, std::vector<Tokens>>& references, const MetricConfig& cfg,
    const std::vector<std::string>& sentence_ids) {
  validate(cfg);
  std::map<std::string, const ContextedSentence*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;
  std::vector<std::string> ids = sentence_ids;
  if (ids.empty()) {
    for (const auto& s : corpus) ids.push_back(s.id);
  }
  for (const auto& id : ids) {
    auto it = references.find(id);
    if (it == references.end() || it->second.empty()) {
      throw DataError("gleu: missing reference for sentence '" + id + "'");
    }
    if (!by_id.count(id)) throw DataError("gleu: unknown sentence '" + id + "'");
  }
  std::map<std::string, double> out;
  for (const auto& sys : outputs) {
    std::vector<std::vector<std::vector<double>>> stats;
    stats.reserve(ids.size());
    for (const auto& id : ids) {
      auto hyp = sys.hypotheses.find(id);
      if (hyp == sys.hypotheses.end()) {
        throw DataError("gleu: system '" + sys.system_name + "' has no output for '" + id + "'");
      }
      auto& per_ref = stats.emplace_back();
      for (const auto& r : references.at(id)) {
        per_ref.push_back(gleu_stats(by_id.at(id)->source, hyp->second, r, cfg.gleu_max_n));
      }
    }
    out[sys.system_name] = gleu_sampled(stats, cfg);
  }
  return out;
}

// ------------------------------------------------------------ GoToScorer

double DifficultyTable::at(const std::string& sentence_id, const Edit& e) const {
  auto it = weight.find(GoldEditKey{sentence_id, e.start, e.end, e.replacement});
  if (it == weight.end()) {
    throw DataError("difficulty table has no weight for an edit of sentence '" + sentence_id + "'");
  }
  return it->second;
}

DifficultyTable build_difficulty_table(
    const std::map<std::string, std::map<std::string, std::vector<Edit>>>& all_system_edits,
    const std::vector<GoldAnnotation>& annotations) {
  if (all_system_edits.empty()) throw DataError("difficulty table needs at least one system");
  DifficultyTable table;
  table.total_systems = all_system_edits.size();
  std::set<GoldEditKey> gold;
  for (const auto& ann : annotations) {
    for (const auto& e : ann.edits) gold.insert({ann.sentence_id, e.start, e.end, e.replacement});
  }
  for (const auto& key : gold) {
    const auto& [sid, start, end, repl] = key;
    size_t correcting = 0;
    for (const auto& [system, by_sentence] : all_system_edits) {
      auto it = by_sentence.find(sid);
      if (it == by_sentence.end()) continue;
      const bool hit = std::any_of(it->second.begin(), it->second.end(), [&](const Edit& e) {
        return e.start == start && e.end == end && e.replacement == repl;
      });
      if (hit) ++correcting;
    }
    table.weight[key] =
        1.0 - static_cast<double>(correcting) / static_cast<double>(table.total_systems);
  }
  return table;
}

WeightedMatch gotoscorer_counts(const std::string& sentence_id, const std::vector<Edit>& hyp_edits,
                                const std::vector<GoldAnnotation>& annotations,
                                const DifficultyTable& table, double beta) {
  if (annotations.empty()) throw DataError("gotoscorer: no gold annotations for '" + sentence_id + "'");
  WeightedMatch best;
  double best_f = -1;
  for (const auto& ann : annotations) {
    WeightedCounts c;
    int64_t matched = 0;
    for (const Edit& g : ann.edits) {
      const double w = table.at(sentence_id, g);
      if (contains_edit(hyp_edits, g)) {
        c.tp += w;
        ++matched;
      } else {
        c.fn_ += w;
      }
    }
    c.fp = static_cast<double>(static_cast<int64_t>(hyp_edits.size()) - matched);
    const double f = f_beta(c, beta);
    if (f > best_f || (f == best_f && ann.annotator_id < best.annotator_id)) {
      best_f = f;
      best = {ann.annotator_id, c};
    }
  }
  return best;
}

double gotoscorer(const std::string& sentence_id, const std::vector<Edit>& hyp_edits,
                  const std::vector<GoldAnnotation>& annotations, const DifficultyTable& table,
                  double beta) {
  return f_beta(gotoscorer_counts(sentence_id, hyp_edits, annotations, table, beta).counts, beta);
}

double system_score_from_sentences(const std::map<std::string, double>& sentence_scores) {
  if (sentence_scores.empty()) throw DataError("cannot average an empty set of sentence scores");
  double sum = 0;
  for (const auto& [id, v] : sentence_scores) sum += v;
  return sum / static_cast<double>(sentence_scores.size());
}

// ------------------------------------------------------------ batch API

std::map<std::string, std::map<std::string, std::vector<Edit>>> extract_all_edits(
    const std::vector<SystemOutput>& outputs, const std::vector<ContextedSentence>& corpus) {
  std::map<std::string, std::map<std::string, std::vector<Edit>>> out;
  for (const auto& sys : outputs) {
    auto& dest = out[sys.system_name];
    for (const auto& s : corpus) {
      auto it = sys.hypotheses.find(s.id);
      if (it == sys.hypotheses.end()) continue;
      dest[s.id] = diff_edits(s.source, it->second);
    }
  }
  return out;
}

namespace {

const std::vector<GoldAnnotation>& gold_for(
    const std::map<std::string, std::vector<GoldAnnotation>>& gold, const std::string& id) {
  auto it = gold.find(id);
  if (it == gold.end()) throw DataError("no gold annotation for sentence '" + id + "'");
  return it->second;
}

const std::vector<Edit>& edits_for(const std::map<std::string, std::vector<Edit>>& by_sentence,
                                   const std::string& system, const std::string& id) {
  auto it = by_sentence.find(id);
  if (it == by_sentence.end()) {
    throw DataError("system '" + system + "' has no output for sentence '" + id + "'");
  }
  return it->second;
}

}  // namespace

std::map<std::string, SystemScores> score_m2(
    const std::map<std::string, std::map<std::string, std::vector<Edit>>>& edits,
    const std::map<std::string, std::vector<GoldAnnotation>>& gold, double beta,
    const std::vector<std::string>& sentence_ids) {
  std::map<std::string, SystemScores> out;
  for (const auto& [system, by_sentence] : edits) {
    SystemScores& s = out[system];
    MatchCounts total;
    for (const auto& id : sentence_ids) {
      const AnnotatorMatch m = m2_counts(edits_for(by_sentence, system, id), gold_for(gold, id), beta);
      s.sentence[id] = f_beta(m.counts, beta);
      total += m.counts;
    }
    s.corpus = f_beta(total, beta);
  }
  return out;
}

std::map<std::string, SystemScores> score_gotoscorer(
    const std::map<std::string, std::map<std::string, std::vector<Edit>>>& edits,
    const std::map<std::string, std::vector<GoldAnnotation>>& gold, const DifficultyTable& table,
    double beta, const std::vector<std::string>& sentence_ids) {
  std::map<std::string, SystemScores> out;
  for (const auto& [system, by_sentence] : edits) {
    SystemScores& s = out[system];
    WeightedCounts total;
    for (const auto& id : sentence_ids) {
      const WeightedMatch m =
          gotoscorer_counts(id, edits_for(by_sentence, system, id), gold_for(gold, id), table, beta);
      s.sentence[id] = f_beta(m.counts, beta);
      total += m.counts;
    }
    s.corpus = f_beta(total, beta);
  }
  return out;
}

std::map<std::string, SystemScores> score_gleu(
    const std::vector<SystemOutput>& outputs, const std::vector<ContextedSentence>& corpus,
    const std::map<std::string, std::vector<Tokens>>& references, const MetricConfig& cfg,
    const std::vector<std::string>& sentence_ids) {
  std::map<std::string, const ContextedSentence*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;
  std::map<std::string, SystemScores> out;
  const auto corpus_scores = gleu_corpus(outputs, corpus, references, cfg, sentence_ids);
  for (const auto& sys : outputs) {
    SystemScores& s = out[sys.system_name];
    s.corpus = corpus_scores.at(sys.system_name);
    for (const auto& id : sentence_ids) {
      s.sentence[id] =
          gleu_sentence(by_id.at(id)->source, sys.hypotheses.at(id), references.at(id), cfg);
    }
  }
  return out;
}

}  // namespace gecmeta

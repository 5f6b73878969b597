// System ratings from pairwise judgments: two-player TrueSkill with draws,
// Expected Wins, and bootstrap rank ranges with clusters.

#ifndef GECMETA_RATING_H_
#define GECMETA_RATING_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gecmeta/corpus.h"

namespace gecmeta {

struct Rating {
  double mu = 0;
  double sigma = 0.5;

  bool operator==(const Rating&) const = default;
};

struct RatingConfig {
  double mu0 = 0;
  double sigma0 = 0.5;
  double perf_beta = 0.25;
  double dynamics_tau = 0;
  // Unset means "auto": derived from the tie fraction of the data.
  std::optional<double> draw_margin;
  int passes = 2;
  uint64_t shuffle_seed = 0;
};

void validate(const RatingConfig& cfg);

// Truncated-Gaussian correction terms. `t` is the normalized performance
// difference, `e` the normalized draw margin.
namespace trueskill {
double pdf(double x);
double cdf(double x);
double v_win(double t, double e);
double w_win(double t, double e);
double v_draw(double t, double e);
double w_draw(double t, double e);
}  // namespace trueskill

// One game between a and b. `draw_margin` is the unnormalized epsilon.
std::pair<Rating, Rating> trueskill_update(const Rating& a, const Rating& b, Verdict verdict,
                                           double perf_beta, double draw_margin,
                                           double dynamics_tau = 0);

// Epsilon whose prior draw probability 2*Phi(eps/c) - 1 equals the tie
// fraction, with c computed from two fresh priors.
double auto_draw_margin(double tie_fraction, const RatingConfig& cfg);
double tie_fraction(const std::vector<PairwiseJudgment>& judgments);

struct TrueSkillResult {
  std::map<std::string, Rating> ratings;
  double draw_margin = 0;
};

// Sequential updates over a seeded shuffle of the judgments, repeated
// cfg.passes times. Every listed system must occur in some judgment; an empty
// `systems` list means "whatever systems the judgments mention".
TrueSkillResult run_trueskill(const std::vector<PairwiseJudgment>& judgments,
                              const RatingConfig& cfg,
                              const std::vector<std::string>& systems = {});

// EW(A): mean over opponents with decisive games of wins(A,B) / decisive(A,B).
std::map<std::string, double> expected_wins(const std::vector<PairwiseJudgment>& judgments);

struct RankingEntry {
  std::string system;
  double score = 0;  // final mu on the full data
  int rank = 0;
  int range_low = 0;
  int range_high = 0;
  int cluster = 0;
};

struct BootstrapConfig {
  int resamples = 1000;
  double confidence = 0.95;
  int threads = 1;
};

// Ranks by mu on the full data, then re-ranks on bootstrap resamples.
// Resample 0 is the unperturbed data, so one resample reproduces the point
// ranks. Clusters are cut in rank order wherever two neighbours have
// disjoint ranges. Output is sorted by rank.
std::vector<RankingEntry> bootstrap_rank_ranges(const std::vector<PairwiseJudgment>& judgments,
                                                const RatingConfig& cfg,
                                                const BootstrapConfig& boot,
                                                const std::vector<std::string>& systems = {});

// Ranks (1 = best) of systems by descending score; equal scores are ordered
// by name.
std::map<std::string, int> rank_by_score(const std::map<std::string, double>& scores);

}  // namespace gecmeta

#endif  // GECMETA_RATING_H_

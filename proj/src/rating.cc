#include "gecmeta/rating.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <thread>

namespace gecmeta {

void validate(const RatingConfig& cfg) {
  if (!(cfg.sigma0 > 0)) throw UsageError("sigma0 must be > 0");
  if (!(cfg.perf_beta > 0)) throw UsageError("perf_beta must be > 0");
  if (cfg.dynamics_tau < 0) throw UsageError("dynamics_tau must be >= 0");
  if (cfg.draw_margin && *cfg.draw_margin < 0) throw UsageError("draw margin must be >= 0");
  if (cfg.passes < 1) throw UsageError("passes must be >= 1");
}

namespace trueskill {

namespace {
// Below this the Gaussian tail ratio is replaced by its asymptote.
constexpr double kMinDenominator = 2.222758749e-162;
}  // namespace

double pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }

double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double v_win(double t, double e) {
  const double x = t - e;
  const double denom = cdf(x);
  if (denom < kMinDenominator) return -x;
  return pdf(x) / denom;
}

double w_win(double t, double e) {
  const double x = t - e;
  const double denom = cdf(x);
  if (denom < kMinDenominator) return x < 0 ? 1.0 : 0.0;
  const double v = pdf(x) / denom;
  return v * (v + x);
}

// Evaluated on |t| and sign-corrected, which makes v_draw exactly odd and
// w_draw exactly even in t.
double v_draw(double t, double e) {
  const double abs_t = std::abs(t);
  const double a = e - abs_t;
  const double b = -e - abs_t;
  const double denom = cdf(a) - cdf(b);
  const double v = denom < kMinDenominator ? a : (pdf(b) - pdf(a)) / denom;
  return t < 0 ? -v : v;
}

double w_draw(double t, double e) {
  const double abs_t = std::abs(t);
  const double a = e - abs_t;
  const double b = -e - abs_t;
  const double denom = cdf(a) - cdf(b);
  if (denom < kMinDenominator) return 1.0;
  const double v = (pdf(b) - pdf(a)) / denom;
  return v * v + (a * pdf(a) - b * pdf(b)) / denom;
}

}  // namespace trueskill

namespace {

struct Game {
  uint32_t a;
  uint32_t b;
  Verdict verdict;
};

void update_in_place(Rating& a, Rating& b, Verdict verdict, double perf_beta, double eps,
                     double tau) {
  if (verdict == Verdict::kBWins) {
    update_in_place(b, a, Verdict::kAWins, perf_beta, eps, tau);
    return;
  }
  const double var_a = a.sigma * a.sigma + tau * tau;
  const double var_b = b.sigma * b.sigma + tau * tau;
  const double c2 = 2 * perf_beta * perf_beta + (var_a + var_b);
  const double c = std::sqrt(c2);
  const double t = (a.mu - b.mu) / c;
  const double e = eps / c;
  double v = 0;
  double w = 0;
  if (verdict == Verdict::kAWins) {
    v = trueskill::v_win(t, e);
    w = trueskill::w_win(t, e);
  } else {
    v = trueskill::v_draw(t, e);
    w = trueskill::w_draw(t, e);
  }
  a.mu = a.mu + (var_a / c) * v;
  b.mu = b.mu - (var_b / c) * v;
  const double shrink_a = std::max(1e-12, 1 - (var_a / c2) * w);
  const double shrink_b = std::max(1e-12, 1 - (var_b / c2) * w);
  a.sigma = std::sqrt(var_a * shrink_a);
  b.sigma = std::sqrt(var_b * shrink_b);
}

std::vector<double> run_games(const std::vector<Game>& games, size_t n_systems,
                              const RatingConfig& cfg, double eps,
                              std::vector<Rating>* ratings_out = nullptr) {
  std::vector<Rating> ratings(n_systems, Rating{cfg.mu0, cfg.sigma0});
  std::vector<size_t> order(games.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(cfg.shuffle_seed);
  for (int pass = 0; pass < cfg.passes; ++pass) {
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (size_t idx : order) {
      const Game& g = games[idx];
      update_in_place(ratings[g.a], ratings[g.b], g.verdict, cfg.perf_beta, eps, cfg.dynamics_tau);
    }
  }
  std::vector<double> mus(n_systems);
  for (size_t i = 0; i < n_systems; ++i) mus[i] = ratings[i].mu;
  if (ratings_out) *ratings_out = std::move(ratings);
  return mus;
}

struct IndexedJudgments {
  std::vector<std::string> systems;
  std::vector<Game> games;
};

IndexedJudgments index_judgments(const std::vector<PairwiseJudgment>& judgments,
                                 const std::vector<std::string>& systems) {
  IndexedJudgments out;
  std::map<std::string, uint32_t> index;
  if (systems.empty()) {
    std::set<std::string> seen;
    for (const auto& j : judgments) {
      seen.insert(j.system_a);
      seen.insert(j.system_b);
    }
    out.systems.assign(seen.begin(), seen.end());
  } else {
    out.systems = systems;
  }
  for (uint32_t i = 0; i < out.systems.size(); ++i) {
    if (!index.emplace(out.systems[i], i).second) {
      throw DataError("system '" + out.systems[i] + "' listed twice");
    }
  }
  std::vector<bool> present(out.systems.size(), false);
  out.games.reserve(judgments.size());
  for (const auto& j : judgments) {
    auto a = index.find(j.system_a);
    auto b = index.find(j.system_b);
    if (a == index.end() || b == index.end()) {
      throw DataError("judgment mentions unlisted system '" +
                      (a == index.end() ? j.system_a : j.system_b) + "'");
    }
    if (a->second == b->second) throw DataError("judgment compares '" + j.system_a + "' with itself");
    present[a->second] = present[b->second] = true;
    out.games.push_back({a->second, b->second, j.verdict});
  }
  for (size_t i = 0; i < present.size(); ++i) {
    if (!present[i]) throw DataError("system '" + out.systems[i] + "' appears in no judgment");
  }
  return out;
}

double resolve_draw_margin(const std::vector<PairwiseJudgment>& judgments, const RatingConfig& cfg) {
  if (cfg.draw_margin) return *cfg.draw_margin;
  return auto_draw_margin(tie_fraction(judgments), cfg);
}

// Ranks by descending value, ties broken by index (systems are name-sorted
// or caller-ordered).
std::vector<int> ranks_of(const std::vector<double>& values, const std::vector<std::string>& names) {
  std::vector<size_t> order(values.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    if (values[x] != values[y]) return values[x] > values[y];
    return names[x] < names[y];
  });
  std::vector<int> ranks(values.size());
  for (size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r) + 1;
  return ranks;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::pair<Rating, Rating> trueskill_update(const Rating& a, const Rating& b, Verdict verdict,
                                           double perf_beta, double draw_margin,
                                           double dynamics_tau) {
  Rating na = a;
  Rating nb = b;
  update_in_place(na, nb, verdict, perf_beta, draw_margin, dynamics_tau);
  return {na, nb};
}

double tie_fraction(const std::vector<PairwiseJudgment>& judgments) {
  if (judgments.empty()) return 0;
  const auto ties = std::count_if(judgments.begin(), judgments.end(),
                                  [](const PairwiseJudgment& j) { return j.verdict == Verdict::kTie; });
  return static_cast<double>(ties) / static_cast<double>(judgments.size());
}

double auto_draw_margin(double fraction, const RatingConfig& cfg) {
  if (fraction <= 0) return 0;
  const double target = std::min(fraction, 1 - 1e-12);
  const double c = std::sqrt(2 * cfg.perf_beta * cfg.perf_beta + 2 * cfg.sigma0 * cfg.sigma0);
  double lo = 0;
  double hi = 50 * c;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double p = 2 * trueskill::cdf(mid / c) - 1;
    (p < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TrueSkillResult run_trueskill(const std::vector<PairwiseJudgment>& judgments,
                              const RatingConfig& cfg, const std::vector<std::string>& systems) {
  validate(cfg);
  const IndexedJudgments idx = index_judgments(judgments, systems);
  TrueSkillResult out;
  out.draw_margin = resolve_draw_margin(judgments, cfg);
  std::vector<Rating> ratings;
  run_games(idx.games, idx.systems.size(), cfg, out.draw_margin, &ratings);
  for (size_t i = 0; i < idx.systems.size(); ++i) out.ratings[idx.systems[i]] = ratings[i];
  return out;
}

std::map<std::string, double> expected_wins(const std::vector<PairwiseJudgment>& judgments) {
  std::map<std::string, std::map<std::string, int64_t>> wins;
  std::set<std::string> systems;
  for (const auto& j : judgments) {
    systems.insert(j.system_a);
    systems.insert(j.system_b);
    if (j.verdict == Verdict::kAWins) ++wins[j.system_a][j.system_b];
    if (j.verdict == Verdict::kBWins) ++wins[j.system_b][j.system_a];
  }
  auto count = [&](const std::string& x, const std::string& y) -> int64_t {
    auto it = wins.find(x);
    if (it == wins.end()) return 0;
    auto jt = it->second.find(y);
    return jt == it->second.end() ? 0 : jt->second;
  };
  std::map<std::string, double> out;
  for (const auto& a : systems) {
    double sum = 0;
    int opponents = 0;
    for (const auto& b : systems) {
      if (a == b) continue;
      const int64_t ab = count(a, b);
      const int64_t ba = count(b, a);
      if (ab + ba == 0) continue;
      sum += static_cast<double>(ab) / static_cast<double>(ab + ba);
      ++opponents;
    }
    if (opponents == 0) throw DataError("system '" + a + "' has no decisive judgments");
    out[a] = sum / opponents;
  }
  return out;
}

std::map<std::string, int> rank_by_score(const std::map<std::string, double>& scores) {
  std::vector<std::string> names;
  std::vector<double> values;
  for (const auto& [n, v] : scores) {
    names.push_back(n);
    values.push_back(v);
  }
  const auto ranks = ranks_of(values, names);
  std::map<std::string, int> out;
  for (size_t i = 0; i < names.size(); ++i) out[names[i]] = ranks[i];
  return out;
}

std::vector<RankingEntry> bootstrap_rank_ranges(const std::vector<PairwiseJudgment>& judgments,
                                                const RatingConfig& cfg,
                                                const BootstrapConfig& boot,
                                                const std::vector<std::string>& systems) {
  validate(cfg);
  if (boot.resamples < 1) throw UsageError("resamples must be >= 1");
  if (!(boot.confidence > 0 && boot.confidence <= 1)) {
    throw UsageError("confidence must be in (0, 1]");
  }
  const IndexedJudgments idx = index_judgments(judgments, systems);
  const size_t n = idx.systems.size();
  const double eps = resolve_draw_margin(judgments, cfg);

  const std::vector<double> point_mu = run_games(idx.games, n, cfg, eps);
  const std::vector<int> point_rank = ranks_of(point_mu, idx.systems);

  const auto resamples = static_cast<size_t>(boot.resamples);
  std::vector<std::vector<int>> sample_ranks(resamples);
  auto work = [&](size_t r) {
    if (r == 0) {
      sample_ranks[r] = point_rank;
      return;
    }
    std::mt19937_64 rng(splitmix64(cfg.shuffle_seed ^ splitmix64(r)));
    std::vector<Game> games(idx.games.size());
    for (auto& g : games) g = idx.games[rng() % idx.games.size()];
    sample_ranks[r] = ranks_of(run_games(games, n, cfg, eps), idx.systems);
  };
  const size_t threads = std::clamp<size_t>(static_cast<size_t>(std::max(1, boot.threads)), 1, resamples);
  if (threads == 1) {
    for (size_t r = 0; r < resamples; ++r) work(r);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (size_t r = next++; r < resamples; r = next++) work(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  const double alpha = (1 - boot.confidence) / 2;
  const double count = static_cast<double>(resamples);
  auto lo_idx = static_cast<size_t>(std::floor(alpha * count + 1e-9));
  auto hi_raw = static_cast<long>(std::ceil((1 - alpha) * count - 1e-9)) - 1;
  size_t hi_idx = static_cast<size_t>(std::clamp<long>(hi_raw, 0, static_cast<long>(resamples) - 1));
  lo_idx = std::min(lo_idx, hi_idx);

  std::vector<RankingEntry> out(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<int> ranks(resamples);
    for (size_t r = 0; r < resamples; ++r) ranks[r] = sample_ranks[r][i];
    std::sort(ranks.begin(), ranks.end());
    RankingEntry& e = out[i];
    e.system = idx.systems[i];
    e.score = point_mu[i];
    e.rank = point_rank[i];
    e.range_low = std::min(ranks[lo_idx], e.rank);
    e.range_high = std::max(ranks[hi_idx], e.rank);
  }
  std::sort(out.begin(), out.end(),
            [](const RankingEntry& a, const RankingEntry& b) { return a.rank < b.rank; });
  int cluster = 1;
  for (size_t i = 0; i < out.size(); ++i) {
    if (i > 0 && out[i - 1].range_high < out[i].range_low) ++cluster;
    out[i].cluster = cluster;
  }
  return out;
}

}  // namespace gecmeta

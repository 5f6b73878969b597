#include "gecmeta/metaeval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gecmeta {

namespace {

void check_pair(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw DataError("correlation inputs differ in length (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw DataError("correlation needs at least two points");
}

std::optional<double> defined_or_absent(double (*f)(const std::vector<double>&,
                                                    const std::vector<double>&),
                                        const std::vector<double>& x, const std::vector<double>& y) {
  try {
    return f(x, y);
  } catch (const UndefinedCorrelation&) {
    return std::nullopt;
  }
}

}  // namespace

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedCorrelation("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<size_t> order(values.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2 + 1;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y);
  return pearson(average_ranks(x), average_ranks(y));
}

PairwiseAgreement kendall_pairwise(const std::vector<PairwiseJudgment>& judgments,
                                   const ScoreTable& scores, double tie_eps) {
  if (judgments.empty()) throw DataError("kendall_pairwise: no judgments");
  auto lookup = [&](const std::string& system, const PairwiseJudgment& j) {
    auto it = scores.find({system, j.sentence_id});
    if (it == scores.end()) {
      throw DataError("no metric score for system '" + system + "' on sentence '" + j.sentence_id +
                      "' (pair " + j.system_a + " vs " + j.system_b + ")");
    }
    return it->second;
  };
  PairwiseAgreement out;
  size_t hits = 0;
  for (const auto& j : judgments) {
    const double diff = lookup(j.system_a, j) - lookup(j.system_b, j);
    const Verdict metric = std::abs(diff) <= tie_eps ? Verdict::kTie
                           : diff > 0                ? Verdict::kAWins
                                                     : Verdict::kBWins;
    if (metric == j.verdict) ++hits;
    if (j.verdict != Verdict::kTie) {
      if (metric == j.verdict) {
        ++out.concordant;
      } else {
        ++out.discordant;
      }
    }
  }
  out.pairs = judgments.size();
  out.acc = static_cast<double>(hits) / static_cast<double>(out.pairs);
  const size_t decisive = out.concordant + out.discordant;
  if (decisive > 0) {
    out.tau = (static_cast<double>(out.concordant) - static_cast<double>(out.discordant)) /
              static_cast<double>(decisive);
  }
  return out;
}

SystemLevelResult system_level_eval(const std::map<std::string, double>& human_scores,
                                    const std::map<std::string, double>& metric_scores) {
  std::vector<std::string> only_human;
  std::vector<std::string> only_metric;
  for (const auto& [k, v] : human_scores) {
    if (!metric_scores.count(k)) only_human.push_back(k);
  }
  for (const auto& [k, v] : metric_scores) {
    if (!human_scores.count(k)) only_metric.push_back(k);
  }
  if (!only_human.empty() || !only_metric.empty()) {
    std::string msg = "system sets differ;";
    if (!only_human.empty()) msg += " only in human scores: " + join_tokens(only_human) + ";";
    if (!only_metric.empty()) msg += " only in metric scores: " + join_tokens(only_metric) + ";";
    throw DataError(msg);
  }
  std::vector<double> h;
  std::vector<double> m;
  for (const auto& [k, v] : human_scores) {
    h.push_back(v);
    m.push_back(metric_scores.at(k));
  }
  check_pair(h, m);
  return {defined_or_absent(&pearson, h, m), defined_or_absent(&spearman, h, m)};
}

std::vector<WindowPoint> window_analysis(const std::vector<std::string>& human_ranking,
                                         const std::map<std::string, double>& metric_scores,
                                         const std::map<std::string, double>& human_scores,
                                         int window) {
  const int n = static_cast<int>(human_ranking.size());
  if (window < 2) throw UsageError("window must be >= 2");
  if (window > n) {
    throw UsageError("window " + std::to_string(window) + " exceeds the " + std::to_string(n) +
                     " ranked systems");
  }
  auto get = [](const std::map<std::string, double>& m, const std::string& k, const char* what) {
    auto it = m.find(k);
    if (it == m.end()) throw DataError(std::string("no ") + what + " score for system '" + k + "'");
    return it->second;
  };
  std::vector<WindowPoint> out;
  for (int s = 0; s + window <= n; ++s) {
    std::vector<double> h;
    std::vector<double> m;
    for (int k = s; k < s + window; ++k) {
      h.push_back(get(human_scores, human_ranking[k], "human"));
      m.push_back(get(metric_scores, human_ranking[k], "metric"));
    }
    WindowPoint p;
    p.start_rank = s + 1;
    p.x = s + window;
    p.window = window;
    p.r = defined_or_absent(&pearson, h, m);
    p.rho = defined_or_absent(&spearman, h, m);
    out.push_back(p);
  }
  return out;
}

std::vector<std::string> ranking_from_scores(const std::map<std::string, double>& scores) {
  std::vector<std::pair<std::string, double>> v(scores.begin(), scores.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (auto& [k, s] : v) out.push_back(k);
  return out;
}

std::string_view to_string(Dataset d) { return d == Dataset::kSeedaE ? "seeda_e" : "seeda_s"; }

Dataset parse_dataset(std::string_view s) {
  if (s == "seeda_e") return Dataset::kSeedaE;
  if (s == "seeda_s") return Dataset::kSeedaS;
  throw UsageError("unknown dataset '" + std::string(s) + "' (expected seeda_e or seeda_s)");
}

Dataset dataset_for(Granularity g) {
  return g == Granularity::kEditBased ? Dataset::kSeedaE : Dataset::kSeedaS;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

ReportFiles assemble_report(const std::vector<CorrelationReport>& cells,
                            const std::string& provenance_json) {
  using nlohmann::json;
  std::vector<const CorrelationReport*> sorted;
  for (const auto& c : cells) sorted.push_back(&c);
  auto key = [](const CorrelationReport* c) {
    return std::make_tuple(c->metric_name, static_cast<int>(c->dataset), static_cast<int>(c->subset));
  };
  std::sort(sorted.begin(), sorted.end(), [&](auto* a, auto* b) { return key(a) < key(b); });
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (key(sorted[i]) == key(sorted[i - 1])) {
      throw DataError("duplicate report cell (" + sorted[i]->metric_name + ", " +
                      std::string(to_string(sorted[i]->dataset)) + ", " +
                      std::string(to_string(sorted[i]->subset)) + ")");
    }
  }
  ReportFiles out;
  std::ostringstream csv;
  csv << "metric,dataset,subset,r,rho,acc,tau\n";
  json rows = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto* c : sorted) {
    csv << c->metric_name << ',' << to_string(c->dataset) << ',' << to_string(c->subset) << ','
        << format_optional(c->r) << ',' << format_optional(c->rho) << ','
        << format_optional(c->acc) << ',' << format_optional(c->tau) << '\n';
    rows.push_back({{"metric", c->metric_name},
                    {"dataset", to_string(c->dataset)},
                    {"subset", to_string(c->subset)},
                    {"r", opt(c->r)},
                    {"rho", opt(c->rho)},
                    {"acc", opt(c->acc)},
                    {"tau", opt(c->tau)}});
  }
  out.csv = csv.str();
  json doc;
  doc["cells"] = rows;
  doc["conventions"] = {
      {"system_level", "Pearson r and Spearman rho (average ranks) against human TrueSkill mu"},
      {"acc", "fraction of all judgments (ties included) where the metric relation equals the "
              "human verdict"},
      {"tau", "(C - D) / (C + D) over human non-tie pairs; metric ties count as discordant"},
      {"absent", "null marks an undefined value (zero variance or no decisive pairs)"}};
  doc["provenance"] = json::parse(provenance_json);
  out.json = doc.dump(2) + "\n";
  return out;
}

}  // namespace gecmeta

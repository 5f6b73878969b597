// Agreement between metric scores and human judgments.
//
// System level: Pearson r and Spearman rho over per-system scores.
// Sentence level: pairwise accuracy and Kendall's tau over human pairwise
// judgments. Conventions: Acc counts every judgment (ties included) and
// scores a hit when the metric relation equals the human verdict; tau uses
// only human non-tie pairs and counts metric ties on them as discordant.

#ifndef GECMETA_METAEVAL_H_
#define GECMETA_METAEVAL_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gecmeta/corpus.h"

namespace gecmeta {

// Both throw UndefinedCorrelation on zero variance and DataError on
// mismatched or too-short inputs.
double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Average (fractional) ranks, 1-based, ascending values.
std::vector<double> average_ranks(const std::vector<double>& values);

struct PairwiseAgreement {
  double acc = 0;
  std::optional<double> tau;  // absent when there is no human non-tie pair
  size_t pairs = 0;
  size_t concordant = 0;
  size_t discordant = 0;
};

// Throws DataError if a judged (system, sentence) pair has no score, or if
// there are no judgments.
PairwiseAgreement kendall_pairwise(const std::vector<PairwiseJudgment>& judgments,
                                   const ScoreTable& scores, double tie_eps = 0);

struct SystemLevelResult {
  std::optional<double> r;
  std::optional<double> rho;
};

// Correlates aligned per-system vectors; key sets must match exactly.
SystemLevelResult system_level_eval(const std::map<std::string, double>& human_scores,
                                    const std::map<std::string, double>& metric_scores);

struct WindowPoint {
  int start_rank = 1;
  int x = 0;  // rank of the window's last system
  int window = 4;
  std::optional<double> r;
  std::optional<double> rho;
};

// Correlations over every run of `window` consecutive systems in the human
// ranking (best first).
std::vector<WindowPoint> window_analysis(const std::vector<std::string>& human_ranking,
                                         const std::map<std::string, double>& metric_scores,
                                         const std::map<std::string, double>& human_scores,
                                         int window = 4);

// Human ranking (best first) from system scores; ties ordered by name.
std::vector<std::string> ranking_from_scores(const std::map<std::string, double>& scores);

enum class Dataset { kSeedaE, kSeedaS };
std::string_view to_string(Dataset d);
Dataset parse_dataset(std::string_view s);
Dataset dataset_for(Granularity g);

struct CorrelationReport {
  Dataset dataset = Dataset::kSeedaE;
  SubsetName subset = SubsetName::kBase;
  std::string metric_name;
  std::optional<double> r;
  std::optional<double> rho;
  std::optional<double> acc;
  std::optional<double> tau;
};

struct ReportFiles {
  std::string csv;
  std::string json;
};

// One CSV row per (metric, dataset, subset), sorted by that key; absent
// values are empty fields. `provenance` is embedded verbatim in the JSON.
ReportFiles assemble_report(const std::vector<CorrelationReport>& cells,
                            const std::string& provenance_json = "{}");

// Fixed-precision rendering shared by every CSV writer.
std::string format_real(double v);
std::string format_optional(const std::optional<double>& v);

}  // namespace gecmeta

#endif  // GECMETA_METAEVAL_H_

// Run configuration and the end-to-end pipeline stages behind the CLI.
//
// Output tree under the configured out dir:
//   manifest.json
//   ingest/summary.json
//   edits/edits.jsonl
//   scores/<metric>.jsonl, scores/summary.csv
//   judgments/<judge>.records.jsonl, .pairwise.jsonl, .failures.jsonl
//   rankings/<source>_<dataset|all>_<subset>.csv
//   reports/table.csv, reports/table.json
//   plots/window_<dataset>.csv, plots/score_distribution.csv

#ifndef GECMETA_PIPELINE_H_
#define GECMETA_PIPELINE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gecmeta/corpus.h"
#include "gecmeta/judge.h"
#include "gecmeta/metaeval.h"
#include "gecmeta/metrics.h"
#include "gecmeta/rating.h"
#include "json.hpp"

namespace gecmeta {

struct MockSetup {
  std::string mode = "edit_count";
  std::string reference_path;  // systems/<x>.txt-style file, for reference_distance
  std::string model;           // defaults to "mock-<mode>"
};

struct JudgeSetup {
  std::string name;  // report label; derived from model/spec when empty
  PromptSpec spec;
  ClientConfig client;
  int group_size = 5;
  uint64_t group_seed = 0;
  std::string grouping = "groups";  // "groups" or "human_pairs"
  std::optional<MockSetup> mock;
  bool use_mock = false;

  // Report/file label: name, else "<model>-E|S[+criterion]" where the model
  // is the mock's when use_mock is set.
  std::string label() const;
  std::string label(bool mock) const;
};

struct RunConfig {
  std::string base_dir;  // relative paths resolve against it
  std::string corpus;
  std::string systems_dir;
  std::string gold_m2;
  std::string judgments;                               // optional
  std::map<std::string, std::string> external_scores;  // metric name -> path
  SubsetSpec base;
  SubsetSpec plus_fluent;
  MetricConfig metrics;
  std::vector<JudgeSetup> judges;
  RatingConfig rating;
  BootstrapConfig bootstrap;
  std::string rank_method = "trueskill";  // or "expected_wins"
  double tie_eps = 0;
  int window = 4;
  std::string out_dir = "out";
  int threads = 1;

  std::string resolve(const std::string& path) const;
  const SubsetSpec& subset(SubsetName name) const {
    return name == SubsetName::kBase ? base : plus_fluent;
  }
};

RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);
// Everything that determines results; excludes the out dir and thread count.
nlohmann::json config_to_json(const RunConfig& cfg);

struct Inputs {
  std::vector<ContextedSentence> corpus;
  std::vector<SystemOutput> outputs;
  std::vector<GoldAnnotation> gold;
  std::map<std::string, std::vector<GoldAnnotation>> gold_by_sentence;
  std::map<std::string, std::vector<Tokens>> references;
  std::vector<PairwiseJudgment> human;
  std::map<std::string, ScoreTable> external;
};

// Loads and cross-validates all configured inputs (DataError on problems).
Inputs load_inputs(const RunConfig& cfg);

void write_text_file(const std::string& path, const std::string& content);

// Rank-table CSV: rank,score,range_low,range_high,cluster,system.
std::string ranking_csv(const std::vector<RankingEntry>& entries);
std::map<std::string, double> read_ranking_scores(const std::string& path);
// Score JSONL as written by the score stage, split by its "metric" field
// (lines without one go under `fallback_metric`).
std::map<std::string, ScoreTable> read_metric_scores(const std::string& path,
                                                     const std::string& fallback_metric);

// Optional inputs for the meta-evaluation stage. Unset fields fall back to
// the pipeline's own computations (TrueSkill on human judgments, configured
// metrics and judges, both datasets and subsets).
struct MetaOptions {
  std::optional<Dataset> dataset;
  std::optional<SubsetName> subset;
  std::optional<std::map<std::string, double>> human_scores;  // system -> score
  std::optional<std::map<std::string, ScoreTable>> metric_scores;  // metric -> table
};

class Pipeline {
 public:
  Pipeline(RunConfig cfg, Inputs inputs);

  const RunConfig& config() const { return cfg_; }
  const Inputs& inputs() const { return in_; }

  void write_ingest_summary() const;
  void write_edits() const;
  void write_scores() const;
  // Returns true when every record succeeded; false when some failed because
  // the endpoint gave up (the caller maps that to exit code 3).
  bool run_judges();
  // Loads judge records written by an earlier run_judges(). Missing files
  // are a DataError when `required`, skipped otherwise; returns the labels
  // of skipped judges.
  std::vector<std::string> load_judge_records(bool required = true);
  void write_rankings() const;
  std::vector<CorrelationReport> meta_cells(const MetaOptions& options = {},
                                            nlohmann::json* provenance = nullptr) const;
  // reports/table.{csv,json}.
  void write_table(const MetaOptions& options = {}) const;
  void write_windows() const;
  void write_distribution() const;
  // write_table + write_windows + write_distribution.
  void write_report() const;
  void write_manifest() const;

  const std::map<std::string, JudgeRun>& judge_runs() const { return judge_runs_; }

  // Metric scores of every configured metric for one subset over the given
  // sentences: system-level and sentence-level.
  struct MetricView {
    std::map<std::string, double> system;
    ScoreTable sentence;
  };
  std::map<std::string, MetricView> metric_views(
      SubsetName subset, const std::vector<std::string>& sentence_ids) const;

 private:
  std::string out(const std::string& rel) const;
  std::vector<RankingEntry> rank(const std::vector<PairwiseJudgment>& judgments,
                                 const std::vector<std::string>& systems) const;
  std::vector<std::string> corpus_ids() const;

  RunConfig cfg_;
  Inputs in_;
  std::map<std::string, JudgeRun> judge_runs_;  // by judge label
};

}  // namespace gecmeta

#endif  // GECMETA_PIPELINE_H_

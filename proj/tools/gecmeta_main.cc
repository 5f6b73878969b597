// gecmeta: command-line front end for the meta-evaluation pipeline.
//
// Exit codes: 0 ok, 1 usage, 2 data validation, 3 endpoint failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gecmeta/pipeline.h"

namespace {

using namespace gecmeta;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEndpoint = 3;

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> threads;

  // judge
  std::optional<std::string> granularity;
  std::optional<std::string> criterion;
  std::optional<std::string> model;
  std::optional<std::string> endpoint;
  std::optional<uint64_t> group_seed;
  bool mock = false;

  // rank
  std::optional<int> passes;
  std::optional<uint64_t> seed;
  std::optional<int> resamples;
  std::optional<double> confidence;
  std::optional<std::string> method;

  // meta / window
  std::optional<std::string> dataset;
  std::optional<std::string> meta_granularity;
  std::optional<std::string> subset;
  std::optional<double> tie_eps;
  std::optional<std::string> human_scores;
  std::optional<std::string> metric_scores;
  std::optional<int> window;
};

Granularity granularity_flag(const std::string& s) {
  try {
    return parse_granularity(s);
  } catch (const DataError& e) {
    throw UsageError(std::string("--granularity: ") + e.what());
  }
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config")->required();
  cmd->add_option("--out", f.out, "output directory (overrides config)");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

void add_judge_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--granularity", f.granularity, "edit_based | sentence_based");
  cmd->add_option("--criterion", f.criterion,
                  "none | difficulty | impact | grammaticality | fluency | meaning_preservation");
  cmd->add_option("--model", f.model, "judge model id");
  cmd->add_option("--endpoint", f.endpoint, "chat-completions URL");
  cmd->add_option("--group-seed", f.group_seed, "seed for target grouping");
  cmd->add_flag("--mock", f.mock, "use the deterministic mock judge");
}

void add_rank_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--passes", f.passes, "TrueSkill passes over the judgments");
  cmd->add_option("--seed", f.seed, "shuffle/bootstrap seed");
  cmd->add_option("--resamples", f.resamples, "bootstrap resamples");
  cmd->add_option("--confidence", f.confidence, "rank-range confidence level");
  cmd->add_option("--method", f.method, "trueskill | expected_wins");
}

void apply_overrides(RunConfig& cfg, const Flags& f) {
  if (f.out) {
    cfg.out_dir = std::filesystem::absolute(*f.out).string();
  }
  if (f.threads) cfg.threads = *f.threads;

  // Any of these replaces the configured judges with a single judge built
  // from the first configured one.
  if (f.granularity || f.criterion || f.model || f.endpoint) {
    JudgeSetup j = cfg.judges.empty() ? JudgeSetup{} : cfg.judges.front();
    j.name.clear();
    if (f.granularity) j.spec.granularity = granularity_flag(*f.granularity);
    if (f.criterion) j.spec.criterion = parse_criterion(*f.criterion);
    if (f.model) {
      j.client.model_id = *f.model;
      if (j.mock) j.mock->model = *f.model;
    }
    if (f.endpoint) j.client.endpoint_url = *f.endpoint;
    validate(j.spec);
    cfg.judges = {j};
  }
  for (auto& j : cfg.judges) {
    if (f.group_seed) j.group_seed = *f.group_seed;
    if (f.mock) j.use_mock = true;
  }

  if (f.passes) cfg.rating.passes = *f.passes;
  if (f.seed) cfg.rating.shuffle_seed = *f.seed;
  if (f.resamples) cfg.bootstrap.resamples = *f.resamples;
  if (f.confidence) cfg.bootstrap.confidence = *f.confidence;
  if (f.method) {
    if (*f.method != "trueskill" && *f.method != "expected_wins") {
      throw UsageError("--method must be trueskill or expected_wins");
    }
    cfg.rank_method = *f.method;
  }
  validate(cfg.rating);
  if (cfg.bootstrap.resamples < 1) throw UsageError("--resamples must be >= 1");
  if (!(cfg.bootstrap.confidence > 0 && cfg.bootstrap.confidence < 1)) {
    throw UsageError("--confidence must be in (0, 1)");
  }

  if (f.tie_eps) {
    if (*f.tie_eps < 0) throw UsageError("--tie-eps must be >= 0");
    cfg.tie_eps = *f.tie_eps;
  }
  if (f.window) cfg.window = *f.window;
}

MetaOptions meta_options(const Flags& f) {
  MetaOptions m;
  if (f.dataset) m.dataset = parse_dataset(*f.dataset);
  if (f.meta_granularity) {
    const Dataset d = dataset_for(granularity_flag(*f.meta_granularity));
    if (m.dataset && *m.dataset != d) throw UsageError("--dataset and --granularity disagree");
    m.dataset = d;
  }
  if (f.subset) {
    if (*f.subset == "base") {
      m.subset = SubsetName::kBase;
    } else if (*f.subset == "plus_fluent") {
      m.subset = SubsetName::kPlusFluent;
    } else {
      throw UsageError("--subset must be base or plus_fluent");
    }
  }
  if (f.human_scores) m.human_scores = read_ranking_scores(*f.human_scores);
  if (f.metric_scores) {
    m.metric_scores =
        read_metric_scores(*f.metric_scores, std::filesystem::path(*f.metric_scores).stem().string());
  }
  return m;
}

// Judges without records are left out of the later stages, with a warning.
void load_records(Pipeline& p) {
  for (const auto& label : p.load_judge_records(false)) {
    std::cerr << "warning: no records for judge " << label << " (run the judge stage to include it)\n";
  }
}

int run(const std::string& command, const Flags& flags) {
  RunConfig cfg = load_run_config(flags.config);
  apply_overrides(cfg, flags);
  Pipeline p(cfg, load_inputs(cfg));

  int code = 0;
  if (command == "ingest") {
    p.write_ingest_summary();
  } else if (command == "edits") {
    p.write_edits();
  } else if (command == "score") {
    p.write_scores();
  } else if (command == "judge") {
    if (!p.run_judges()) code = kExitEndpoint;
  } else if (command == "rank") {
    load_records(p);
    p.write_rankings();
  } else if (command == "meta") {
    const MetaOptions m = meta_options(flags);
    if (!m.metric_scores) load_records(p);
    p.write_table(m);
  } else if (command == "window") {
    load_records(p);
    p.write_windows();
  } else if (command == "dist") {
    load_records(p);
    p.write_distribution();
  } else if (command == "report") {
    load_records(p);
    p.write_report();
  } else if (command == "run-all") {
    p.write_ingest_summary();
    p.write_edits();
    p.write_scores();
    if (!p.run_judges()) code = kExitEndpoint;
    p.write_rankings();
    p.write_report();
  }
  p.write_manifest();
  for (const auto& [label, run] : p.judge_runs()) {
    if (!run.failures.empty()) {
      std::cerr << label << ": " << run.failures.size() << " judge failure(s), see judgments/"
                << label << ".failures.jsonl\n";
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GEC metric and LLM-judge meta-evaluation"};
  app.require_subcommand(1);
  Flags flags;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"ingest", "validate inputs and write an ingest summary"},
      {"edits", "dump extracted system edits as JSONL"},
      {"score", "score all systems with M2, GoToScorer and GLEU"},
      {"judge", "elicit 1-5 scores from the judge"},
      {"rank", "TrueSkill rankings with bootstrap rank ranges"},
      {"meta", "system- and sentence-level meta-evaluation table"},
      {"window", "window-analysis plot data"},
      {"dist", "judge score histogram"},
      {"report", "meta table, window data and histogram"},
      {"run-all", "every stage end to end"},
  };
  for (const auto& c : commands) {
    CLI::App* cmd = app.add_subcommand(c.name, c.help);
    add_common(cmd, flags);
    const std::string name = c.name;
    if (name == "judge" || name == "run-all") add_judge_flags(cmd, flags);
    if (name == "rank" || name == "run-all") add_rank_flags(cmd, flags);
    if (name == "meta") {
      cmd->add_option("--dataset", flags.dataset, "seeda_e | seeda_s");
      cmd->add_option("--subset", flags.subset, "base | plus_fluent");
      cmd->add_option("--granularity", flags.meta_granularity, "edit_based | sentence_based");
      cmd->add_option("--human-scores", flags.human_scores, "precomputed human ranking CSV");
      cmd->add_option("--metric-scores", flags.metric_scores, "sentence scores JSONL");
    }
    if (name == "meta" || name == "run-all" || name == "report") {
      cmd->add_option("--tie-eps", flags.tie_eps, "metric tie tolerance");
    }
    if (name == "window" || name == "run-all" || name == "report") {
      cmd->add_option("--window", flags.window, "window size (default 4)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, flags);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << '\n';
    return kExitEndpoint;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}

#include "gecmeta/pipeline.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace gecmeta {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw UsageError(std::string("config needs a non-empty string '") + key + "'");
  }
  return it->get<std::string>();
}

JudgeSetup parse_judge(const json& j) {
  JudgeSetup s;
  s.name = get_or<std::string>(j, "name", "");
  try {
    s.spec.granularity = parse_granularity(get_or<std::string>(j, "granularity", "sentence_based"));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  s.spec.criterion = parse_criterion(get_or<std::string>(j, "criterion", "none"));
  s.spec.max_targets = get_or<int>(j, "max_targets", 5);
  s.client.model_id = get_or<std::string>(j, "model", "");
  s.client.endpoint_url = get_or<std::string>(j, "endpoint", "");
  s.client.temperature = get_or<double>(j, "temperature", 0.0);
  s.client.max_retries = get_or<int>(j, "max_retries", 3);
  s.client.max_in_flight = get_or<int>(j, "max_in_flight", 4);
  s.client.retry_backoff_ms = get_or<int>(j, "retry_backoff_ms", 500);
  s.client.timeout_s = get_or<int>(j, "timeout_s", 120);
  s.client.cache_dir = get_or<std::string>(j, "cache_dir", "");
  s.group_size = get_or<int>(j, "group_size", s.spec.max_targets);
  s.group_seed = get_or<uint64_t>(j, "group_seed", 0);
  s.grouping = get_or<std::string>(j, "grouping", "groups");
  if (s.grouping != "groups" && s.grouping != "human_pairs") {
    throw UsageError("judge grouping must be 'groups' or 'human_pairs'");
  }
  if (j.contains("mock") && j["mock"].is_object()) {
    MockSetup m;
    m.mode = get_or<std::string>(j["mock"], "mode", "edit_count");
    m.reference_path = get_or<std::string>(j["mock"], "reference", "");
    m.model = get_or<std::string>(j["mock"], "model", "");
    MockJudgeClient::parse_mode(m.mode);
    s.mock = m;
  }
  s.use_mock = get_or<bool>(j, "use_mock", false);
  validate(s.spec);
  validate(s.client);
  if (s.group_size < 1 || s.group_size > s.spec.max_targets) {
    throw UsageError("judge group_size must be in 1..max_targets");
  }
  return s;
}

json judge_to_json(const JudgeSetup& s) {
  json j = {{"name", s.name},
            {"label", s.label()},
            {"granularity", to_string(s.spec.granularity)},
            {"criterion", to_string(s.spec.criterion)},
            {"max_targets", s.spec.max_targets},
            {"model", s.client.model_id},
            {"endpoint", s.client.endpoint_url},
            {"temperature", s.client.temperature},
            {"max_retries", s.client.max_retries},
            {"cache_dir", s.client.cache_dir},
            {"group_size", s.group_size},
            {"group_seed", s.group_seed},
            {"grouping", s.grouping},
            {"use_mock", s.use_mock}};
  if (s.mock) {
    j["mock"] = {{"mode", s.mock->mode}, {"reference", s.mock->reference_path}, {"model", s.mock->model}};
  }
  return j;
}

std::vector<std::string> unique_sentences(const std::vector<PairwiseJudgment>& judgments) {
  std::set<std::string> ids;
  for (const auto& j : judgments) ids.insert(j.sentence_id);
  return {ids.begin(), ids.end()};
}

std::vector<PairwiseJudgment> of_granularity(const std::vector<PairwiseJudgment>& judgments,
                                             Granularity g) {
  std::vector<PairwiseJudgment> out;
  std::copy_if(judgments.begin(), judgments.end(), std::back_inserter(out),
               [&](const PairwiseJudgment& j) { return j.granularity == g; });
  return out;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

// ----------------------------------------------------------------- config

std::string JudgeSetup::label() const { return label(use_mock); }

std::string JudgeSetup::label(bool as_mock) const {
  if (!name.empty()) return name;
  std::string model = client.model_id;
  if (as_mock || model.empty()) {
    model = mock && !mock->model.empty() ? mock->model
                                         : "mock-" + (mock ? mock->mode : std::string("edit_count"));
  }
  std::string out = model + (spec.granularity == Granularity::kEditBased ? "-E" : "-S");
  if (spec.criterion != Criterion::kNone) out += "+" + std::string(to_string(spec.criterion));
  return out;
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  RunConfig c;
  c.base_dir = base_dir;
  c.corpus = required_string(j, "corpus");
  c.systems_dir = required_string(j, "systems_dir");
  c.gold_m2 = required_string(j, "gold_m2");
  c.judgments = get_or<std::string>(j, "judgments", "");
  if (j.contains("external_scores")) {
    for (const auto& [name, path] : j["external_scores"].items()) {
      if (!path.is_string()) throw UsageError("external_scores values must be paths");
      c.external_scores[name] = path.get<std::string>();
    }
  }

  if (!j.contains("subset") || !j["subset"].is_object()) {
    throw UsageError("config needs a 'subset' object with 'base' and 'plus_fluent_extra'");
  }
  const json& sub = j["subset"];
  c.base.name = SubsetName::kBase;
  c.base.included_systems = get_or<std::vector<std::string>>(sub, "base", {});
  c.plus_fluent.name = SubsetName::kPlusFluent;
  if (sub.contains("plus_fluent")) {
    c.plus_fluent.included_systems = get_or<std::vector<std::string>>(sub, "plus_fluent", {});
  } else {
    c.plus_fluent.included_systems = c.base.included_systems;
    for (const auto& s : get_or<std::vector<std::string>>(sub, "plus_fluent_extra", {})) {
      c.plus_fluent.included_systems.push_back(s);
    }
  }
  try {
    validate_subset_pair(c.base, c.plus_fluent);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }

  const json metrics = j.value("metrics", json::object());
  c.metrics.beta = get_or<double>(metrics, "beta", 0.5);
  c.metrics.gleu_max_n = get_or<int>(metrics, "gleu_max_n", 4);
  c.metrics.gleu_iterations = get_or<int>(metrics, "gleu_iterations", 500);
  c.metrics.rng_seed = get_or<uint64_t>(metrics, "gleu_seed", 0);
  validate(c.metrics);

  if (j.contains("judges")) {
    if (!j["judges"].is_array()) throw UsageError("'judges' must be an array");
    for (const auto& item : j["judges"]) c.judges.push_back(parse_judge(item));
  } else if (j.contains("judge")) {
    c.judges.push_back(parse_judge(j["judge"]));
  }
  std::set<std::string> labels;
  for (const auto& s : c.judges) {
    if (!labels.insert(s.label()).second) throw UsageError("two judges share the label '" + s.label() + "'");
  }

  const json rating = j.value("rating", json::object());
  c.rating.mu0 = get_or<double>(rating, "mu0", 0.0);
  c.rating.sigma0 = get_or<double>(rating, "sigma0", 0.5);
  c.rating.perf_beta = get_or<double>(rating, "perf_beta", 0.25);
  c.rating.dynamics_tau = get_or<double>(rating, "dynamics_tau", 0.0);
  if (rating.contains("draw_margin") && rating["draw_margin"].is_number()) {
    c.rating.draw_margin = rating["draw_margin"].get<double>();
  } else if (rating.contains("draw_margin") && rating["draw_margin"] != "auto") {
    throw UsageError("rating.draw_margin must be a number or \"auto\"");
  }
  c.rating.passes = get_or<int>(rating, "passes", 2);
  c.rating.shuffle_seed = get_or<uint64_t>(rating, "seed", 0);
  c.bootstrap.resamples = get_or<int>(rating, "resamples", 1000);
  c.bootstrap.confidence = get_or<double>(rating, "confidence", 0.95);
  c.rank_method = get_or<std::string>(rating, "method", "trueskill");
  if (c.rank_method != "trueskill" && c.rank_method != "expected_wins") {
    throw UsageError("rating.method must be 'trueskill' or 'expected_wins'");
  }
  if (c.bootstrap.resamples < 1) throw UsageError("rating.resamples must be >= 1");
  if (!(c.bootstrap.confidence > 0 && c.bootstrap.confidence < 1)) {
    throw UsageError("rating.confidence must be in (0, 1)");
  }
  validate(c.rating);

  const json meta = j.value("metaeval", json::object());
  c.tie_eps = get_or<double>(meta, "tie_eps", 0.0);
  c.window = get_or<int>(meta, "window", 4);
  if (c.tie_eps < 0) throw UsageError("tie_eps must be >= 0");

  c.out_dir = get_or<std::string>(j, "out", "out");
  c.threads = get_or<int>(j, "threads", 1);
  if (c.threads < 1) throw UsageError("threads must be >= 1");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError("config " + path + " is not valid JSON");
  return parse_run_config(j, fs::absolute(path).parent_path().string());
}

json config_to_json(const RunConfig& c) {
  json j;
  j["corpus"] = c.corpus;
  j["systems_dir"] = c.systems_dir;
  j["gold_m2"] = c.gold_m2;
  j["judgments"] = c.judgments;
  j["external_scores"] = c.external_scores;
  j["subset"] = {{"base", c.base.included_systems}, {"plus_fluent", c.plus_fluent.included_systems}};
  j["metrics"] = {{"beta", c.metrics.beta},
                  {"gleu_max_n", c.metrics.gleu_max_n},
                  {"gleu_iterations", c.metrics.gleu_iterations},
                  {"gleu_seed", c.metrics.rng_seed}};
  j["judges"] = json::array();
  for (const auto& s : c.judges) j["judges"].push_back(judge_to_json(s));
  j["rating"] = {{"mu0", c.rating.mu0},
                 {"sigma0", c.rating.sigma0},
                 {"perf_beta", c.rating.perf_beta},
                 {"dynamics_tau", c.rating.dynamics_tau},
                 {"draw_margin", c.rating.draw_margin ? json(*c.rating.draw_margin) : json("auto")},
                 {"passes", c.rating.passes},
                 {"seed", c.rating.shuffle_seed},
                 {"resamples", c.bootstrap.resamples},
                 {"confidence", c.bootstrap.confidence},
                 {"method", c.rank_method}};
  j["metaeval"] = {{"tie_eps", c.tie_eps}, {"window", c.window}};
  return j;
}

// ----------------------------------------------------------------- inputs

Inputs load_inputs(const RunConfig& cfg) {
  Inputs in;
  in.corpus = load_corpus(cfg.resolve(cfg.corpus));
  in.outputs = load_system_outputs(cfg.resolve(cfg.systems_dir), in.corpus);
  std::set<std::string> systems;
  for (const auto& o : in.outputs) systems.insert(o.system_name);
  for (const auto& s : cfg.plus_fluent.included_systems) {
    if (!systems.count(s)) throw DataError("subset system '" + s + "' has no output file");
  }
  std::vector<std::string> ids;
  std::set<std::string> id_set;
  for (const auto& s : in.corpus) {
    ids.push_back(s.id);
    id_set.insert(s.id);
  }
  in.gold = load_m2_file(cfg.resolve(cfg.gold_m2), ids);
  in.gold_by_sentence = group_by_sentence(in.gold);
  in.references = references_from_gold(in.corpus, in.gold);
  if (!cfg.judgments.empty()) {
    JudgmentUniverse universe;
    universe.systems = systems;
    universe.sentence_ids = id_set;
    in.human = load_judgments(cfg.resolve(cfg.judgments), universe);
  }
  for (const auto& [name, path] : cfg.external_scores) {
    ScoreTable t = load_external_scores(cfg.resolve(path));
    for (const auto& [key, v] : t) {
      if (!systems.count(key.first)) {
        throw DataError(name + " scores mention unknown system '" + key.first + "'");
      }
      if (!id_set.count(key.second)) {
        throw DataError(name + " scores mention unknown sentence '" + key.second + "'");
      }
    }
    in.external[name] = std::move(t);
  }
  return in;
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

std::string ranking_csv(const std::vector<RankingEntry>& entries) {
  std::ostringstream out;
  out << "rank,score,range_low,range_high,cluster,system\n";
  for (const auto& e : entries) {
    out << e.rank << ',' << format_real(e.score) << ',' << e.range_low << ',' << e.range_high << ','
        << e.cluster << ',' << e.system << '\n';
  }
  return out.str();
}

std::map<std::string, double> read_ranking_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty ranking file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) header.push_back(f);
  }
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path + ": missing column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  };
  const size_t score_col = col("score");
  const size_t system_col = col("system");
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() <= std::max(score_col, system_col)) throw DataError(path + ": short row");
    try {
      out[fields[system_col]] = std::stod(fields[score_col]);
    } catch (const std::exception&) {
      throw DataError(path + ": bad score '" + fields[score_col] + "'");
    }
  }
  return out;
}

std::map<std::string, ScoreTable> read_metric_scores(const std::string& path,
                                                     const std::string& fallback_metric) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::map<std::string, std::string> chunks;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    std::string metric = fallback_metric;
    if (j.contains("metric")) {
      if (!j["metric"].is_string()) throw DataError(path + ":" + std::to_string(line_no) + ": bad metric");
      metric = j["metric"].get<std::string>();
    }
    chunks[metric] += line + "\n";
  }
  std::map<std::string, ScoreTable> out;
  for (const auto& [metric, text] : chunks) {
    std::istringstream ss(text);
    try {
      out[metric] = read_external_scores(ss);
    } catch (const DataError& e) {
      throw DataError(path + " (" + metric + "): " + e.what());
    }
  }
  return out;
}

// --------------------------------------------------------------- pipeline

Pipeline::Pipeline(RunConfig cfg, Inputs inputs) : cfg_(std::move(cfg)), in_(std::move(inputs)) {}

std::string Pipeline::out(const std::string& rel) const {
  return (fs::path(cfg_.resolve(cfg_.out_dir)) / rel).string();
}

std::vector<std::string> Pipeline::corpus_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : in_.corpus) ids.push_back(s.id);
  return ids;
}

void Pipeline::write_ingest_summary() const {
  json j;
  j["sentences"] = in_.corpus.size();
  j["systems"] = json::array();
  for (const auto& o : in_.outputs) j["systems"].push_back(o.system_name);
  j["gold_annotations"] = in_.gold.size();
  size_t gold_edits = 0;
  for (const auto& g : in_.gold) gold_edits += g.edits.size();
  j["gold_edits"] = gold_edits;
  j["human_judgments"] = {
      {"edit_based", of_granularity(in_.human, Granularity::kEditBased).size()},
      {"sentence_based", of_granularity(in_.human, Granularity::kSentenceBased).size()}};
  for (SubsetName s : {SubsetName::kBase, SubsetName::kPlusFluent}) {
    j["subset_judgments"][std::string(to_string(s))] =
        filter_judgments(in_.human, as_set(cfg_.subset(s).included_systems)).size();
  }
  for (const auto& [name, t] : in_.external) j["external_scores"][name] = t.size();
  write_text_file(out("ingest/summary.json"), j.dump(2) + "\n");
}

void Pipeline::write_edits() const {
  const auto edits = extract_all_edits(in_.outputs, in_.corpus);
  std::ostringstream os;
  for (const auto& s : in_.corpus) {
    for (const auto& [system, by_sentence] : edits) {
      for (const auto& e : by_sentence.at(s.id)) {
        json j = {{"sentence_id", s.id},
                  {"system", system},
                  {"start", e.start},
                  {"end", e.end},
                  {"replacement", join_tokens(e.replacement)}};
        os << j.dump() << '\n';
      }
    }
  }
  write_text_file(out("edits/edits.jsonl"), os.str());
}

void Pipeline::write_scores() const {
  const auto ids = corpus_ids();
  const auto edits = extract_all_edits(in_.outputs, in_.corpus);
  std::map<std::string, std::map<std::string, SystemScores>> all;
  all["M2"] = score_m2(edits, in_.gold_by_sentence, cfg_.metrics.beta, ids);
  all["GoToScorer"] = score_gotoscorer(edits, in_.gold_by_sentence,
                                       build_difficulty_table(edits, in_.gold), cfg_.metrics.beta, ids);
  all["GLEU"] = score_gleu(in_.outputs, in_.corpus, in_.references, cfg_.metrics, ids);
  std::ostringstream summary;
  summary << "metric,system,corpus_score\n";
  for (const auto& [metric, by_system] : all) {
    std::ostringstream os;
    for (const auto& [system, scores] : by_system) {
      for (const auto& id : ids) {
        json j = {{"metric", metric}, {"system", system}, {"sentence_id", id},
                  {"score", scores.sentence.at(id)}};
        os << j.dump() << '\n';
      }
      summary << metric << ',' << system << ',' << format_real(scores.corpus) << '\n';
    }
    write_text_file(out("scores/" + metric + ".jsonl"), os.str());
  }
  write_text_file(out("scores/summary.csv"), summary.str());
}

bool Pipeline::run_judges() {
  bool endpoint_ok = true;
  std::vector<std::string> systems;
  for (const auto& o : in_.outputs) systems.push_back(o.system_name);
  for (const auto& setup : cfg_.judges) {
    std::unique_ptr<JudgeClient> client;
    int in_flight = setup.client.max_in_flight;
    if (setup.use_mock) {
      const MockSetup mock = setup.mock.value_or(MockSetup{});
      const auto mode = MockJudgeClient::parse_mode(mock.mode);
      std::map<std::string, Tokens> refs;
      if (mode == MockJudgeClient::Mode::kReferenceDistance) {
        if (mock.reference_path.empty()) throw UsageError("reference_distance mock needs 'reference'");
        std::ifstream rin(cfg_.resolve(mock.reference_path));
        if (!rin) throw DataError("cannot open " + cfg_.resolve(mock.reference_path));
        refs = read_system_output(rin, "reference", in_.corpus).hypotheses;
      }
      client = std::make_unique<MockJudgeClient>(
          mode, mock.model.empty() ? "mock-" + mock.mode : mock.model, std::move(refs));
      in_flight = cfg_.threads;
    } else {
      if (setup.client.endpoint_url.empty()) {
        throw UsageError("judge '" + setup.label() + "' has no endpoint (use --mock or --endpoint)");
      }
      ClientConfig cc = setup.client;
      if (const char* key = std::getenv("GEC_JUDGE_API_KEY")) cc.api_key = key;
      client = std::make_unique<HttpJudgeClient>(cc);
    }
    std::optional<ResponseCache> cache;
    if (!setup.client.cache_dir.empty()) cache.emplace(cfg_.resolve(setup.client.cache_dir));
    const auto groups = setup.grouping == "human_pairs"
                            ? groups_from_judgments(in_.human)
                            : make_groups(in_.corpus, systems, setup.group_size, setup.group_seed);
    JudgeOptions opts;
    opts.max_in_flight = in_flight;
    opts.cache = cache ? &*cache : nullptr;
    JudgeRun run = judge_all(in_.corpus, in_.outputs, groups, setup.spec, *client, opts);
    for (const auto& f : run.failures) endpoint_ok = endpoint_ok && !f.endpoint;

    const std::string label = setup.label();
    std::ostringstream records, pairwise, failures;
    write_records(records, run.records);
    write_judgments(pairwise, derive_pairwise(run.records));
    write_failures(failures, run.failures);
    write_text_file(out("judgments/" + label + ".records.jsonl"), records.str());
    write_text_file(out("judgments/" + label + ".pairwise.jsonl"), pairwise.str());
    write_text_file(out("judgments/" + label + ".failures.jsonl"), failures.str());
    judge_runs_[label] = std::move(run);
  }
  return endpoint_ok;
}

std::vector<std::string> Pipeline::load_judge_records(bool required) {
  std::vector<std::string> skipped;
  // Later stages run without --mock, so records written by a mock run are
  // picked up under their mock label as well.
  for (auto& setup : cfg_.judges) {
    const std::string path = out("judgments/" + setup.label() + ".records.jsonl");
    const std::string alt = out("judgments/" + setup.label(!setup.use_mock) + ".records.jsonl");
    std::ifstream in(path);
    if (!in) {
      in.open(alt);
      if (in) setup.use_mock = !setup.use_mock;
    }
    if (!in && !required) {
      skipped.push_back(setup.label());
      continue;
    }
    if (!in) throw DataError("missing judge records " + path + " (run the judge stage first)");
    JudgeRun run;
    run.records = read_records(in);
    judge_runs_[setup.label()] = std::move(run);
  }
  return skipped;
}

std::vector<RankingEntry> Pipeline::rank(const std::vector<PairwiseJudgment>& judgments,
                                         const std::vector<std::string>& systems) const {
  if (cfg_.rank_method == "expected_wins") {
    const auto wins = expected_wins(judgments);
    const auto ranks = rank_by_score(wins);
    std::vector<RankingEntry> out;
    for (const auto& [system, rank] : ranks) {
      out.push_back({system, wins.at(system), rank, rank, rank, rank});
    }
    std::sort(out.begin(), out.end(), [](const RankingEntry& a, const RankingEntry& b) {
      return std::tie(a.rank, a.system) < std::tie(b.rank, b.system);
    });
    return out;
  }
  BootstrapConfig boot = cfg_.bootstrap;
  boot.threads = cfg_.threads;
  return bootstrap_rank_ranges(judgments, cfg_.rating, boot, systems);
}

void Pipeline::write_rankings() const {
  for (SubsetName subset : {SubsetName::kBase, SubsetName::kPlusFluent}) {
    const auto& systems = cfg_.subset(subset).included_systems;
    const auto keep = as_set(systems);
    for (Granularity g : {Granularity::kEditBased, Granularity::kSentenceBased}) {
      const auto human = filter_judgments(of_granularity(in_.human, g), keep);
      if (human.empty()) continue;
      write_text_file(out("rankings/human_" + std::string(to_string(dataset_for(g))) + "_" +
                          std::string(to_string(subset)) + ".csv"),
                      ranking_csv(rank(human, systems)));
    }
    for (const auto& [label, run] : judge_runs_) {
      const auto llm = filter_judgments(derive_pairwise(run.records), keep);
      if (llm.empty()) continue;
      write_text_file(out("rankings/" + label + "_all_" + std::string(to_string(subset)) + ".csv"),
                      ranking_csv(rank(llm, systems)));
    }
  }
}

std::map<std::string, Pipeline::MetricView> Pipeline::metric_views(
    SubsetName subset, const std::vector<std::string>& sentence_ids) const {
  const auto& systems = cfg_.subset(subset).included_systems;
  const auto keep = as_set(systems);
  const auto ids = as_set(sentence_ids);
  std::vector<SystemOutput> outputs;
  for (const auto& o : in_.outputs) {
    if (keep.count(o.system_name)) outputs.push_back(o);
  }
  const auto edits = extract_all_edits(outputs, in_.corpus);

  std::map<std::string, MetricView> views;
  auto add_reference_metric = [&](const std::string& name,
                                  const std::map<std::string, SystemScores>& scores) {
    MetricView& v = views[name];
    for (const auto& [system, s] : scores) {
      v.system[system] = s.corpus;
      for (const auto& [id, x] : s.sentence) v.sentence[{system, id}] = x;
    }
  };
  add_reference_metric("M2", score_m2(edits, in_.gold_by_sentence, cfg_.metrics.beta, sentence_ids));
  add_reference_metric("GoToScorer",
                       score_gotoscorer(edits, in_.gold_by_sentence,
                                        build_difficulty_table(edits, in_.gold), cfg_.metrics.beta,
                                        sentence_ids));
  add_reference_metric("GLEU",
                       score_gleu(outputs, in_.corpus, in_.references, cfg_.metrics, sentence_ids));

  for (const auto& [name, table] : in_.external) {
    MetricView& v = views[name];
    for (const auto& system : systems) {
      std::map<std::string, double> per_sentence;
      for (const auto& id : sentence_ids) {
        auto it = table.find({system, id});
        if (it == table.end()) {
          throw DataError(name + " has no score for (" + system + ", " + id + ")");
        }
        per_sentence[id] = it->second;
        v.sentence[{system, id}] = it->second;
      }
      v.system[system] = system_score_from_sentences(per_sentence);
    }
  }

  for (const auto& [label, run] : judge_runs_) {
    MetricView& v = views[label];
    for (const auto& [key, x] : record_scores(run.records)) {
      if (keep.count(key.first) && ids.count(key.second)) v.sentence[key] = x;
    }
    std::vector<PairwiseJudgment> llm;
    for (const auto& j : filter_judgments(derive_pairwise(run.records), keep)) {
      if (ids.count(j.sentence_id)) llm.push_back(j);
    }
    for (const auto& [system, r] : run_trueskill(llm, cfg_.rating, systems).ratings) {
      v.system[system] = r.mu;
    }
  }
  return views;
}

std::vector<CorrelationReport> Pipeline::meta_cells(const MetaOptions& options,
                                                    json* provenance) const {
  std::vector<CorrelationReport> cells;
  json prov = json::object();
  for (Granularity g : {Granularity::kEditBased, Granularity::kSentenceBased}) {
    const Dataset dataset = dataset_for(g);
    if (options.dataset && *options.dataset != dataset) continue;
    for (SubsetName subset : {SubsetName::kBase, SubsetName::kPlusFluent}) {
      if (options.subset && *options.subset != subset) continue;
      const auto& systems = cfg_.subset(subset).included_systems;
      const auto human = filter_judgments(of_granularity(in_.human, g), as_set(systems));
      if (human.empty()) continue;
      const std::string cell_key = std::string(to_string(dataset)) + "/" + std::string(to_string(subset));
      const auto ids = unique_sentences(human);
      prov[cell_key] = {{"human_judgments", human.size()}, {"sentences", ids.size()}};

      std::map<std::string, double> human_scores;
      if (options.human_scores) {
        for (const auto& s : systems) {
          auto it = options.human_scores->find(s);
          if (it == options.human_scores->end()) {
            throw DataError("human scores have no entry for system '" + s + "'");
          }
          human_scores[s] = it->second;
        }
        prov[cell_key]["human_scores"] = "precomputed";
      } else {
        const TrueSkillResult ts = run_trueskill(human, cfg_.rating, systems);
        for (const auto& [s, r] : ts.ratings) human_scores[s] = r.mu;
        prov[cell_key]["human_scores"] = "trueskill";
        prov[cell_key]["draw_margin"] = ts.draw_margin;
      }

      std::map<std::string, MetricView> views;
      if (options.metric_scores) {
        for (const auto& [metric, table] : *options.metric_scores) {
          MetricView& v = views[metric];
          for (const auto& s : systems) {
            std::map<std::string, double> per_sentence;
            for (const auto& id : ids) {
              auto it = table.find({s, id});
              if (it == table.end()) continue;
              per_sentence[id] = it->second;
              v.sentence[{s, id}] = it->second;
            }
            if (per_sentence.empty()) {
              throw DataError(metric + " has no scores for system '" + s + "' on judged sentences");
            }
            v.system[s] = system_score_from_sentences(per_sentence);
          }
        }
      } else {
        views = metric_views(subset, ids);
      }

      for (const auto& [metric, view] : views) {
        CorrelationReport cell;
        cell.dataset = dataset;
        cell.subset = subset;
        cell.metric_name = metric;
        const SystemLevelResult sys = system_level_eval(human_scores, view.system);
        cell.r = sys.r;
        cell.rho = sys.rho;
        std::vector<PairwiseJudgment> scored;
        for (const auto& j : human) {
          if (view.sentence.count({j.system_a, j.sentence_id}) &&
              view.sentence.count({j.system_b, j.sentence_id})) {
            scored.push_back(j);
          }
        }
        if (scored.size() != human.size()) {
          prov[cell_key]["unscored_pairs"][metric] = human.size() - scored.size();
        }
        if (!scored.empty()) {
          const PairwiseAgreement pa = kendall_pairwise(scored, view.sentence, cfg_.tie_eps);
          cell.acc = pa.acc;
          cell.tau = pa.tau;
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  if (provenance) *provenance = std::move(prov);
  return cells;
}

void Pipeline::write_table(const MetaOptions& options) const {
  json counts;
  const auto cells = meta_cells(options, &counts);
  json provenance = {{"config", config_to_json(cfg_)},
                     {"counts", counts},
                     {"seeds",
                      {{"gleu", cfg_.metrics.rng_seed},
                       {"trueskill_shuffle", cfg_.rating.shuffle_seed},
                       {"bootstrap", cfg_.rating.shuffle_seed}}}};
  const ReportFiles report = assemble_report(cells, provenance.dump());
  write_text_file(out("reports/table.csv"), report.csv);
  write_text_file(out("reports/table.json"), report.json);
}

void Pipeline::write_windows() const {
  for (Granularity g : {Granularity::kEditBased, Granularity::kSentenceBased}) {
    const auto& systems = cfg_.base.included_systems;
    const auto human = filter_judgments(of_granularity(in_.human, g), as_set(systems));
    if (human.empty()) continue;
    std::map<std::string, double> human_scores;
    for (const auto& [s, r] : run_trueskill(human, cfg_.rating, systems).ratings) {
      human_scores[s] = r.mu;
    }
    const auto ranking = ranking_from_scores(human_scores);
    std::ostringstream csv;
    csv << "x,metric,r,rho\n";
    for (const auto& [metric, view] : metric_views(SubsetName::kBase, unique_sentences(human))) {
      for (const auto& p : window_analysis(ranking, view.system, human_scores, cfg_.window)) {
        csv << p.x << ',' << metric << ',' << format_optional(p.r) << ',' << format_optional(p.rho)
            << '\n';
      }
    }
    write_text_file(out("plots/window_" + std::string(to_string(dataset_for(g))) + ".csv"),
                    csv.str());
  }
}

void Pipeline::write_distribution() const {
  std::vector<JudgeRecord> all_records;
  for (const auto& [label, run] : judge_runs_) {
    all_records.insert(all_records.end(), run.records.begin(), run.records.end());
  }
  write_text_file(out("plots/score_distribution.csv"),
                  distribution_csv(score_distribution(all_records)));
}

void Pipeline::write_report() const {
  write_table();
  write_windows();
  write_distribution();
}

void Pipeline::write_manifest() const {
  json inputs = json::object();
  auto add = [&](const std::string& rel) {
    if (!rel.empty()) inputs[rel] = sha256_file(cfg_.resolve(rel));
  };
  add(cfg_.corpus);
  add(cfg_.gold_m2);
  add(cfg_.judgments);
  for (const auto& [name, path] : cfg_.external_scores) add(path);
  for (const auto& o : in_.outputs) {
    add((fs::path(cfg_.systems_dir) / (o.system_name + ".txt")).string());
  }
  for (const auto& j : cfg_.judges) {
    if (j.mock && !j.mock->reference_path.empty()) add(j.mock->reference_path);
  }
  json seeds = {{"gleu", cfg_.metrics.rng_seed},
                {"trueskill_shuffle", cfg_.rating.shuffle_seed},
                {"bootstrap", cfg_.rating.shuffle_seed}};
  for (const auto& j : cfg_.judges) seeds["grouping"][j.label()] = j.group_seed;
  json manifest = {{"tool", "gecmeta"},
                   {"version", kToolVersion},
                   {"config", config_to_json(cfg_)},
                   {"seeds", seeds},
                   {"inputs", inputs}};
  write_text_file(out("manifest.json"), manifest.dump(2) + "\n");
}

}  // namespace gecmeta

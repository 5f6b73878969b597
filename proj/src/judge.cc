#include "gecmeta/judge.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace gecmeta {

using nlohmann::json;

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::kNone: return "none";
    case Criterion::kDifficulty: return "difficulty";
    case Criterion::kImpact: return "impact";
    case Criterion::kGrammaticality: return "grammaticality";
    case Criterion::kFluency: return "fluency";
    case Criterion::kMeaningPreservation: return "meaning_preservation";
  }
  return "none";
}

Criterion parse_criterion(std::string_view s) {
  for (Criterion c : {Criterion::kNone, Criterion::kDifficulty, Criterion::kImpact,
                      Criterion::kGrammaticality, Criterion::kFluency,
                      Criterion::kMeaningPreservation}) {
    if (to_string(c) == s) return c;
  }
  throw UsageError("unknown criterion '" + std::string(s) + "'");
}

void validate(const PromptSpec& spec) {
  const bool edit = spec.granularity == Granularity::kEditBased;
  switch (spec.criterion) {
    case Criterion::kDifficulty:
    case Criterion::kImpact:
      if (!edit) throw UsageError(std::string(to_string(spec.criterion)) + " needs edit_based");
      break;
    case Criterion::kGrammaticality:
    case Criterion::kFluency:
    case Criterion::kMeaningPreservation:
      if (edit) throw UsageError(std::string(to_string(spec.criterion)) + " needs sentence_based");
      break;
    case Criterion::kNone:
      break;
  }
  if (spec.max_targets < 1 || spec.max_targets > 5) throw UsageError("max_targets must be in 1..5");
}

std::string criterion_sentence(Criterion c) {
  switch (c) {
    case Criterion::kNone:
      return "";
    case Criterion::kDifficulty:
      return "Please evaluate each edit in the target with a focus on the difficulty of "
             "corrections.";
    case Criterion::kImpact:
      return "Please evaluate each edit in the target with a focus on its impact on the sentence.";
    case Criterion::kGrammaticality:
      return "Please evaluate each target with a focus on the grammaticality of the sentence.";
    case Criterion::kFluency:
      return "Please evaluate each target with a focus on the fluency of the sentence.";
    case Criterion::kMeaningPreservation:
      return "Please evaluate each target with a focus on preserving the meaning between each "
             "target and the source, which is the middle sentence in the context.";
  }
  return "";
}

const char* const kOutputFormatLine =
    "Return only a JSON object of the form {\"scores\": [s1, ..., sN]} where each si is an "
    "integer from 1 to 5.";

std::string build_prompt(const ContextedSentence& sentence, const std::vector<JudgeTarget>& targets,
                         const PromptSpec& spec) {
  validate(spec);
  if (targets.empty()) throw UsageError("build_prompt: no targets");
  if (static_cast<int>(targets.size()) > spec.max_targets) {
    throw UsageError("build_prompt: " + std::to_string(targets.size()) + " targets exceed max " +
                     std::to_string(spec.max_targets));
  }
  const bool edit = spec.granularity == Granularity::kEditBased;
  const std::string unit = edit ? "edits" : "sentence";
  std::ostringstream p;
  p << "The goal of this task is to rank the presented targets based on the quality of the "
    << (edit ? "edits" : "sentences") << ".\n";
  p << "The context consists of three sentences from an essay written by an English learner.\n";
  if (edit) {
    p << "In each target, every edit is shown as [original->corrected], and -NONE- marks an "
         "empty side.\n";
  }
  p << "After reading the context to understand the flow, please assign a score from a minimum of "
    << PromptSpec::kScoreMin << " point to a maximum of " << PromptSpec::kScoreMax
    << " points to each target based on the quality of the " << (edit ? "edits" : "sentence")
    << " (note that you can assign the same score multiple times).\n";
  if (spec.criterion != Criterion::kNone) p << criterion_sentence(spec.criterion) << "\n";
  p << "\n# context\n";
  for (const Tokens* line : {&sentence.previous, &sentence.source, &sentence.following}) {
    if (!line->empty()) p << join_tokens(*line) << "\n";
  }
  p << "\n# targets\n";
  for (const auto& t : targets) {
    p << (edit ? render_with_edits(sentence.source, t.edits) : join_tokens(t.hypothesis)) << "\n";
  }
  p << "\n# output format\n" << kOutputFormatLine << "\n";
  return p.str();
}

std::string prompt_hash(const std::string& prompt) { return sha256_hex(prompt); }

// --------------------------------------------------------------- parsing

namespace {

// End (exclusive) of the balanced {...} starting at `open`, honouring JSON
// string literals; npos if unbalanced.
size_t balanced_end(const std::string& s, size_t open) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string::npos;
}

}  // namespace

std::vector<int> parse_response(const std::string& raw, size_t expected_n, const PromptSpec& spec) {
  (void)spec;
  for (size_t open = raw.find('{'); open != std::string::npos; open = raw.find('{', open + 1)) {
    const size_t end = balanced_end(raw, open);
    if (end == std::string::npos) continue;
    json j = json::parse(raw.begin() + static_cast<long>(open), raw.begin() + static_cast<long>(end),
                         nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("scores")) continue;
    const json& arr = j["scores"];
    if (!arr.is_array()) throw ResponseError("\"scores\" is not an array");
    if (arr.size() != expected_n) {
      throw ResponseError("expected " + std::to_string(expected_n) + " scores, got " +
                          std::to_string(arr.size()));
    }
    std::vector<int> out;
    for (const auto& v : arr) {
      if (!v.is_number()) throw ResponseError("non-numeric score " + v.dump());
      const double d = v.get<double>();
      if (d != std::floor(d)) throw ResponseError("non-integer score " + v.dump());
      if (d < PromptSpec::kScoreMin || d > PromptSpec::kScoreMax) {
        throw ResponseError("score " + v.dump() + " outside " + std::to_string(PromptSpec::kScoreMin) +
                            "-" + std::to_string(PromptSpec::kScoreMax));
      }
      out.push_back(static_cast<int>(d));
    }
    return out;
  }
  throw ResponseError("no JSON object with a \"scores\" key");
}

// ---------------------------------------------------------------- clients

void validate(const ClientConfig& cfg) {
  if (cfg.max_retries < 0) throw UsageError("max_retries must be >= 0");
  if (cfg.max_in_flight < 1) throw UsageError("max_in_flight must be >= 1");
}

HttpJudgeClient::HttpJudgeClient(ClientConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  const std::string& url = cfg_.endpoint_url;
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw UsageError("endpoint must be an http(s) URL: " + url);
  const size_t path = url.find('/', scheme + 3);
  scheme_host_port_ = url.substr(0, path);
  path_ = path == std::string::npos ? "/" : url.substr(path);
  if (cfg_.model_id.empty()) throw UsageError("judge model id is empty");
}

std::string HttpJudgeClient::request_body(const std::string& model, const std::string& prompt,
                                          double temperature) {
  json body = {{"model", model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", temperature}};
  return body.dump();
}

std::string HttpJudgeClient::reply_content(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw EndpointError("endpoint reply is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw EndpointError("endpoint reply has no choices[0].message.content");
  }
}

std::string HttpJudgeClient::complete(const JudgeRequest& request) {
  httplib::Client cli(scheme_host_port_);
  cli.set_connection_timeout(cfg_.timeout_s, 0);
  cli.set_read_timeout(cfg_.timeout_s, 0);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  const std::string body = request_body(cfg_.model_id, request.prompt, cfg_.temperature);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry_backoff_ms) * (1 << std::min(attempt - 1, 6)));
    }
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return reply_content(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    const bool retryable = res->status == 408 || res->status == 429 || res->status >= 500;
    if (!retryable) break;
  }
  throw EndpointError("judge endpoint failed: " + last_error);
}

MockJudgeClient::MockJudgeClient(Mode mode, std::string model_id,
                                 std::map<std::string, Tokens> references)
    : mode_(mode), model_id_(std::move(model_id)), references_(std::move(references)) {}

MockJudgeClient::Mode MockJudgeClient::parse_mode(std::string_view s) {
  if (s == "edit_count") return Mode::kEditCount;
  if (s == "reference_distance") return Mode::kReferenceDistance;
  throw UsageError("unknown mock mode '" + std::string(s) + "'");
}

std::string MockJudgeClient::complete(const JudgeRequest& request) {
  ++calls_;
  if (!request.sentence || !request.targets) throw EndpointError("mock judge needs structured targets");
  json scores = json::array();
  for (const auto& t : *request.targets) {
    int score = 0;
    if (mode_ == Mode::kEditCount) {
      score = 5 - static_cast<int>(std::min<size_t>(4, t.edits.size()));
    } else {
      auto it = references_.find(request.sentence->id);
      if (it == references_.end()) {
        throw EndpointError("mock judge has no reference for '" + request.sentence->id + "'");
      }
      const size_t d = levenshtein_align(t.hypothesis, it->second).cost();
      score = 5 - static_cast<int>(std::min<size_t>(4, d));
    }
    scores.push_back(score);
  }
  return json{{"scores", scores}}.dump();
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::file_for(const std::string& model_id,
                                              const std::string& hash) const {
  std::string safe = model_id;
  for (char& c : safe) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
  }
  return dir_ / safe / (hash + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& model_id,
                                              const std::string& prompt) const {
  const auto path = file_for(model_id, prompt_hash(prompt));
  std::lock_guard<std::mutex> lock(mu_);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || j.value("model_id", "") != model_id || j.value("prompt", "") != prompt) {
    return std::nullopt;
  }
  return j.value("raw_response", "");
}

void ResponseCache::put(const std::string& model_id, const std::string& prompt,
                        const std::string& raw) {
  const auto path = file_for(model_id, prompt_hash(prompt));
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json j = {{"prompt", prompt}, {"raw_response", raw}, {"model_id", model_id}, {"timestamp", stamp}};
  std::lock_guard<std::mutex> lock(mu_);
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

// --------------------------------------------------------------- judging

std::vector<TargetGroup> make_groups(const std::vector<ContextedSentence>& corpus,
                                     std::vector<std::string> systems, int group_size,
                                     uint64_t seed) {
  if (group_size < 1) throw UsageError("group size must be >= 1");
  std::sort(systems.begin(), systems.end());
  systems.erase(std::unique(systems.begin(), systems.end()), systems.end());
  std::vector<TargetGroup> out;
  if (systems.empty()) return out;
  const size_t n = systems.size();
  const size_t groups = (n + static_cast<size_t>(group_size) - 1) / static_cast<size_t>(group_size);
  std::mt19937_64 rng(seed);
  for (const auto& s : corpus) {
    std::vector<std::string> order = systems;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    size_t pos = 0;
    for (size_t g = 0; g < groups; ++g) {
      const size_t size = n / groups + (g < n % groups ? 1 : 0);
      TargetGroup tg;
      tg.sentence_id = s.id;
      tg.group_index = static_cast<int>(g);
      tg.systems.assign(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(pos + size));
      pos += size;
      out.push_back(std::move(tg));
    }
  }
  return out;
}

std::vector<TargetGroup> groups_from_judgments(const std::vector<PairwiseJudgment>& judgments) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::map<std::string, int> next_index;
  std::vector<TargetGroup> out;
  for (const auto& j : judgments) {
    const auto& lo = std::min(j.system_a, j.system_b);
    const auto& hi = std::max(j.system_a, j.system_b);
    if (!seen.insert({j.sentence_id, lo, hi}).second) continue;
    out.push_back({j.sentence_id, next_index[j.sentence_id]++, {lo, hi}});
  }
  return out;
}

namespace {

struct Slot {
  std::optional<JudgeRecord> record;
  std::optional<JudgeFailure> failure;
};

}  // namespace

JudgeRun judge_all(const std::vector<ContextedSentence>& corpus,
                   const std::vector<SystemOutput>& outputs, const std::vector<TargetGroup>& groups,
                   const PromptSpec& spec, JudgeClient& client, const JudgeOptions& options) {
  validate(spec);
  std::map<std::string, const ContextedSentence*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;
  std::map<std::string, const SystemOutput*> by_system;
  for (const auto& o : outputs) by_system[o.system_name] = &o;
  for (const auto& g : groups) {
    if (!by_id.count(g.sentence_id)) throw DataError("group for unknown sentence '" + g.sentence_id + "'");
    if (g.systems.empty() || static_cast<int>(g.systems.size()) > spec.max_targets) {
      throw UsageError("group of " + std::to_string(g.systems.size()) +
                       " targets violates max_targets " + std::to_string(spec.max_targets));
    }
    for (const auto& s : g.systems) {
      if (!by_system.count(s)) throw DataError("group names unknown system '" + s + "'");
    }
  }

  const std::string model = client.model_id();
  std::atomic<int64_t> cache_hits{0};
  std::atomic<int64_t> calls{0};
  // Once a request has exhausted its retries, later groups are failed
  // without contacting the endpoint again (cache hits are still served).
  std::atomic<bool> endpoint_down{false};
  std::vector<Slot> slots(groups.size());

  auto ask = [&](const JudgeRequest& req) {
    if (options.cache) {
      if (auto hit = options.cache->get(model, req.prompt)) {
        ++cache_hits;
        return *hit;
      }
    }
    if (endpoint_down) throw EndpointError("skipped: the endpoint already failed in this run");
    ++calls;
    std::string raw = client.complete(req);
    if (options.cache) options.cache->put(model, req.prompt, raw);
    return raw;
  };

  auto work = [&](size_t k) {
    const TargetGroup& g = groups[k];
    const ContextedSentence& sentence = *by_id.at(g.sentence_id);
    std::vector<JudgeTarget> targets;
    for (const auto& s : g.systems) {
      const auto& hyps = by_system.at(s)->hypotheses;
      auto it = hyps.find(g.sentence_id);
      if (it == hyps.end()) {
        slots[k].failure = JudgeFailure{g.sentence_id, g.group_index,
                                        "system '" + s + "' has no output", false};
        return;
      }
      targets.push_back({s, it->second, diff_edits(sentence.source, it->second)});
    }
    JudgeRecord rec;
    rec.sentence_id = g.sentence_id;
    rec.group_index = g.group_index;
    rec.spec = spec;
    rec.model_id = model;
    rec.target_systems = g.systems;
    JudgeRequest req{build_prompt(sentence, targets, spec), &sentence, &targets};
    rec.prompt_hash = prompt_hash(req.prompt);
    try {
      rec.raw_response = ask(req);
      try {
        rec.scores = parse_response(rec.raw_response, targets.size(), spec);
      } catch (const ResponseError& first) {
        JudgeRequest repair = req;
        repair.prompt += "\nYour previous reply could not be used (" + std::string(first.what()) +
                         "). " + kOutputFormatLine + "\n";
        rec.raw_response = ask(repair);
        rec.prompt_hash = prompt_hash(repair.prompt);
        rec.scores = parse_response(rec.raw_response, targets.size(), spec);
      }
      slots[k].record = std::move(rec);
    } catch (const ResponseError& e) {
      slots[k].failure = JudgeFailure{g.sentence_id, g.group_index, e.what(), false};
    } catch (const EndpointError& e) {
      endpoint_down = true;
      slots[k].failure = JudgeFailure{g.sentence_id, g.group_index, e.what(), true};
    }
  };

  const size_t threads = std::clamp<size_t>(static_cast<size_t>(std::max(1, options.max_in_flight)), 1,
                                            std::max<size_t>(1, groups.size()));
  if (threads == 1) {
    for (size_t k = 0; k < groups.size(); ++k) work(k);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (size_t k = next++; k < groups.size(); k = next++) work(k);
      });
    }
    for (auto& th : pool) th.join();
  }

  JudgeRun run;
  for (auto& s : slots) {
    if (s.record) run.records.push_back(std::move(*s.record));
    if (s.failure) run.failures.push_back(std::move(*s.failure));
  }
  std::sort(run.records.begin(), run.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sentence_id, a.group_index) < std::tie(b.sentence_id, b.group_index);
  });
  std::sort(run.failures.begin(), run.failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sentence_id, a.group_index) < std::tie(b.sentence_id, b.group_index);
  });
  run.cache_hits = cache_hits;
  run.endpoint_calls = calls;
  return run;
}

std::vector<PairwiseJudgment> derive_pairwise(const std::vector<JudgeRecord>& records) {
  std::vector<PairwiseJudgment> out;
  for (const auto& r : records) {
    for (size_t i = 0; i < r.target_systems.size(); ++i) {
      for (size_t j = i + 1; j < r.target_systems.size(); ++j) {
        PairwiseJudgment pj;
        pj.sentence_id = r.sentence_id;
        pj.granularity = r.spec.granularity;
        pj.annotator_id = 0;
        pj.system_a = r.target_systems[i];
        pj.system_b = r.target_systems[j];
        pj.verdict = r.scores[i] > r.scores[j]   ? Verdict::kAWins
                     : r.scores[i] < r.scores[j] ? Verdict::kBWins
                                                 : Verdict::kTie;
        out.push_back(std::move(pj));
      }
    }
  }
  return out;
}

ScoreTable record_scores(const std::vector<JudgeRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (const auto& r : records) {
    for (size_t i = 0; i < r.target_systems.size(); ++i) {
      auto& [sum, n] = acc[{r.target_systems[i], r.sentence_id}];
      sum += r.scores[i];
      ++n;
    }
  }
  ScoreTable out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

std::map<std::string, ScoreHistogram> score_distribution(const std::vector<JudgeRecord>& records) {
  std::map<std::string, ScoreHistogram> out;
  for (const auto& r : records) {
    auto& h = out[r.model_id];
    for (int s : r.scores) {
      if (s < PromptSpec::kScoreMin || s > PromptSpec::kScoreMax) {
        throw DataError("record score " + std::to_string(s) + " outside 1-5");
      }
      ++h[static_cast<size_t>(s - 1)];
    }
  }
  return out;
}

std::string distribution_csv(const std::map<std::string, ScoreHistogram>& hist) {
  std::ostringstream out;
  out << "model,score,count\n";
  for (const auto& [model, h] : hist) {
    for (size_t k = 0; k < h.size(); ++k) out << model << ',' << k + 1 << ',' << h[k] << '\n';
  }
  return out.str();
}

void write_records(std::ostream& out, const std::vector<JudgeRecord>& records) {
  for (const auto& r : records) {
    json j = {{"sentence_id", r.sentence_id},
              {"group_index", r.group_index},
              {"granularity", to_string(r.spec.granularity)},
              {"criterion", to_string(r.spec.criterion)},
              {"max_targets", r.spec.max_targets},
              {"model_id", r.model_id},
              {"target_systems", r.target_systems},
              {"scores", r.scores},
              {"raw_response", r.raw_response},
              {"prompt_hash", r.prompt_hash}};
    out << j.dump() << '\n';
  }
}

std::vector<JudgeRecord> read_records(std::istream& in) {
  std::vector<JudgeRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      JudgeRecord r;
      r.sentence_id = j.at("sentence_id").get<std::string>();
      r.group_index = j.at("group_index").get<int>();
      r.spec.granularity = parse_granularity(j.at("granularity").get<std::string>());
      r.spec.criterion = parse_criterion(j.at("criterion").get<std::string>());
      r.spec.max_targets = j.value("max_targets", 5);
      r.model_id = j.at("model_id").get<std::string>();
      r.target_systems = j.at("target_systems").get<std::vector<std::string>>();
      r.scores = j.at("scores").get<std::vector<int>>();
      r.raw_response = j.at("raw_response").get<std::string>();
      r.prompt_hash = j.at("prompt_hash").get<std::string>();
      if (r.scores.size() != r.target_systems.size()) throw DataError("scores/targets size mismatch");
      for (int s : r.scores) {
        if (s < PromptSpec::kScoreMin || s > PromptSpec::kScoreMax) throw DataError("score out of range");
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("records line " + std::to_string(line_no) + ": " + e.what());
    } catch (const UsageError& e) {
      throw DataError("records line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_failures(std::ostream& out, const std::vector<JudgeFailure>& failures) {
  for (const auto& f : failures) {
    json j = {{"sentence_id", f.sentence_id},
              {"group_index", f.group_index},
              {"reason", f.reason},
              {"endpoint", f.endpoint}};
    out << j.dump() << '\n';
  }
}

}  // namespace gecmeta

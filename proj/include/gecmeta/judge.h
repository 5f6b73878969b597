// LLM-as-a-judge: prompt construction, endpoint and mock clients, response
// parsing, pairwise derivation and score histograms.

#ifndef GECMETA_JUDGE_H_
#define GECMETA_JUDGE_H_

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gecmeta/align.h"
#include "gecmeta/corpus.h"

namespace gecmeta {

enum class Criterion { kNone, kDifficulty, kImpact, kGrammaticality, kFluency, kMeaningPreservation };
std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view s);

struct PromptSpec {
  Granularity granularity = Granularity::kSentenceBased;
  Criterion criterion = Criterion::kNone;
  int max_targets = 5;
  static constexpr int kScoreMin = 1;
  static constexpr int kScoreMax = 5;
};

// Difficulty/impact require edit-based prompts, the sentence criteria require
// sentence-based ones; max_targets must be in [1, 5].
void validate(const PromptSpec& spec);

struct JudgeTarget {
  std::string system;
  Tokens hypothesis;
  std::vector<Edit> edits;  // against the source
};

// The sentence that ends the first paragraph for a given criterion; empty
// for kNone.
std::string criterion_sentence(Criterion c);
extern const char* const kOutputFormatLine;

std::string build_prompt(const ContextedSentence& sentence, const std::vector<JudgeTarget>& targets,
                         const PromptSpec& spec);
std::string prompt_hash(const std::string& prompt);

class ResponseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scores from the first JSON object in `raw` that has a "scores" key. Throws
// ResponseError on a missing object, wrong arity, non-integers or
// out-of-range values. Nothing is clamped.
std::vector<int> parse_response(const std::string& raw, size_t expected_n, const PromptSpec& spec);

// ---------------------------------------------------------------- clients

struct JudgeRequest {
  std::string prompt;
  const ContextedSentence* sentence = nullptr;
  const std::vector<JudgeTarget>* targets = nullptr;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string model_id() const = 0;
  // Returns the raw reply text. Throws EndpointError when retries run out.
  virtual std::string complete(const JudgeRequest& request) = 0;
};

struct ClientConfig {
  std::string endpoint_url;
  std::string model_id;
  std::string api_key;  // from GEC_JUDGE_API_KEY; never written to disk
  double temperature = 0;
  int max_retries = 3;
  int max_in_flight = 4;
  int retry_backoff_ms = 500;
  int timeout_s = 120;
  std::string cache_dir;
};

void validate(const ClientConfig& cfg);

// POSTs {"model","messages":[{"role":"user","content":prompt}],"temperature"}
// to an OpenAI-compatible chat-completions endpoint and returns
// choices[0].message.content.
class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(ClientConfig cfg);
  std::string model_id() const override { return cfg_.model_id; }
  std::string complete(const JudgeRequest& request) override;

  static std::string request_body(const std::string& model, const std::string& prompt,
                                  double temperature);
  static std::string reply_content(const std::string& body);

 private:
  ClientConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

// Deterministic stand-in for a chat model.
//   kEditCount:         score = 5 - min(4, |edits|)
//   kReferenceDistance: score = max(1, 5 - token edit distance to the
//                       sentence's reference)
class MockJudgeClient : public JudgeClient {
 public:
  enum class Mode { kEditCount, kReferenceDistance };

  explicit MockJudgeClient(Mode mode, std::string model_id = "mock-judge",
                           std::map<std::string, Tokens> references = {});
  std::string model_id() const override { return model_id_; }
  std::string complete(const JudgeRequest& request) override;
  int64_t calls() const { return calls_; }

  static Mode parse_mode(std::string_view s);

 private:
  Mode mode_;
  std::string model_id_;
  std::map<std::string, Tokens> references_;
  std::atomic<int64_t> calls_{0};
};

// One JSON file per (model, prompt hash). Writes are serialized.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& model_id, const std::string& prompt) const;
  void put(const std::string& model_id, const std::string& prompt, const std::string& raw);

 private:
  std::filesystem::path file_for(const std::string& model_id, const std::string& hash) const;
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

// --------------------------------------------------------------- judging

struct TargetGroup {
  std::string sentence_id;
  int group_index = 0;
  std::vector<std::string> systems;
};

// Per sentence (corpus order), shuffles the systems with one seeded
// generator and splits them into ceil(n / group_size) balanced groups.
std::vector<TargetGroup> make_groups(const std::vector<ContextedSentence>& corpus,
                                     std::vector<std::string> systems, int group_size,
                                     uint64_t seed);
// One two-target group per distinct (sentence, unordered system pair).
std::vector<TargetGroup> groups_from_judgments(const std::vector<PairwiseJudgment>& judgments);

struct JudgeRecord {
  std::string sentence_id;
  int group_index = 0;
  PromptSpec spec;
  std::string model_id;
  std::vector<std::string> target_systems;
  std::vector<int> scores;
  std::string raw_response;
  std::string prompt_hash;
};

struct JudgeFailure {
  std::string sentence_id;
  int group_index = 0;
  std::string reason;
  bool endpoint = false;  // true when the endpoint itself failed
};

struct JudgeRun {
  std::vector<JudgeRecord> records;    // sorted by (sentence_id, group_index)
  std::vector<JudgeFailure> failures;  // same order
  int64_t cache_hits = 0;
  int64_t endpoint_calls = 0;
};

struct JudgeOptions {
  int max_in_flight = 1;
  ResponseCache* cache = nullptr;
};

// Judges every group. A reply that fails validation triggers one repair
// request; a second failure becomes a JudgeFailure and the run continues.
// After the first endpoint failure, uncached groups fail without a request.
JudgeRun judge_all(const std::vector<ContextedSentence>& corpus,
                   const std::vector<SystemOutput>& outputs, const std::vector<TargetGroup>& groups,
                   const PromptSpec& spec, JudgeClient& client, const JudgeOptions& options = {});

// One judgment per unordered target pair inside each record.
std::vector<PairwiseJudgment> derive_pairwise(const std::vector<JudgeRecord>& records);

// (system, sentence) -> judge score, averaged when a system was scored more
// than once for a sentence.
ScoreTable record_scores(const std::vector<JudgeRecord>& records);

using ScoreHistogram = std::array<int64_t, 5>;  // counts of scores 1..5
std::map<std::string, ScoreHistogram> score_distribution(const std::vector<JudgeRecord>& records);
std::string distribution_csv(const std::map<std::string, ScoreHistogram>& hist);

void write_records(std::ostream& out, const std::vector<JudgeRecord>& records);
std::vector<JudgeRecord> read_records(std::istream& in);
void write_failures(std::ostream& out, const std::vector<JudgeFailure>& failures);

}  // namespace gecmeta

#endif  // GECMETA_JUDGE_H_

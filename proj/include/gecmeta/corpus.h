// Loading, validation and subsetting of all input data.
//
// File formats (all UTF-8, pre-tokenized with single spaces):
//   corpus.jsonl     {"id","previous","source","following"}
//   systems/<n>.txt  one hypothesis per line, aligned with corpus.jsonl
//   gold.m2          standard M2 "S ..." / "A s e|||type|||repl|||...|||ann"
//   judgments.jsonl  {"sentence_id","granularity","annotator","system_a",
//                     "system_b", "verdict"? | "score_a"+"score_b"}
//   scores.jsonl     {"system","sentence_id","score"}

#ifndef GECMETA_CORPUS_H_
#define GECMETA_CORPUS_H_

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gecmeta/align.h"
#include "gecmeta/common.h"

namespace gecmeta {

struct ContextedSentence {
  std::string id;
  Tokens previous;
  Tokens source;
  Tokens following;

  bool operator==(const ContextedSentence&) const = default;
};

struct SystemOutput {
  std::string system_name;
  std::map<std::string, Tokens> hypotheses;  // sentence id -> tokens
};

struct GoldAnnotation {
  std::string sentence_id;
  int annotator_id = 0;
  std::vector<Edit> edits;
};

struct PairwiseJudgment {
  std::string sentence_id;
  Granularity granularity = Granularity::kSentenceBased;
  int annotator_id = 0;
  std::string system_a;
  std::string system_b;
  Verdict verdict = Verdict::kTie;

  bool operator==(const PairwiseJudgment&) const = default;
};

enum class SubsetName { kBase, kPlusFluent };
std::string_view to_string(SubsetName s);
SubsetName parse_subset(std::string_view s);

struct SubsetSpec {
  SubsetName name = SubsetName::kBase;
  std::vector<std::string> included_systems;  // ordered, unique
};

// Checks base ⊂ plus_fluent with exactly two extra systems.
void validate_subset_pair(const SubsetSpec& base, const SubsetSpec& plus_fluent);

// What judgment validation checks names against. Unset members skip the
// corresponding check.
struct JudgmentUniverse {
  std::optional<std::set<std::string>> systems;
  std::optional<std::set<std::string>> sentence_ids;
};

// (system, sentence_id) -> score
using ScoreTable = std::map<std::pair<std::string, std::string>, double>;

std::vector<ContextedSentence> read_corpus(std::istream& in);
std::vector<ContextedSentence> load_corpus(const std::string& path);
void write_corpus(std::ostream& out, const std::vector<ContextedSentence>& corpus);

// Reads every <name>.txt in `dir` (sorted by name).
std::vector<SystemOutput> load_system_outputs(
    const std::string& dir, const std::vector<ContextedSentence>& corpus);
SystemOutput read_system_output(std::istream& in, std::string name,
                                const std::vector<ContextedSentence>& corpus);

// Reads an M2 file. Block k is assigned sentence id `ids[k]` when ids are
// given (their count must match) and the decimal index k otherwise.
std::vector<GoldAnnotation> read_m2(std::istream& in, std::span<const std::string> ids = {});
std::vector<GoldAnnotation> load_m2_file(const std::string& path,
                                         std::span<const std::string> ids = {});

std::vector<PairwiseJudgment> read_judgments(std::istream& in,
                                             const JudgmentUniverse& universe = {});
std::vector<PairwiseJudgment> load_judgments(const std::string& path,
                                             const JudgmentUniverse& universe = {});
void write_judgments(std::ostream& out, const std::vector<PairwiseJudgment>& judgments);

struct SubsetSelection {
  std::vector<PairwiseJudgment> judgments;
  std::vector<SystemOutput> outputs;
};

// Keeps judgments whose two systems are both in the subset, and the outputs
// of subset systems.
SubsetSelection select_subset(const std::vector<PairwiseJudgment>& judgments,
                              const std::vector<SystemOutput>& outputs, const SubsetSpec& spec);
std::vector<PairwiseJudgment> filter_judgments(const std::vector<PairwiseJudgment>& judgments,
                                               const std::set<std::string>& systems);

ScoreTable read_external_scores(std::istream& in);
ScoreTable load_external_scores(const std::string& path);
void write_external_scores(std::ostream& out, const ScoreTable& scores);

// Each annotator's edits applied to the source: one reference per annotator.
std::map<std::string, std::vector<Tokens>> references_from_gold(
    const std::vector<ContextedSentence>& corpus, const std::vector<GoldAnnotation>& gold);

// Gold annotations grouped per sentence id.
std::map<std::string, std::vector<GoldAnnotation>> group_by_sentence(
    const std::vector<GoldAnnotation>& gold);

}  // namespace gecmeta

#endif  // GECMETA_CORPUS_H_

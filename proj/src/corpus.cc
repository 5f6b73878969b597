#include "gecmeta/corpus.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gecmeta {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string where(size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

json parse_json_line(const std::string& line, size_t line_no) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw DataError(where(line_no) + "expected a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw DataError(where(line_no) + "malformed JSON: " + e.what());
  }
}

std::string get_string(const json& j, const char* key, size_t line_no) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(where(line_no) + "missing key '" + key + "'");
  if (!it->is_string()) throw DataError(where(line_no) + "key '" + key + "' is not a string");
  return it->get<std::string>();
}

std::string get_optional_string(const json& j, const char* key, size_t line_no) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw DataError(where(line_no) + "key '" + key + "' is not a string");
  return it->get<std::string>();
}

int get_int(const json& j, const char* key, size_t line_no) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(where(line_no) + "missing key '" + key + "'");
  if (!it->is_number_integer()) {
    throw DataError(where(line_no) + "key '" + key + "' is not an integer");
  }
  return it->get<int>();
}

std::string format_score(double v) {
  json j = v;
  return j.dump();
}

}  // namespace

std::string_view to_string(SubsetName s) {
  return s == SubsetName::kBase ? "base" : "plus_fluent";
}

SubsetName parse_subset(std::string_view s) {
  if (s == "base") return SubsetName::kBase;
  if (s == "plus_fluent") return SubsetName::kPlusFluent;
  throw UsageError("unknown subset '" + std::string(s) + "' (expected base or plus_fluent)");
}

void validate_subset_pair(const SubsetSpec& base, const SubsetSpec& plus_fluent) {
  std::set<std::string> b(base.included_systems.begin(), base.included_systems.end());
  std::set<std::string> p(plus_fluent.included_systems.begin(),
                          plus_fluent.included_systems.end());
  if (b.size() != base.included_systems.size() || p.size() != plus_fluent.included_systems.size()) {
    throw DataError("subset lists contain duplicate systems");
  }
  for (const auto& s : b) {
    if (!p.count(s)) throw DataError("base system '" + s + "' missing from plus_fluent");
  }
  if (p.size() != b.size() + 2) {
    throw DataError("plus_fluent must add exactly two systems to base (adds " +
                    std::to_string(p.size() - b.size()) + ")");
  }
}

// ---------------------------------------------------------------- corpus

std::vector<ContextedSentence> read_corpus(std::istream& in) {
  std::vector<ContextedSentence> out;
  std::set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json j = parse_json_line(line, line_no);
    ContextedSentence s;
    s.id = get_string(j, "id", line_no);
    s.previous = split_tokens(get_optional_string(j, "previous", line_no));
    s.source = split_tokens(get_string(j, "source", line_no));
    s.following = split_tokens(get_optional_string(j, "following", line_no));
    if (s.id.empty()) throw DataError(where(line_no) + "empty sentence id");
    if (s.source.empty()) throw DataError(where(line_no) + "empty source for '" + s.id + "'");
    if (!seen.insert(s.id).second) throw DataError(where(line_no) + "duplicate id '" + s.id + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ContextedSentence> load_corpus(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_corpus(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_corpus(std::ostream& out, const std::vector<ContextedSentence>& corpus) {
  for (const auto& s : corpus) {
    json j = {{"id", s.id},
              {"previous", join_tokens(s.previous)},
              {"source", join_tokens(s.source)},
              {"following", join_tokens(s.following)}};
    out << j.dump() << '\n';
  }
}

// --------------------------------------------------------------- systems

SystemOutput read_system_output(std::istream& in, std::string name,
                                const std::vector<ContextedSentence>& corpus) {
  SystemOutput out;
  out.system_name = std::move(name);
  std::string line;
  size_t k = 0;
  while (std::getline(in, line)) {
    if (k >= corpus.size()) {
      if (is_blank(line)) continue;
      throw DataError("system '" + out.system_name + "' has more lines than the corpus (" +
                      std::to_string(corpus.size()) + ")");
    }
    out.hypotheses[corpus[k].id] = split_tokens(line);
    ++k;
  }
  if (k != corpus.size()) {
    throw DataError("system '" + out.system_name + "' has " + std::to_string(k) +
                    " lines, corpus has " + std::to_string(corpus.size()));
  }
  return out;
}

std::vector<SystemOutput> load_system_outputs(const std::string& dir,
                                              const std::vector<ContextedSentence>& corpus) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("systems directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SystemOutput> out;
  for (const auto& f : files) {
    auto in = open_input(f.string());
    out.push_back(read_system_output(in, f.stem().string(), corpus));
  }
  return out;
}

// -------------------------------------------------------------------- M2

std::vector<GoldAnnotation> read_m2(std::istream& in, std::span<const std::string> ids) {
  struct Block {
    size_t source_length = 0;
    std::map<int, std::vector<Edit>> by_annotator;
  };
  std::vector<Block> blocks;
  std::string line;
  size_t line_no = 0;
  bool in_block = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      in_block = false;
      continue;
    }
    if (line.rfind("S ", 0) == 0 || line == "S") {
      blocks.emplace_back();
      blocks.back().source_length = split_tokens(std::string_view(line).substr(1)).size();
      in_block = true;
      continue;
    }
    if (line.rfind("A ", 0) != 0) throw DataError(where(line_no) + "unrecognized M2 line");
    if (!in_block) throw DataError(where(line_no) + "A-line before any S-line");

    std::vector<std::string> fields;
    std::string_view rest = std::string_view(line).substr(2);
    for (size_t pos = 0;;) {
      size_t next = rest.find("|||", pos);
      fields.emplace_back(rest.substr(pos, next == std::string_view::npos ? next : next - pos));
      if (next == std::string_view::npos) break;
      pos = next + 3;
    }
    if (fields.size() < 3) throw DataError(where(line_no) + "A-line has too few fields");
    long long start = 0;
    long long end = 0;
    {
      std::istringstream span(fields[0]);
      if (!(span >> start >> end)) throw DataError(where(line_no) + "bad span '" + fields[0] + "'");
    }
    int annotator = 0;
    if (fields.size() >= 6) {
      try {
        annotator = std::stoi(fields[5]);
      } catch (const std::exception&) {
        throw DataError(where(line_no) + "bad annotator id '" + fields[5] + "'");
      }
      if (annotator < 0) throw DataError(where(line_no) + "negative annotator id");
    }
    Block& block = blocks.back();
    auto& edits = block.by_annotator[annotator];
    const std::string& type = fields[1];
    if (type == "noop" || (start == -1 && end == -1)) continue;
    if (start < 0 || end < 0) throw DataError(where(line_no) + "negative span");
    if (end < start) throw DataError(where(line_no) + "span end < start");
    if (static_cast<size_t>(end) > block.source_length) {
      throw DataError(where(line_no) + "span exceeds source length");
    }
    Edit e;
    e.start = static_cast<size_t>(start);
    e.end = static_cast<size_t>(end);
    if (fields[2] != "-NONE-") e.replacement = split_tokens(fields[2]);
    e.label = type;
    edits.push_back(std::move(e));
  }

  if (!ids.empty() && ids.size() != blocks.size()) {
    throw DataError("M2 file has " + std::to_string(blocks.size()) + " sentences but " +
                    std::to_string(ids.size()) + " ids were given");
  }
  std::vector<GoldAnnotation> out;
  for (size_t k = 0; k < blocks.size(); ++k) {
    Block& block = blocks[k];
    std::string id = ids.empty() ? std::to_string(k) : ids[k];
    if (block.by_annotator.empty()) block.by_annotator[0];
    for (auto& [annotator, edits] : block.by_annotator) {
      std::stable_sort(edits.begin(), edits.end(), edit_less);
      try {
        validate_edits(edits, block.source_length);
      } catch (const DataError& e) {
        throw DataError("M2 sentence " + std::to_string(k) + " annotator " +
                        std::to_string(annotator) + ": " + e.what());
      }
      out.push_back({id, annotator, std::move(edits)});
    }
  }
  return out;
}

std::vector<GoldAnnotation> load_m2_file(const std::string& path, std::span<const std::string> ids) {
  auto in = open_input(path);
  try {
    return read_m2(in, ids);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// ------------------------------------------------------------- judgments

std::vector<PairwiseJudgment> read_judgments(std::istream& in, const JudgmentUniverse& universe) {
  std::vector<PairwiseJudgment> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json j = parse_json_line(line, line_no);
    PairwiseJudgment pj;
    pj.sentence_id = get_string(j, "sentence_id", line_no);
    try {
      pj.granularity = parse_granularity(get_string(j, "granularity", line_no));
    } catch (const DataError& e) {
      throw DataError(where(line_no) + e.what());
    }
    pj.annotator_id = j.contains("annotator") ? get_int(j, "annotator", line_no) : 0;
    pj.system_a = get_string(j, "system_a", line_no);
    pj.system_b = get_string(j, "system_b", line_no);
    if (pj.system_a == pj.system_b) {
      throw DataError(where(line_no) + "system_a and system_b are both '" + pj.system_a + "'");
    }
    if (universe.systems) {
      for (const auto* s : {&pj.system_a, &pj.system_b}) {
        if (!universe.systems->count(*s)) throw DataError(where(line_no) + "unknown system '" + *s + "'");
      }
    }
    if (universe.sentence_ids && !universe.sentence_ids->count(pj.sentence_id)) {
      throw DataError(where(line_no) + "unknown sentence id '" + pj.sentence_id + "'");
    }
    const bool has_scores = j.contains("score_a") || j.contains("score_b");
    std::optional<Verdict> from_scores;
    if (has_scores) {
      const int a = get_int(j, "score_a", line_no);
      const int b = get_int(j, "score_b", line_no);
      for (int s : {a, b}) {
        if (s < 1 || s > 5) {
          throw DataError(where(line_no) + "score " + std::to_string(s) + " outside 1-5");
        }
      }
      from_scores = a > b ? Verdict::kAWins : a < b ? Verdict::kBWins : Verdict::kTie;
    }
    if (j.contains("verdict") && !j["verdict"].is_null()) {
      try {
        pj.verdict = parse_verdict(get_string(j, "verdict", line_no));
      } catch (const DataError& e) {
        throw DataError(where(line_no) + e.what());
      }
      if (from_scores && *from_scores != pj.verdict) {
        throw DataError(where(line_no) + "verdict contradicts score_a/score_b");
      }
    } else if (from_scores) {
      pj.verdict = *from_scores;
    } else {
      throw DataError(where(line_no) + "judgment needs a verdict or score_a/score_b");
    }
    out.push_back(std::move(pj));
  }
  return out;
}

std::vector<PairwiseJudgment> load_judgments(const std::string& path,
                                             const JudgmentUniverse& universe) {
  auto in = open_input(path);
  try {
    return read_judgments(in, universe);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_judgments(std::ostream& out, const std::vector<PairwiseJudgment>& judgments) {
  for (const auto& pj : judgments) {
    json j = {{"sentence_id", pj.sentence_id},
              {"granularity", to_string(pj.granularity)},
              {"annotator", pj.annotator_id},
              {"system_a", pj.system_a},
              {"system_b", pj.system_b},
              {"verdict", to_string(pj.verdict)}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------- subset

std::vector<PairwiseJudgment> filter_judgments(const std::vector<PairwiseJudgment>& judgments,
                                               const std::set<std::string>& systems) {
  std::vector<PairwiseJudgment> out;
  std::copy_if(judgments.begin(), judgments.end(), std::back_inserter(out),
               [&](const PairwiseJudgment& j) {
                 return systems.count(j.system_a) && systems.count(j.system_b);
               });
  return out;
}

SubsetSelection select_subset(const std::vector<PairwiseJudgment>& judgments,
                              const std::vector<SystemOutput>& outputs, const SubsetSpec& spec) {
  const std::set<std::string> keep(spec.included_systems.begin(), spec.included_systems.end());
  SubsetSelection out;
  out.judgments = filter_judgments(judgments, keep);
  for (const auto& o : outputs) {
    if (keep.count(o.system_name)) out.outputs.push_back(o);
  }
  return out;
}

// ---------------------------------------------------------------- scores

ScoreTable read_external_scores(std::istream& in) {
  ScoreTable out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json j = parse_json_line(line, line_no);
    std::string system = get_string(j, "system", line_no);
    std::string sid = get_string(j, "sentence_id", line_no);
    auto it = j.find("score");
    if (it == j.end() || !it->is_number()) {
      throw DataError(where(line_no) + "score is missing or not numeric");
    }
    const double score = it->get<double>();
    if (!std::isfinite(score)) throw DataError(where(line_no) + "score is not finite");
    auto [pos, inserted] = out.emplace(std::make_pair(system, sid), score);
    if (!inserted && pos->second != score) {
      throw DataError(where(line_no) + "conflicting duplicate score for (" + system + ", " + sid + ")");
    }
  }
  return out;
}

ScoreTable load_external_scores(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_external_scores(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_external_scores(std::ostream& out, const ScoreTable& scores) {
  for (const auto& [key, score] : scores) {
    out << "{\"system\":" << json(key.first).dump() << ",\"sentence_id\":"
        << json(key.second).dump() << ",\"score\":" << format_score(score) << "}\n";
  }
}

// ------------------------------------------------------------------ gold

std::map<std::string, std::vector<GoldAnnotation>> group_by_sentence(
    const std::vector<GoldAnnotation>& gold) {
  std::map<std::string, std::vector<GoldAnnotation>> out;
  for (const auto& g : gold) out[g.sentence_id].push_back(g);
  for (auto& [id, anns] : out) {
    std::stable_sort(anns.begin(), anns.end(), [](const GoldAnnotation& a, const GoldAnnotation& b) {
      return a.annotator_id < b.annotator_id;
    });
  }
  return out;
}

std::map<std::string, std::vector<Tokens>> references_from_gold(
    const std::vector<ContextedSentence>& corpus, const std::vector<GoldAnnotation>& gold) {
  std::map<std::string, const ContextedSentence*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;
  std::map<std::string, std::vector<Tokens>> out;
  for (const auto& [id, anns] : group_by_sentence(gold)) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("gold annotation for unknown sentence '" + id + "'");
    for (const auto& a : anns) out[id].push_back(apply_edits(it->second->source, a.edits));
  }
  return out;
}

}  // namespace gecmeta

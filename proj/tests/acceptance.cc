// Acceptance checks, one PASS/FAIL/SKIP line per criterion. Exits nonzero
// if any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "gecmeta/metaeval.h"
#include "gecmeta/metrics.h"
#include "gecmeta/pipeline.h"
#include "gecmeta/rating.h"
#include "oracles.h"

using namespace gecmeta;
namespace fs = std::filesystem;

namespace {

enum class Outcome { kPass, kFail, kSkip };

struct Result {
  Outcome outcome;
  std::string detail;
};

Result pass(std::string d) { return {Outcome::kPass, std::move(d)}; }
Result fail(std::string d) { return {Outcome::kFail, std::move(d)}; }

const fs::path kFixture = fs::path(GECMETA_SOURCE_DIR) / "data" / "fixture";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gecmeta_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GECMETA_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (!line.empty() && line.back() == ',') f.push_back("");
    rows.push_back(f);
  }
  return rows;
}

// reports/table.csv cell lookup; nullopt when the row or value is missing.
std::optional<double> table_value(const fs::path& table, const std::string& metric,
                                  const std::string& dataset, const std::string& subset,
                                  const std::string& column) {
  const auto rows = read_csv(table);
  if (rows.empty()) return std::nullopt;
  const auto& h = rows[0];
  const size_t c = static_cast<size_t>(std::find(h.begin(), h.end(), column) - h.begin());
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == h.size() && r[0] == metric && r[1] == dataset && r[2] == subset) {
      if (c >= r.size() || r[c].empty()) return std::nullopt;
      return std::stod(r[c]);
    }
  }
  return std::nullopt;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

// --------------------------------------------------------------- criteria

Result statistics_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 1);
  double worst = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const size_t n = 3 + rng() % 498;
    const bool ties = inst % 2 == 1;
    std::vector<double> x(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = ties ? static_cast<double>(rng() % 7) : g(rng);
      y[i] = ties ? static_cast<double>(rng() % 5) : 0.3 * x[i] + g(rng);
    }
    try {
      worst = std::max(worst, std::abs(pearson(x, y) - oracle::pearson(x, y)));
      worst = std::max(worst, std::abs(spearman(x, y) - oracle::spearman(x, y)));
    } catch (const UndefinedCorrelation&) {
      // Constant vectors are possible only in the tiny tied instances.
    }

    // Pairwise agreement on n judgments over random scores.
    ScoreTable scores;
    std::vector<PairwiseJudgment> js;
    std::vector<int> human;
    std::vector<double> sa, sb;
    for (size_t k = 0; k < n; ++k) {
      const std::string sid = "s" + std::to_string(k % 37);
      const std::string a = "A" + std::to_string(rng() % 6);
      std::string b;
      do b = "A" + std::to_string(rng() % 6); while (b == a);
      for (const auto& s : {a, b}) {
        if (!scores.count({s, sid})) scores[{s, sid}] = ties ? std::round(g(rng)) : g(rng);
      }
      const int h = static_cast<int>(rng() % 3) - 1;
      js.push_back({sid, Granularity::kSentenceBased, 0, a, b,
                    h > 0 ? Verdict::kAWins : h < 0 ? Verdict::kBWins : Verdict::kTie});
      human.push_back(h);
      sa.push_back(scores.at({a, sid}));
      sb.push_back(scores.at({b, sid}));
    }
    const auto got = kendall_pairwise(js, scores);
    const auto want = oracle::agreement(human, sa, sb, 0);
    worst = std::max(worst, std::abs(got.acc - want.acc));
    if (got.tau.has_value() != want.tau_defined) return fail("tau definedness differs at instance " + std::to_string(inst));
    if (got.tau) worst = std::max(worst, std::abs(*got.tau - want.tau));
  }
  const double secs = seconds_since(t0);
  const std::string d = "max |diff| " + fmt(worst) + ", " + fmt(secs) + " s";
  return worst <= 1e-9 && secs < 10 ? pass(d) : fail(d);
}

Result gleu_checks() {
  MetricConfig cfg;
  const auto T = [](const char* s) { return split_tokens(s); };
  const double same = gleu_sentence(T("x y z w"), T("a b c d e"), {T("a b c d e")}, cfg);
  if (same != 1.0) return fail("H==R gave " + fmt(same));
  const double penalty = gleu_sentence(T("a b"), T("a b"), {T("a c")}, cfg);
  if (penalty != 0.0) return fail("penalty case gave " + fmt(penalty));

  const std::vector<ContextedSentence> corpus = {
      {"1", {}, T("he go to school yesterday ."), {}},
      {"2", {}, T("she have many book in her bag ."), {}},
      {"3", {}, T("it are a good idea , i think ."), {}},
  };
  const std::map<std::string, std::vector<Tokens>> refs = {
      {"1", {T("he went to school yesterday ."), T("he goes to school .")}},
      {"2", {T("she has many books in her bag .")}},
      {"3", {T("it is a good idea , i think ."), T("i think it is a good idea .")}},
  };
  const std::vector<SystemOutput> outputs = {
      {"fixed", {{"1", T("he went to school yesterday .")}, {"2", T("she has many books in her bag .")},
                 {"3", T("it is a good idea , i think .")}}},
      {"partial", {{"1", T("he goes to school yesterday .")}, {"2", T("she have many books in her bag .")},
                   {"3", T("it are a good idea , i think .")}}},
  };
  cfg.rng_seed = 7;
  const auto got = gleu_corpus(outputs, corpus, refs, cfg);
  double worst = 0;
  for (const auto& sys : outputs) {
    std::vector<oracle::Words> src, hyp;
    std::vector<std::vector<oracle::Words>> r;
    for (const auto& s : corpus) {
      src.push_back(s.source);
      hyp.push_back(sys.hypotheses.at(s.id));
      r.push_back(refs.at(s.id));
    }
    worst = std::max(worst, std::abs(got.at(sys.system_name) -
                                     oracle::gleu_corpus(src, hyp, r, cfg.gleu_max_n, cfg.gleu_iterations, 7)));
  }
  const std::string d = "H==R 1.0, penalty 0.0, corpus max |diff| " + fmt(worst);
  return worst <= 1e-12 ? pass(d) : fail(d);
}

Result m2_checks() {
  const double a = f_beta(MatchCounts{2, 0, 0}, 0.5);
  const double b = f_beta(MatchCounts{1, 1, 1}, 0.5);
  const double c = f_beta(MatchCounts{3, 1, 2}, 0.5);
  if (a != 1.0 || std::abs(b - 0.5) > 1e-15 || std::abs(c - 0.714286) > 1e-6) {
    return fail("F0.5 cases gave " + fmt(a) + ", " + fmt(b) + ", " + fmt(c));
  }
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const size_t n = 6 + rng() % 10;
    std::vector<GoldAnnotation> gold;
    const int annotators = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < annotators; ++k) {
      std::vector<Edit> edits;
      for (size_t p = 0; p < n; ++p) {
        if (rng() % 3 == 0) edits.push_back(Edit{p, p + 1, {std::string(1, 'a' + rng() % 3)}, {}});
      }
      gold.push_back({"s", k, edits});
    }
    std::vector<Edit> hyp;
    for (size_t p = 0; p < n; ++p) {
      if (rng() % 3 == 0) hyp.push_back(Edit{p, p + 1, {std::string(1, 'a' + rng() % 3)}, {}});
    }
    DifficultyTable unit;
    for (const auto& g : gold) {
      for (const auto& e : g.edits) unit.weight[{"s", e.start, e.end, e.replacement}] = 1.0;
    }
    const double go = gotoscorer("s", hyp, gold, unit, 0.5);
    const double m2 = f_beta(m2_counts(hyp, gold, 0.5).counts, 0.5);
    if (go != m2) return fail("fixture " + std::to_string(i) + ": GoToScorer " + fmt(go) + " vs M2 " + fmt(m2));
  }
  return pass("F0.5 cases exact; unit-weight GoToScorer equals M2 on 100 fixtures");
}

Result trueskill_checks() {
  const auto [w, l] = trueskill_update({0, 0.5}, {0, 0.5}, Verdict::kAWins, 0.25, 0.0);
  const auto m = oracle::win_posterior(0, 0.25, 0, 0.25, 0.25, 0.0);
  if (std::abs(w.mu - m.mean_a) > 1e-3 || std::abs(w.mu - 0.2523) > 1e-3) {
    return fail("winner mu " + fmt(w.mu) + " vs oracle " + fmt(m.mean_a));
  }
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> mu(-2, 2), sig(0.01, 1), eps(0, 0.5);
  for (int i = 0; i < 10000; ++i) {
    const Rating a{mu(rng), sig(rng)};
    const Rating b{mu(rng), sig(rng)};
    const double e = eps(rng);
    const Verdict v = static_cast<Verdict>(rng() % 3);
    const auto [na, nb] = trueskill_update(a, b, v, 0.25, e);
    const auto [sb, sa] = trueskill_update(b, a, flip(v), 0.25, e);
    if (!(na == sa && nb == sb)) return fail("asymmetric update at step " + std::to_string(i));
    if (na.sigma > a.sigma || nb.sigma > b.sigma) return fail("sigma grew at step " + std::to_string(i));
    if (v == Verdict::kAWins && (na.mu < a.mu || nb.mu > b.mu)) return fail("wrong direction at step " + std::to_string(i));
  }
  return pass("winner mu " + fmt(w.mu) + " (oracle " + fmt(m.mean_a) + "); 10k invariants hold");
}

Result rank_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 1;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<PairwiseJudgment> js;
    for (int k = 0; k < 5000; ++k) {
      const int a = static_cast<int>(rng() % 12);
      int b = static_cast<int>(rng() % 11);
      if (b >= a) ++b;
      Verdict v = a < b ? Verdict::kAWins : Verdict::kBWins;
      if (u(rng) < 0.1) v = flip(v);
      js.push_back({"s" + std::to_string(k % 100), Granularity::kSentenceBased, 0, "S" + std::to_string(a),
                    "S" + std::to_string(b), v});
    }
    RatingConfig cfg;
    cfg.shuffle_seed = seed;
    const auto r = run_trueskill(js, cfg).ratings;
    std::vector<double> truth, got;
    for (int i = 0; i < 12; ++i) {
      truth.push_back(12 - i);
      got.push_back(r.at("S" + std::to_string(i)).mu);
    }
    worst = std::min(worst, spearman(truth, got));
  }
  const double secs = seconds_since(t0);
  const std::string d = "min Spearman " + fmt(worst) + " over 20 seeds, " + fmt(secs) + " s";
  return worst >= 0.9 && secs < 30 ? pass(d) : fail(d);
}

Result determinism(const fs::path& work) {
  const std::string config = (kFixture / "config.json").string();
  const auto a = work / "a", b = work / "b", c = work / "c";
  if (cli("run-all --mock --config " + config + " --out " + a.string(), work / "log_a") != 0 ||
      cli("run-all --mock --config " + config + " --out " + b.string(), work / "log_b") != 0 ||
      cli("run-all --mock --threads 4 --config " + config + " --out " + c.string(), work / "log_c") != 0) {
    return fail("run-all --mock exited nonzero");
  }
  const auto ta = tree(a);
  if (ta.empty()) return fail("empty output tree");
  if (ta != tree(b)) return fail("two runs differ");
  if (ta != tree(c)) return fail("--threads 4 differs from --threads 1");
  return pass(std::to_string(ta.size()) + " files identical across 2 runs and 1 vs 4 threads");
}

Result judge_beats_baseline(const fs::path& run) {
  const auto table = run / "reports" / "table.csv";
  double margin = 1e9;
  std::string d;
  for (const char* subset : {"base", "plus_fluent"}) {
    const auto judge = table_value(table, "mock-fluency-S+fluency", "seeda_s", subset, "tau");
    const auto base = table_value(table, "Baseline", "seeda_s", subset, "tau");
    if (!judge || !base) return fail(std::string("missing tau for ") + subset);
    margin = std::min(margin, *judge - *base);
    d += std::string(subset) + ": judge " + fmt(*judge) + " vs baseline " + fmt(*base) + "; ";
  }
  d += "min margin " + fmt(margin);
  return margin >= 0.1 ? pass(d) : fail(d);
}

Result window_checks(const fs::path& run) {
  // The emitted plot: 9 points at x = 4..12 for every metric on the base subset.
  std::map<std::string, std::vector<int>> xs;
  const auto rows = read_csv(run / "plots" / "window_seeda_e.csv");
  if (rows.size() < 2) return fail("window plot missing");
  for (size_t i = 1; i < rows.size(); ++i) xs[rows[i][1]].push_back(std::stoi(rows[i][0]));
  std::vector<int> want;
  for (int x = 4; x <= 12; ++x) want.push_back(x);
  for (const auto& [metric, v] : xs) {
    if (v != want) return fail("metric " + metric + " has x values not equal to 4..12");
  }

  // window = n reproduces the full-set correlation on the same inputs.
  const auto cfg = load_run_config((kFixture / "config.json").string());
  Pipeline p(cfg, load_inputs(cfg));
  const auto human = read_ranking_scores((run / "rankings" / "human_seeda_e_base.csv").string());
  std::vector<std::string> ids;
  for (const auto& s : p.inputs().corpus) ids.push_back(s.id);
  const auto ranking = ranking_from_scores(human);
  double worst = 0;
  for (const auto& [metric, view] : p.metric_views(SubsetName::kBase, ids)) {
    const auto pts = window_analysis(ranking, view.system, human, 4);
    if (pts.size() != 9 || pts.front().x != 4 || pts.back().x != 12) return fail(metric + ": wrong window points");
    const auto full = window_analysis(ranking, view.system, human, static_cast<int>(ranking.size()));
    const auto whole = system_level_eval(human, view.system);
    if (full.size() != 1 || full[0].r.has_value() != whole.r.has_value()) return fail(metric + ": full window shape");
    if (whole.r) worst = std::max(worst, std::abs(*full[0].r - *whole.r));
    if (whole.rho) worst = std::max(worst, std::abs(*full[0].rho - *whole.rho));
  }
  const std::string d = std::to_string(xs.size()) + " metrics with x = 4..12; window = n max |diff| " + fmt(worst);
  return worst <= 1e-12 ? pass(d) : fail(d);
}

// Optional reproduction on user-supplied SEEDA-format data. GEC_SEEDA_DIR
// must hold config.json (run-config format) and human_seeda_e.csv (columns
// system,score with the human TrueSkill scores of the SEEDA-E base systems).
Result seeda_reproduction(const fs::path& work) {
  const char* dir = std::getenv("GEC_SEEDA_DIR");
  if (!dir || !*dir) return {Outcome::kSkip, "GEC_SEEDA_DIR not set"};
  const fs::path root(dir);
  if (!fs::exists(root / "config.json") || !fs::exists(root / "human_seeda_e.csv")) {
    return {Outcome::kSkip, "GEC_SEEDA_DIR lacks config.json or human_seeda_e.csv"};
  }
  const auto out = work / "seeda";
  const int code = cli("meta --config " + (root / "config.json").string() + " --dataset seeda_e --subset base" +
                           " --human-scores " + (root / "human_seeda_e.csv").string() + " --out " + out.string(),
                       work / "log_seeda");
  if (code != 0) return fail("meta exited " + std::to_string(code) + ", see " + (work / "log_seeda").string());
  const auto table = out / "reports" / "table.csv";
  const auto gleu = table_value(table, "GLEU", "seeda_e", "base", "r");
  const auto m2 = table_value(table, "M2", "seeda_e", "base", "r");
  if (!gleu || !m2) return fail("GLEU or M2 r missing from the report");
  const std::string d = "GLEU r " + fmt(*gleu) + " (target 0.911), M2 r " + fmt(*m2) + " (target 0.791)";
  return std::abs(*gleu - 0.911) <= 0.05 && std::abs(*m2 - 0.791) <= 0.05 ? pass(d) : fail(d);
}

}  // namespace

int main() {
  const auto work = scratch("run");
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      {"statistics oracles", statistics_oracles},
      {"GLEU", gleu_checks},
      {"M2 and GoToScorer", m2_checks},
      {"TrueSkill update", trueskill_checks},
      {"rank recovery", rank_recovery},
      {"end-to-end determinism", [&] { return determinism(work); }},
      {"judge beats baseline", [&] { return judge_beats_baseline(work / "a"); }},
      {"window analysis", [&] { return window_checks(work / "a"); }},
      {"SEEDA reproduction", [&] { return seeda_reproduction(work); }},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    const char* tag = r.outcome == Outcome::kPass ? "PASS" : r.outcome == Outcome::kFail ? "FAIL" : "SKIP";
    std::cout << "criterion " << i + 1 << " " << tag << "  " << criteria[i].first << ": " << r.detail << std::endl;
    failures += r.outcome == Outcome::kFail;
  }
  if (failures == 0) fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}

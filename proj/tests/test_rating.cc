#include <random>
#include <set>

#include "doctest.h"
#include "gecmeta/metaeval.h"
#include "gecmeta/rating.h"
#include "oracles.h"

using namespace gecmeta;

namespace {

PairwiseJudgment J(const std::string& a, const std::string& b, Verdict v, const std::string& sid = "s") {
  return {sid, Granularity::kSentenceBased, 0, a, b, v};
}

// Judgments from a strict order S0 > S1 > ... with a given flip rate.
std::vector<PairwiseJudgment> synthetic(int systems, int count, double flip_rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<PairwiseJudgment> out;
  for (int k = 0; k < count; ++k) {
    int a = static_cast<int>(rng() % systems);
    int b = static_cast<int>(rng() % (systems - 1));
    if (b >= a) ++b;
    Verdict v = a < b ? Verdict::kAWins : Verdict::kBWins;
    if (u(rng) < flip_rate) v = flip(v);
    out.push_back(J("S" + std::to_string(a), "S" + std::to_string(b), v, "s" + std::to_string(k % 50)));
  }
  return out;
}

}  // namespace

TEST_CASE("single win from equal priors matches numeric integration") {
  const auto [a, b] = trueskill_update({0, 0.5}, {0, 0.5}, Verdict::kAWins, 0.25, 0.0);
  const auto m = oracle::win_posterior(0, 0.25, 0, 0.25, 0.25, 0.0);
  CHECK(std::abs(a.mu - m.mean_a) < 1e-3);
  CHECK(std::abs(b.mu - m.mean_b) < 1e-3);
  CHECK(std::abs(a.sigma * a.sigma - m.var_a) < 1e-3);
  CHECK(std::abs(a.mu - 0.2523) < 1e-3);
  CHECK(a.mu == -b.mu);
  CHECK(trueskill::v_win(0, 0) == doctest::Approx(0.7978845608).epsilon(1e-9));
}

TEST_CASE("uneven sigmas: the certain winner barely moves") {
  const auto [a, b] = trueskill_update({0, 0.05}, {0, 0.5}, Verdict::kAWins, 0.25, 0.1);
  const auto m = oracle::win_posterior(0, 0.0025, 0, 0.25, 0.25, 0.1);
  CHECK(std::abs(a.mu - m.mean_a) < 1e-3);
  CHECK(std::abs(b.mu - m.mean_b) < 1e-3);
  CHECK(a.mu - 0 < 0 - b.mu);
  CHECK(a.mu > 0);
}

TEST_CASE("draw with equal priors keeps means and shrinks sigma") {
  const auto [a, b] = trueskill_update({0, 0.5}, {0, 0.5}, Verdict::kTie, 0.25, 0.05);
  CHECK(a.mu == 0.0);
  CHECK(b.mu == 0.0);
  CHECK(a.sigma < 0.5);
  CHECK(a.sigma == b.sigma);
}

TEST_CASE("symmetry, antisymmetry and sigma decrease on 10k random updates") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mu(-2, 2), sig(0.01, 1), eps(0, 0.5);
  for (int i = 0; i < 10000; ++i) {
    const Rating a{mu(rng), sig(rng)};
    const Rating b{mu(rng), sig(rng)};
    const double e = rng() % 4 == 0 ? 0.0 : eps(rng);
    const Verdict v = static_cast<Verdict>(rng() % 3);
    const auto [na, nb] = trueskill_update(a, b, v, 0.25, e);
    // Swapping the players and flipping the verdict gives the same result.
    const auto [sb, sa] = trueskill_update(b, a, flip(v), 0.25, e);
    CHECK(na == sa);
    CHECK(nb == sb);
    CHECK(na.sigma <= a.sigma);
    CHECK(nb.sigma <= b.sigma);
    CHECK(na.sigma > 0);
    if (v == Verdict::kAWins) {
      CHECK(na.mu >= a.mu);
      CHECK(nb.mu <= b.mu);
    } else if (v == Verdict::kBWins) {
      CHECK(na.mu <= a.mu);
      CHECK(nb.mu >= b.mu);
    } else {
      // A draw pulls the means together.
      CHECK((na.mu - nb.mu) * (a.mu - b.mu) >= 0);
      CHECK(std::abs(na.mu - nb.mu) <= std::abs(a.mu - b.mu) + 1e-12);
    }
  }
}

TEST_CASE("extreme differences stay finite") {
  const auto [a, b] = trueskill_update({-40, 0.5}, {40, 0.5}, Verdict::kAWins, 0.25, 0.0);
  CHECK(std::isfinite(a.mu));
  CHECK(std::isfinite(b.mu));
  CHECK(a.mu > -40);
  const auto [c, d] = trueskill_update({-40, 0.5}, {40, 0.5}, Verdict::kTie, 0.25, 0.1);
  CHECK(std::isfinite(c.mu));
  CHECK(std::isfinite(d.sigma));
}

TEST_CASE("run_trueskill") {
  RatingConfig cfg;
  cfg.shuffle_seed = 3;
  SUBCASE("noiseless order is recovered") {
    std::vector<PairwiseJudgment> js;
    for (int rep = 0; rep < 5; ++rep) {
      for (int a = 0; a < 6; ++a) {
        for (int b = a + 1; b < 6; ++b) js.push_back(J("S" + std::to_string(a), "S" + std::to_string(b), Verdict::kAWins));
      }
    }
    const auto r = run_trueskill(js, cfg).ratings;
    for (int a = 0; a + 1 < 6; ++a) CHECK(r.at("S" + std::to_string(a)).mu > r.at("S" + std::to_string(a + 1)).mu);
  }
  SUBCASE("all ties keep means equal") {
    std::vector<PairwiseJudgment> js;
    for (int a = 0; a < 5; ++a) {
      for (int b = a + 1; b < 5; ++b) js.push_back(J("S" + std::to_string(a), "S" + std::to_string(b), Verdict::kTie));
    }
    const auto r = run_trueskill(js, cfg).ratings;
    for (const auto& [s, x] : r) CHECK(std::abs(x.mu - r.begin()->second.mu) < 1e-9);
  }
  SUBCASE("determinism, antisymmetry and label invariance") {
    const auto js = synthetic(6, 400, 0.2, 8);
    const auto r1 = run_trueskill(js, cfg);
    const auto r2 = run_trueskill(js, cfg);
    CHECK(r1.ratings == r2.ratings);

    std::vector<PairwiseJudgment> flipped = js;
    for (auto& j : flipped) {
      std::swap(j.system_a, j.system_b);
      j.verdict = flip(j.verdict);
    }
    CHECK(run_trueskill(flipped, cfg).ratings == r1.ratings);

    std::vector<PairwiseJudgment> renamed = js;
    for (auto& j : renamed) {
      j.system_a = "zz_" + j.system_a;
      j.system_b = "zz_" + j.system_b;
    }
    const auto r3 = run_trueskill(renamed, cfg).ratings;
    for (const auto& [s, x] : r1.ratings) CHECK(r3.at("zz_" + s) == x);
  }
  SUBCASE("isolated system is named") {
    try {
      run_trueskill({J("A", "B", Verdict::kAWins)}, cfg, {"A", "B", "C"});
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("'C'") != std::string::npos);
    }
  }
}

TEST_CASE("auto draw margin grows with the tie fraction") {
  RatingConfig cfg;
  double prev = -1;
  for (double f : {0.0, 0.1, 0.3, 0.5, 0.9}) {
    const double e = auto_draw_margin(f, cfg);
    CHECK(e > prev);
    prev = e;
    const double c = std::sqrt(2 * 0.25 * 0.25 + 2 * 0.5 * 0.5);
    CHECK(2 * trueskill::cdf(e / c) - 1 == doctest::Approx(f).epsilon(1e-9));
  }
  std::vector<PairwiseJudgment> few = {J("A", "B", Verdict::kTie), J("A", "B", Verdict::kAWins),
                                       J("A", "B", Verdict::kAWins), J("A", "B", Verdict::kAWins)};
  std::vector<PairwiseJudgment> many = {J("A", "B", Verdict::kTie), J("A", "B", Verdict::kTie),
                                        J("A", "B", Verdict::kTie), J("A", "B", Verdict::kAWins)};
  CHECK(run_trueskill(many, cfg).draw_margin > run_trueskill(few, cfg).draw_margin);
}

TEST_CASE("expected wins") {
  const auto top = expected_wins({J("A", "B", Verdict::kAWins), J("C", "A", Verdict::kBWins),
                                  J("B", "C", Verdict::kAWins)});
  CHECK(top.at("A") == 1.0);
  CHECK(top.at("C") == 0.0);
  CHECK(top.at("B") == 0.5);

  const auto sym = expected_wins({J("A", "B", Verdict::kAWins), J("B", "A", Verdict::kAWins),
                                  J("B", "C", Verdict::kAWins), J("C", "B", Verdict::kAWins),
                                  J("A", "C", Verdict::kAWins), J("C", "A", Verdict::kAWins)});
  for (const auto& [s, v] : sym) CHECK(v == 0.5);

  // Hand table for four systems (wins of row over column):
  //        A  B  C  D
  //   A    -  3  1  2
  //   B    1  -  2  0
  //   C    1  2  -  1
  //   D    0  2  1  -     plus one tie between A and D.
  std::vector<PairwiseJudgment> js;
  auto wins = [&](const char* x, const char* y, int n) {
    for (int i = 0; i < n; ++i) js.push_back(J(x, y, Verdict::kAWins));
  };
  wins("A", "B", 3); wins("A", "C", 1); wins("A", "D", 2);
  wins("B", "A", 1); wins("B", "C", 2);
  wins("C", "A", 1); wins("C", "B", 2); wins("C", "D", 1);
  wins("D", "B", 2); wins("D", "C", 1);
  js.push_back(J("A", "D", Verdict::kTie));
  const auto ew = expected_wins(js);
  CHECK(ew.at("A") == doctest::Approx((3.0 / 4 + 1.0 / 2 + 2.0 / 2) / 3));
  CHECK(ew.at("B") == doctest::Approx((1.0 / 4 + 2.0 / 4 + 0.0 / 2) / 3));
  CHECK(ew.at("C") == doctest::Approx((1.0 / 2 + 2.0 / 4 + 1.0 / 2) / 3));
  CHECK(ew.at("D") == doctest::Approx((0.0 / 2 + 2.0 / 2 + 1.0 / 2) / 3));

  CHECK_THROWS_AS(expected_wins({J("A", "B", Verdict::kTie)}), DataError);
}

TEST_CASE("bootstrap rank ranges") {
  RatingConfig cfg;
  cfg.shuffle_seed = 5;
  BootstrapConfig boot;
  boot.resamples = 200;

  SUBCASE("noiseless total order collapses every range") {
    std::vector<PairwiseJudgment> js;
    for (int rep = 0; rep < 20; ++rep) {
      for (int a = 0; a < 5; ++a) {
        for (int b = a + 1; b < 5; ++b) js.push_back(J("S" + std::to_string(a), "S" + std::to_string(b), Verdict::kAWins));
      }
    }
    const auto table = bootstrap_rank_ranges(js, cfg, boot);
    REQUIRE(table.size() == 5);
    for (size_t i = 0; i < table.size(); ++i) {
      CHECK(table[i].system == "S" + std::to_string(i));
      CHECK(table[i].rank == static_cast<int>(i) + 1);
      CHECK(table[i].range_low == table[i].rank);
      CHECK(table[i].range_high == table[i].rank);
      CHECK(table[i].cluster == static_cast<int>(i) + 1);
    }
  }
  SUBCASE("duplicated systems share a cluster") {
    std::vector<PairwiseJudgment> js;
    for (int rep = 0; rep < 10; ++rep) {
      for (const char* twin : {"B1", "B2"}) {
        js.push_back(J("A", twin, Verdict::kAWins));
        js.push_back(J(twin, "C", Verdict::kAWins));
      }
      js.push_back(J("B1", "B2", Verdict::kTie));
    }
    const auto table = bootstrap_rank_ranges(js, cfg, boot);
    std::map<std::string, RankingEntry> by;
    for (const auto& e : table) by[e.system] = e;
    CHECK(by["B1"].cluster == by["B2"].cluster);
    CHECK(by["A"].cluster != by["B1"].cluster);
    CHECK(by["B1"].range_low <= by["B2"].range_high);
    CHECK(by["B2"].range_low <= by["B1"].range_high);
  }
  SUBCASE("one resample gives the point ranks") {
    boot.resamples = 1;
    const auto table = bootstrap_rank_ranges(synthetic(8, 300, 0.3, 2), cfg, boot);
    for (const auto& e : table) {
      CHECK(e.range_low == e.rank);
      CHECK(e.range_high == e.rank);
    }
  }
  SUBCASE("structural invariants and thread independence") {
    const auto js = synthetic(10, 600, 0.3, 4);
    const auto one = bootstrap_rank_ranges(js, cfg, boot);
    boot.threads = 4;
    const auto four = bootstrap_rank_ranges(js, cfg, boot);
    REQUIRE(one.size() == four.size());
    std::set<int> ranks;
    int prev_cluster = 0;
    for (size_t i = 0; i < one.size(); ++i) {
      CHECK(one[i].system == four[i].system);
      CHECK(one[i].score == four[i].score);
      CHECK(one[i].range_low == four[i].range_low);
      CHECK(one[i].range_high == four[i].range_high);
      CHECK(one[i].range_low <= one[i].rank);
      CHECK(one[i].rank <= one[i].range_high);
      CHECK(one[i].cluster >= prev_cluster);
      CHECK(one[i].cluster <= prev_cluster + 1);
      prev_cluster = one[i].cluster;
      ranks.insert(one[i].rank);
    }
    CHECK(ranks.size() == one.size());
    CHECK(*ranks.begin() == 1);
    CHECK(*ranks.rbegin() == static_cast<int>(one.size()));
  }
}

TEST_CASE("rank recovery with 10% flips") {
  RatingConfig cfg;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    cfg.shuffle_seed = seed;
    const auto r = run_trueskill(synthetic(12, 5000, 0.1, 100 + seed), cfg).ratings;
    std::vector<double> truth, got;
    for (int i = 0; i < 12; ++i) {
      truth.push_back(12 - i);
      got.push_back(r.at("S" + std::to_string(i)).mu);
    }
    CHECK(spearman(truth, got) >= 0.9);
  }
}

#include <random>

#include "doctest.h"
#include "gecmeta/align.h"
#include "oracles.h"

using namespace gecmeta;

namespace {

Tokens T(const char* s) { return split_tokens(s); }

Tokens random_tokens(std::mt19937_64& rng, size_t max_len) {
  static const char* vocab[] = {"a", "b", "c", "d", "the", "x"};
  Tokens out(rng() % (max_len + 1));
  for (auto& t : out) t = vocab[rng() % 6];
  return out;
}

size_t count(const Alignment& al, AlignOp::Kind k) {
  size_t n = 0;
  for (const auto& op : al.ops) n += op.kind == k;
  return n;
}

}  // namespace

TEST_CASE("identity alignment is all matches") {
  const auto al = levenshtein_align(T("a b c"), T("a b c"));
  REQUIRE(al.ops.size() == 3);
  CHECK(count(al, AlignOp::Kind::kMatch) == 3);
  CHECK(al.cost() == 0);
  CHECK(extract_edits(al, T("a b c")).empty());
}

TEST_CASE("learner sentence: substitutions at tokens 1 and 3") {
  const Tokens src = T("In conclude , socia media");
  const Tokens hyp = T("In conclusion , social media");
  const auto al = levenshtein_align(src, hyp);
  CHECK(al.cost() == 2);
  CHECK(al.ops[1].kind == AlignOp::Kind::kSubstitute);
  CHECK(al.ops[3].kind == AlignOp::Kind::kSubstitute);
  const auto edits = extract_edits(al, hyp);
  REQUIRE(edits.size() == 2);
  CHECK(edits[0].start == 1);
  CHECK(edits[0].end == 2);
  CHECK(edits[0].replacement == Tokens{"conclusion"});
  CHECK(edits[1].start == 3);
  CHECK(edits[1].end == 4);
  CHECK(edits[1].replacement == Tokens{"social"});
}

TEST_CASE("empty source gives insertions") {
  const auto al = levenshtein_align({}, T("x y"));
  REQUIRE(al.ops.size() == 2);
  CHECK(count(al, AlignOp::Kind::kInsert) == 2);
  const auto edits = diff_edits({}, T("x y"));
  REQUIRE(edits.size() == 1);
  CHECK(edits[0].start == 0);
  CHECK(edits[0].end == 0);
  CHECK(edits[0].replacement == T("x y"));
}

TEST_CASE("adjacent non-match ops merge into one edit") {
  // b -> x is a substitution and c is deleted right after it.
  const auto edits = diff_edits(T("a b c"), T("a x"));
  REQUIRE(edits.size() == 1);
  CHECK(edits[0].start == 1);
  CHECK(edits[0].end == 3);
  CHECK(edits[0].replacement == T("x"));
}

TEST_CASE("tie-break prefers substitution over delete+insert") {
  const auto al = levenshtein_align(T("a"), T("b"));
  REQUIRE(al.ops.size() == 1);
  CHECK(al.ops[0].kind == AlignOp::Kind::kSubstitute);
}

TEST_CASE("apply_edits basics and errors") {
  CHECK(apply_edits(T("a b"), {}) == T("a b"));
  CHECK(apply_edits(T("a b"), {Edit{0, 1, {"x"}, {}}}) == T("x b"));
  CHECK(apply_edits(T("a b"), {Edit{2, 2, {"c"}, {}}}) == T("a b c"));
  CHECK(apply_edits(T("a b"), {Edit{0, 1, {}, {}}}) == T("b"));
  CHECK_THROWS_AS(apply_edits(T("a b"), {Edit{0, 2, {"x"}, {}}, Edit{1, 2, {"y"}, {}}}), DataError);
  CHECK_THROWS_AS(apply_edits(T("a b"), {Edit{1, 3, {"x"}, {}}}), DataError);
  CHECK_THROWS_AS(apply_edits(T("a b"), {Edit{1, 1, {}, {}}}), DataError);
  CHECK_THROWS_AS(apply_edits(T("a b"), {Edit{1, 1, {"x"}, {}}, Edit{1, 1, {"y"}, {}}}), DataError);
  CHECK_THROWS_AS(apply_edits(T("a b"), {Edit{1, 2, {"x"}, {}}, Edit{0, 1, {"y"}, {}}}), DataError);
}

TEST_CASE("labels are ignored for matching") {
  Edit a{1, 2, {"x"}, std::string("R:VERB")};
  Edit b{1, 2, {"x"}, std::nullopt};
  CHECK(same_edit(a, b));
  CHECK_FALSE(same_edit(a, Edit{1, 2, {"y"}, {}}));
}

TEST_CASE("render_with_edits") {
  const Tokens src = T("In conclude , socia media");
  CHECK(render_with_edits(src, {}) == "In conclude , socia media");
  CHECK(render_with_edits(src, {Edit{1, 2, {"conclusion"}, {}}}) ==
        "In [conclude->conclusion] , socia media");
  CHECK(render_with_edits(T("x y z"), {Edit{1, 2, {}, {}}}) == "x [y->-NONE-] z");
  CHECK(render_with_edits(T("x z"), {Edit{1, 1, {"y"}, {}}}) == "x [-NONE-->y] z");
  CHECK(render_with_edits(src, diff_edits(src, T("In conclusion , social media"))) ==
        "In [conclude->conclusion] , [socia->social] media");
}

TEST_CASE("alignment cost equals textbook Levenshtein on 500 random pairs") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const Tokens a = random_tokens(rng, 12);
    const Tokens b = random_tokens(rng, 12);
    const auto al = levenshtein_align(a, b);
    CHECK(al.cost() == oracle::edit_distance(a, b));
    // Ops consume both sides exactly once, in order.
    size_t si = 0, hi = 0;
    for (const auto& op : al.ops) {
      if (op.kind != AlignOp::Kind::kInsert) {
        CHECK(op.src == si);
        ++si;
      }
      if (op.kind != AlignOp::Kind::kDelete) {
        CHECK(op.hyp == hi);
        ++hi;
      }
    }
    CHECK(si == a.size());
    CHECK(hi == b.size());
  }
}

TEST_CASE("extract then apply reproduces the hypothesis on 1000 random pairs") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const Tokens a = random_tokens(rng, 10);
    const Tokens b = random_tokens(rng, 10);
    const auto edits = diff_edits(a, b);
    CHECK_NOTHROW(validate_edits(edits, a.size()));
    // Independent rebuild: copy untouched source runs, splice replacements.
    Tokens rebuilt;
    size_t pos = 0;
    for (const auto& e : edits) {
      rebuilt.insert(rebuilt.end(), a.begin() + pos, a.begin() + e.start);
      rebuilt.insert(rebuilt.end(), e.replacement.begin(), e.replacement.end());
      pos = e.end;
    }
    rebuilt.insert(rebuilt.end(), a.begin() + pos, a.end());
    CHECK(rebuilt == b);
    CHECK(apply_edits(a, edits) == b);
  }
}

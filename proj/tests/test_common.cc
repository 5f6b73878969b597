#include "doctest.h"
#include "gecmeta/common.h"

using namespace gecmeta;

TEST_CASE("tokens split on whitespace runs and join with single spaces") {
  CHECK(split_tokens("  a  b\tc \n") == Tokens{"a", "b", "c"});
  CHECK(split_tokens("").empty());
  CHECK(join_tokens({"a", "b"}) == "a b");
  CHECK(join_tokens({}) == "");
}

TEST_CASE("enum round trips and aliases") {
  for (Granularity g : {Granularity::kEditBased, Granularity::kSentenceBased}) {
    CHECK(parse_granularity(to_string(g)) == g);
  }
  for (Verdict v : {Verdict::kAWins, Verdict::kTie, Verdict::kBWins}) {
    CHECK(parse_verdict(to_string(v)) == v);
  }
  CHECK(parse_verdict(">") == Verdict::kAWins);
  CHECK(parse_verdict("=") == Verdict::kTie);
  CHECK(parse_verdict("<") == Verdict::kBWins);
  CHECK_THROWS_AS(parse_verdict("maybe"), DataError);
  CHECK_THROWS_AS(parse_granularity("word"), DataError);
  CHECK(flip(Verdict::kAWins) == Verdict::kBWins);
  CHECK(flip(Verdict::kTie) == Verdict::kTie);
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

#include "gecmeta/common.h"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iterator>
#include <memory>

namespace gecmeta {

std::string_view to_string(Granularity g) {
  return g == Granularity::kEditBased ? "edit_based" : "sentence_based";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kAWins: return "a_wins";
    case Verdict::kTie: return "tie";
    case Verdict::kBWins: return "b_wins";
  }
  return "tie";
}

Granularity parse_granularity(std::string_view s) {
  if (s == "edit_based" || s == "edit" || s == "E") return Granularity::kEditBased;
  if (s == "sentence_based" || s == "sentence" || s == "S") {
    return Granularity::kSentenceBased;
  }
  throw DataError("unknown granularity '" + std::string(s) + "'");
}

Verdict parse_verdict(std::string_view s) {
  if (s == "a_wins" || s == ">") return Verdict::kAWins;
  if (s == "tie" || s == "=") return Verdict::kTie;
  if (s == "b_wins" || s == "<") return Verdict::kBWins;
  throw DataError("unknown verdict '" + std::string(s) + "'");
}

Tokens split_tokens(std::string_view text) {
  Tokens out;
  size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return sha256_hex(content);
}

}  // namespace gecmeta

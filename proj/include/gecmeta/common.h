// Shared vocabulary types and error classes.

#ifndef GECMETA_COMMON_H_
#define GECMETA_COMMON_H_

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gecmeta {

using Tokens = std::vector<std::string>;

// Bad or inconsistent input data. The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line or configuration. Exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The judge endpoint kept failing after all retries. Exit code 3.
class EndpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A correlation whose value is mathematically undefined (zero variance,
// no decisive pairs). Reported as an absent value, never as 0.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Granularity { kEditBased, kSentenceBased };
enum class Verdict { kAWins, kTie, kBWins };

std::string_view to_string(Granularity g);
std::string_view to_string(Verdict v);
Granularity parse_granularity(std::string_view s);
Verdict parse_verdict(std::string_view s);

inline Verdict flip(Verdict v) {
  switch (v) {
    case Verdict::kAWins: return Verdict::kBWins;
    case Verdict::kBWins: return Verdict::kAWins;
    case Verdict::kTie: break;
  }
  return Verdict::kTie;
}

// Splits on runs of ASCII whitespace. Inputs are pre-tokenized, so this is
// the only "tokenizer" in the project.
Tokens split_tokens(std::string_view text);
std::string join_tokens(const Tokens& tokens);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

}  // namespace gecmeta

#endif  // GECMETA_COMMON_H_

// Token-level Levenshtein alignment and span edits.
//
// An Edit replaces source tokens [start, end) with `replacement`. Edit lists
// are kept sorted by (start, end) and never overlap. Two insertions at the
// same position count as overlapping because their order would be ambiguous.

#ifndef GECMETA_ALIGN_H_
#define GECMETA_ALIGN_H_

#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "gecmeta/common.h"

namespace gecmeta {

struct Edit {
  size_t start = 0;
  size_t end = 0;
  Tokens replacement;
  std::optional<std::string> label;

  // Identity used for gold matching. The label is not part of it.
  std::tuple<size_t, size_t, const Tokens&> key() const {
    return {start, end, replacement};
  }
};

// Equality on (start, end, replacement); labels are ignored.
bool same_edit(const Edit& a, const Edit& b);
bool edit_less(const Edit& a, const Edit& b);

struct AlignOp {
  enum class Kind { kMatch, kSubstitute, kInsert, kDelete };
  Kind kind;
  // Source position. For kInsert it is the source index the token is inserted
  // before.
  size_t src;
  // Hypothesis position. For kDelete it is the hypothesis index at which the
  // deletion happens.
  size_t hyp;

  bool operator==(const AlignOp&) const = default;
};

struct Alignment {
  std::vector<AlignOp> ops;

  // Number of non-match operations (unit costs).
  size_t cost() const;
};

// Minimum-cost alignment with unit substitute/insert/delete costs. The
// backtrace prefers match > substitute > delete > insert at every cell, so the
// result is fully deterministic.
Alignment levenshtein_align(const Tokens& source, const Tokens& hypothesis);

// Merges maximal runs of non-match operations into span edits.
std::vector<Edit> extract_edits(const Alignment& alignment,
                                const Tokens& hypothesis);

// Convenience: align then extract.
std::vector<Edit> diff_edits(const Tokens& source, const Tokens& hypothesis);

// Throws DataError if edits are unsorted, overlapping, out of range or no-op.
void validate_edits(const std::vector<Edit>& edits, size_t source_length);

Tokens apply_edits(const Tokens& source, const std::vector<Edit>& edits);

// Corrected sentence with each edited region shown as "[old->new]"; an empty
// side is written "-NONE-".
std::string render_with_edits(const Tokens& source,
                              const std::vector<Edit>& edits);

}  // namespace gecmeta

#endif  // GECMETA_ALIGN_H_

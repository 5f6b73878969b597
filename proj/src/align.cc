#include "gecmeta/align.h"

#include <algorithm>
#include <string>

namespace gecmeta {

bool same_edit(const Edit& a, const Edit& b) { return a.key() == b.key(); }

bool edit_less(const Edit& a, const Edit& b) { return a.key() < b.key(); }

size_t Alignment::cost() const {
  return static_cast<size_t>(std::count_if(ops.begin(), ops.end(), [](const AlignOp& op) {
    return op.kind != AlignOp::Kind::kMatch;
  }));
}

Alignment levenshtein_align(const Tokens& source, const Tokens& hypothesis) {
  const size_t n = source.size();
  const size_t m = hypothesis.size();
  const size_t width = m + 1;
  std::vector<size_t> dist((n + 1) * width);
  auto at = [&](size_t i, size_t j) -> size_t& { return dist[i * width + j]; };

  for (size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const size_t diag = at(i - 1, j - 1) + (source[i - 1] == hypothesis[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  using Kind = AlignOp::Kind;
  Alignment out;
  out.ops.reserve(std::max(n, m));
  size_t i = n;
  size_t j = m;
  while (i > 0 || j > 0) {
    const size_t here = at(i, j);
    if (i > 0 && j > 0 && source[i - 1] == hypothesis[j - 1] && here == at(i - 1, j - 1)) {
      out.ops.push_back({Kind::kMatch, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && j > 0 && source[i - 1] != hypothesis[j - 1] &&
               here == at(i - 1, j - 1) + 1) {
      out.ops.push_back({Kind::kSubstitute, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && here == at(i - 1, j) + 1) {
      out.ops.push_back({Kind::kDelete, i - 1, j});
      --i;
    } else {
      out.ops.push_back({Kind::kInsert, i, j - 1});
      --j;
    }
  }
  std::reverse(out.ops.begin(), out.ops.end());
  return out;
}

std::vector<Edit> extract_edits(const Alignment& alignment, const Tokens& hypothesis) {
  using Kind = AlignOp::Kind;
  std::vector<Edit> edits;
  std::optional<Edit> run;
  for (const AlignOp& op : alignment.ops) {
    if (op.kind == Kind::kMatch) {
      if (run) edits.push_back(std::move(*run));
      run.reset();
      continue;
    }
    if (!run) {
      run.emplace();
      run->start = op.src;
      run->end = op.src;
    }
    switch (op.kind) {
      case Kind::kSubstitute:
        run->replacement.push_back(hypothesis.at(op.hyp));
        run->end = op.src + 1;
        break;
      case Kind::kDelete:
        run->end = op.src + 1;
        break;
      case Kind::kInsert:
        run->replacement.push_back(hypothesis.at(op.hyp));
        break;
      case Kind::kMatch:
        break;
    }
  }
  if (run) edits.push_back(std::move(*run));
  return edits;
}

std::vector<Edit> diff_edits(const Tokens& source, const Tokens& hypothesis) {
  return extract_edits(levenshtein_align(source, hypothesis), hypothesis);
}

void validate_edits(const std::vector<Edit>& edits, size_t source_length) {
  for (size_t k = 0; k < edits.size(); ++k) {
    const Edit& e = edits[k];
    if (e.end < e.start || e.end > source_length) {
      throw DataError("edit span [" + std::to_string(e.start) + ", " +
                      std::to_string(e.end) + ") out of range for source of length " +
                      std::to_string(source_length));
    }
    if (e.start == e.end && e.replacement.empty()) {
      throw DataError("no-op edit at position " + std::to_string(e.start));
    }
    if (k == 0) continue;
    const Edit& prev = edits[k - 1];
    if (edit_less(e, prev)) throw DataError("edits are not sorted");
    const bool both_inserts = prev.start == prev.end && e.start == e.end && prev.start == e.start;
    if (prev.end > e.start || both_inserts) {
      throw DataError("overlapping edits at positions " + std::to_string(prev.start) + " and " +
                      std::to_string(e.start));
    }
  }
}

Tokens apply_edits(const Tokens& source, const std::vector<Edit>& edits) {
  validate_edits(edits, source.size());
  Tokens out;
  out.reserve(source.size());
  size_t pos = 0;
  for (const Edit& e : edits) {
    out.insert(out.end(), source.begin() + pos, source.begin() + e.start);
    out.insert(out.end(), e.replacement.begin(), e.replacement.end());
    pos = e.end;
  }
  out.insert(out.end(), source.begin() + pos, source.end());
  return out;
}

std::string render_with_edits(const Tokens& source, const std::vector<Edit>& edits) {
  validate_edits(edits, source.size());
  auto side = [](auto first, auto last) {
    if (first == last) return std::string("-NONE-");
    return join_tokens(Tokens(first, last));
  };
  Tokens pieces;
  size_t pos = 0;
  for (const Edit& e : edits) {
    pieces.insert(pieces.end(), source.begin() + pos, source.begin() + e.start);
    pieces.push_back("[" + side(source.begin() + e.start, source.begin() + e.end) + "->" +
                     side(e.replacement.begin(), e.replacement.end()) + "]");
    pos = e.end;
  }
  pieces.insert(pieces.end(), source.begin() + pos, source.end());
  return join_tokens(pieces);
}

}  // namespace gecmeta

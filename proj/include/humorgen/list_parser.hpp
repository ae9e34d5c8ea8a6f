#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace humorgen {

/// Inclusive bounds on an expected item count.
struct CountRange {
  std::size_t min = 0;
  std::size_t max = 0;

  bool contains(std::size_t n) const { return n >= min && n <= max; }
  static CountRange exactly(std::size_t n) { return {n, n}; }
};

struct DroppedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;    // "preamble", "postamble", "empty item"

  friend bool operator==(const DroppedLine&, const DroppedLine&) = default;
};

struct ParsedList {
  std::vector<std::string> items;
  std::vector<DroppedLine> dropped_lines;
  /// Set when an expected range was given and the item count falls outside it.
  bool out_of_range = false;
  /// Set when marker numbers were not 1, 2, 3, ... in order.
  bool irregular_numbering = false;
};

/// Extracts a numbered list from free-form model output.
///
/// A line opens a new item when, after leading whitespace, it starts with a number
/// followed by ".", ")", ":" or " -" ("1.", "2)", "3:", "4 -"). A number followed by
/// "." or ":" and then another digit ("1.1", "3:30") is text, not a marker. Unmarked
/// lines continue the open item, joined with a single space. A blank line closes the
/// open item; unmarked text with no open item is dropped as preamble (before the first
/// item) or postamble (after it). Items keep source order.
///
/// Never throws except EmptyListError when no item is found.
ParsedList parse_numbered_list(std::string_view text,
                               std::optional<CountRange> expected = std::nullopt);

}  // namespace humorgen

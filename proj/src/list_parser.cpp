#include "humorgen/list_parser.hpp"

#include <cctype>

#include "humorgen/error.hpp"

namespace humorgen {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

struct Marker {
  unsigned long long number = 0;
  std::string_view rest;
};

std::optional<Marker> match_marker(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && is_space(line[i])) ++i;
  const std::size_t digits_start = i;
  while (i < line.size() && is_digit(line[i])) ++i;
  const std::size_t digit_count = i - digits_start;
  if (digit_count == 0 || digit_count > 9) return std::nullopt;

  Marker m;
  for (std::size_t k = digits_start; k < i; ++k) m.number = m.number * 10 + (line[k] - '0');

  if (i >= line.size()) return std::nullopt;
  const char c = line[i];
  if (c == '.' || c == ':') {
    if (i + 1 < line.size() && is_digit(line[i + 1])) return std::nullopt;
    m.rest = trim(line.substr(i + 1));
    return m;
  }
  if (c == ')') {
    m.rest = trim(line.substr(i + 1));
    return m;
  }
  if (is_space(c)) {
    std::size_t j = i;
    while (j < line.size() && is_space(line[j])) ++j;
    if (j < line.size() && line[j] == '-') {
      m.rest = trim(line.substr(j + 1));
      return m;
    }
  }
  return std::nullopt;
}

}  // namespace

ParsedList parse_numbered_list(std::string_view text, std::optional<CountRange> expected) {
  ParsedList out;
  struct Open {
    std::string text;
    std::size_t line;
  };
  std::optional<Open> open;
  bool seen_item = false;
  unsigned long long expected_number = 1;

  auto close = [&] {
    if (!open) return;
    if (open->text.empty()) {
      out.dropped_lines.push_back({open->line, "empty item"});
    } else {
      out.items.push_back(std::move(open->text));
    }
    open.reset();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;

    const std::string_view content = trim(line);
    if (content.empty()) {
      close();
      if (end == text.size()) break;
      continue;
    }
    if (auto marker = match_marker(line)) {
      close();
      if (marker->number != expected_number) out.irregular_numbering = true;
      expected_number = marker->number + 1;
      open = Open{std::string(marker->rest), line_no};
      seen_item = true;
    } else if (open) {
      if (!open->text.empty()) open->text += ' ';
      open->text += content;
    } else {
      out.dropped_lines.push_back({line_no, seen_item ? "postamble" : "preamble"});
    }
    if (end == text.size()) break;
  }
  close();

  if (out.items.empty()) throw EmptyListError();
  if (expected) out.out_of_range = !expected->contains(out.items.size());
  return out;
}

}  // namespace humorgen

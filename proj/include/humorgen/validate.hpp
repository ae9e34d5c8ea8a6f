#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "humorgen/types.hpp"

namespace humorgen {

/// Names of the skip-logic rules an annotation response can violate.
namespace rule {
inline constexpr std::string_view kNotUnderstoodEnds = "understood=no forbids later answers";
inline constexpr std::string_view kUnderstoodNeedsOffensive = "understood=yes requires offensive";
inline constexpr std::string_view kNotOffensiveNeedsJoke = "offensive=no requires is_joke";
inline constexpr std::string_view kNotJokeEnds = "is_joke=no forbids later answers";
inline constexpr std::string_view kJokeNeedsRest = "is_joke=yes requires heard_before and funniness";
inline constexpr std::string_view kLaterNeedsJoke = "later answers require is_joke";
inline constexpr std::string_view kFunninessRange = "funniness must be an integer in 1..5";
inline constexpr std::string_view kMissingIds = "task_id and annotator_id are required";
}  // namespace rule

struct Verdict {
  std::vector<std::string> violations;

  bool valid() const { return violations.empty(); }
  explicit operator bool() const { return valid(); }
};

/// Checks a response against the annotation workflow's skip logic. Total: never throws.
Verdict validate_response(const AnnotationResponse& r);

}  // namespace humorgen

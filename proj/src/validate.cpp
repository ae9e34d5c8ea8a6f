#include "humorgen/validate.hpp"

namespace humorgen {

Verdict validate_response(const AnnotationResponse& r) {
  Verdict v;
  auto fail = [&](std::string_view name) { v.violations.emplace_back(name); };

  if (r.task_id.empty() || r.annotator_id.empty()) fail(rule::kMissingIds);

  const bool any_after_understood = r.offensive || r.is_joke || r.heard_before || r.funniness ||
                                    r.explanation;
  const bool any_after_joke = r.heard_before || r.funniness || r.explanation;

  if (!r.understood) {
    if (any_after_understood) fail(rule::kNotUnderstoodEnds);
  } else {
    if (!r.offensive) fail(rule::kUnderstoodNeedsOffensive);
    if (r.offensive && !*r.offensive && !r.is_joke) fail(rule::kNotOffensiveNeedsJoke);
    if (!r.is_joke && any_after_joke) fail(rule::kLaterNeedsJoke);
    if (r.is_joke && !*r.is_joke && any_after_joke) fail(rule::kNotJokeEnds);
    if (r.is_joke && *r.is_joke && (!r.heard_before || !r.funniness)) fail(rule::kJokeNeedsRest);
  }
  if (r.funniness && (*r.funniness < 1 || *r.funniness > 5)) fail(rule::kFunninessRange);
  return v;
}

}  // namespace humorgen

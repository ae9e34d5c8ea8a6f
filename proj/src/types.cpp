#include "humorgen/types.hpp"

#include <algorithm>
#include <cctype>

#include "humorgen/error.hpp"
#include "humorgen/hash.hpp"

namespace humorgen {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::optional<std::string> Topic::rejection_reason(std::string_view word,
                                                   const WordFilter& filter) {
  if (word.size() < kMinLength) return "shorter than 4 letters";
  for (unsigned char c : word) {
    if (!std::isalpha(c)) return "non-alphabetic character";
    if (!std::islower(c)) return "not lowercase";
  }
  if (filter.is_stopword(word)) return "stopword";
  if (filter.is_profane(word)) return "profanity";
  return std::nullopt;
}

Topic Topic::make(std::string word, std::size_t source_rank, const WordFilter& filter) {
  if (auto reason = rejection_reason(word, filter)) {
    throw ValidationError("invalid topic '" + word + "': " + *reason);
  }
  return Topic(std::move(word), source_rank);
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kRaw: return "raw";
    case Stage::kExpanded: return "expanded";
    case Stage::kRefined: return "refined";
  }
  return "raw";
}

Stage parse_stage(std::string_view s) {
  if (s == "raw") return Stage::kRaw;
  if (s == "expanded") return Stage::kExpanded;
  if (s == "refined") return Stage::kRefined;
  throw ValidationError("unknown association stage '" + std::string(s) + "'");
}

AssociationSet AssociationSet::make(Topic topic, Stage stage, std::vector<std::string> items) {
  if (items.empty()) throw ValidationError("association set is empty");
  if (stage == Stage::kRaw && items.size() > kMaxRaw) {
    throw ValidationError("raw association set has " + std::to_string(items.size()) +
                          " items, at most 20 allowed");
  }
  if (stage == Stage::kRefined && items.size() > kMaxRefined) {
    throw ValidationError("refined association set has " + std::to_string(items.size()) +
                          " items, at most 6 allowed");
  }
  for (const auto& item : items) {
    if (blank(item)) throw ValidationError("association item is empty");
  }
  return AssociationSet(std::move(topic), stage, std::move(items));
}

HumorPolicy HumorPolicy::make(std::string text, std::vector<std::string> source_joke_ids,
                              std::vector<std::string> decomposition_ids, std::string created_at,
                              std::string model_id) {
  if (blank(text)) throw ValidationError("policy text is empty");
  if (source_joke_ids.size() != decomposition_ids.size()) {
    throw ValidationError("policy lineage mismatch: " + std::to_string(source_joke_ids.size()) +
                          " source jokes vs " + std::to_string(decomposition_ids.size()) +
                          " decompositions");
  }
  HumorPolicy p;
  p.text_ = std::move(text);
  p.source_joke_ids_ = std::move(source_joke_ids);
  p.decomposition_ids_ = std::move(decomposition_ids);
  p.created_at_ = std::move(created_at);
  p.model_id_ = std::move(model_id);
  return p;
}

HumorPolicy HumorPolicy::from_text(std::string text, std::string model_id) {
  return make(std::move(text), {}, {}, "", std::move(model_id));
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kZeroShot: return "zero-shot";
    case Mode::kNoAssoc: return "no-assoc";
    case Mode::kAssocV1: return "assoc-v1";
    case Mode::kAssocV2: return "assoc-v2";
    case Mode::kFull: return "full";
    case Mode::kCorpus: return "corpus";
  }
  return "corpus";
}

Mode parse_mode(std::string_view s) {
  if (s == "zero-shot") return Mode::kZeroShot;
  if (s == "no-assoc") return Mode::kNoAssoc;
  if (s == "assoc-v1") return Mode::kAssocV1;
  if (s == "assoc-v2") return Mode::kAssocV2;
  if (s == "full") return Mode::kFull;
  if (s == "corpus") return Mode::kCorpus;
  throw ValidationError("unknown mode '" + std::string(s) + "'");
}

ModerationResult ModerationResult::make(std::map<std::string, double> category_scores,
                                        std::vector<std::string> flagged_categories) {
  for (const auto& [name, score] : category_scores) {
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ValidationError("moderation score for '" + name + "' outside [0,1]");
    }
  }
  for (const auto& name : flagged_categories) {
    if (!category_scores.contains(name)) {
      throw ValidationError("flagged category '" + name + "' has no score");
    }
  }
  ModerationResult m;
  m.scores_ = std::move(category_scores);
  m.flagged_ = std::move(flagged_categories);
  return m;
}

std::optional<double> ModerationResult::score(std::string_view category) const {
  auto it = scores_.find(std::string(category));
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

StagePresence required_stages(Mode mode) {
  switch (mode) {
    case Mode::kAssocV1: return {true, false, false};
    case Mode::kAssocV2: return {true, true, false};
    case Mode::kFull: return {true, true, true};
    default: return {};
  }
}

JokeRecord JokeRecord::make(Draft d) {
  if (blank(d.text)) throw ValidationError("joke text is empty");
  if (d.id.empty()) d.id = joke_id_for(d.text);
  if (d.intermediates && d.intermediates->empty()) d.intermediates.reset();

  const StagePresence need = required_stages(d.mode);
  const Intermediates none;
  const Intermediates& im = d.intermediates ? *d.intermediates : none;
  auto check = [&](bool wanted, const std::optional<AssociationSet>& got, Stage stage) {
    const std::string name(to_string(stage));
    if (wanted && !got) {
      throw ValidationError("mode " + std::string(to_string(d.mode)) + " requires the " + name +
                            " association stage");
    }
    if (!wanted && got) {
      throw ValidationError("mode " + std::string(to_string(d.mode)) + " forbids the " + name +
                            " association stage");
    }
    if (got && got->stage() != stage) {
      throw ValidationError("intermediate slot " + name + " holds a " +
                            std::string(to_string(got->stage())) + " set");
    }
  };
  check(need.raw, im.raw, Stage::kRaw);
  check(need.expanded, im.expanded, Stage::kExpanded);
  check(need.refined, im.refined, Stage::kRefined);
  return JokeRecord(std::move(d));
}

JokeRecord JokeRecord::with_moderation(ModerationResult m) const {
  Draft d = d_;
  d.moderation = std::move(m);
  return JokeRecord(std::move(d));
}

PairwiseJudgment PairwiseJudgment::make(std::string joke_a_id, std::string joke_b_id,
                                        Winner winner, std::string annotator_id) {
  if (joke_a_id.empty() || joke_b_id.empty()) throw ValidationError("judgment joke id is empty");
  if (joke_a_id == joke_b_id) {
    throw ValidationError("judgment compares joke '" + joke_a_id + "' with itself");
  }
  return PairwiseJudgment(std::move(joke_a_id), std::move(joke_b_id), winner,
                          std::move(annotator_id));
}

}  // namespace humorgen

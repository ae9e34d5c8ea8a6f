#include "humorgen/policy.hpp"

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "humorgen/clock.hpp"
#include "humorgen/hash.hpp"

namespace humorgen {

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

Decomposition Decomposition::make(std::string joke_id, std::string analysis_text,
                                  std::string model_id, std::string prompt_fingerprint,
                                  std::string id) {
  if (joke_id.empty()) throw ValidationError("decomposition joke_id is empty");
  if (blank(analysis_text)) throw ValidationError("decomposition analysis_text is empty");
  Decomposition d;
  d.id_ = id.empty() ? "d" + sha256_hex(joke_id + "\n" + analysis_text).substr(0, 16) : std::move(id);
  d.joke_id_ = std::move(joke_id);
  d.analysis_ = std::move(analysis_text);
  d.model_id_ = std::move(model_id);
  d.fingerprint_ = std::move(prompt_fingerprint);
  return d;
}

BudgetExceeded::BudgetExceeded(std::size_t estimated, std::size_t budget)
    : Error("distillation prompt needs about " + std::to_string(estimated) +
            " tokens but the context budget is " + std::to_string(budget) +
            "; reduce the number of seed jokes (k) or summarize the decompositions first"),
      estimated_(estimated),
      budget_(budget) {}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

Decomposition decompose_joke(Gateway& gateway, const TemplateLibrary& lib, const SeedJoke& joke,
                             const PolicySettings& settings) {
  const PromptTemplate& t = lib.get(templates::kDecompose);
  const std::string prompt = render(t, {{"joke", joke.text}});
  const auto result = gateway.complete(
      CompletionRequest::user(settings.model_id, prompt, settings.temperature, "decompose"));
  if (blank(result.text)) {
    throw ValidationError("empty decomposition for joke " + joke.id);
  }
  return Decomposition::make(joke.id, result.text, settings.model_id, sha256_hex(prompt));
}

DecomposeOutcome decompose_all(Gateway& gateway, const TemplateLibrary& lib,
                               std::span<const SeedJoke> jokes, const PolicySettings& settings,
                               std::size_t parallelism,
                               const std::function<void(const Decomposition&)>& on_done) {
  std::vector<std::optional<Decomposition>> done(jokes.size());
  std::vector<std::optional<std::string>> errors(jokes.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink_mu;

  auto worker = [&] {
    for (std::size_t i = next++; i < jokes.size(); i = next++) {
      try {
        Decomposition d = decompose_joke(gateway, lib, jokes[i], settings);
        if (on_done) {
          std::lock_guard lock(sink_mu);
          on_done(d);
        }
        done[i] = std::move(d);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(parallelism, jokes.size()));
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  threads.clear();

  DecomposeOutcome out;
  for (std::size_t i = 0; i < jokes.size(); ++i) {
    if (done[i]) out.decompositions.push_back(std::move(*done[i]));
    if (errors[i]) out.failures.push_back({jokes[i].id, *errors[i]});
  }
  return out;
}

std::string join_decompositions(std::span<const Decomposition> decompositions,
                                const std::string& delimiter) {
  std::string out;
  for (std::size_t i = 0; i < decompositions.size(); ++i) {
    if (i > 0) out += delimiter;
    out += decompositions[i].analysis_text();
  }
  return out;
}

HumorPolicy distill_policy(Gateway& gateway, const TemplateLibrary& lib,
                           std::span<const Decomposition> decompositions,
                           const PolicySettings& settings, std::string created_at) {
  if (decompositions.empty()) throw ConfigError("no decompositions to distill");
  std::set<std::string> seen;
  for (const auto& d : decompositions) {
    if (!seen.insert(d.joke_id()).second) {
      throw ConfigError("joke " + d.joke_id() + " has more than one decomposition");
    }
  }
  const PromptTemplate& t = lib.get(templates::kDistill);
  const std::string prompt =
      render(t, {{"decompositions", join_decompositions(decompositions, settings.delimiter)}});
  const std::size_t estimate = estimate_tokens(prompt);
  if (estimate > settings.context_budget_tokens) {
    throw BudgetExceeded(estimate, settings.context_budget_tokens);
  }
  const auto result = gateway.complete(
      CompletionRequest::user(settings.model_id, prompt, settings.temperature, "distill"));
  if (blank(result.text)) throw ValidationError("distillation returned empty text");

  std::vector<std::string> joke_ids;
  std::vector<std::string> decomposition_ids;
  for (const auto& d : decompositions) {
    joke_ids.push_back(d.joke_id());
    decomposition_ids.push_back(d.id());
  }
  if (created_at.empty()) created_at = utc_timestamp();
  return HumorPolicy::make(result.text, std::move(joke_ids), std::move(decomposition_ids),
                           std::move(created_at), settings.model_id);
}

json RecordCodec<Decomposition>::encode(const Decomposition& d) {
  return json{{"id", d.id()},
              {"joke_id", d.joke_id()},
              {"analysis_text", d.analysis_text()},
              {"model_id", d.model_id()},
              {"prompt_fingerprint", d.prompt_fingerprint()}};
}

Decomposition RecordCodec<Decomposition>::decode(const json& j) {
  return Decomposition::make(fields::get_string(j, "joke_id"), fields::get_string(j, "analysis_text"),
                             fields::get_optional_string(j, "model_id").value_or(""),
                             fields::get_optional_string(j, "prompt_fingerprint").value_or(""),
                             fields::get_optional_string(j, "id").value_or(""));
}

}  // namespace humorgen

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "humorgen/gateway.hpp"

namespace humorgen {

/// Deterministic offline backend. Answers come from fixtures keyed by the request's
/// idempotency key; several answers recorded for one key (a retried request) are
/// replayed in order, and the last one repeats once the queue is exhausted.
///
/// With prefix matching enabled, a request with no exact fixture falls back to the
/// fixture whose prefix is the longest prefix of the last user message.
class ScriptedBackend final : public Backend {
 public:
  enum class Match { kExact, kExactThenPrefix };

  explicit ScriptedBackend(Match match = Match::kExact) : match_(match) {}

  /// Loads a transcript or fixture file. Lines with kind "chat" and "moderation" are
  /// answers, "prefix" lines are prefix fixtures, error lines are ignored.
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path,
                                                    Match match = Match::kExact);
  void load(const std::filesystem::path& path);

  void add_completion(const CompletionRequest& req, std::string text);
  void add_prefix(std::string prefix, std::string text);
  void add_moderation(std::string input, std::map<std::string, double> scores);
  /// Scores returned for text with no moderation fixture; unset means such text is an error.
  void set_default_moderation(std::map<std::string, double> scores);

  CompletionResult complete(const CompletionRequest& req) override;
  ModerationResult moderate(const std::string& text) override;

  std::size_t completion_fixture_count() const;

 private:
  struct Queue {
    std::vector<std::string> outputs;
    std::size_t next = 0;
  };

  Match match_;
  mutable std::mutex mu_;
  std::map<std::string, Queue> by_key_;
  std::vector<std::pair<std::string, std::string>> prefixes_;
  std::map<std::string, std::map<std::string, double>> moderation_;
  std::optional<std::map<std::string, double>> default_moderation_;
};

struct OpenAIOptions {
  /// Base URL including the API version path, e.g. "https://api.openai.com/v1".
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string moderation_model;  // empty: server default
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible HTTP+JSON backend (POST {base}/chat/completions, {base}/moderations).
class OpenAIBackend final : public Backend {
 public:
  explicit OpenAIBackend(OpenAIOptions options);

  CompletionResult complete(const CompletionRequest& req) override;
  ModerationResult moderate(const std::string& text) override;

 private:
  json post(const std::string& path, const json& body);

  OpenAIOptions options_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // e.g. "/v1"
};

/// Parses an OpenAI chat-completions reply body. Throws GatewayError(kProtocol) naming
/// the missing field.
CompletionResult parse_chat_reply(const json& body);
/// Parses an OpenAI moderations reply body.
ModerationResult parse_moderation_reply(const json& body);

}  // namespace humorgen

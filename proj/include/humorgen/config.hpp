#pragma once

// Shared run configuration: one JSON file, overridable per command by flags.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "humorgen/backends.hpp"
#include "humorgen/gateway.hpp"
#include "humorgen/records.hpp"

namespace humorgen {

struct GatewayConfig {
  std::string backend = "openai";  // "openai" | "scripted"
  std::string endpoint = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model = "gpt-4";
  std::string moderation_model;
  double generation_temperature = 1.0;
  double policy_temperature = 0.2;
  std::size_t max_concurrency = 4;
  std::size_t requests_per_minute = 0;
  int max_attempts = 5;
  long long timeout_seconds = 120;
  std::string transcript;      // empty: no transcript
  std::string fixtures;        // scripted backend fixture/transcript file
  std::string fixture_match = "exact";  // "exact" | "prefix"
};

struct PathsConfig {
  std::string templates;       // empty: bundled
  std::string frequency_list;  // empty: bundled
  std::string stopwords;       // empty: bundled
  std::string profanity;       // empty: bundled
  std::string emoticons;       // empty: bundled
  std::string question_schema; // empty: bundled
  std::string output_dir = "out";
};

struct PipelineConfig {
  std::size_t pool_size = 10'000;
  std::size_t k_top = 30;
  std::size_t annotators_per_item = 5;
  std::string moderation_category = "harassment";
  double moderation_threshold = 0.02;
  double max_failure_rate = 0.2;
  std::size_t context_budget_tokens = 100'000;
  double lease_minutes = 30;
  double pseudo_count = 0.5;
  std::size_t parallel_topics = 4;
};

struct RunConfig {
  GatewayConfig gateway;
  PathsConfig paths;
  PipelineConfig pipeline;
  std::uint64_t seed = 42;

  /// Throws ConfigError on unknown keys or wrongly typed values.
  static RunConfig from_json(const json& j);
  static RunConfig load(const std::filesystem::path& path);
  json to_json() const;

  std::filesystem::path templates_dir() const;
  std::filesystem::path frequency_list_path() const;
  std::filesystem::path stopwords_path() const;
  std::filesystem::path profanity_path() const;
  std::filesystem::path emoticons_path() const;
  std::filesystem::path question_schema_path() const;
};

/// Throws ConfigError naming `what` unless `path` is an existing file.
void require_file(const std::filesystem::path& path, const std::string& what);

/// Builds the backend the config names. Credentials and fixture files are checked here,
/// before any request is made.
std::shared_ptr<Backend> make_backend(const GatewayConfig& cfg);
GatewayOptions make_gateway_options(const GatewayConfig& cfg);

}  // namespace humorgen

#pragma once

// Chat-completion and moderation access shared by every model-calling stage.
//
// A Gateway wraps one Backend (live OpenAI-compatible HTTP, or scripted fixtures)
// and adds retry with exponential backoff, a concurrency cap, a requests-per-minute
// budget, and an append-only transcript of every request/response pair. Transcripts
// load back into a ScriptedBackend, so any run can be replayed offline.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "humorgen/clock.hpp"
#include "humorgen/records.hpp"
#include "humorgen/types.hpp"

namespace humorgen {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_tokens = 0;  // 0: backend default
  std::string tag;     // pipeline stage label, recorded in transcripts; not part of the key

  /// hash(model_id, messages, temperature). Identical keys replay identical text.
  std::string idempotency_key() const;

  /// Single user-message request.
  static CompletionRequest user(std::string model_id, std::string prompt, double temperature,
                                std::string tag = {});
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct CompletionResult {
  std::string text;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
  int attempts = 1;
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Throws TransientError for retryable failures, GatewayError otherwise.
  virtual CompletionResult complete(const CompletionRequest& req) = 0;
  virtual ModerationResult moderate(const std::string& text) = 0;
};

struct GatewayOptions {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};
  std::size_t max_concurrency = 4;
  std::size_t requests_per_minute = 0;  // 0: unlimited
  std::optional<std::filesystem::path> transcript_path;
};

/// Append-only line log. Each append writes and flushes one whole line under a lock.
class TranscriptLog {
 public:
  explicit TranscriptLog(const std::filesystem::path& path);
  void append(const json& record);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

/// Concurrency cap plus sliding one-minute request budget. acquire() blocks.
class RateBudget {
 public:
  RateBudget(std::size_t max_concurrency, std::size_t requests_per_minute, Clock& clock);

  void acquire();
  void release();

  std::size_t peak_in_flight() const;
  /// Start time of every admitted request, in admission order.
  std::vector<Clock::time_point> admissions() const;

 private:
  std::size_t cap_;
  std::size_t rpm_;
  Clock& clock_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
  std::deque<Clock::time_point> window_;
  std::vector<Clock::time_point> admitted_;
};

struct GatewayStats {
  std::size_t completions = 0;
  std::size_t moderations = 0;
  std::size_t attempts = 0;
  std::size_t transient_failures = 0;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayOptions options = {},
          Clock& clock = Clock::system());

  CompletionResult complete(const CompletionRequest& req);
  ModerationResult moderate(const std::string& text);

  GatewayStats stats() const;
  const RateBudget& budget() const { return budget_; }
  const GatewayOptions& options() const { return options_; }

 private:
  template <class Call, class Log>
  auto with_retries(const std::string& what, Call&& call, Log&& log_failure)
      -> std::invoke_result_t<Call&, int>;

  void log(const json& record);

  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
  Clock& clock_;
  RateBudget budget_;
  std::unique_ptr<TranscriptLog> transcript_;
  mutable std::mutex stats_mu_;
  GatewayStats stats_;
};

json encode_request(const CompletionRequest& req);
CompletionRequest decode_request(const json& j);

}  // namespace humorgen

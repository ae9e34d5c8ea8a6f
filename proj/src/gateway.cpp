#include "humorgen/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "humorgen/error.hpp"
#include "humorgen/hash.hpp"

namespace humorgen {

std::string CompletionRequest::idempotency_key() const {
  json j;
  j["model"] = model_id;
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
  j["messages"] = msgs;
  // Fixed formatting so 1.0 and 1 hash alike.
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.6f", temperature);
  j["temperature"] = temp;
  return sha256_hex(dump_line(j));
}

CompletionRequest CompletionRequest::user(std::string model_id, std::string prompt,
                                          double temperature, std::string tag) {
  CompletionRequest r;
  r.model_id = std::move(model_id);
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = temperature;
  r.tag = std::move(tag);
  return r;
}

json encode_request(const CompletionRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
  json j{{"model", req.model_id}, {"messages", msgs}, {"temperature", req.temperature}};
  if (req.max_tokens > 0) j["max_tokens"] = req.max_tokens;
  return j;
}

CompletionRequest decode_request(const json& j) {
  CompletionRequest r;
  r.model_id = fields::get_string(j, "model");
  const json& msgs = fields::require(j, "messages");
  if (!msgs.is_array()) throw ParseError("messages", "expected an array");
  for (const auto& m : msgs) {
    r.messages.push_back({fields::get_string(m, "role"), fields::get_string(m, "content")});
  }
  r.temperature = fields::get_double(j, "temperature");
  r.max_tokens = static_cast<int>(fields::get_optional_int(j, "max_tokens").value_or(0));
  return r;
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw ConfigError("cannot open transcript " + path.string());
}

void TranscriptLog::append(const json& record) {
  const std::string line = dump_line(record) + "\n";
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
}

RateBudget::RateBudget(std::size_t max_concurrency, std::size_t requests_per_minute, Clock& clock)
    : cap_(std::max<std::size_t>(1, max_concurrency)), rpm_(requests_per_minute), clock_(clock) {}

void RateBudget::acquire() {
  constexpr auto kWindow = std::chrono::minutes(1);
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return in_flight_ < cap_; });
    if (rpm_ == 0) break;
    const auto now = clock_.now();
    while (!window_.empty() && window_.front() + kWindow <= now) window_.pop_front();
    if (window_.size() < rpm_) break;
    const auto wake = window_.front() + kWindow;
    lock.unlock();
    clock_.sleep_until(wake);
    lock.lock();
  }
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
  const auto now = clock_.now();
  window_.push_back(now);
  admitted_.push_back(now);
}

void RateBudget::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t RateBudget::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

std::vector<Clock::time_point> RateBudget::admissions() const {
  std::lock_guard lock(mu_);
  return admitted_;
}

namespace {

struct Slot {
  explicit Slot(RateBudget& b) : budget(b) { budget.acquire(); }
  ~Slot() { budget.release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;
  RateBudget& budget;
};

}  // namespace

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options, Clock& clock)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      clock_(clock),
      budget_(options_.max_concurrency, options_.requests_per_minute, clock) {
  if (!backend_) throw ConfigError("gateway has no backend");
  if (options_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (options_.transcript_path) {
    transcript_ = std::make_unique<TranscriptLog>(*options_.transcript_path);
  }
}

void Gateway::log(const json& record) {
  if (transcript_) transcript_->append(record);
}

template <class Call, class Log>
auto Gateway::with_retries(const std::string& what, Call&& call, Log&& log_failure)
    -> std::invoke_result_t<Call&, int> {
  auto backoff = options_.initial_backoff;
  std::string last_cause;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.attempts;
    }
    try {
      Slot slot(budget_);
      return call(attempt);
    } catch (const TransientError& e) {
      last_cause = e.what();
      {
        std::lock_guard lock(stats_mu_);
        ++stats_.transient_failures;
      }
      log_failure(attempt, last_cause);
    }
    if (attempt < options_.max_attempts) {
      clock_.sleep_for(backoff);
      const auto next = std::chrono::duration<double, std::milli>(backoff) *
                        options_.backoff_multiplier;
      backoff = std::min(options_.max_backoff,
                         std::chrono::duration_cast<std::chrono::milliseconds>(next));
    }
  }
  throw GatewayError(GatewayError::Kind::kRetriesExhausted,
                     what + " failed after " + std::to_string(options_.max_attempts) +
                         " attempts: " + last_cause);
}

CompletionResult Gateway::complete(const CompletionRequest& req) {
  const std::string key = req.idempotency_key();
  auto result = with_retries(
      "completion", [&](int attempt) {
        const auto started = std::chrono::steady_clock::now();
        CompletionResult r = backend_->complete(req);
        r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        r.attempts = attempt;
        return r;
      },
      [&](int attempt, const std::string& cause) {
        log(json{{"kind", "chat_error"},
                 {"key", key},
                 {"tag", req.tag},
                 {"attempt", attempt},
                 {"error", cause}});
      });
  {
    std::lock_guard lock(stats_mu_);
    ++stats_.completions;
  }
  log(json{{"kind", "chat"},
           {"key", key},
           {"tag", req.tag},
           {"attempt", result.attempts},
           {"request", encode_request(req)},
           {"response",
            {{"text", result.text},
             {"usage",
              {{"prompt_tokens", result.usage.prompt_tokens},
               {"completion_tokens", result.usage.completion_tokens}}}}},
           {"latency_ms", result.latency.count()}});
  return result;
}

ModerationResult Gateway::moderate(const std::string& text) {
  auto result = with_retries(
      "moderation", [&](int) { return backend_->moderate(text); },
      [&](int attempt, const std::string& cause) {
        log(json{{"kind", "moderation_error"},
                 {"input", text},
                 {"attempt", attempt},
                 {"error", cause}});
      });
  {
    std::lock_guard lock(stats_mu_);
    ++stats_.moderations;
  }
  log(json{{"kind", "moderation"},
           {"input", text},
           {"response", RecordCodec<ModerationResult>::encode(result)}});
  return result;
}

GatewayStats Gateway::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

}  // namespace humorgen

#pragma once

// Durable task assignment for human annotation. Every task is answered by
// `annotators_per_item` distinct annotators; work is handed out under expiring leases
// and responses are insert-only.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "humorgen/clock.hpp"
#include "humorgen/error.hpp"
#include "humorgen/types.hpp"

struct sqlite3;

namespace humorgen {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

struct BatchItem {
  std::string task_id;
  std::string text;
  std::string source_id;
  std::string method;

  friend bool operator==(const BatchItem&, const BatchItem&) = default;
};

class AnnotationBatch {
 public:
  static constexpr std::size_t kDefaultAnnotatorsPerItem = 5;

  /// Throws ValidationError on an empty batch id, repeated or empty task ids, empty
  /// texts, or annotators_per_item == 0.
  static AnnotationBatch make(std::string batch_id, std::vector<BatchItem> items,
                              std::size_t annotators_per_item = kDefaultAnnotatorsPerItem,
                              std::string schema_version = "1");

  /// Task ids are "<batch_id>-<index>" (1-based, zero-padded); source ids are record ids.
  static AnnotationBatch from_records(std::string batch_id, const std::vector<JokeRecord>& records,
                                      std::string method,
                                      std::size_t annotators_per_item = kDefaultAnnotatorsPerItem);

  const std::string& batch_id() const noexcept { return id_; }
  const std::vector<BatchItem>& items() const noexcept { return items_; }
  std::size_t annotators_per_item() const noexcept { return per_item_; }
  const std::string& schema_version() const noexcept { return schema_version_; }

 private:
  AnnotationBatch() = default;

  std::string id_;
  std::vector<BatchItem> items_;
  std::size_t per_item_ = kDefaultAnnotatorsPerItem;
  std::string schema_version_;
};

/// What an annotator sees: no method tag, no source id, no other answers.
struct TaskPayload {
  std::string task_id;
  std::string text;
  std::string schema_version;
  Clock::time_point lease_expires_at;
};

struct SubmitResult {
  enum class Status { kAccepted, kRejected };

  Status status = Status::kRejected;
  bool duplicate = false;  // identical resubmission, counted once
  std::vector<std::string> reasons;

  bool accepted() const { return status == Status::kAccepted; }
};

namespace reject_reason {
inline constexpr const char* kLeaseExpired = "lease expired";
inline constexpr const char* kUnknownTask = "unknown task";
inline constexpr const char* kAlreadySubmitted = "a different response was already submitted";
}  // namespace reject_reason

struct BatchProgress {
  std::string batch_id;
  std::size_t task_count = 0;
  std::size_t annotators_per_item = 0;
  std::size_t responses = 0;
  std::size_t tasks_complete = 0;
  std::size_t active_leases = 0;

  std::size_t responses_needed() const { return task_count * annotators_per_item; }
  bool complete() const { return responses >= responses_needed(); }
};

struct StoreOptions {
  std::chrono::milliseconds lease_duration = std::chrono::minutes(30);
};

class AnnotationStore {
 public:
  /// Opens or creates the store; ":memory:" gives a throwaway store. Leases from an
  /// earlier process are dropped on open.
  explicit AnnotationStore(const std::string& path, Clock& clock = Clock::system(),
                           StoreOptions options = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  /// Returns the new annotator's id. A non-empty `name` that is already registered
  /// returns the existing id.
  std::string register_annotator(const std::string& name = {});
  bool has_annotator(const std::string& annotator_id);

  /// Throws ConfigError if the batch id or any task id already exists.
  void add_batch(const AnnotationBatch& batch);
  std::vector<std::string> batch_ids();

  /// Leases the least-covered open task this annotator has not answered. An annotator
  /// holding a live lease gets the same task back. Throws NotFoundError for an
  /// unknown annotator.
  std::optional<TaskPayload> next_task(const std::string& annotator_id);

  SubmitResult submit_response(const AnnotationResponse& response);

  /// Throws NotFoundError for an unknown batch.
  BatchProgress progress(const std::string& batch_id);

  /// One record per response, ordered by (task_id, annotator_id), each re-validated.
  std::vector<LabelRecord> export_labels(const std::string& batch_id);

  /// Completed plus live-leased slots for one task.
  std::size_t occupancy(const std::string& task_id);

  const StoreOptions& options() const noexcept { return options_; }

 private:
  class Db;

  void expire_leases();

  std::mutex mu_;
  std::unique_ptr<Db> db_;
  Clock& clock_;
  StoreOptions options_;
};

}  // namespace humorgen

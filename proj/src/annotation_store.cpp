#include "humorgen/annotation_store.hpp"

#include <sqlite3.h>

#include <cstdio>
#include <random>
#include <set>

#include "humorgen/records.hpp"
#include "humorgen/validate.hpp"

namespace humorgen {

AnnotationBatch AnnotationBatch::make(std::string batch_id, std::vector<BatchItem> items,
                                      std::size_t annotators_per_item,
                                      std::string schema_version) {
  if (batch_id.empty()) throw ValidationError("batch_id is empty");
  if (annotators_per_item == 0) throw ValidationError("annotators_per_item must be at least 1");
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (item.task_id.empty()) throw ValidationError("task_id is empty");
    if (!ids.insert(item.task_id).second) {
      throw ValidationError("task_id " + item.task_id + " appears twice");
    }
    if (item.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ValidationError("task " + item.task_id + " has empty text");
    }
  }
  AnnotationBatch b;
  b.id_ = std::move(batch_id);
  b.items_ = std::move(items);
  b.per_item_ = annotators_per_item;
  b.schema_version_ = std::move(schema_version);
  return b;
}

AnnotationBatch AnnotationBatch::from_records(std::string batch_id,
                                              const std::vector<JokeRecord>& records,
                                              std::string method,
                                              std::size_t annotators_per_item) {
  std::vector<BatchItem> items;
  const int width = records.size() < 1000 ? 3 : static_cast<int>(std::to_string(records.size()).size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    char num[32];
    std::snprintf(num, sizeof num, "%0*zu", width, i + 1);
    items.push_back({batch_id + "-" + num, records[i].text(), records[i].id(), method});
  }
  return make(std::move(batch_id), std::move(items), annotators_per_item);
}

class AnnotationStore::Db {
 public:
  explicit Db(const std::string& path) {
    if (sqlite3_open_v2(path.c_str(), &db_,
                        SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw ConfigError("cannot open annotation store " + path + ": " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
  }
  ~Db() { sqlite3_close(db_); }

  void exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw Error("annotation store: " + msg);
    }
  }

  class Stmt {
   public:
    Stmt(sqlite3* db, const std::string& sql) : db_(db) {
      if (sqlite3_prepare_v2(db, sql.c_str(), -1, &st_, nullptr) != SQLITE_OK) {
        throw Error(std::string("annotation store: ") + sqlite3_errmsg(db));
      }
    }
    ~Stmt() { sqlite3_finalize(st_); }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    Stmt& bind(int i, const std::string& v) {
      sqlite3_bind_text(st_, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
      return *this;
    }
    Stmt& bind(int i, long long v) {
      sqlite3_bind_int64(st_, i, v);
      return *this;
    }
    /// True while a row is available.
    bool step() {
      const int rc = sqlite3_step(st_);
      if (rc == SQLITE_ROW) return true;
      if (rc == SQLITE_DONE) return false;
      throw Error(std::string("annotation store: ") + sqlite3_errmsg(db_));
    }
    std::string text(int col) {
      const auto* p = sqlite3_column_text(st_, col);
      return p ? std::string(reinterpret_cast<const char*>(p),
                             static_cast<std::size_t>(sqlite3_column_bytes(st_, col)))
               : std::string();
    }
    long long integer(int col) { return sqlite3_column_int64(st_, col); }

   private:
    sqlite3* db_;
    sqlite3_stmt* st_ = nullptr;
  };

  Stmt prepare(const std::string& sql) { return Stmt(db_, sql); }
  long long changes() { return sqlite3_changes(db_); }

  // Rolls back unless committed.
  class Tx {
   public:
    explicit Tx(Db& db) : db_(db) { db_.exec("BEGIN IMMEDIATE"); }
    ~Tx() {
      if (!done_) {
        try {
          db_.exec("ROLLBACK");
        } catch (...) {
        }
      }
    }
    void commit() {
      db_.exec("COMMIT");
      done_ = true;
    }

   private:
    Db& db_;
    bool done_ = false;
  };

 private:
  sqlite3* db_ = nullptr;
};

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS annotators (
  id TEXT PRIMARY KEY,
  name TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS batches (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  id TEXT NOT NULL UNIQUE,
  annotators_per_item INTEGER NOT NULL,
  schema_version TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tasks (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  id TEXT NOT NULL UNIQUE,
  batch_id TEXT NOT NULL REFERENCES batches(id),
  text TEXT NOT NULL,
  source_id TEXT NOT NULL,
  method TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS leases (
  task_id TEXT NOT NULL REFERENCES tasks(id),
  annotator_id TEXT NOT NULL REFERENCES annotators(id),
  expires_ms INTEGER NOT NULL,
  PRIMARY KEY (task_id, annotator_id)
);
CREATE TABLE IF NOT EXISTS responses (
  task_id TEXT NOT NULL REFERENCES tasks(id),
  annotator_id TEXT NOT NULL REFERENCES annotators(id),
  payload TEXT NOT NULL,
  PRIMARY KEY (task_id, annotator_id)
);
CREATE TRIGGER IF NOT EXISTS responses_no_update BEFORE UPDATE ON responses
BEGIN SELECT RAISE(ABORT, 'responses are append-only'); END;
CREATE TRIGGER IF NOT EXISTS responses_no_delete BEFORE DELETE ON responses
BEGIN SELECT RAISE(ABORT, 'responses are append-only'); END;
)sql";

long long to_ms(Clock::time_point t) { return t.time_since_epoch().count(); }

std::string random_id() {
  std::random_device rd;
  std::uniform_int_distribution<unsigned> d(0, 15);
  std::string s = "ann-";
  for (int i = 0; i < 12; ++i) s += "0123456789abcdef"[d(rd)];
  return s;
}

}  // namespace

AnnotationStore::AnnotationStore(const std::string& path, Clock& clock, StoreOptions options)
    : db_(std::make_unique<Db>(path)), clock_(clock), options_(options) {
  db_->exec("PRAGMA journal_mode=WAL; PRAGMA foreign_keys=ON;");
  db_->exec(kSchema);
  db_->exec("DELETE FROM leases");
}

AnnotationStore::~AnnotationStore() = default;

void AnnotationStore::expire_leases() {
  db_->prepare("DELETE FROM leases WHERE expires_ms <= ?").bind(1, to_ms(clock_.now())).step();
}

std::string AnnotationStore::register_annotator(const std::string& name) {
  std::lock_guard lock(mu_);
  Db::Tx tx(*db_);
  if (!name.empty()) {
    auto q = db_->prepare("SELECT id FROM annotators WHERE name = ?");
    q.bind(1, name);
    if (q.step()) return q.text(0);
  }
  std::string id;
  for (;;) {
    id = random_id();
    auto q = db_->prepare("SELECT 1 FROM annotators WHERE id = ?");
    q.bind(1, id);
    if (!q.step()) break;
  }
  db_->prepare("INSERT INTO annotators (id, name) VALUES (?, ?)").bind(1, id).bind(2, name).step();
  tx.commit();
  return id;
}

bool AnnotationStore::has_annotator(const std::string& annotator_id) {
  std::lock_guard lock(mu_);
  auto q = db_->prepare("SELECT 1 FROM annotators WHERE id = ?");
  q.bind(1, annotator_id);
  return q.step();
}

void AnnotationStore::add_batch(const AnnotationBatch& batch) {
  std::lock_guard lock(mu_);
  Db::Tx tx(*db_);
  {
    auto q = db_->prepare("SELECT 1 FROM batches WHERE id = ?");
    q.bind(1, batch.batch_id());
    if (q.step()) throw ConfigError("batch " + batch.batch_id() + " already exists");
  }
  db_->prepare("INSERT INTO batches (id, annotators_per_item, schema_version) VALUES (?, ?, ?)")
      .bind(1, batch.batch_id())
      .bind(2, static_cast<long long>(batch.annotators_per_item()))
      .bind(3, batch.schema_version())
      .step();
  for (const auto& item : batch.items()) {
    auto q = db_->prepare("SELECT 1 FROM tasks WHERE id = ?");
    q.bind(1, item.task_id);
    if (q.step()) throw ConfigError("task " + item.task_id + " already exists");
    db_->prepare(
           "INSERT INTO tasks (id, batch_id, text, source_id, method) VALUES (?, ?, ?, ?, ?)")
        .bind(1, item.task_id)
        .bind(2, batch.batch_id())
        .bind(3, item.text)
        .bind(4, item.source_id)
        .bind(5, item.method)
        .step();
  }
  tx.commit();
}

std::vector<std::string> AnnotationStore::batch_ids() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  auto q = db_->prepare("SELECT id FROM batches ORDER BY seq");
  while (q.step()) out.push_back(q.text(0));
  return out;
}

std::optional<TaskPayload> AnnotationStore::next_task(const std::string& annotator_id) {
  std::lock_guard lock(mu_);
  Db::Tx tx(*db_);
  {
    auto q = db_->prepare("SELECT 1 FROM annotators WHERE id = ?");
    q.bind(1, annotator_id);
    if (!q.step()) throw NotFoundError("unknown annotator " + annotator_id);
  }
  expire_leases();

  auto payload = [&](const std::string& task_id, long long expires) {
    auto q = db_->prepare(
        "SELECT t.text, b.schema_version FROM tasks t JOIN batches b ON b.id = t.batch_id "
        "WHERE t.id = ?");
    q.bind(1, task_id);
    q.step();
    return TaskPayload{task_id, q.text(0), q.text(1), Clock::time_point(Clock::duration(expires))};
  };

  {
    auto q = db_->prepare("SELECT task_id, expires_ms FROM leases WHERE annotator_id = ?");
    q.bind(1, annotator_id);
    if (q.step()) {
      TaskPayload p = payload(q.text(0), q.integer(1));
      tx.commit();
      return p;
    }
  }

  auto pick = db_->prepare(R"sql(
    SELECT t.id FROM tasks t JOIN batches b ON b.id = t.batch_id
    WHERE NOT EXISTS (SELECT 1 FROM responses r WHERE r.task_id = t.id AND r.annotator_id = ?1)
      AND ((SELECT COUNT(*) FROM responses r WHERE r.task_id = t.id) +
           (SELECT COUNT(*) FROM leases l WHERE l.task_id = t.id)) < b.annotators_per_item
    ORDER BY ((SELECT COUNT(*) FROM responses r WHERE r.task_id = t.id) +
              (SELECT COUNT(*) FROM leases l WHERE l.task_id = t.id)), b.seq, t.seq
    LIMIT 1)sql");
  pick.bind(1, annotator_id);
  if (!pick.step()) {
    tx.commit();
    return std::nullopt;
  }
  const std::string task_id = pick.text(0);
  const long long expires = to_ms(clock_.now() + options_.lease_duration);
  db_->prepare("INSERT INTO leases (task_id, annotator_id, expires_ms) VALUES (?, ?, ?)")
      .bind(1, task_id)
      .bind(2, annotator_id)
      .bind(3, expires)
      .step();
  TaskPayload p = payload(task_id, expires);
  tx.commit();
  return p;
}

SubmitResult AnnotationStore::submit_response(const AnnotationResponse& response) {
  std::lock_guard lock(mu_);
  Db::Tx tx(*db_);
  SubmitResult res;
  auto reject = [&](std::vector<std::string> reasons) {
    res.status = SubmitResult::Status::kRejected;
    res.reasons = std::move(reasons);
    return res;
  };

  {
    auto q = db_->prepare("SELECT 1 FROM tasks WHERE id = ?");
    q.bind(1, response.task_id);
    if (!q.step()) return reject({reject_reason::kUnknownTask});
  }
  {
    auto q = db_->prepare("SELECT payload FROM responses WHERE task_id = ? AND annotator_id = ?");
    q.bind(1, response.task_id).bind(2, response.annotator_id);
    if (q.step()) {
      const auto stored = parse_record<AnnotationResponse>(q.text(0));
      if (stored == response) {
        res.status = SubmitResult::Status::kAccepted;
        res.duplicate = true;
        return res;
      }
      return reject({reject_reason::kAlreadySubmitted});
    }
  }
  expire_leases();
  {
    auto q = db_->prepare("SELECT 1 FROM leases WHERE task_id = ? AND annotator_id = ?");
    q.bind(1, response.task_id).bind(2, response.annotator_id);
    if (!q.step()) {
      tx.commit();
      return reject({reject_reason::kLeaseExpired});
    }
  }
  const Verdict v = validate_response(response);
  if (!v.valid()) {
    tx.commit();
    return reject(v.violations);
  }
  db_->prepare("INSERT INTO responses (task_id, annotator_id, payload) VALUES (?, ?, ?)")
      .bind(1, response.task_id)
      .bind(2, response.annotator_id)
      .bind(3, serialize_record(response))
      .step();
  db_->prepare("DELETE FROM leases WHERE task_id = ? AND annotator_id = ?")
      .bind(1, response.task_id)
      .bind(2, response.annotator_id)
      .step();
  tx.commit();
  res.status = SubmitResult::Status::kAccepted;
  return res;
}

BatchProgress AnnotationStore::progress(const std::string& batch_id) {
  std::lock_guard lock(mu_);
  BatchProgress p;
  p.batch_id = batch_id;
  {
    auto q = db_->prepare("SELECT annotators_per_item FROM batches WHERE id = ?");
    q.bind(1, batch_id);
    if (!q.step()) throw NotFoundError("unknown batch " + batch_id);
    p.annotators_per_item = static_cast<std::size_t>(q.integer(0));
  }
  const long long now = to_ms(clock_.now());
  auto q = db_->prepare(R"sql(
    SELECT t.id,
           (SELECT COUNT(*) FROM responses r WHERE r.task_id = t.id),
           (SELECT COUNT(*) FROM leases l WHERE l.task_id = t.id AND l.expires_ms > ?2)
    FROM tasks t WHERE t.batch_id = ?1)sql");
  q.bind(1, batch_id).bind(2, now);
  while (q.step()) {
    ++p.task_count;
    const auto done = static_cast<std::size_t>(q.integer(1));
    p.responses += done;
    if (done >= p.annotators_per_item) ++p.tasks_complete;
    p.active_leases += static_cast<std::size_t>(q.integer(2));
  }
  return p;
}

std::vector<LabelRecord> AnnotationStore::export_labels(const std::string& batch_id) {
  std::lock_guard lock(mu_);
  {
    auto q = db_->prepare("SELECT 1 FROM batches WHERE id = ?");
    q.bind(1, batch_id);
    if (!q.step()) throw NotFoundError("unknown batch " + batch_id);
  }
  auto q = db_->prepare(R"sql(
    SELECT t.source_id, t.method, r.payload FROM responses r JOIN tasks t ON t.id = r.task_id
    WHERE t.batch_id = ? ORDER BY r.task_id, r.annotator_id)sql");
  q.bind(1, batch_id);
  std::vector<LabelRecord> out;
  while (q.step()) {
    LabelRecord rec{batch_id, q.text(0), q.text(1), parse_record<AnnotationResponse>(q.text(2))};
    const Verdict v = validate_response(rec.response);
    if (!v.valid()) {
      throw Error("stored response for task " + rec.response.task_id +
                  " breaks skip logic: " + v.violations.front());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::size_t AnnotationStore::occupancy(const std::string& task_id) {
  std::lock_guard lock(mu_);
  auto q = db_->prepare(R"sql(
    SELECT (SELECT COUNT(*) FROM responses WHERE task_id = ?1) +
           (SELECT COUNT(*) FROM leases WHERE task_id = ?1 AND expires_ms > ?2))sql");
  q.bind(1, task_id).bind(2, to_ms(clock_.now()));
  q.step();
  return static_cast<std::size_t>(q.integer(0));
}

}  // namespace humorgen

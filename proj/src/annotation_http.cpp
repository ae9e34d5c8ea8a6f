#include "humorgen/annotation_http.hpp"

#include <httplib.h>

#include "humorgen/prompt_template.hpp"

namespace humorgen {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(dump_line(body), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message) {
  send_json(res, status, json{{"error", {{"kind", kind}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw ParseError("", "request body must be a JSON object");
  return j;
}

json progress_json(const BatchProgress& p) {
  return json{{"batch_id", p.batch_id},
              {"task_count", p.task_count},
              {"annotators_per_item", p.annotators_per_item},
              {"responses", p.responses},
              {"responses_needed", p.responses_needed()},
              {"tasks_complete", p.tasks_complete},
              {"active_leases", p.active_leases},
              {"complete", p.complete()}};
}

}  // namespace

json load_question_schema(const std::filesystem::path& path) {
  const auto p = path.empty() ? bundled_data_dir() / "annotation_schema.json" : path;
  try {
    return json::parse(read_text_file(p));
  } catch (const json::parse_error& e) {
    throw ConfigError("bad question schema " + p.string() + ": " + e.what());
  }
}

AnnotationServer::AnnotationServer(AnnotationStore& store, json schema,
                                   std::optional<std::filesystem::path> static_dir)
    : store_(store), schema_(std::move(schema)), server_(std::make_unique<httplib::Server>()) {
  if (static_dir && !server_->set_mount_point("/", static_dir->string())) {
    throw ConfigError("cannot serve static files from " + static_dir->string());
  }
  routes();
}

AnnotationServer::~AnnotationServer() = default;

void AnnotationServer::routes() {
  auto& s = *server_;

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const json::exception& e) {
      send_error(res, 400, "malformed_request", e.what());
    } catch (const ParseError& e) {
      send_error(res, 400, "malformed_request", e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, "invalid", e.what());
    } catch (const ConfigError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });

  s.Get("/api/v1/schema", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, schema_);
  });

  s.Post("/api/v1/annotators", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const std::string name = body.value("name", std::string());
    send_json(res, 201, json{{"annotator_id", store_.register_annotator(name)}});
  });

  s.Post("/api/v1/batches", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    std::vector<BatchItem> items;
    for (const auto& it : fields::require(body, "items")) {
      items.push_back({fields::get_string(it, "task_id"), fields::get_string(it, "text"),
                       fields::get_optional_string(it, "source_id").value_or(""),
                       fields::get_optional_string(it, "method").value_or("")});
    }
    const auto per_item = fields::get_optional_int(body, "annotators_per_item")
                              .value_or(AnnotationBatch::kDefaultAnnotatorsPerItem);
    if (per_item < 1) throw ValidationError("annotators_per_item must be at least 1");
    const auto batch = AnnotationBatch::make(fields::get_string(body, "batch_id"), std::move(items),
                                             static_cast<std::size_t>(per_item),
                                             schema_.value("schema_version", std::string("1")));
    store_.add_batch(batch);
    send_json(res, 201, progress_json(store_.progress(batch.batch_id())));
  });

  s.Get("/api/v1/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator_id")) {
      send_error(res, 400, "malformed_request", "missing query parameter annotator_id");
      return;
    }
    const auto task = store_.next_task(req.get_param_value("annotator_id"));
    if (!task) {
      send_json(res, 200, json{{"task", nullptr}, {"status", "none_available"}});
      return;
    }
    send_json(res, 200,
              json{{"status", "leased"},
                   {"task", {{"task_id", task->task_id}, {"text", task->text}}},
                   {"lease_seconds", std::chrono::duration_cast<std::chrono::seconds>(
                                         store_.options().lease_duration)
                                         .count()},
                   {"schema", schema_}});
  });

  s.Post("/api/v1/responses", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto response = RecordCodec<AnnotationResponse>::decode(body);
    const SubmitResult r = store_.submit_response(response);
    if (r.accepted()) {
      send_json(res, 200, json{{"status", "accepted"}, {"duplicate", r.duplicate}});
      return;
    }
    int status = 422;
    if (r.reasons.size() == 1 && (r.reasons[0] == reject_reason::kLeaseExpired ||
                                  r.reasons[0] == reject_reason::kAlreadySubmitted)) {
      status = 409;
    } else if (r.reasons.size() == 1 && r.reasons[0] == reject_reason::kUnknownTask) {
      status = 404;
    }
    send_json(res, status, json{{"status", "rejected"}, {"reasons", r.reasons}});
  });

  s.Get(R"(/api/v1/batches/([^/]+)/progress)",
        [this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, progress_json(store_.progress(req.matches[1].str())));
        });

  s.Get(R"(/api/v1/batches/([^/]+)/export)",
        [this](const httplib::Request& req, httplib::Response& res) {
          std::string body;
          for (const auto& rec : store_.export_labels(req.matches[1].str())) {
            body += serialize_record(rec) + "\n";
          }
          res.status = 200;
          res.set_content(body, "application/x-ndjson");
        });
}

bool AnnotationServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int AnnotationServer::bind_to_any_port(const std::string& host) {
  return server_->bind_to_any_port(host);
}

bool AnnotationServer::listen_after_bind() { return server_->listen_after_bind(); }

void AnnotationServer::stop() { server_->stop(); }

void AnnotationServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace humorgen

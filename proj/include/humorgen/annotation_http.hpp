#pragma once

// HTTP+JSON front end for the annotation store, versioned under /api/v1/.
// Endpoint reference: docs/annotation-api.md.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "humorgen/annotation_store.hpp"
#include "humorgen/records.hpp"

namespace httplib {
class Server;
}

namespace humorgen {

/// Bundled question schema (data/annotation_schema.json).
json load_question_schema(const std::filesystem::path& path = {});

class AnnotationServer {
 public:
  /// `static_dir`, when set, is served at / (the annotation client).
  AnnotationServer(AnnotationStore& store, json schema,
                   std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~AnnotationServer();

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it; call listen_after_bind() to serve.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void routes();

  AnnotationStore& store_;
  json schema_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace humorgen

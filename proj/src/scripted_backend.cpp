#include <fstream>

#include "humorgen/backends.hpp"
#include "humorgen/error.hpp"

namespace humorgen {

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path,
                                                            Match match) {
  auto backend = std::make_shared<ScriptedBackend>(match);
  backend->load(path);
  return backend;
}

void ScriptedBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixture file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto kind = fields::get_string(j, "kind");
      if (kind == "chat") {
        const auto req = decode_request(fields::require(j, "request"));
        add_completion(req, fields::get_string(fields::require(j, "response"), "text"));
      } else if (kind == "prefix") {
        add_prefix(fields::get_string(j, "prefix"), fields::get_string(j, "text"));
      } else if (kind == "moderation") {
        const auto m = RecordCodec<ModerationResult>::decode(fields::require(j, "response"));
        add_moderation(fields::get_string(j, "input"), m.category_scores());
      } else if (kind == "moderation_default") {
        const auto m = RecordCodec<ModerationResult>::decode(fields::require(j, "response"));
        set_default_moderation(m.category_scores());
      }
    } catch (const json::exception& e) {
      throw ParseError("", std::string("malformed fixture line: ") + e.what(), line_no);
    } catch (const ParseError& e) {
      throw e.at_line(line_no);
    }
  }
}

void ScriptedBackend::add_completion(const CompletionRequest& req, std::string text) {
  std::lock_guard lock(mu_);
  by_key_[req.idempotency_key()].outputs.push_back(std::move(text));
}

void ScriptedBackend::add_prefix(std::string prefix, std::string text) {
  std::lock_guard lock(mu_);
  prefixes_.emplace_back(std::move(prefix), std::move(text));
}

void ScriptedBackend::add_moderation(std::string input, std::map<std::string, double> scores) {
  std::lock_guard lock(mu_);
  moderation_[std::move(input)] = std::move(scores);
}

void ScriptedBackend::set_default_moderation(std::map<std::string, double> scores) {
  std::lock_guard lock(mu_);
  default_moderation_ = std::move(scores);
}

std::size_t ScriptedBackend::completion_fixture_count() const {
  std::lock_guard lock(mu_);
  return by_key_.size() + prefixes_.size();
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& req) {
  const std::string key = req.idempotency_key();
  std::lock_guard lock(mu_);
  if (auto it = by_key_.find(key); it != by_key_.end() && !it->second.outputs.empty()) {
    Queue& q = it->second;
    CompletionResult r;
    r.text = q.outputs[std::min(q.next, q.outputs.size() - 1)];
    if (q.next < q.outputs.size()) ++q.next;
    return r;
  }
  if (match_ == Match::kExactThenPrefix && !req.messages.empty()) {
    const std::string& prompt = req.messages.back().content;
    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& p : prefixes_) {
      if (prompt.starts_with(p.first) && (!best || p.first.size() > best->first.size())) best = &p;
    }
    if (best) {
      CompletionResult r;
      r.text = best->second;
      return r;
    }
  }
  throw GatewayError(GatewayError::Kind::kFixtureMissing,
                     "no scripted fixture for request key " + key.substr(0, 16) +
                         (req.tag.empty() ? "" : " (stage " + req.tag + ")"));
}

ModerationResult ScriptedBackend::moderate(const std::string& text) {
  std::lock_guard lock(mu_);
  if (auto it = moderation_.find(text); it != moderation_.end()) {
    return ModerationResult::make(it->second);
  }
  if (default_moderation_) return ModerationResult::make(*default_moderation_);
  throw GatewayError(GatewayError::Kind::kFixtureMissing, "no scripted moderation fixture");
}

}  // namespace humorgen

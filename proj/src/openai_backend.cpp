#include <httplib.h>

#include <algorithm>

#include "humorgen/backends.hpp"
#include "humorgen/error.hpp"

namespace humorgen {

namespace {

[[noreturn]] void protocol_error(const std::string& field) {
  throw GatewayError(GatewayError::Kind::kProtocol, "malformed backend reply: missing field " + field);
}

}  // namespace

OpenAIBackend::OpenAIBackend(OpenAIOptions options) : options_(std::move(options)) {
  const std::string& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json OpenAIBackend::post(const std::string& path, const json& body) {
  // One client per call: httplib::Client is not safe to share between threads.
  httplib::Client client(origin_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  auto res = client.Post(path_prefix_ + path, headers, dump_line(body), "application/json");
  if (!res) {
    throw TransientError("request to " + origin_ + path_prefix_ + path +
                         " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw GatewayError(GatewayError::Kind::kAuth,
                       "backend rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 408 || status == 409 || status == 429 || status >= 500) {
    throw TransientError("backend returned HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw GatewayError(GatewayError::Kind::kRequest,
                       "backend returned HTTP " + std::to_string(status) + ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error&) {
    throw GatewayError(GatewayError::Kind::kProtocol, "backend reply is not JSON");
  }
}

CompletionResult parse_chat_reply(const json& body) {
  if (!body.is_object()) protocol_error("choices");
  auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) protocol_error("choices");
  const json& first = choices->front();
  auto message = first.find("message");
  if (message == first.end() || !message->is_object()) protocol_error("choices[0].message");
  auto content = message->find("content");
  if (content == message->end() || !content->is_string()) {
    protocol_error("choices[0].message.content");
  }
  CompletionResult r;
  r.text = content->get<std::string>();
  if (auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
    r.usage.prompt_tokens = usage->value("prompt_tokens", 0);
    r.usage.completion_tokens = usage->value("completion_tokens", 0);
  }
  return r;
}

ModerationResult parse_moderation_reply(const json& body) {
  if (!body.is_object()) protocol_error("results");
  auto results = body.find("results");
  if (results == body.end() || !results->is_array() || results->empty()) protocol_error("results");
  const json& first = results->front();
  auto scores = first.find("category_scores");
  if (scores == first.end() || !scores->is_object()) protocol_error("results[0].category_scores");
  std::map<std::string, double> out;
  for (auto it = scores->begin(); it != scores->end(); ++it) {
    if (!it->is_number()) protocol_error("results[0].category_scores." + it.key());
    out[it.key()] = std::clamp(it->get<double>(), 0.0, 1.0);
  }
  std::vector<std::string> flagged;
  if (auto cats = first.find("categories"); cats != first.end() && cats->is_object()) {
    for (auto it = cats->begin(); it != cats->end(); ++it) {
      if (it->is_boolean() && it->get<bool>() && out.contains(it.key())) flagged.push_back(it.key());
    }
  }
  return ModerationResult::make(std::move(out), std::move(flagged));
}

CompletionResult OpenAIBackend::complete(const CompletionRequest& req) {
  return parse_chat_reply(post("/chat/completions", encode_request(req)));
}

ModerationResult OpenAIBackend::moderate(const std::string& text) {
  json body{{"input", text}};
  if (!options_.moderation_model.empty()) body["model"] = options_.moderation_model;
  return parse_moderation_reply(post("/moderations", body));
}

}  // namespace humorgen

#include "humorgen/config.hpp"

#include <cstdlib>
#include <set>

#include "humorgen/prompt_template.hpp"

namespace humorgen {

namespace {

// Reads known keys from one config section and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ConfigError("unknown config key '" + name_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::filesystem::path or_bundled(const std::string& p, const char* rel) {
  return p.empty() ? bundled_data_dir() / rel : std::filesystem::path(p);
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "gateway" && k != "paths" && k != "pipeline" && k != "seed") {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw ConfigError("config key 'seed' must be a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  if (auto it = j.find("gateway"); it != j.end()) {
    Section s(*it, "gateway");
    auto& g = c.gateway;
    s.get("backend", g.backend);
    s.get("endpoint", g.endpoint);
    s.get("api_key_env", g.api_key_env);
    s.get("model", g.model);
    s.get("moderation_model", g.moderation_model);
    s.get("generation_temperature", g.generation_temperature);
    s.get("policy_temperature", g.policy_temperature);
    s.get("max_concurrency", g.max_concurrency);
    s.get("requests_per_minute", g.requests_per_minute);
    s.get("max_attempts", g.max_attempts);
    s.get("timeout_seconds", g.timeout_seconds);
    s.get("transcript", g.transcript);
    s.get("fixtures", g.fixtures);
    s.get("fixture_match", g.fixture_match);
    s.finish();
  }
  if (auto it = j.find("paths"); it != j.end()) {
    Section s(*it, "paths");
    auto& p = c.paths;
    s.get("templates", p.templates);
    s.get("frequency_list", p.frequency_list);
    s.get("stopwords", p.stopwords);
    s.get("profanity", p.profanity);
    s.get("emoticons", p.emoticons);
    s.get("question_schema", p.question_schema);
    s.get("output_dir", p.output_dir);
    s.finish();
  }
  if (auto it = j.find("pipeline"); it != j.end()) {
    Section s(*it, "pipeline");
    auto& p = c.pipeline;
    s.get("pool_size", p.pool_size);
    s.get("k_top", p.k_top);
    s.get("annotators_per_item", p.annotators_per_item);
    s.get("moderation_category", p.moderation_category);
    s.get("moderation_threshold", p.moderation_threshold);
    s.get("max_failure_rate", p.max_failure_rate);
    s.get("context_budget_tokens", p.context_budget_tokens);
    s.get("lease_minutes", p.lease_minutes);
    s.get("pseudo_count", p.pseudo_count);
    s.get("parallel_topics", p.parallel_topics);
    s.finish();
  }
  if (c.gateway.backend != "openai" && c.gateway.backend != "scripted") {
    throw ConfigError("gateway.backend must be 'openai' or 'scripted'");
  }
  if (c.gateway.fixture_match != "exact" && c.gateway.fixture_match != "prefix") {
    throw ConfigError("gateway.fixture_match must be 'exact' or 'prefix'");
  }
  if (c.pipeline.moderation_threshold < 0.0 || c.pipeline.moderation_threshold > 1.0) {
    throw ConfigError("pipeline.moderation_threshold must be in [0, 1]");
  }
  if (c.gateway.max_attempts < 1) throw ConfigError("gateway.max_attempts must be at least 1");
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  require_file(path, "config file");
  try {
    return from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

json RunConfig::to_json() const {
  const auto& g = gateway;
  const auto& p = paths;
  const auto& q = pipeline;
  return json{
      {"seed", seed},
      {"gateway",
       {{"backend", g.backend},
        {"endpoint", g.endpoint},
        {"api_key_env", g.api_key_env},
        {"model", g.model},
        {"moderation_model", g.moderation_model},
        {"generation_temperature", g.generation_temperature},
        {"policy_temperature", g.policy_temperature},
        {"max_concurrency", g.max_concurrency},
        {"requests_per_minute", g.requests_per_minute},
        {"max_attempts", g.max_attempts},
        {"timeout_seconds", g.timeout_seconds},
        {"transcript", g.transcript},
        {"fixtures", g.fixtures},
        {"fixture_match", g.fixture_match}}},
      {"paths",
       {{"templates", p.templates},
        {"frequency_list", p.frequency_list},
        {"stopwords", p.stopwords},
        {"profanity", p.profanity},
        {"emoticons", p.emoticons},
        {"question_schema", p.question_schema},
        {"output_dir", p.output_dir}}},
      {"pipeline",
       {{"pool_size", q.pool_size},
        {"k_top", q.k_top},
        {"annotators_per_item", q.annotators_per_item},
        {"moderation_category", q.moderation_category},
        {"moderation_threshold", q.moderation_threshold},
        {"max_failure_rate", q.max_failure_rate},
        {"context_budget_tokens", q.context_budget_tokens},
        {"lease_minutes", q.lease_minutes},
        {"pseudo_count", q.pseudo_count},
        {"parallel_topics", q.parallel_topics}}}};
}

std::filesystem::path RunConfig::templates_dir() const {
  return paths.templates.empty() ? bundled_data_dir() / "templates"
                                 : std::filesystem::path(paths.templates);
}
std::filesystem::path RunConfig::frequency_list_path() const {
  return or_bundled(paths.frequency_list, "words/en_frequency.txt");
}
std::filesystem::path RunConfig::stopwords_path() const {
  return or_bundled(paths.stopwords, "words/stopwords_en.txt");
}
std::filesystem::path RunConfig::profanity_path() const {
  return or_bundled(paths.profanity, "words/profanity_en.txt");
}
std::filesystem::path RunConfig::emoticons_path() const {
  return or_bundled(paths.emoticons, "emoticons.txt");
}
std::filesystem::path RunConfig::question_schema_path() const {
  return or_bundled(paths.question_schema, "annotation_schema.json");
}

void require_file(const std::filesystem::path& path, const std::string& what) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ConfigError(what + " not found: " + path.string());
  }
}

std::shared_ptr<Backend> make_backend(const GatewayConfig& cfg) {
  if (cfg.backend == "scripted") {
    if (cfg.fixtures.empty()) throw ConfigError("scripted backend needs gateway.fixtures");
    require_file(cfg.fixtures, "fixture file");
    return ScriptedBackend::from_file(cfg.fixtures, cfg.fixture_match == "prefix"
                                                        ? ScriptedBackend::Match::kExactThenPrefix
                                                        : ScriptedBackend::Match::kExact);
  }
  OpenAIOptions o;
  o.base_url = cfg.endpoint;
  o.moderation_model = cfg.moderation_model;
  o.timeout = std::chrono::seconds(cfg.timeout_seconds);
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (!key || !*key) {
    throw ConfigError("environment variable " + cfg.api_key_env + " holds no API key");
  }
  o.api_key = key;
  return std::make_shared<OpenAIBackend>(std::move(o));
}

GatewayOptions make_gateway_options(const GatewayConfig& cfg) {
  GatewayOptions o;
  o.max_attempts = cfg.max_attempts;
  o.max_concurrency = cfg.max_concurrency;
  o.requests_per_minute = cfg.requests_per_minute;
  if (!cfg.transcript.empty()) o.transcript_path = cfg.transcript;
  return o;
}

}  // namespace humorgen

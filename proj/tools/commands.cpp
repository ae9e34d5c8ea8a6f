#include "commands.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "humorgen/annotation_http.hpp"
#include "humorgen/annotation_store.hpp"
#include "humorgen/clock.hpp"
#include "humorgen/config.hpp"
#include "humorgen/corpus.hpp"
#include "humorgen/hash.hpp"
#include "humorgen/pipeline.hpp"
#include "humorgen/policy.hpp"
#include "humorgen/ranking.hpp"
#include "humorgen/stats.hpp"
#include "humorgen/topics.hpp"

namespace humorgen::cli {

namespace fs = std::filesystem;

namespace {

/// Non-zero exit with a message but no exception type of its own.
struct CommandFailed {
  int code;
  std::string kind;
  std::string message;
};

// Flags shared by every subcommand; unset values leave the config alone.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct GatewayFlags {
  std::string backend, endpoint, model, fixtures, fixture_match, transcript;
  std::optional<std::size_t> max_concurrency, rpm;
  std::optional<int> max_attempts;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Seed for all randomness (overrides config)");
  cmd->add_option("--out", c.out, "Output directory (overrides paths.output_dir)");
}

void add_gateway(CLI::App* cmd, GatewayFlags& g) {
  cmd->add_option("--backend", g.backend, "openai or scripted")
      ->check(CLI::IsMember({"openai", "scripted"}));
  cmd->add_option("--endpoint", g.endpoint, "Chat/moderation API base URL");
  cmd->add_option("--model", g.model, "Model identifier");
  cmd->add_option("--fixtures", g.fixtures, "Scripted backend fixture or transcript file");
  cmd->add_option("--fixture-match", g.fixture_match, "exact or prefix")
      ->check(CLI::IsMember({"exact", "prefix"}));
  cmd->add_option("--transcript", g.transcript, "Append request/response transcript here");
  cmd->add_option("--max-concurrency", g.max_concurrency, "Concurrent request cap");
  cmd->add_option("--rpm", g.rpm, "Requests-per-minute budget (0: unlimited)");
  cmd->add_option("--max-attempts", g.max_attempts, "Attempts per request");
}

RunConfig resolve(const Common& c, const GatewayFlags* g = nullptr) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : RunConfig::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.paths.output_dir = c.out;
  if (g) {
    auto& gw = cfg.gateway;
    if (!g->fixtures.empty()) {
      gw.fixtures = g->fixtures;
      if (g->backend.empty()) gw.backend = "scripted";
    }
    if (!g->backend.empty()) gw.backend = g->backend;
    if (!g->endpoint.empty()) gw.endpoint = g->endpoint;
    if (!g->model.empty()) gw.model = g->model;
    if (!g->fixture_match.empty()) gw.fixture_match = g->fixture_match;
    if (!g->transcript.empty()) gw.transcript = g->transcript;
    if (g->max_concurrency) gw.max_concurrency = *g->max_concurrency;
    if (g->rpm) gw.requests_per_minute = *g->rpm;
    if (g->max_attempts) gw.max_attempts = *g->max_attempts;
    if (gw.max_attempts < 1) throw ConfigError("--max-attempts must be at least 1");
  }
  return cfg;
}

std::unique_ptr<Gateway> open_gateway(const RunConfig& cfg) {
  auto backend = make_backend(cfg.gateway);
  return std::make_unique<Gateway>(std::move(backend), make_gateway_options(cfg.gateway));
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir = cfg.paths.output_dir;
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json base_manifest(const std::string& command, const RunConfig& cfg) {
  return json{{"command", command},
              {"seed", cfg.seed},
              {"created_at", utc_timestamp()},
              {"config", cfg.to_json()}};
}

// Plain text (one joke per line) or JSONL SeedJoke records.
std::vector<SeedJoke> load_jokes(const fs::path& path) {
  require_file(path, "joke file");
  if (path.extension() == ".jsonl") return read_record_file<SeedJoke>(path);
  std::ifstream in(path);
  return read_plain_jokes(in);
}

std::vector<Topic> load_topics(const fs::path& path) {
  require_file(path, "topic file");
  if (path.extension() == ".jsonl") return read_record_file<Topic>(path);
  std::vector<Topic> topics;
  std::size_t rank = 0;
  for (const auto& w : read_word_list(path)) topics.push_back(Topic::make(w, rank++));
  return topics;
}

HumorPolicy load_policy(const fs::path& path) {
  require_file(path, "policy file");
  if (path.extension() == ".json" || path.extension() == ".jsonl") {
    auto policies = read_record_file<HumorPolicy>(path);
    if (policies.size() != 1) throw ConfigError("policy record file must hold exactly one policy");
    return policies.front();
  }
  std::string text = read_text_file(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return HumorPolicy::from_text(std::move(text));
}

std::vector<LabelRecord> load_labels(const fs::path& path) {
  std::vector<LabelRecord> out;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .jsonl label files in " + path.string());
    for (const auto& f : files) {
      auto part = read_record_file<LabelRecord>(f);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  require_file(path, "label file");
  return read_record_file<LabelRecord>(path);
}

// ---- rank-seed ----

struct RankSeedArgs {
  Common common;
  std::string judgments, jokes, method = "bradley-terry";
  std::optional<double> pseudo_count;
  std::optional<std::size_t> k;
  std::optional<std::size_t> schedule_pairs;
};

int rank_seed(const RankSeedArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  if (a.pseudo_count) cfg.pipeline.pseudo_count = *a.pseudo_count;
  if (a.k) cfg.pipeline.k_top = *a.k;

  if (a.schedule_pairs) {
    if (a.jokes.empty()) throw ConfigError("--schedule-pairs needs --jokes");
    const auto jokes = load_jokes(a.jokes);
    std::vector<std::string> ids;
    for (const auto& j : jokes) ids.push_back(j.id);
    const auto pairs = schedule_pairs(ids, *a.schedule_pairs, cfg.seed);
    const fs::path dir = out_dir(cfg);
    std::ofstream f(dir / "pairs.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& [x, y] : pairs) f << dump_line(json{{"joke_a_id", x}, {"joke_b_id", y}}) << '\n';
    json m = base_manifest("rank-seed", cfg);
    m["pairs"] = pairs.size();
    m["pairs_per_joke"] = *a.schedule_pairs;
    write_json(dir / "manifest.json", m);
    out << "scheduled " << pairs.size() << " pairs for " << ids.size() << " jokes\n";
    return kOk;
  }

  if (a.judgments.empty()) throw ConfigError("rank-seed needs --judgments (or --schedule-pairs)");
  require_file(a.judgments, "judgment file");
  std::optional<std::vector<SeedJoke>> jokes;
  if (!a.jokes.empty()) jokes = load_jokes(a.jokes);
  const auto judgments = read_record_file<PairwiseJudgment>(a.judgments);
  if (jokes) {
    std::set<std::string> known;
    for (const auto& j : *jokes) known.insert(j.id);
    for (const auto& j : judgments) {
      for (const auto* id : {&j.joke_a_id(), &j.joke_b_id()}) {
        if (!known.contains(*id)) throw ConfigError("judged joke " + *id + " is not in --jokes");
      }
    }
  }

  RankOptions opt;
  opt.pseudo_count = cfg.pipeline.pseudo_count;
  opt.method = a.method == "copeland" ? RankMethod::kCopeland : RankMethod::kBradleyTerry;
  RankedCorpus ranked = rank_pairwise(judgments, opt);
  if (jokes) attach_texts(ranked, *jokes);
  const std::size_t k = a.k ? *a.k : std::min(cfg.pipeline.k_top, ranked.jokes.size());
  const auto top = select_seed(ranked, k);

  const fs::path dir = out_dir(cfg);
  write_record_file(dir / "ranking.jsonl", ranked.jokes);
  // Without texts only the ids of the top k can be written.
  const fs::path seed_path = dir / (jokes ? "seed.jsonl" : "seed_ids.txt");
  if (jokes) {
    std::vector<SeedJoke> seed;
    for (std::size_t i = 0; i < k; ++i) seed.push_back({ranked.jokes[i].joke_id, ranked.jokes[i].text});
    write_record_file(seed_path, seed);
  } else {
    std::string ids;
    for (const auto& id : top) ids += id + "\n";
    write_text_file(seed_path, ids);
  }
  json m = base_manifest("rank-seed", cfg);
  m["method"] = a.method;
  m["judgments_used"] = ranked.judgments_used;
  m["jokes_ranked"] = ranked.jokes.size();
  m["iterations"] = ranked.iterations;
  m["converged"] = ranked.converged;
  m["k"] = k;
  write_json(dir / "manifest.json", m);
  out << "ranked " << ranked.jokes.size() << " jokes from " << ranked.judgments_used
      << " judgments; top " << k << " written to " << seed_path.string() << "\n";
  return kOk;
}

// ---- infer-policy ----

struct InferArgs {
  Common common;
  GatewayFlags gateway;
  std::string seed_jokes;
  std::optional<std::size_t> k;
  std::optional<std::size_t> budget;
  bool resume = false;
};

int infer_policy(const InferArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common, &a.gateway);
  if (a.k) cfg.pipeline.k_top = *a.k;
  if (a.budget) cfg.pipeline.context_budget_tokens = *a.budget;
  auto jokes = load_jokes(a.seed_jokes);
  if (jokes.size() > cfg.pipeline.k_top) jokes.resize(cfg.pipeline.k_top);
  if (jokes.empty()) throw ConfigError("seed joke file is empty");
  const auto lib = TemplateLibrary::load(cfg.templates_dir());
  const fs::path dir = out_dir(cfg);
  const fs::path decomp_path = dir / "decompositions.jsonl";

  std::map<std::string, Decomposition> have;
  if (a.resume && fs::exists(decomp_path)) {
    for (auto& d : read_record_file<Decomposition>(decomp_path)) have.emplace(d.joke_id(), d);
  }
  std::vector<SeedJoke> todo;
  for (const auto& j : jokes) {
    if (!have.contains(j.id)) todo.push_back(j);
  }

  auto gateway = open_gateway(cfg);
  PolicySettings ps;
  ps.model_id = cfg.gateway.model;
  ps.temperature = cfg.gateway.policy_temperature;
  ps.context_budget_tokens = cfg.pipeline.context_budget_tokens;

  std::ofstream sink(decomp_path, std::ios::binary | (a.resume ? std::ios::app : std::ios::trunc));
  if (!a.resume) {
    for (const auto& [id, d] : have) sink << serialize_record(d) << '\n';
  }
  auto outcome = decompose_all(*gateway, lib, todo, ps, cfg.gateway.max_concurrency,
                               [&](const Decomposition& d) {
                                 sink << serialize_record(d) << '\n';
                                 sink.flush();
                               });
  sink.close();
  for (auto& d : outcome.decompositions) have.emplace(d.joke_id(), d);

  json m = base_manifest("infer-policy", cfg);
  m["seed_jokes"] = jokes.size();
  m["template_fingerprints"] = {{templates::kDecompose, lib.get(templates::kDecompose).fingerprint()},
                                {templates::kDistill, lib.get(templates::kDistill).fingerprint()}};
  json failures = json::array();
  for (const auto& f : outcome.failures) failures.push_back({{"joke_id", f.joke_id}, {"message", f.message}});
  m["decomposition_failures"] = failures;

  if (!outcome.failures.empty()) {
    m["policy_written"] = false;
    write_json(dir / "manifest.json", m);
    throw CommandFailed{kRunFailed, "partial",
                        std::to_string(outcome.failures.size()) + " of " +
                            std::to_string(jokes.size()) + " decompositions failed (first: " +
                            outcome.failures.front().joke_id + ": " +
                            outcome.failures.front().message +
                            "); successful ones are in " + decomp_path.string() +
                            ", rerun with --resume"};
  }

  std::vector<Decomposition> ordered;
  for (const auto& j : jokes) ordered.push_back(have.at(j.id));
  const HumorPolicy policy = distill_policy(*gateway, lib, ordered, ps);
  write_text_file(dir / "policy.txt", policy.text() + "\n");
  write_record_file(dir / "policy.json", std::vector<HumorPolicy>{policy});
  m["policy_written"] = true;
  m["policy_sha256"] = sha256_hex(policy.text());
  m["requests"] = gateway->stats().completions;
  write_json(dir / "manifest.json", m);
  out << "distilled policy from " << ordered.size() << " decompositions into "
      << (dir / "policy.txt").string() << "\n";
  return kOk;
}

// ---- sample-topics ----

struct SampleTopicsArgs {
  Common common;
  std::size_t n = 120;
  std::string frequency_list, stopwords, profanity;
  std::optional<std::size_t> pool_size;
};

int sample_topics_cmd(const SampleTopicsArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  if (!a.frequency_list.empty()) cfg.paths.frequency_list = a.frequency_list;
  if (!a.stopwords.empty()) cfg.paths.stopwords = a.stopwords;
  if (!a.profanity.empty()) cfg.paths.profanity = a.profanity;
  if (a.pool_size) cfg.pipeline.pool_size = *a.pool_size;
  require_file(cfg.frequency_list_path(), "frequency list");
  require_file(cfg.stopwords_path(), "stopword list");
  require_file(cfg.profanity_path(), "profanity list");

  const auto filter = load_word_filter(cfg.stopwords_path().string(), cfg.profanity_path().string());
  const auto sampler = TopicSampler::make(read_word_list(cfg.frequency_list_path()), filter, cfg.seed,
                                          cfg.pipeline.pool_size);
  const auto sample = sample_topics(sampler, a.n);
  const fs::path dir = out_dir(cfg);
  std::string words;
  for (const auto& t : sample.topics) words += t.word() + "\n";
  write_text_file(dir / "topics.txt", words);
  write_record_file(dir / "topics.jsonl", sample.topics);
  json m = base_manifest("sample-topics", cfg);
  m["n"] = a.n;
  m["pool_size"] = sampler.pool().size();
  m["with_replacement"] = sample.with_replacement;
  m["frequency_list_sha256"] = sha256_hex(read_text_file(cfg.frequency_list_path()));
  write_json(dir / "manifest.json", m);
  out << "sampled " << sample.topics.size() << " topics from a pool of " << sampler.pool().size()
      << (sample.with_replacement ? " (with replacement)" : "") << "\n";
  return kOk;
}

// ---- generate ----

struct GenerateArgs {
  Common common;
  GatewayFlags gateway;
  std::string mode;
  std::string topics_file;
  std::vector<std::string> topic_words;
  std::string policy;
  std::string selection = "all";
  bool dry_run = false;
};

int generate(const GenerateArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common, &a.gateway);
  const Mode mode = parse_mode(a.mode);
  if (mode == Mode::kCorpus) throw ConfigError("corpus is not a generation mode");
  if (mode == Mode::kZeroShot && !a.policy.empty()) {
    throw ConfigError("zero-shot mode does not take a policy (--policy given)");
  }
  if (mode != Mode::kZeroShot && a.policy.empty()) {
    throw ConfigError("mode " + a.mode + " requires --policy");
  }
  std::vector<Topic> topics;
  if (!a.topics_file.empty()) topics = load_topics(a.topics_file);
  for (const auto& w : a.topic_words) topics.push_back(Topic::make(w, topics.size()));
  if (topics.empty()) throw ConfigError("no topics: pass --topics FILE or --topic WORD");
  std::optional<HumorPolicy> policy;
  if (!a.policy.empty()) policy = load_policy(a.policy);
  const auto run =
      PipelineRun::make(mode, std::move(policy), std::move(topics), parse_selection(a.selection), cfg.seed);
  const auto lib = TemplateLibrary::load(cfg.templates_dir());

  if (a.dry_run) {
    const StageCounts c = JokePipeline::plan(run);
    json plan{{"mode", a.mode},
              {"topics", run.topics().size()},
              {"requests",
               {{"brainstorm", c.brainstorm},
                {"expand", c.expand},
                {"refine", c.refine},
                {"generate", c.generate}}},
              {"total", c.total()},
              {"note", "retries on out-of-range lists may add up to one request per stage"}};
    out << plan.dump(2) << "\n";
    return kOk;
  }

  auto gateway = open_gateway(cfg);
  PipelineSettings ps;
  ps.model_id = cfg.gateway.model;
  ps.temperature = cfg.gateway.generation_temperature;
  ps.parallel_topics = cfg.pipeline.parallel_topics;
  ps.max_failure_rate = cfg.pipeline.max_failure_rate;
  JokePipeline pipeline(*gateway, lib, ps);
  BatchResult result = pipeline.run_batch(run);
  result.manifest["command"] = "generate";
  result.manifest["created_at"] = utc_timestamp();
  result.manifest["config"] = cfg.to_json();
  const fs::path dir = out_dir(cfg);
  write_batch(result, dir);
  if (result.aborted) {
    throw CommandFailed{kRunFailed, "aborted",
                        std::to_string(result.failures.size()) + " of " +
                            std::to_string(run.topics().size()) +
                            " topics failed, above the failure-rate limit; see " +
                            (dir / "manifest.json").string()};
  }
  out << "wrote " << result.records.size() << " jokes for " << run.topics().size() - result.failures.size()
      << " topics (" << result.failures.size() << " failed) to " << (dir / "corpus.jsonl").string()
      << "\n";
  return kOk;
}

// ---- clean-reddit ----

struct CleanArgs {
  Common common;
  std::string input, emoticons, replacement, label, split;
  char delimiter = 0;
};

int clean_reddit_cmd(const CleanArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  if (!a.emoticons.empty()) cfg.paths.emoticons = a.emoticons;
  require_file(a.input, "input table");
  require_file(cfg.emoticons_path(), "emoticon pattern file");
  CleaningOptions opt;
  if (!a.replacement.empty()) opt.underscore_replacement = a.replacement;
  if (!a.label.empty()) opt.keep_label = a.label;
  if (!a.split.empty()) opt.keep_split = a.split;
  const auto emoticons = EmoticonSet::load(cfg.emoticons_path());
  const auto rows = read_reddit_table(a.input, a.delimiter);
  const auto result = clean_reddit(rows, emoticons, opt);

  const fs::path dir = out_dir(cfg);
  write_record_file(dir / "corpus.jsonl", result.records);
  std::ofstream rej(dir / "rejections.jsonl", std::ios::binary | std::ios::trunc);
  for (const auto& r : result.report.rejections) {
    rej << dump_line(json{{"joke_id", r.joke_id}, {"rule", r.rule}}) << '\n';
  }
  json report{{"input_count", result.report.input_count},
              {"kept_count", result.report.kept_count},
              {"rejected_count", result.report.rejections.size()},
              {"rejections_by_rule", result.report.counts_by_rule()},
              {"substitutions", result.report.substitutions},
              {"underscore_replacement", opt.underscore_replacement},
              {"emoticon_patterns", emoticons.size()}};
  write_json(dir / "cleaning_report.json", report);
  json m = base_manifest("clean-reddit", cfg);
  m["input_sha256"] = sha256_hex(read_text_file(a.input));
  write_json(dir / "manifest.json", m);
  out << "kept " << result.report.kept_count << " of " << result.report.input_count << " rows\n";
  return kOk;
}

// ---- moderate ----

struct ModerateArgs {
  Common common;
  GatewayFlags gateway;
  std::string input, category;
  std::optional<double> threshold;
  std::optional<std::size_t> sample;
};

int moderate_cmd(const ModerateArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common, &a.gateway);
  if (!a.category.empty()) cfg.pipeline.moderation_category = a.category;
  if (a.threshold) cfg.pipeline.moderation_threshold = *a.threshold;
  if (cfg.pipeline.moderation_threshold < 0.0 || cfg.pipeline.moderation_threshold > 1.0) {
    throw ConfigError("--threshold must be in [0, 1]");
  }
  require_file(a.input, "input corpus");
  const auto records = read_record_file<JokeRecord>(a.input);
  if (a.sample && *a.sample > records.size()) {
    throw ConfigError("--sample " + std::to_string(*a.sample) + " exceeds the " +
                      std::to_string(records.size()) + " input records");
  }
  auto gateway = open_gateway(cfg);
  const auto outcome = moderation_filter(*gateway, records, cfg.pipeline.moderation_category,
                                         cfg.pipeline.moderation_threshold,
                                         cfg.gateway.max_concurrency);
  const fs::path dir = out_dir(cfg);
  write_record_file(dir / "kept.jsonl", outcome.kept);
  write_record_file(dir / "rejected.jsonl", outcome.rejected);
  std::ofstream q(dir / "quarantined.jsonl", std::ios::binary | std::ios::trunc);
  for (const auto& r : outcome.quarantined) {
    json j = RecordCodec<JokeRecord>::encode(r.record);
    j["quarantine_reason"] = r.reason;
    q << dump_line(j) << '\n';
  }
  json m = base_manifest("moderate", cfg);
  m["input_count"] = records.size();
  m["kept"] = outcome.kept.size();
  m["rejected"] = outcome.rejected.size();
  m["quarantined"] = outcome.quarantined.size();
  m["category"] = cfg.pipeline.moderation_category;
  m["threshold"] = cfg.pipeline.moderation_threshold;
  if (a.sample) {
    if (*a.sample > outcome.kept.size()) {
      write_json(dir / "manifest.json", m);
      throw CommandFailed{kRunFailed, "too_few_kept",
                          "only " + std::to_string(outcome.kept.size()) +
                              " records passed moderation, cannot sample " +
                              std::to_string(*a.sample)};
    }
    write_record_file(dir / "eval.jsonl", sample_eval_set(outcome.kept, *a.sample, cfg.seed));
    m["eval_sample"] = *a.sample;
  }
  write_json(dir / "manifest.json", m);
  out << "kept " << outcome.kept.size() << ", rejected " << outcome.rejected.size()
      << ", quarantined " << outcome.quarantined.size() << "\n";
  return outcome.quarantined.empty() ? kOk : kRunFailed;
}

// ---- serve-annotation ----

struct ServeArgs {
  Common common;
  std::string db = "annotation.sqlite3";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string corpus, method, batch_id, static_dir;
  std::optional<double> lease_minutes;
  std::optional<std::size_t> per_item;
  bool add_only = false;
};

AnnotationServer* g_server = nullptr;

extern "C" void stop_server(int) {
  if (g_server) g_server->stop();
}

int serve_annotation(const ServeArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  if (a.lease_minutes) cfg.pipeline.lease_minutes = *a.lease_minutes;
  if (a.per_item) cfg.pipeline.annotators_per_item = *a.per_item;
  if (!a.corpus.empty()) {
    require_file(a.corpus, "corpus");
    if (a.method.empty() || a.batch_id.empty()) {
      throw ConfigError("--corpus needs --method and --batch-id");
    }
  }
  if (!a.static_dir.empty() && !fs::is_directory(a.static_dir)) {
    throw ConfigError("static directory not found: " + a.static_dir);
  }
  require_file(cfg.question_schema_path(), "question schema");
  const json schema = load_question_schema(cfg.question_schema_path());

  StoreOptions so;
  so.lease_duration = std::chrono::milliseconds(
      static_cast<long long>(cfg.pipeline.lease_minutes * 60'000.0));
  AnnotationStore store(a.db, Clock::system(), so);
  if (!a.corpus.empty()) {
    const auto records = read_record_file<JokeRecord>(a.corpus);
    store.add_batch(AnnotationBatch::from_records(a.batch_id, records, a.method,
                                                  cfg.pipeline.annotators_per_item));
    out << "added batch " << a.batch_id << " with " << records.size() << " tasks\n";
  }
  if (a.add_only) return kOk;

  std::optional<fs::path> static_dir;
  if (!a.static_dir.empty()) static_dir = a.static_dir;
  AnnotationServer server(store, schema, static_dir);
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  out << "serving /api/v1/ on http://" << a.host << ":" << a.port << "\n" << std::flush;
  const bool ok = server.listen(a.host, a.port);
  g_server = nullptr;
  if (!ok) throw CommandFailed{kRunFailed, "listen", "cannot listen on " + a.host + ":" + std::to_string(a.port)};
  return kOk;
}

// ---- export-labels ----

struct ExportArgs {
  Common common;
  std::string db = "annotation.sqlite3";
  std::vector<std::string> batch_ids;
  std::string file;
};

int export_labels_cmd(const ExportArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  require_file(a.db, "annotation store");
  AnnotationStore store(a.db);
  auto ids = a.batch_ids.empty() ? store.batch_ids() : a.batch_ids;
  std::vector<LabelRecord> all;
  for (const auto& id : ids) {
    auto part = store.export_labels(id);
    all.insert(all.end(), part.begin(), part.end());
  }
  const fs::path path = a.file.empty() ? out_dir(cfg) / "labels.jsonl" : fs::path(a.file);
  write_record_file(path, all);
  out << "exported " << all.size() << " labels from " << ids.size() << " batches to "
      << path.string() << "\n";
  return kOk;
}

// ---- analyze / report ----

struct TestFlags {
  std::string alternative = "two-sided";
  std::string u_method = "auto";
  bool no_continuity = false;
  bool no_tie_correction = false;
};

void add_test_flags(CLI::App* cmd, TestFlags& t) {
  cmd->add_option("--alternative", t.alternative, "two-sided, less or greater")
      ->check(CLI::IsMember({"two-sided", "less", "greater"}));
  cmd->add_option("--u-method", t.u_method, "auto, exact or normal")
      ->check(CLI::IsMember({"auto", "exact", "normal"}));
  cmd->add_flag("--no-continuity", t.no_continuity, "Drop the 0.5 continuity correction");
  cmd->add_flag("--no-tie-correction", t.no_tie_correction, "Drop the tie term from the variance");
}

UTestOptions test_options(const TestFlags& t) {
  UTestOptions o;
  o.alternative = parse_alternative(t.alternative);
  o.method = t.u_method == "exact" ? UMethod::kExact
             : t.u_method == "normal" ? UMethod::kNormalApprox
                                      : UMethod::kAuto;
  o.continuity_correction = !t.no_continuity;
  o.tie_correction = !t.no_tie_correction;
  return o;
}

const std::vector<std::string> kMethodOrder{"zero-shot", "no-assoc", "assoc-v1",
                                            "assoc-v2",  "full",     "reddit"};

json test_json(const std::string& a, const std::string& b, Score s, CompareMode mode,
               const UTestResult& r) {
  json j{{"method_a", a},
         {"method_b", b},
         {"score", std::string(to_string(s))},
         {"mode", std::string(to_string(mode))},
         {"u", r.u_statistic},
         {"p_value", r.p_value},
         {"p_value_pct", r.p_value * 100.0},
         {"test", std::string(to_string(r.method))},
         {"n1", r.n1},
         {"n2", r.n2},
         {"tie_correction_applied", r.tie_correction_applied}};
  if (r.z) j["z"] = *r.z;
  return j;
}

std::string histogram_csv(std::span<const MethodReport> reports) {
  std::string csv = "method,bin_lo,bin_hi,closed_right,count\n";
  for (const auto& r : reports) {
    for (const auto& b : funniness_histogram(r)) {
      char line[160];
      std::snprintf(line, sizeof line, "%s,%.2f,%.2f,%d,%zu\n", r.method.c_str(), b.lo, b.hi,
                    b.closed_right ? 1 : 0, b.count);
      csv += line;
    }
  }
  return csv;
}

struct AnalyzeArgs {
  Common common;
  std::string labels;
  bool quality_table = false;
  bool histogram = false;
  std::string csv;
  std::vector<std::string> compare;
  std::string score = "funniness";
  std::string compare_mode = "per_item_mean";
  std::vector<std::string> novelty;
  TestFlags tests;
};

int analyze(const AnalyzeArgs& a, std::ostream& out) {
  resolve(a.common);
  const auto labels = load_labels(a.labels);
  const auto reports = aggregate_all(labels, kMethodOrder);
  const auto find = [&](const std::string& m) -> const MethodReport& {
    for (const auto& r : reports) {
      if (r.method == m) return r;
    }
    throw ConfigError("no labels for method '" + m + "'");
  };
  const bool nothing_requested =
      !a.quality_table && !a.histogram && a.compare.empty() && a.novelty.empty() && a.csv.empty();
  if (a.quality_table || nothing_requested) out << render_quality_table(reports);
  if (!a.csv.empty()) write_text_file(a.csv, render_quality_table_csv(reports));
  if (a.histogram) out << histogram_csv(reports);
  const Score score = parse_score(a.score);
  const CompareMode mode = parse_compare_mode(a.compare_mode);
  const UTestOptions opt = test_options(a.tests);
  for (const auto& pair_arg : a.compare) {
    const auto comma = pair_arg.find(',');
    if (comma == std::string::npos) throw ConfigError("--compare expects A,B (got '" + pair_arg + "')");
    const std::string ma = pair_arg.substr(0, comma), mb = pair_arg.substr(comma + 1);
    const auto r = compare_methods(find(ma), find(mb), score, mode, opt);
    out << dump_line(test_json(ma, mb, score, mode, r)) << "\n";
  }
  for (const auto& m : a.novelty) {
    const auto n = novelty_summary(find(m));
    out << dump_line(json{{"method", m}, {"known_pct", n.known_pct}, {"novel_pct", n.novel_pct},
                          {"answered", n.answered}})
        << "\n";
  }
  return kOk;
}

struct ReportArgs {
  Common common;
  std::string labels;
  TestFlags tests;
};

int report(const ReportArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  const auto labels = load_labels(a.labels);
  const auto reports = aggregate_all(labels, kMethodOrder);
  const fs::path dir = out_dir(cfg);
  write_text_file(dir / "quality_table.txt", render_quality_table(reports));
  write_text_file(dir / "quality_table.csv", render_quality_table_csv(reports));
  write_text_file(dir / "histogram.csv", histogram_csv(reports));

  std::map<std::string, const MethodReport*> by_method;
  for (const auto& r : reports) by_method[r.method] = &r;
  const std::vector<std::tuple<std::string, std::string, Score>> planned{
      {"full", "zero-shot", Score::kFunniness},      {"full", "reddit", Score::kFunniness},
      {"full", "reddit", Score::kIsJoke},            {"full", "zero-shot", Score::kUnderstandable},
      {"full", "reddit", Score::kUnderstandable},    {"full", "zero-shot", Score::kKnown},
      {"full", "no-assoc", Score::kKnown},           {"full", "reddit", Score::kKnown},
  };
  const UTestOptions opt = test_options(a.tests);
  std::string tests;
  for (const auto& [ma, mb, s] : planned) {
    if (!by_method.contains(ma) || !by_method.contains(mb)) continue;
    for (CompareMode mode : {CompareMode::kPerItemMean, CompareMode::kPooled}) {
      try {
        const auto r = compare_methods(*by_method[ma], *by_method[mb], s, mode, opt);
        tests += dump_line(test_json(ma, mb, s, mode, r)) + "\n";
      } catch (const ConfigError&) {
        // Score not answered by one of the methods.
      }
    }
  }
  write_text_file(dir / "tests.jsonl", tests);
  json novelty = json::object();
  for (const auto& r : reports) {
    try {
      const auto n = novelty_summary(r);
      novelty[r.method] = {{"known_pct", n.known_pct}, {"novel_pct", n.novel_pct}, {"answered", n.answered}};
    } catch (const ConfigError&) {
    }
  }
  write_json(dir / "novelty.json", novelty);
  json m = base_manifest("report", cfg);
  m["labels"] = labels.size();
  m["alternative"] = a.tests.alternative;
  m["continuity_correction"] = !a.tests.no_continuity;
  m["tie_correction"] = !a.tests.no_tie_correction;
  write_json(dir / "manifest.json", m);
  out << render_quality_table(reports);
  return kOk;
}

void emit_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << dump_line(json{{"error", {{"kind", kind}, {"message", message}}}}) << std::endl;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Humor generation and evaluation toolkit", "humorgen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "humorgen 0.3.0");

  RankSeedArgs rank_args;
  auto* rank_cmd = app.add_subcommand("rank-seed", "Rank seed jokes from pairwise judgments");
  add_common(rank_cmd, rank_args.common);
  rank_cmd->add_option("--judgments", rank_args.judgments, "Pairwise judgment records (.jsonl)");
  rank_cmd->add_option("--jokes", rank_args.jokes, "Seed corpus: text lines or SeedJoke .jsonl");
  rank_cmd->add_option("--method", rank_args.method, "bradley-terry or copeland")
      ->check(CLI::IsMember({"bradley-terry", "copeland"}));
  rank_cmd->add_option("--pseudo-count", rank_args.pseudo_count, "Per-pair pseudo-count");
  rank_cmd->add_option("--k", rank_args.k, "Number of top jokes to keep");
  rank_cmd->add_option("--schedule-pairs", rank_args.schedule_pairs,
                       "Write a random comparison schedule with this many pairs per joke");

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer-policy", "Decompose seed jokes and distill a policy");
  add_common(infer_cmd, infer_args.common);
  add_gateway(infer_cmd, infer_args.gateway);
  infer_cmd->add_option("--seed-jokes", infer_args.seed_jokes, "Ranked seed jokes (.jsonl or text)")
      ->required();
  infer_cmd->add_option("--k", infer_args.k, "Use only the first k seed jokes");
  infer_cmd->add_option("--budget", infer_args.budget, "Context budget in estimated tokens");
  infer_cmd->add_flag("--resume", infer_args.resume, "Reuse decompositions already in --out");

  SampleTopicsArgs topics_args;
  auto* topics_cmd = app.add_subcommand("sample-topics", "Sample topics from a frequency list");
  add_common(topics_cmd, topics_args.common);
  topics_cmd->add_option("--n", topics_args.n, "Number of topics")->check(CLI::PositiveNumber);
  topics_cmd->add_option("--frequency-list", topics_args.frequency_list, "Word list, most frequent first");
  topics_cmd->add_option("--stopwords", topics_args.stopwords, "Stopword list");
  topics_cmd->add_option("--profanity", topics_args.profanity, "Profanity list");
  topics_cmd->add_option("--pool-size", topics_args.pool_size, "Pool size after filtering");

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Generate jokes for topics");
  add_common(gen_cmd, gen_args.common);
  add_gateway(gen_cmd, gen_args.gateway);
  gen_cmd->add_option("--mode", gen_args.mode, "zero-shot, no-assoc, assoc-v1, assoc-v2 or full")
      ->required()
      ->check(CLI::IsMember({"zero-shot", "no-assoc", "assoc-v1", "assoc-v2", "full"}));
  gen_cmd->add_option("--topics", gen_args.topics_file, "Topic file: words or Topic .jsonl");
  gen_cmd->add_option("--topic", gen_args.topic_words, "Topic word (repeatable)");
  gen_cmd->add_option("--policy", gen_args.policy, "Policy text file or policy .json record");
  gen_cmd->add_option("--selection", gen_args.selection, "all or sample_one")
      ->check(CLI::IsMember({"all", "sample_one"}));
  gen_cmd->add_flag("--dry-run", gen_args.dry_run, "Print planned requests per stage and exit");

  CleanArgs clean_args;
  auto* clean_cmd = app.add_subcommand("clean-reddit", "Clean the Reddit jokes table");
  add_common(clean_cmd, clean_args.common);
  clean_cmd->add_option("--input", clean_args.input, "CSV/TSV with text, label, split columns")->required();
  clean_cmd->add_option("--emoticons", clean_args.emoticons, "Emoticon pattern file");
  clean_cmd->add_option("--underscore-replacement", clean_args.replacement,
                        "Replacement for runs of two or more underscores");
  clean_cmd->add_option("--label", clean_args.label, "Label value to keep");
  clean_cmd->add_option("--split", clean_args.split, "Split to keep");
  clean_cmd->add_option("--delimiter", clean_args.delimiter, "Field delimiter (default by extension)");

  ModerateArgs mod_args;
  auto* mod_cmd = app.add_subcommand("moderate", "Moderation-filter a corpus");
  add_common(mod_cmd, mod_args.common);
  add_gateway(mod_cmd, mod_args.gateway);
  mod_cmd->add_option("--input", mod_args.input, "Corpus records (.jsonl)")->required();
  mod_cmd->add_option("--category", mod_args.category, "Moderation category");
  mod_cmd->add_option("--threshold", mod_args.threshold, "Reject scores strictly above this");
  mod_cmd->add_option("--sample", mod_args.sample, "Also write a seeded evaluation sample of this size");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve-annotation", "Run the annotation service");
  add_common(serve_cmd, serve_args.common);
  serve_cmd->add_option("--db", serve_args.db, "Store file");
  serve_cmd->add_option("--host", serve_args.host, "Listen address");
  serve_cmd->add_option("--port", serve_args.port, "Listen port");
  serve_cmd->add_option("--corpus", serve_args.corpus, "Add this corpus as a batch");
  serve_cmd->add_option("--method", serve_args.method, "Method tag for the added batch");
  serve_cmd->add_option("--batch-id", serve_args.batch_id, "Id for the added batch");
  serve_cmd->add_option("--static", serve_args.static_dir, "Serve the annotation client from here");
  serve_cmd->add_option("--lease-minutes", serve_args.lease_minutes, "Lease duration");
  serve_cmd->add_option("--annotators-per-item", serve_args.per_item, "Annotators per task");
  serve_cmd->add_flag("--add-only", serve_args.add_only, "Add the batch and exit");

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-labels", "Export collected labels");
  add_common(export_cmd, export_args.common);
  export_cmd->add_option("--db", export_args.db, "Store file");
  export_cmd->add_option("--batch-id", export_args.batch_ids, "Batch to export (repeatable; default all)");
  export_cmd->add_option("--file", export_args.file, "Output file (default OUT/labels.jsonl)");

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Aggregate labels and run significance tests");
  add_common(analyze_cmd, analyze_args.common);
  analyze_cmd->add_option("--labels", analyze_args.labels, "Label file or directory of .jsonl")->required();
  analyze_cmd->add_flag("--table2,--quality-table", analyze_args.quality_table, "Print the per-method quality table");
  analyze_cmd->add_flag("--histogram", analyze_args.histogram, "Print funniness histograms as CSV");
  analyze_cmd->add_option("--csv", analyze_args.csv, "Write the table as CSV to this file");
  analyze_cmd->add_option("--compare", analyze_args.compare, "Method pair A,B to test (repeatable)");
  analyze_cmd->add_option("--score", analyze_args.score, "funniness, is_joke, understandable, known or offensive")
      ->check(CLI::IsMember({"funniness", "is_joke", "understandable", "known", "offensive"}));
  analyze_cmd->add_option("--compare-mode", analyze_args.compare_mode, "per_item_mean or pooled")
      ->check(CLI::IsMember({"per_item_mean", "pooled"}));
  analyze_cmd->add_option("--novelty", analyze_args.novelty, "Print known/novel split for a method");
  add_test_flags(analyze_cmd, analyze_args.tests);

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Write table, histogram and tests to --out");
  add_common(report_cmd, report_args.common);
  report_cmd->add_option("--labels", report_args.labels, "Label file or directory of .jsonl")->required();
  add_test_flags(report_cmd, report_args.tests);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(e.get_name() == "--help" ? "" : "", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "humorgen 0.3.0\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "usage", e.what());
    return kUsage;
  }

  try {
    if (*rank_cmd) return rank_seed(rank_args, out);
    if (*infer_cmd) return infer_policy(infer_args, out);
    if (*topics_cmd) return sample_topics_cmd(topics_args, out);
    if (*gen_cmd) return generate(gen_args, out);
    if (*clean_cmd) return clean_reddit_cmd(clean_args, out);
    if (*mod_cmd) return moderate_cmd(mod_args, out);
    if (*serve_cmd) return serve_annotation(serve_args, out);
    if (*export_cmd) return export_labels_cmd(export_args, out);
    if (*analyze_cmd) return analyze(analyze_args, out);
    if (*report_cmd) return report(report_args, out);
  } catch (const CommandFailed& e) {
    emit_error(err, e.kind, e.message);
    return e.code;
  } catch (const ConfigError& e) {
    emit_error(err, "config", e.what());
    return kUsage;
  } catch (const ParseError& e) {
    emit_error(err, "parse", e.what());
    return kBadInput;
  } catch (const ValidationError& e) {
    emit_error(err, "validation", e.what());
    return kBadInput;
  } catch (const GatewayError& e) {
    emit_error(err, "gateway", e.what());
    return kRunFailed;
  } catch (const std::exception& e) {
    emit_error(err, "internal", e.what());
    return kFailure;
  }
  return kUsage;
}

}  // namespace humorgen::cli

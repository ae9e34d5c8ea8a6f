#include "humorgen/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "humorgen/error.hpp"
#include "humorgen/hash.hpp"
#include "humorgen/rng.hpp"

namespace humorgen {

std::string_view to_string(JokeSelection s) {
  return s == JokeSelection::kAll ? "all" : "sample_one";
}

JokeSelection parse_selection(std::string_view s) {
  if (s == "all") return JokeSelection::kAll;
  if (s == "sample_one" || s == "sample-one") return JokeSelection::kSampleOne;
  throw ConfigError("unknown joke selection '" + std::string(s) + "' (expected all or sample_one)");
}

PipelineRun PipelineRun::make(Mode mode, std::optional<HumorPolicy> policy,
                              std::vector<Topic> topics, JokeSelection selection,
                              std::uint64_t rng_seed) {
  if (mode == Mode::kCorpus) throw ConfigError("corpus is not a generation mode");
  if (mode == Mode::kZeroShot && policy) {
    throw ConfigError("zero-shot mode does not take a policy");
  }
  if (mode != Mode::kZeroShot && !policy) {
    throw ConfigError("mode " + std::string(to_string(mode)) + " requires a policy");
  }
  PipelineRun r;
  r.mode_ = mode;
  r.policy_ = std::move(policy);
  r.topics_ = std::move(topics);
  r.selection_ = selection;
  r.seed_ = rng_seed;
  return r;
}

namespace {

std::string range_text(CountRange r) {
  return r.min == r.max ? std::to_string(r.min)
                        : std::to_string(r.min) + "-" + std::to_string(r.max);
}

std::vector<std::string> template_names(Mode mode) {
  switch (mode) {
    case Mode::kZeroShot: return {templates::kZeroShot};
    case Mode::kNoAssoc: return {templates::kJokesNoAssoc};
    case Mode::kAssocV1: return {templates::kAssociations, templates::kJokes};
    case Mode::kAssocV2: return {templates::kAssociations, templates::kExpand, templates::kJokes};
    case Mode::kFull:
      return {templates::kAssociations, templates::kExpand, templates::kRefine, templates::kJokes};
    case Mode::kCorpus: break;
  }
  return {};
}

std::string collapse_lines(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string_view::npos) {
      const auto last = line.find_last_not_of(" \t\r");
      if (!out.empty()) out += ' ';
      out += line.substr(first, last - first + 1);
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace

JokePipeline::JokePipeline(Gateway& gateway, const TemplateLibrary& lib, PipelineSettings settings)
    : gateway_(gateway), lib_(lib), settings_(std::move(settings)) {}

JokePipeline::ListReply JokePipeline::ask_list(const std::string& stage, const std::string& prompt,
                                               CountRange expected) {
  ListReply reply;
  const auto req =
      CompletionRequest::user(settings_.model_id, prompt, settings_.temperature, stage);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto result = gateway_.complete(req);
    ++reply.requests;
    try {
      reply.list = parse_numbered_list(result.text, expected);
    } catch (const EmptyListError&) {
      if (attempt == 1) throw StageFailure(stage, "no numbered list in reply after retry");
      continue;
    }
    if (!reply.list.out_of_range || attempt == 1) break;
  }
  return reply;
}

StageResult JokePipeline::brainstorm(const Topic& topic) {
  const std::string prompt = render(lib_.get(templates::kAssociations), {{"topic", topic.word()}});
  auto reply = ask_list("brainstorm", prompt, settings_.raw_range);
  auto& items = reply.list.items;
  std::vector<StageFlag> flags;
  const std::size_t got = items.size();
  if (reply.list.out_of_range) {
    flags.push_back({topic.word(), "brainstorm",
                     "out of range: " + std::to_string(got) + " items, expected " +
                         range_text(settings_.raw_range)});
  }
  if (got != settings_.raw_target) {
    flags.push_back({topic.word(), "brainstorm",
                     "out of target: " + std::to_string(got) + " items, target " +
                         std::to_string(settings_.raw_target)});
  }
  if (got > AssociationSet::kMaxRaw) {
    items.resize(AssociationSet::kMaxRaw);
    flags.push_back({topic.word(), "brainstorm",
                     "truncated to first " + std::to_string(AssociationSet::kMaxRaw) + " items"});
  }
  return {AssociationSet::make(topic, Stage::kRaw, std::move(items)), std::move(flags),
          reply.requests};
}

StageResult JokePipeline::expand(const AssociationSet& raw) {
  if (raw.stage() != Stage::kRaw) throw ConfigError("expand needs raw associations");
  const Topic& topic = raw.topic();
  const std::string prompt = render(lib_.get(templates::kExpand),
                                    {{"topic", topic.word()}, {"associations", raw.items()}});
  const auto expected = CountRange::exactly(raw.items().size());
  auto reply = ask_list("expand", prompt, expected);
  std::vector<StageFlag> flags;
  if (reply.list.out_of_range) {
    flags.push_back({topic.word(), "expand",
                     "count mismatch: " + std::to_string(reply.list.items.size()) +
                         " items, expected " + std::to_string(raw.items().size())});
  }
  return {AssociationSet::make(topic, Stage::kExpanded, std::move(reply.list.items)),
          std::move(flags), reply.requests};
}

StageResult JokePipeline::refine(const AssociationSet& expanded) {
  if (expanded.stage() != Stage::kExpanded) throw ConfigError("refine needs expanded associations");
  const Topic& topic = expanded.topic();
  const std::string prompt = render(lib_.get(templates::kRefine),
                                    {{"topic", topic.word()}, {"associations", expanded.items()}});
  auto reply = ask_list("refine", prompt, settings_.refined_range);
  auto& items = reply.list.items;
  std::vector<StageFlag> flags;
  if (reply.list.out_of_range) {
    flags.push_back({topic.word(), "refine",
                     "out of range: " + std::to_string(items.size()) + " items, expected " +
                         range_text(settings_.refined_range)});
  }
  if (items.size() > AssociationSet::kMaxRefined) {
    items.resize(AssociationSet::kMaxRefined);
    flags.push_back({topic.word(), "refine",
                     "truncated to first " + std::to_string(AssociationSet::kMaxRefined) + " items"});
  }
  return {AssociationSet::make(topic, Stage::kRefined, std::move(items)), std::move(flags),
          reply.requests};
}

JokeBatch JokePipeline::generate_jokes(const PipelineRun& run, const Topic& topic,
                                       const Intermediates& stages) {
  const Mode mode = run.mode();
  const StagePresence need = required_stages(mode);
  if (need.raw != stages.raw.has_value() || need.expanded != stages.expanded.has_value() ||
      need.refined != stages.refined.has_value()) {
    throw ConfigError("association stages do not match mode " + std::string(to_string(mode)));
  }
  if ((mode == Mode::kZeroShot) == run.policy().has_value()) {
    throw ConfigError("policy presence does not match mode " + std::string(to_string(mode)));
  }

  JokeBatch batch;
  std::vector<std::string> texts;
  std::string prompt;
  if (mode == Mode::kZeroShot) {
    prompt = render(lib_.get(templates::kZeroShot), {{"topic", topic.word()}});
    const auto result = gateway_.complete(
        CompletionRequest::user(settings_.model_id, prompt, settings_.temperature, "generate"));
    ++batch.requests;
    std::string text = collapse_lines(result.text);
    if (text.empty()) throw StageFailure("generate", "empty reply");
    texts.push_back(std::move(text));
  } else {
    const AssociationSet* assoc = stages.refined    ? &*stages.refined
                                  : stages.expanded ? &*stages.expanded
                                  : stages.raw      ? &*stages.raw
                                                    : nullptr;
    Bindings b{{"topic", topic.word()}, {"policy", run.policy()->text()}};
    if (assoc) {
      b["associations"] = assoc->items();
      prompt = render(lib_.get(templates::kJokes), b);
    } else {
      prompt = render(lib_.get(templates::kJokesNoAssoc), b);
    }
    auto reply = ask_list("generate", prompt, settings_.jokes_range);
    batch.requests += reply.requests;
    if (reply.list.out_of_range) {
      batch.flags.push_back({topic.word(), "generate",
                             "out of range: " + std::to_string(reply.list.items.size()) +
                                 " jokes, expected " + range_text(settings_.jokes_range)});
    }
    texts = std::move(reply.list.items);
  }

  const std::string fingerprint = sha256_hex(prompt);
  std::optional<Intermediates> im;
  if (!stages.empty()) im = stages;
  for (auto& text : texts) {
    JokeRecord::Draft d;
    d.text = std::move(text);
    d.topic = topic;
    d.mode = mode;
    d.intermediates = im;
    d.model_id = settings_.model_id;
    d.prompt_fingerprint = fingerprint;
    batch.records.push_back(JokeRecord::make(std::move(d)));
  }
  if (run.selection() == JokeSelection::kSampleOne && batch.records.size() > 1) {
    Rng rng = derive_rng(run.rng_seed(), topic.word());
    JokeRecord kept = batch.records[uniform_index(rng, batch.records.size())];
    batch.records.assign(1, std::move(kept));
  }
  return batch;
}

StageCounts JokePipeline::plan(const PipelineRun& run) {
  const std::size_t n = run.topics().size();
  const StagePresence s = required_stages(run.mode());
  StageCounts c;
  c.brainstorm = s.raw ? n : 0;
  c.expand = s.expanded ? n : 0;
  c.refine = s.refined ? n : 0;
  c.generate = n;
  return c;
}

namespace {

struct TopicOutcome {
  std::vector<JokeRecord> records;
  std::vector<StageFlag> flags;
  StageCounts requests;
  std::optional<TopicFailure> failure;
};

json counts_json(const StageCounts& c) {
  return json{{"brainstorm", c.brainstorm},
              {"expand", c.expand},
              {"refine", c.refine},
              {"generate", c.generate}};
}

}  // namespace

BatchResult JokePipeline::run_batch(const PipelineRun& run) {
  const auto& topics = run.topics();
  const StagePresence need = required_stages(run.mode());
  std::vector<TopicOutcome> outcomes(topics.size());

  auto process = [&](std::size_t i) {
    const Topic& topic = topics[i];
    TopicOutcome& out = outcomes[i];
    std::string stage = "brainstorm";
    try {
      Intermediates im;
      if (need.raw) {
        auto r = brainstorm(topic);
        out.requests.brainstorm += static_cast<std::size_t>(r.requests);
        out.flags.insert(out.flags.end(), r.flags.begin(), r.flags.end());
        im.raw = std::move(r.set);
      }
      if (need.expanded) {
        stage = "expand";
        auto r = expand(*im.raw);
        out.requests.expand += static_cast<std::size_t>(r.requests);
        out.flags.insert(out.flags.end(), r.flags.begin(), r.flags.end());
        im.expanded = std::move(r.set);
      }
      if (need.refined) {
        stage = "refine";
        auto r = refine(*im.expanded);
        out.requests.refine += static_cast<std::size_t>(r.requests);
        out.flags.insert(out.flags.end(), r.flags.begin(), r.flags.end());
        im.refined = std::move(r.set);
      }
      stage = "generate";
      auto batch = generate_jokes(run, topic, im);
      out.requests.generate += static_cast<std::size_t>(batch.requests);
      out.flags.insert(out.flags.end(), batch.flags.begin(), batch.flags.end());
      out.records = std::move(batch.records);
    } catch (const StageFailure& e) {
      out.failure = TopicFailure{topic.word(), e.stage(), e.what()};
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      out.failure = TopicFailure{topic.word(), stage, e.what()};
    }
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < topics.size(); i = next++) {
      try {
        process(i);
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        next = topics.size();
      }
    }
  };
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(settings_.parallel_topics, topics.size()));
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
  }
  if (fatal) std::rethrow_exception(fatal);

  BatchResult result;
  std::set<std::string> seen_ids;
  for (auto& o : outcomes) {
    result.requests.brainstorm += o.requests.brainstorm;
    result.requests.expand += o.requests.expand;
    result.requests.refine += o.requests.refine;
    result.requests.generate += o.requests.generate;
    result.flags.insert(result.flags.end(), o.flags.begin(), o.flags.end());
    if (o.failure) {
      result.failures.push_back(*o.failure);
      continue;
    }
    for (auto& r : o.records) {
      if (!seen_ids.insert(r.id()).second) {
        ++result.duplicates_dropped;
        continue;
      }
      result.records.push_back(std::move(r));
    }
  }
  const double failure_rate =
      topics.empty() ? 0.0
                     : static_cast<double>(result.failures.size()) / static_cast<double>(topics.size());
  result.aborted = failure_rate > settings_.max_failure_rate;

  json m;
  m["mode"] = std::string(to_string(run.mode()));
  m["seed"] = run.rng_seed();
  m["model_id"] = settings_.model_id;
  m["temperature"] = settings_.temperature;
  m["selection"] = std::string(to_string(run.selection()));
  m["topic_count"] = topics.size();
  json tmpl = json::object();
  for (const auto& name : template_names(run.mode())) tmpl[name] = lib_.get(name).fingerprint();
  m["template_fingerprints"] = tmpl;
  if (run.policy()) {
    m["policy"] = {{"text_sha256", sha256_hex(run.policy()->text())},
                   {"source_joke_count", run.policy()->source_joke_ids().size()},
                   {"model_id", run.policy()->model_id()}};
  } else {
    m["policy"] = nullptr;
  }
  m["requests"] = counts_json(result.requests);
  m["record_count"] = result.records.size();
  m["duplicates_dropped"] = result.duplicates_dropped;
  json flags = json::array();
  for (const auto& f : result.flags) {
    flags.push_back({{"topic", f.topic}, {"stage", f.stage}, {"flag", f.flag}});
  }
  m["flags"] = flags;
  json failures = json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"topic", f.topic}, {"stage", f.stage}, {"message", f.message}});
  }
  m["failures"] = failures;
  m["failure_count"] = result.failures.size();
  m["failure_rate"] = failure_rate;
  m["max_failure_rate"] = settings_.max_failure_rate;
  m["aborted"] = result.aborted;
  result.manifest = std::move(m);
  return result;
}

void write_batch(const BatchResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (!result.aborted) write_record_file(dir / "corpus.jsonl", result.records);
  write_text_file(dir / "manifest.json", result.manifest.dump(2) + "\n");
}

}  // namespace humorgen

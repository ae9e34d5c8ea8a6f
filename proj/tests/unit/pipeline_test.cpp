#include <catch_amalgamated.hpp>

#include <mutex>
#include <set>

#include "humorgen/backends.hpp"
#include "humorgen/pipeline.hpp"
#include "oracles.hpp"

using namespace humorgen;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> chip_items(const std::string& stage) {
  return parse_numbered_list(read_text_file(oracle::fixtures_dir() / "chip" / ("chip_" + stage + ".txt")))
      .items;
}

HumorPolicy test_policy() { return HumorPolicy::from_text("- Use a double meaning of the theme."); }

// Answers every stage with a list of configurable length that names the topic,
// so different topics produce different jokes.
class TopicEchoBackend final : public Backend {
 public:
  struct Counts {
    std::size_t raw = 20, expanded = 0, refined = 6, jokes = 7;  // expanded 0: echo input size
  };

  std::map<std::string, Counts> per_topic;
  std::set<std::string> prose_for;  // topics whose brainstorm reply has no list

  CompletionResult complete(const CompletionRequest& req) override {
    const std::string& prompt = req.messages.back().content;
    std::string topic;
    if (auto p = prompt.find("Theme: "); p != std::string::npos) {
      topic = prompt.substr(p + 7, prompt.find('\n', p) - p - 7);
    } else if (auto q = prompt.find("joke about "); q != std::string::npos) {
      topic = prompt.substr(q + 11, prompt.size() - q - 12);
    }
    {
      std::lock_guard lock(mu_);
      calls.emplace_back(req.tag, topic);
    }
    const Counts c = per_topic.contains(topic) ? per_topic.at(topic) : Counts{};
    if (prompt.rfind("Write a one-liner joke about", 0) == 0) {
      return {.text = "Why did the " + topic + " blush?\nIt saw the salad dressing."};
    }
    auto list = [&](std::size_t n, const std::string& what) {
      std::string out = "Here you go:\n";
      for (std::size_t i = 1; i <= n; ++i) {
        out += std::to_string(i) + ". " + what + " " + std::to_string(i) + " about " + topic + "\n";
      }
      return CompletionResult{.text = out};
    };
    if (prompt.rfind("Given the theme", 0) == 0) {
      if (prose_for.contains(topic)) return {.text = "I would rather not."};
      return list(c.raw, "association");
    }
    if (prompt.rfind("Read the theme and the list", 0) == 0) {
      const auto in = parse_numbered_list(prompt.substr(prompt.find("Associations:")));
      return list(c.expanded ? c.expanded : in.items.size(), "expanded");
    }
    if (prompt.find("Write a shorter list") != std::string::npos) return list(c.refined, "refined");
    return list(c.jokes, "joke");
  }
  ModerationResult moderate(const std::string&) override { return ModerationResult::make({}); }

  std::vector<std::pair<std::string, std::string>> calls;

 private:
  std::mutex mu_;
};

std::vector<Topic> topics(std::initializer_list<const char*> words) {
  std::vector<Topic> out;
  for (const char* w : words) out.push_back(Topic::make(w, out.size()));
  return out;
}

}  // namespace

TEST_CASE("full chain on the chip fixtures") {
  auto backend = ScriptedBackend::from_file(oracle::fixtures_dir() / "chip" / "chip_prefix_fixture.jsonl",
                                            ScriptedBackend::Match::kExactThenPrefix);
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);
  const auto chip = Topic::make("chip");

  const auto raw = p.brainstorm(chip);
  REQUIRE(raw.set.items().size() == 20);
  CHECK(raw.set.items()[5] == "Chip on shoulder - Holding a grudge");
  CHECK(raw.flags.empty());

  const auto expanded = p.expand(raw.set);
  REQUIRE(expanded.set.items().size() == 20);
  CHECK(expanded.set.items()[0] ==
        "A thinly sliced potato, deep-fried to a golden crisp, is a beloved salty snack.");

  const auto refined = p.refine(expanded.set);
  REQUIRE(refined.set.items().size() == 6);
  CHECK(refined.set.items()[4].find("chip on one's shoulder") != std::string::npos);
  CHECK(refined.set.items()[4].find("chip off the old block") != std::string::npos);

  const auto run = PipelineRun::make(Mode::kFull, test_policy(), {chip}, JokeSelection::kAll, 1);
  const auto jokes = p.generate_jokes(run, chip, {raw.set, expanded.set, refined.set});
  REQUIRE(jokes.records.size() == 7);
  CHECK(jokes.records[5].text() ==
        "I put a chip on my shoulder, but nobody took offense; they just asked if I had any dip.");
  CHECK(jokes.records[0].intermediates()->refined->items() == chip_items("refined"));
}

TEST_CASE("run validation rejects inconsistent modes") {
  const auto t = topics({"chip"});
  CHECK_THROWS_AS(PipelineRun::make(Mode::kZeroShot, test_policy(), t, JokeSelection::kAll, 1), ConfigError);
  CHECK_THROWS_AS(PipelineRun::make(Mode::kFull, std::nullopt, t, JokeSelection::kAll, 1), ConfigError);
  CHECK_THROWS_AS(PipelineRun::make(Mode::kCorpus, std::nullopt, t, JokeSelection::kAll, 1), ConfigError);

  auto backend = std::make_shared<TopicEchoBackend>();
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);
  const auto run = PipelineRun::make(Mode::kAssocV2, test_policy(), t, JokeSelection::kAll, 1);
  const auto raw = p.brainstorm(t[0]).set;
  CHECK_THROWS_AS(p.generate_jokes(run, t[0], {raw, std::nullopt, std::nullopt}), ConfigError);
}

TEST_CASE("zero-shot records carry no intermediates") {
  auto backend = std::make_shared<TopicEchoBackend>();
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);
  const auto run = PipelineRun::make(Mode::kZeroShot, std::nullopt, topics({"chip"}), JokeSelection::kAll, 1);
  const auto out = p.run_batch(run);
  REQUIRE(out.records.size() == 1);
  CHECK_FALSE(out.records[0].intermediates().has_value());
  CHECK(out.records[0].text() == "Why did the chip blush? It saw the salad dressing.");
  CHECK(out.manifest.at("policy").is_null());
  CHECK(backend->calls.size() == 1);
}

TEST_CASE("sample_one keeps the same joke across reruns") {
  const auto lib = TemplateLibrary::bundled();
  std::vector<std::string> kept;
  for (int rerun = 0; rerun < 3; ++rerun) {
    Gateway gw(std::make_shared<TopicEchoBackend>());
    JokePipeline p(gw, lib);
    const auto run = PipelineRun::make(Mode::kNoAssoc, test_policy(), topics({"chip", "salsa", "tuning"}),
                                       JokeSelection::kSampleOne, 42);
    const auto out = p.run_batch(run);
    REQUIRE(out.records.size() == 3);
    std::string all;
    for (const auto& r : out.records) all += r.text() + "|";
    kept.push_back(all);
  }
  CHECK(kept[0] == kept[1]);
  CHECK(kept[1] == kept[2]);
}

TEST_CASE("two topics give seven jokes each") {
  Gateway gw(std::make_shared<TopicEchoBackend>());
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);
  const auto run = PipelineRun::make(Mode::kFull, test_policy(), topics({"chip", "salsa"}), JokeSelection::kAll, 1);
  const auto out = p.run_batch(run);
  CHECK(out.records.size() == 14);
  CHECK(out.failures.empty());
  CHECK(out.manifest.at("failure_count") == 0);
  CHECK(out.records[0].topic()->word() == "chip");
  CHECK(out.records[13].topic()->word() == "salsa");
}

TEST_CASE("a failed topic is reported and the rest survive") {
  auto backend = std::make_shared<TopicEchoBackend>();
  backend->prose_for = {"gamma"};
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);
  const auto run = PipelineRun::make(
      Mode::kFull, test_policy(),
      topics({"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "theta", "iota", "kappa", "lambda"}),
      JokeSelection::kAll, 1);
  const auto out = p.run_batch(run);
  CHECK(out.records.size() == 63);
  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures[0].topic == "gamma");
  CHECK(out.failures[0].stage == "brainstorm");
  CHECK_FALSE(out.aborted);
  CHECK(out.manifest.at("failures").size() == 1);
  for (const auto& r : out.records) CHECK(r.topic()->word() != "gamma");
}

TEST_CASE("too many failed topics abort the run") {
  auto backend = std::make_shared<TopicEchoBackend>();
  backend->prose_for = {"alpha", "beta"};
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);
  const auto run = PipelineRun::make(Mode::kAssocV1, test_policy(), topics({"alpha", "beta", "gamma", "delta"}),
                                     JokeSelection::kAll, 1);
  const auto out = p.run_batch(run);
  CHECK(out.aborted);
  const auto dir = oracle::temp_dir("abort");
  write_batch(out, dir);
  CHECK_FALSE(fs::exists(dir / "corpus.jsonl"));
  CHECK(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("list-count policy per stage") {
  auto backend = std::make_shared<TopicEchoBackend>();
  backend->per_topic["nineteen"] = {.raw = 19};
  backend->per_topic["thirty"] = {.raw = 30};
  backend->per_topic["short"] = {.raw = 20, .expanded = 18};
  backend->per_topic["seven"] = {.raw = 20, .expanded = 0, .refined = 7};
  backend->per_topic["three"] = {.raw = 20, .expanded = 0, .refined = 3};
  backend->prose_for = {"prose"};
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);

  auto r = p.brainstorm(Topic::make("nineteen"));
  CHECK(r.set.items().size() == 19);
  CHECK(r.requests == 1);
  REQUIRE(r.flags.size() == 1);
  CHECK(r.flags[0].flag == "out of target: 19 items, target 20");

  r = p.brainstorm(Topic::make("thirty"));
  CHECK(r.set.items().size() == 20);
  CHECK(r.requests == 2);  // out of range, retried once
  CHECK(r.flags.back().flag == "truncated to first 20 items");

  CHECK_THROWS_AS(p.brainstorm(Topic::make("prose")), StageFailure);

  const auto one = AssociationSet::make(Topic::make("single"), Stage::kRaw, {"only"});
  CHECK(p.expand(one).set.items().size() == 1);

  const auto raw = p.brainstorm(Topic::make("short")).set;
  r = p.expand(raw);
  CHECK(r.set.items().size() == 18);
  REQUIRE(r.flags.size() == 1);
  CHECK(r.flags[0].flag.rfind("count mismatch", 0) == 0);

  r = p.refine(p.expand(p.brainstorm(Topic::make("seven")).set).set);
  CHECK(r.set.items().size() == 6);
  CHECK(r.set.items()[5] == "refined 6 about seven");
  CHECK(r.flags.back().flag == "truncated to first 6 items");

  r = p.refine(p.expand(p.brainstorm(Topic::make("three")).set).set);
  CHECK(r.set.items().size() == 3);
  CHECK(r.flags.empty());
}

TEST_CASE("no-assoc mode issues only joke requests") {
  auto backend = std::make_shared<TopicEchoBackend>();
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  JokePipeline p(gw, lib);
  p.run_batch(PipelineRun::make(Mode::kNoAssoc, test_policy(), topics({"chip", "salsa"}), JokeSelection::kAll, 1));
  REQUIRE(backend->calls.size() == 2);
  for (const auto& [tag, topic] : backend->calls) CHECK(tag == "generate");
}

TEST_CASE("each mode's calls contain the previous mode's") {
  const auto lib = TemplateLibrary::bundled();
  const Mode order[] = {Mode::kZeroShot, Mode::kNoAssoc, Mode::kAssocV1, Mode::kAssocV2, Mode::kFull};
  std::set<std::string> previous;
  for (Mode m : order) {
    auto backend = std::make_shared<TopicEchoBackend>();
    Gateway gw(backend);
    JokePipeline p(gw, lib);
    std::optional<HumorPolicy> pol;
    if (m != Mode::kZeroShot) pol = test_policy();
    const auto out = p.run_batch(PipelineRun::make(m, pol, topics({"chip"}), JokeSelection::kAll, 1));
    std::set<std::string> tags;
    for (const auto& [tag, topic] : backend->calls) tags.insert(tag);
    CHECK(std::includes(tags.begin(), tags.end(), previous.begin(), previous.end()));
    CHECK(tags.size() == previous.size() + (m == Mode::kNoAssoc ? 0 : 1));
    previous = tags;
    const auto need = required_stages(m);
    for (const auto& r : out.records) {
      const auto& im = r.intermediates();
      CHECK(need.raw == (im && im->raw.has_value()));
      CHECK(need.expanded == (im && im->expanded.has_value()));
      CHECK(need.refined == (im && im->refined.has_value()));
    }
    CHECK(JokePipeline::plan(PipelineRun::make(m, pol, topics({"chip", "dips"}), JokeSelection::kAll, 1)).total() ==
          2u * (1u + (need.raw ? 1u : 0u) + (need.expanded ? 1u : 0u) + (need.refined ? 1u : 0u)));
  }
}

TEST_CASE("a transcript replays the corpus byte for byte") {
  const auto dir = oracle::temp_dir("replay");
  const auto lib = TemplateLibrary::bundled();
  const auto run = PipelineRun::make(Mode::kFull, test_policy(), topics({"chip", "salsa", "tuning"}),
                                     JokeSelection::kSampleOne, 9);
  {
    GatewayOptions opt;
    opt.transcript_path = dir / "transcript.jsonl";
    Gateway gw(std::make_shared<TopicEchoBackend>(), opt);
    JokePipeline p(gw, lib);
    write_batch(p.run_batch(run), dir / "live");
  }
  Gateway offline(ScriptedBackend::from_file(dir / "transcript.jsonl"));
  JokePipeline p(offline, lib);
  write_batch(p.run_batch(run), dir / "replay");
  CHECK(read_text_file(dir / "live" / "corpus.jsonl") == read_text_file(dir / "replay" / "corpus.jsonl"));
  fs::remove_all(dir);
}

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <set>

#include "humorgen/policy.hpp"
#include "humorgen/ranking.hpp"
#include "oracles.hpp"

using namespace humorgen;
using Catch::Approx;
using W = PairwiseJudgment::Winner;

namespace {

std::vector<PairwiseJudgment> wins(const std::string& a, const std::string& b, int n) {
  std::vector<PairwiseJudgment> out;
  for (int i = 0; i < n; ++i) out.push_back(PairwiseJudgment::make(a, b, W::kA, "ann"));
  return out;
}

void append(std::vector<PairwiseJudgment>& to, const std::vector<PairwiseJudgment>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

std::map<std::string, double> strengths(const RankedCorpus& c) {
  std::map<std::string, double> m;
  for (const auto& j : c.jokes) m[j.joke_id] = j.strength;
  return m;
}

// Echo analysis for decomposition; a fixed list for distillation; hard failure on demand.
class AnalystBackend final : public Backend {
 public:
  std::set<std::string> fail_on;
  std::atomic<int> requests{0};

  CompletionResult complete(const CompletionRequest& req) override {
    ++requests;
    const std::string& prompt = req.messages.back().content;
    if (auto p = prompt.find("Joke: "); p != std::string::npos) {
      std::string joke = prompt.substr(p + 6);
      while (!joke.empty() && std::isspace(static_cast<unsigned char>(joke.back()))) joke.pop_back();
      if (fail_on.contains(joke)) throw GatewayError(GatewayError::Kind::kRequest, "HTTP 400");
      return {.text = "Analysis: " + joke};
    }
    return {.text = "1. Double meaning of a key word.\n2. Literal reading of an idiom."};
  }
  ModerationResult moderate(const std::string&) override { return ModerationResult::make({}); }
};

std::vector<SeedJoke> seed_jokes(int n) {
  std::vector<SeedJoke> out;
  for (int i = 1; i <= n; ++i) out.push_back({"s" + std::to_string(i), "Seed joke number " + std::to_string(i) + "."});
  return out;
}

}  // namespace

TEST_CASE("Bradley-Terry: symmetric pair") {
  auto js = wins("A", "B", 5);
  append(js, wins("B", "A", 5));
  const auto r = rank_pairwise(js);
  REQUIRE(r.jokes.size() == 2);
  CHECK(r.jokes[0].strength == Approx(0.5).margin(1e-12));
  CHECK(r.jokes[1].strength == Approx(0.5).margin(1e-12));
  CHECK(r.jokes[0].joke_id == "A");
  CHECK(r.jokes[0].rank == 1);
  CHECK(r.jokes[1].rank == 2);
}

TEST_CASE("Bradley-Terry: unanimous pair follows the pseudo-count closed form") {
  const auto r = rank_pairwise(wins("A", "B", 10));
  CHECK(r.jokes[0].joke_id == "A");
  CHECK(r.jokes[0].strength == Approx(10.5 / 11.0).margin(1e-9));
  CHECK(r.jokes[0].strength == Approx(0.9545).margin(1e-4));
  oracle::WinMatrix w{{0, 10}, {0, 0}};
  CHECK(oracle::bt_grid_search(w, 0.5)[0] == Approx(10.5 / 11.0).margin(1e-6));
}

TEST_CASE("Bradley-Terry: round robin") {
  std::vector<PairwiseJudgment> js;
  for (auto [a, b] : {std::pair{"A", "B"}, {"B", "C"}, {"A", "C"}}) {
    append(js, wins(a, b, 7));
    append(js, wins(b, a, 3));
  }
  const auto r = rank_pairwise(js);
  CHECK(r.jokes[0].joke_id == "A");
  CHECK(r.jokes[1].joke_id == "B");
  CHECK(r.jokes[2].joke_id == "C");
  CHECK(r.converged);
  CHECK(r.judgments_used == 30);
}

TEST_CASE("Bradley-Terry matches the grid-search oracle") {
  oracle::Rng rng(404);
  for (int inst = 0; inst < 150; ++inst) {
    const auto bt = oracle::random_bt_instance(rng, 4, 10);
    const auto got = strengths(rank_pairwise(bt.judgments));
    const auto want = oracle::bt_grid_search(bt.wins, 0.5);
    for (std::size_t i = 0; i < bt.ids.size(); ++i) CHECK(got.at(bt.ids[i]) == Approx(want[i]).margin(1e-3));
  }
}

TEST_CASE("Bradley-Terry properties") {
  oracle::Rng rng(17);
  for (int inst = 0; inst < 100; ++inst) {
    auto bt = oracle::random_bt_instance(rng, 6, 6);
    std::vector<double> lls;
    RankOptions opt;
    opt.on_iteration = [&](std::size_t, double ll) { lls.push_back(ll); };
    const auto base = rank_pairwise(bt.judgments, opt);

    double sum = 0;
    for (const auto& j : base.jokes) sum += j.strength;
    CHECK(sum == Approx(1.0).margin(1e-12));
    for (std::size_t i = 1; i < lls.size(); ++i) CHECK(lls[i] >= lls[i - 1] - 1e-9);

    // Judgment order does not matter.
    auto shuffled = bt.judgments;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto s1 = strengths(base), s2 = strengths(rank_pairwise(shuffled));
    for (const auto& [id, p] : s1) CHECK(s2.at(id) == Approx(p).margin(1e-9));

    // Relabeling permutes strengths the same way.
    std::vector<PairwiseJudgment> relabeled;
    for (const auto& j : bt.judgments) {
      relabeled.push_back(PairwiseJudgment::make("x" + j.joke_a_id(), "x" + j.joke_b_id(), j.winner(), j.annotator_id()));
    }
    const auto s3 = strengths(rank_pairwise(relabeled));
    for (const auto& [id, p] : s1) CHECK(s3.at("x" + id) == Approx(p).margin(1e-9));
  }
}

TEST_CASE("Copeland ranks by smoothed win rate") {
  auto js = wins("A", "B", 3);
  append(js, wins("C", "A", 1));
  append(js, wins("B", "C", 1));
  RankOptions opt;
  opt.method = RankMethod::kCopeland;
  const auto r = rank_pairwise(js, opt);
  CHECK(r.jokes[0].joke_id == "A");
  CHECK(r.jokes[0].wins == 3);
  CHECK(r.jokes[0].comparisons == 4);
}

TEST_CASE("seed selection") {
  std::vector<PairwiseJudgment> js;
  for (int i = 0; i < 100; ++i) {
    for (int k = 1; k <= 3; ++k) {
      const int j = (i + k) % 100;
      js.push_back(PairwiseJudgment::make("j" + std::to_string(i), "j" + std::to_string(j),
                                          i > j ? W::kA : W::kB, "ann"));
    }
  }
  const auto r = rank_pairwise(js);
  REQUIRE(r.jokes.size() == 100);
  const auto top = select_seed(r, 30);
  CHECK(top.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(top[i] == r.jokes[i].joke_id);
    CHECK(r.jokes[i].rank == i + 1);
  }
  CHECK(select_seed(r, 100).size() == 100);
  CHECK(select_seed(r, 1).front() == r.jokes.front().joke_id);
  CHECK_THROWS_AS(select_seed(r, 101), ConfigError);
  CHECK_THROWS_AS(select_seed(r, 0), ConfigError);
  CHECK_THROWS_AS(rank_pairwise(std::vector<PairwiseJudgment>{}), ConfigError);
}

TEST_CASE("pair schedules cover every joke without repeats") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("j" + std::to_string(i));
  const auto pairs = schedule_pairs(ids, 10, 7);
  std::set<std::pair<std::string, std::string>> seen;
  std::map<std::string, int> count;
  for (const auto& [a, b] : pairs) {
    CHECK(a != b);
    CHECK(seen.insert(std::minmax(a, b)).second);
    ++count[a];
    ++count[b];
  }
  CHECK(count.size() == 100);
  for (const auto& [id, n] : count) CHECK(n >= 10);
  CHECK(schedule_pairs(ids, 10, 7) == pairs);
}

TEST_CASE("decomposition: one request per joke, failures reported") {
  auto backend = std::make_shared<AnalystBackend>();
  backend->fail_on = {"Seed joke number 17."};
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  const auto jokes = seed_jokes(30);
  std::vector<std::string> streamed;
  const auto out = decompose_all(gw, lib, jokes, {}, 4, [&](const Decomposition& d) { streamed.push_back(d.joke_id()); });
  CHECK(backend->requests == 30);
  CHECK(out.decompositions.size() == 29);
  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures[0].joke_id == "s17");
  CHECK(streamed.size() == 29);
  CHECK(out.decompositions[0].analysis_text() == "Analysis: Seed joke number 1.");
  CHECK(out.decompositions[16].joke_id() == "s18");  // input order, failure skipped
}

TEST_CASE("distillation keeps lineage and honours the budget") {
  auto backend = std::make_shared<AnalystBackend>();
  Gateway gw(backend);
  const auto lib = TemplateLibrary::bundled();
  const auto jokes = seed_jokes(30);
  const auto decomps = decompose_all(gw, lib, jokes).decompositions;
  const auto policy = distill_policy(gw, lib, decomps, {}, "2024-05-01T00:00:00Z");
  CHECK(policy.text() == "1. Double meaning of a key word.\n2. Literal reading of an idiom.");
  REQUIRE(policy.source_joke_ids().size() == 30);
  CHECK(std::set<std::string>(policy.source_joke_ids().begin(), policy.source_joke_ids().end()).size() == 30);
  CHECK(policy.source_joke_ids().front() == "s1");

  const auto single = distill_policy(gw, lib, std::span(decomps).first(1));
  CHECK(single.source_joke_ids().size() == 1);

  PolicySettings tight;
  tight.context_budget_tokens = 50;
  const int before = backend->requests;
  try {
    distill_policy(gw, lib, decomps, tight);
    FAIL("expected BudgetExceeded");
  } catch (const BudgetExceeded& e) {
    CHECK(e.estimated_tokens() > 50);
    CHECK(std::string(e.what()).find("reduce") != std::string::npos);
  }
  CHECK(backend->requests == before);  // refused before any request

  auto twice = decomps;
  twice.push_back(decomps.front());
  CHECK_THROWS_AS(distill_policy(gw, lib, twice), ConfigError);
  CHECK_THROWS_AS(distill_policy(gw, lib, std::vector<Decomposition>{}), ConfigError);
}

TEST_CASE("decomposition records round trip") {
  const auto d = Decomposition::make("s1", "Wordplay on chip.", "gpt-4", std::string(64, 'f'));
  CHECK(parse_record<Decomposition>(serialize_record(d)) == d);
  CHECK_THROWS_AS(Decomposition::make("s1", "  ", "gpt-4", "x"), ValidationError);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
}

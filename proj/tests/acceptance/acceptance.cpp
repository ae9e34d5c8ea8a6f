// Acceptance suite: one PASS / FAIL / SKIPPED line per criterion.
// Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "humorgen/corpus.hpp"
#include "humorgen/gateway.hpp"
#include "humorgen/backends.hpp"
#include "humorgen/list_parser.hpp"
#include "humorgen/ranking.hpp"
#include "humorgen/records.hpp"
#include "humorgen/stats.hpp"
#include "humorgen/topics.hpp"
#include "humorgen/validate.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace humorgen;

namespace {

enum class Outcome { kPass, kFail, kSkipped };

struct Check {
  Outcome outcome = Outcome::kPass;
  std::string detail;

  void fail(const std::string& why) {
    if (outcome != Outcome::kFail) detail.clear();
    outcome = Outcome::kFail;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Check()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  try {
    c = body();
  } catch (const std::exception& e) {
    c.fail(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (c.outcome == Outcome::kPass && secs > budget_seconds) {
    c.fail("took " + fmt("%.2f", secs) + " s, budget " + fmt("%.0f", budget_seconds) + " s");
  }
  const char* tag = c.outcome == Outcome::kPass ? "PASS" : c.outcome == Outcome::kFail ? "FAIL" : "SKIPPED";
  if (c.outcome == Outcome::kFail) ++failures;
  std::printf("%-8s %-34s %7.3fs  %s\n", tag, name.c_str(), secs, c.detail.c_str());
  std::fflush(stdout);
}

std::vector<std::string> list_items(const fs::path& p) {
  return parse_numbered_list(read_text_file(p)).items;
}

Check chip_replay() {
  Check c;
  const fs::path fx = oracle::fixtures_dir() / "chip";
  const fs::path out = oracle::temp_dir("accept-chip");
  const std::string transcript = (fx / "chip_transcript.jsonl").string();
  const std::string policy = (fs::path(HUMORGEN_DATA_DIR) / "policy" / "strategies_v1.txt").string();
  const std::string out_s = out.string();
  const char* argv[] = {"humorgen", "generate",  "--mode", "full", "--topic", "chip",
                        "--policy", policy.c_str(), "--fixtures", transcript.c_str(),
                        "--fixture-match", "exact", "--out", out_s.c_str()};
  std::ostringstream so, se;
  const int rc = cli::run(static_cast<int>(std::size(argv)), argv, so, se);
  if (rc != 0) {
    c.fail("generate exited " + std::to_string(rc) + ": " + se.str());
    return c;
  }
  const auto records = read_record_file<JokeRecord>(out / "corpus.jsonl");
  const auto want_raw = list_items(fx / "chip_associations.txt");
  const auto want_expanded = list_items(fx / "chip_expanded.txt");
  const auto want_refined = list_items(fx / "chip_refined.txt");
  const auto want_jokes = list_items(fx / "chip_jokes.txt");
  if (records.size() != want_jokes.size()) {
    c.fail(std::to_string(records.size()) + " jokes, want " + std::to_string(want_jokes.size()));
    return c;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].text() != want_jokes[i]) c.fail("joke " + std::to_string(i + 1) + " differs");
    const auto& im = records[i].intermediates();
    if (!im || !im->raw || !im->expanded || !im->refined) {
      c.fail("missing intermediates");
      return c;
    }
    if (im->raw->items() != want_raw) c.fail("raw associations differ");
    if (im->expanded->items() != want_expanded) c.fail("expanded associations differ");
    if (im->refined->items() != want_refined) c.fail("refined associations differ");
  }
  if (c.outcome == Outcome::kPass) {
    const auto& im = *records.front().intermediates();
    c.detail = std::to_string(im.raw->items().size()) + " raw / " +
               std::to_string(im.expanded->items().size()) + " expanded / " +
               std::to_string(im.refined->items().size()) + " refined / " +
               std::to_string(records.size()) + " jokes, string-equal";
  }
  fs::remove_all(out);
  return c;
}

Check mann_whitney_oracle() {
  Check c;
  oracle::Rng rng(20240611);
  double worst_exact = 0.0;
  std::size_t exact_cases = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t total = 2 + inst % 9;  // 2..10
    const std::size_t n1 = 1 + std::uniform_int_distribution<std::size_t>(0, total - 2)(rng);
    std::vector<double> x, y;
    oracle::tie_free_samples(rng, n1, total - n1, x, y);
    for (Alternative alt : {Alternative::kTwoSided, Alternative::kLess, Alternative::kGreater}) {
      UTestOptions opt;
      opt.method = UMethod::kExact;
      opt.alternative = alt;
      const auto got = mann_whitney_u(x, y, opt);
      const double want = oracle::u_p_by_enumeration(x, y, alt);
      worst_exact = std::max(worst_exact, std::abs(got.p_value - want));
      if (got.u_statistic != oracle::u_by_pairs(x, y)) c.fail("U statistic differs");
      ++exact_cases;
    }
  }
  if (worst_exact > 1e-12) c.fail("exact p off by " + fmt("%.3g", worst_exact));

  double worst_normal = 0.0;
  for (int inst = 0; inst < 500; ++inst) {
    std::vector<double> x, y;
    oracle::tie_free_samples(rng, 20, 20, x, y);
    UTestOptions opt;
    opt.method = UMethod::kNormalApprox;
    const auto got = mann_whitney_u(x, y, opt);
    const double want = oracle::u_p_by_rank_sums(x, y, Alternative::kTwoSided);
    worst_normal = std::max(worst_normal, std::abs(got.p_value - want));
  }
  if (worst_normal > 0.005) c.fail("normal approximation off by " + fmt("%.4f", worst_normal));
  if (c.outcome == Outcome::kPass) {
    c.detail = std::to_string(exact_cases) + " exact cases max |dp| " + fmt("%.2g", worst_exact) +
               "; 500 normal cases at 20/20 max |dp| " + fmt("%.4f", worst_normal);
  }
  return c;
}

Check bradley_terry_oracle() {
  Check c;
  oracle::Rng rng(77);
  double worst = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const auto bt = oracle::random_bt_instance(rng, 4, 10);
    const auto ranked = rank_pairwise(bt.judgments);
    const auto want = oracle::bt_grid_search(bt.wins, RankOptions{}.pseudo_count);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < bt.ids.size(); ++i) index[bt.ids[i]] = i;
    if (ranked.jokes.size() != bt.ids.size()) {
      c.fail("instance " + std::to_string(inst) + ": ranked " + std::to_string(ranked.jokes.size()) + " jokes");
      continue;
    }
    for (std::size_t r = 0; r < ranked.jokes.size(); ++r) {
      const auto i = index.at(ranked.jokes[r].joke_id);
      worst = std::max(worst, std::abs(ranked.jokes[r].strength - want[i]));
      if (r > 0) {
        const auto prev = index.at(ranked.jokes[r - 1].joke_id);
        // Rank order must follow the oracle's strengths; exact ties may go either way.
        if (want[prev] < want[i] - 1e-6) {
          c.fail("instance " + std::to_string(inst) + ": order differs at rank " + std::to_string(r + 1));
        }
      }
    }
  }
  if (worst > 1e-3) c.fail("strengths off by " + fmt("%.2g", worst));
  if (c.outcome == Outcome::kPass) {
    c.detail = "1000 instances, rank order equal, max |dp| " + fmt("%.2g", worst);
  }
  return c;
}

Check released_data() {
  Check c;
  const fs::path dir = oracle::fixtures_dir() / "released";
  const json expected = json::parse(read_text_file(dir / "expected.json"));
  const fs::path labels_path = dir / expected.at("labels_file").get<std::string>();
  if (!fs::exists(labels_path)) {
    c.outcome = Outcome::kSkipped;
    c.detail = "released label export not present at " + labels_path.string();
    return c;
  }
  const auto labels = read_record_file<LabelRecord>(labels_path);
  const auto reports = aggregate_all(labels);
  std::map<std::string, const MethodReport*> by_method;
  for (const auto& r : reports) by_method[r.method] = &r;
  const json& pct_tol = expected.at("percent_tolerance");
  const double fun_tol = expected.at("funniness_tolerance");
  for (const auto& [method, row] : expected.at("rows").items()) {
    if (!by_method.contains(method)) {
      c.fail("no labels for " + method);
      continue;
    }
    const MethodReport& r = *by_method[method];
    auto check_pct = [&](const char* col, const std::optional<double>& got) {
      const double want = row.at(col);
      const double tol = pct_tol.value(col, 0.0);
      const bool ok = got && (std::floor(*got + 0.5) == want || std::abs(*got - want) <= tol);
      if (!ok) c.fail(method + " " + col + " " + (got ? fmt("%.2f", *got) : "-") + " vs " + fmt("%.0f", want));
    };
    check_pct("understandable", r.understandable_pct);
    check_pct("offensive", r.offensive_pct);
    check_pct("is_joke", r.is_joke_pct);
    check_pct("known", r.known_pct);
    const double want_fun = row.at("funniness");
    if (!r.funniness_mean || std::abs(*r.funniness_mean - want_fun) > fun_tol) {
      c.fail(method + " funniness " + (r.funniness_mean ? fmt("%.3f", *r.funniness_mean) : "-"));
    }
    if (r.item_count != row.at("count").get<std::size_t>()) {
      c.fail(method + " count " + std::to_string(r.item_count));
    }
  }
  const double p_tol = expected.at("p_value_tolerance_pct");
  std::string sweep;
  for (const auto& t : expected.at("tests")) {
    const std::string a = t.at("a"), b = t.at("b");
    if (!by_method.contains(a) || !by_method.contains(b)) continue;
    const Score score = parse_score(t.at("score").get<std::string>());
    const CompareMode mode = parse_compare_mode(t.at("mode").get<std::string>());
    const double want = t.at("p_pct");
    const double got = compare_methods(*by_method[a], *by_method[b], score, mode).p_value * 100.0;
    if (std::abs(got - want) <= p_tol) continue;
    // Report which flag combination, if any, reproduces the published value.
    std::string best;
    double best_err = 1e9;
    for (CompareMode m : {CompareMode::kPerItemMean, CompareMode::kPooled}) {
      for (bool cc : {true, false}) {
        for (bool tie : {true, false}) {
          UTestOptions o;
          o.continuity_correction = cc;
          o.tie_correction = tie;
          const double p = compare_methods(*by_method[a], *by_method[b], score, m, o).p_value * 100.0;
          if (std::abs(p - want) < best_err) {
            best_err = std::abs(p - want);
            best = std::string(to_string(m)) + (cc ? " cc" : " no-cc") + (tie ? " ties" : " no-ties") +
                   " p=" + fmt("%.4f", p) + "%";
          }
        }
      }
    }
    c.fail(a + " vs " + b + " " + std::string(to_string(score)) + ": p=" + fmt("%.4f", got) +
           "% vs " + fmt("%.2f", want) + "%; closest flags: " + best);
  }
  if (c.outcome == Outcome::kPass) c.detail = "all rows and p-values reproduced";
  return c;
}

Check cleaning_properties() {
  Check c;
  oracle::Rng rng(5150);
  std::vector<RedditRow> rows;
  for (int i = 0; i < 10'000; ++i) rows.push_back({oracle::synthetic_reddit_text(rng), "1", "train"});
  const auto emoticons = EmoticonSet::bundled();
  const auto result = clean_reddit(rows, emoticons);
  std::size_t bad_chars = 0, bad_faces = 0, underscores = 0, bad_end = 0, not_idempotent = 0;
  for (const auto& r : result.records) {
    const std::string& t = r.text();
    for (const auto& ch : oracle::forbidden_quote_and_paren_chars()) bad_chars += t.find(ch) != std::string::npos;
    for (const auto& face : oracle::synthetic_emoticons()) bad_faces += t.find(face) != std::string::npos;
    bad_faces += emoticons.contains_emoticon(t);
    underscores += t.find("__") != std::string::npos;
    const char last = t.empty() ? '\0' : t.back();
    bad_end += last != '.' && last != '!' && last != '?';
    const auto again = clean_text(t, emoticons);
    not_idempotent += !again.kept() || again.text != t;
  }
  if (bad_chars) c.fail(std::to_string(bad_chars) + " quote/paren hits");
  if (bad_faces) c.fail(std::to_string(bad_faces) + " emoticon hits");
  if (underscores) c.fail(std::to_string(underscores) + " outputs with \"__\"");
  if (bad_end) c.fail(std::to_string(bad_end) + " outputs without terminal punctuation");
  if (not_idempotent) c.fail(std::to_string(not_idempotent) + " outputs change when re-cleaned");
  if (result.records.empty()) c.fail("nothing kept");
  if (c.outcome == Outcome::kPass) {
    c.detail = std::to_string(result.report.kept_count) + " of 10000 kept, " +
               std::to_string(result.report.substitutions) + " underscore substitutions, all properties hold";
  }
  return c;
}

Check skip_logic() {
  Check c;
  oracle::Rng rng(31337);
  std::size_t accepted_legal = 0, rejected_invalid = 0, invalid = 0, tries = 0;
  for (int i = 0; i < 10'000; ++i) {
    if (validate_response(oracle::legal_response(rng)).valid()) ++accepted_legal;
  }
  while (invalid < 10'000 && tries < 1'000'000) {
    ++tries;
    auto r = oracle::legal_response(rng);
    const int edits = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < edits; ++e) r = oracle::mutate(r, rng);
    if (oracle::is_legal(r)) continue;
    ++invalid;
    if (!validate_response(r).valid()) ++rejected_invalid;
  }
  if (accepted_legal != 10'000) c.fail("accepted " + std::to_string(accepted_legal) + " of 10000 legal");
  if (invalid != 10'000) c.fail("generated only " + std::to_string(invalid) + " invalid responses");
  if (rejected_invalid != invalid) {
    c.fail("rejected " + std::to_string(rejected_invalid) + " of " + std::to_string(invalid) + " invalid");
  }
  if (c.outcome == Outcome::kPass) c.detail = "10000/10000 legal accepted, 10000/10000 invalid rejected";
  return c;
}

Check moderation_boundary() {
  Check c;
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_moderation("Exactly at the line.", {{"harassment", 0.020}});
  backend->add_moderation("Just over the line.", {{"harassment", 0.021}});
  Gateway gateway(backend);
  std::vector<JokeRecord> records;
  for (const char* t : {"Exactly at the line.", "Just over the line."}) {
    JokeRecord::Draft d;
    d.text = t;
    records.push_back(JokeRecord::make(d));
  }
  const auto out = moderation_filter(gateway, records, "harassment", 0.02);
  if (out.kept.size() != 1 || out.kept[0].text() != "Exactly at the line.") c.fail("0.020 not kept");
  if (out.rejected.size() != 1 || out.rejected[0].text() != "Just over the line.") c.fail("0.021 not rejected");
  if (!out.quarantined.empty()) c.fail("unexpected quarantine");
  if (c.outcome == Outcome::kPass) c.detail = "0.020 kept, 0.021 rejected at 0.02";
  return c;
}

Check topic_sampler() {
  Check c;
  const fs::path words = fs::path(HUMORGEN_DATA_DIR) / "words";
  const auto filter = load_word_filter((words / "stopwords_en.txt").string(),
                                       (words / "profanity_en.txt").string());
  const auto stop = read_word_list(words / "stopwords_en.txt");
  const auto prof = read_word_list(words / "profanity_en.txt");
  const std::set<std::string> stopset(stop.begin(), stop.end()), profset(prof.begin(), prof.end());
  const auto freq = read_word_list(words / "en_frequency.txt");
  const auto sampler = TopicSampler::make(freq, filter, 42);
  if (sampler.pool().size() != 10'000) c.fail("pool has " + std::to_string(sampler.pool().size()) + " words");
  std::size_t bad = 0;
  for (const auto& t : sampler.pool()) {
    const auto& w = t.word();
    bool letters = true;
    for (char ch : w) letters = letters && ch >= 'a' && ch <= 'z';
    if (w.size() < 4 || !letters || stopset.contains(w) || profset.contains(w)) ++bad;
  }
  if (bad) c.fail(std::to_string(bad) + " pool words break the filter");
  const auto a = sample_topics(sampler, 120), b = sample_topics(TopicSampler::make(freq, filter, 42), 120);
  const auto other = sample_topics(TopicSampler::make(freq, filter, 43), 120);
  if (a.topics != b.topics) c.fail("same seed gave different samples");
  if (a.topics == other.topics) c.fail("different seeds gave the same sample");
  std::set<std::string> distinct;
  for (const auto& t : a.topics) distinct.insert(t.word());
  if (distinct.size() != 120) c.fail("sample repeats words");
  if (c.outcome == Outcome::kPass) c.detail = "10000 pool words pass, 120-word sample seed-deterministic";
  return c;
}

Check assignment_safety() {
  Check c;
  const auto r = oracle::simulate_assignment(7, 50, 5, 2024);
  if (r.max_per_task > 5) c.fail("a task got " + std::to_string(r.max_per_task) + " responses");
  if (r.max_same_annotator_per_task > 1) c.fail("an annotator answered a task twice");
  if (!r.complete) c.fail("not complete: " + std::to_string(r.responses) + " of 250 responses");
  if (r.abandoned_leases == 0 || r.expired_submissions == 0) c.fail("no lease expiry exercised");
  if (c.outcome == Outcome::kPass) {
    c.detail = std::to_string(r.responses) + " responses, max " + std::to_string(r.max_per_task) +
               " per task, " + std::to_string(r.abandoned_leases) + " abandoned and " +
               std::to_string(r.expired_submissions) + " late submissions";
  }
  return c;
}

}  // namespace

int main() {
  criterion("chip transcript replay", 1, chip_replay);
  criterion("Mann-Whitney oracle", 30, mann_whitney_oracle);
  criterion("Bradley-Terry oracle", 60, bradley_terry_oracle);
  criterion("released-data recomputation", 10, released_data);
  criterion("cleaning properties", 5, cleaning_properties);
  criterion("skip-logic totality", 5, skip_logic);
  criterion("moderation boundary", 1, moderation_boundary);
  criterion("topic sampler", 5, topic_sampler);
  criterion("assignment safety", 30, assignment_safety);
  std::printf("%s\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED");
  return failures ? 1 : 0;
}

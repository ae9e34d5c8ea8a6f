#include "humorgen/topics.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "humorgen/error.hpp"
#include "humorgen/records.hpp"
#include "humorgen/rng.hpp"

namespace humorgen {

TopicSampler TopicSampler::make(const std::vector<std::string>& frequency_list,
                                const WordFilter& filter, std::uint64_t rng_seed,
                                std::size_t pool_size) {
  TopicSampler s;
  s.seed_ = rng_seed;
  std::set<std::string> seen;
  for (std::size_t rank = 0; rank < frequency_list.size() && s.pool_.size() < pool_size; ++rank) {
    std::string w = frequency_list[rank];
    std::transform(w.begin(), w.end(), w.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (Topic::rejection_reason(w, filter)) continue;
    if (!seen.insert(w).second) continue;
    s.pool_.push_back(Topic::make(std::move(w), rank, filter));
  }
  if (s.pool_.empty()) throw ConfigError("topic pool is empty after filtering");
  return s;
}

TopicSample sample_topics(const TopicSampler& sampler, std::size_t n) {
  if (n == 0) throw ConfigError("number of topics must be at least 1");
  const auto& pool = sampler.pool();
  Rng rng(sampler.rng_seed());
  TopicSample out;
  if (n <= pool.size()) {
    for (std::size_t i : sample_indices(pool.size(), n, rng)) out.topics.push_back(pool[i]);
  } else {
    out.with_replacement = true;
    for (std::size_t i = 0; i < n; ++i) out.topics.push_back(pool[uniform_index(rng, pool.size())]);
  }
  return out;
}

WordFilter load_word_filter(const std::string& stopwords_path, const std::string& profanity_path) {
  auto to_set = [](const std::vector<std::string>& v) {
    std::set<std::string> s;
    for (std::string w : v) {
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      s.insert(std::move(w));
    }
    return s;
  };
  return WordFilter(to_set(read_word_list(stopwords_path)), to_set(read_word_list(profanity_path)));
}

}  // namespace humorgen

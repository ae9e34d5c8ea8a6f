#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "humorgen/types.hpp"

namespace humorgen {

/// Topic pool built from a word-frequency list: words are lowercased, filtered
/// (length, letters only, stopwords, profanity), and the first `pool_size` survivors kept.
class TopicSampler {
 public:
  static constexpr std::size_t kDefaultPoolSize = 10'000;

  /// Throws ConfigError when no word survives filtering.
  static TopicSampler make(const std::vector<std::string>& frequency_list, const WordFilter& filter,
                           std::uint64_t rng_seed, std::size_t pool_size = kDefaultPoolSize);

  const std::vector<Topic>& pool() const noexcept { return pool_; }
  std::uint64_t rng_seed() const noexcept { return seed_; }

 private:
  TopicSampler() = default;

  std::vector<Topic> pool_;
  std::uint64_t seed_ = 0;
};

struct TopicSample {
  std::vector<Topic> topics;
  bool with_replacement = false;  // n exceeded the pool size
};

/// n uniform draws without replacement (with replacement, flagged, when n > pool).
/// Throws ConfigError when n == 0.
TopicSample sample_topics(const TopicSampler& sampler, std::size_t n);

/// Loads the bundled (or given) frequency, stopword and profanity lists.
WordFilter load_word_filter(const std::string& stopwords_path, const std::string& profanity_path);

}  // namespace humorgen

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "protoseq/corpus.hpp"
#include "protoseq/rng.hpp"

namespace protoseq {

struct EpisodeSpec {
  int n_ways = 0;
  int n_shots = 5;
  int n_queries = 10;
  std::size_t max_len = 35;

  void validate() const {
    if (n_ways < 1 || n_shots < 1 || n_queries < 1 || max_len < 1)
      throw std::invalid_argument("episode spec: all fields must be positive");
  }
};

// Support and query conversations per class, as indices into the corpus.
// Support ids and query ids are globally disjoint within an episode.
struct Episode {
  const Corpus* corpus = nullptr;
  std::size_t max_len = 35;
  std::vector<std::vector<std::size_t>> support;  // label id -> conversation indices
  std::vector<std::vector<std::size_t>> query;
};

class InfeasibleEpisodeError : public std::runtime_error {
 public:
  InfeasibleEpisodeError(const std::string& label, std::size_t available, std::size_t needed)
      : std::runtime_error("episode sampling infeasible: label \"" + label + "\" has " + std::to_string(available) +
                           " eligible conversations but " + std::to_string(needed) + " are needed"),
        label_(label) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

// Uniform without-replacement sampler over whole conversations. A conversation
// is eligible for class k if at least one of its first max_len messages is
// labeled k; a drawn conversation is removed from every pool for the rest of
// the episode, which guarantees support/query disjointness. Class order is
// shuffled per episode so overlapping pools do not starve a fixed class.
class EpisodeSampler {
 public:
  EpisodeSampler(const Corpus& corpus, EpisodeSpec spec, std::uint64_t seed)
      : corpus_(&corpus), spec_(spec), rng_(seed) {
    spec_.validate();
    if (static_cast<std::size_t>(spec_.n_ways) != corpus.num_labels())
      throw std::invalid_argument("episode spec: n_ways (" + std::to_string(spec_.n_ways) +
                                  ") must equal the corpus label count (" + std::to_string(corpus.num_labels()) +
                                  ")");
    eligible_.assign(corpus.num_labels(), {});
    for (std::size_t ci = 0; ci < corpus.conversations.size(); ++ci) {
      const Conversation& conv = corpus.conversations[ci];
      const std::size_t effective = std::min(conv.messages.size(), spec_.max_len);
      std::vector<bool> has(corpus.num_labels(), false);
      for (std::size_t mi = 0; mi < effective; ++mi) has[corpus.label_id(conv.messages[mi].label)] = true;
      for (std::size_t k = 0; k < has.size(); ++k)
        if (has[k]) eligible_[k].push_back(ci);
    }
    const std::size_t needed = static_cast<std::size_t>(spec_.n_shots + spec_.n_queries);
    for (std::size_t k = 0; k < eligible_.size(); ++k)
      if (eligible_[k].size() < needed)
        throw InfeasibleEpisodeError(corpus.label_set[k], eligible_[k].size(), needed);
    taken_.assign(corpus.conversations.size(), false);
  }

  const EpisodeSpec& spec() const { return spec_; }

  Episode sample() {
    const std::size_t k_count = eligible_.size();
    const std::size_t needed = static_cast<std::size_t>(spec_.n_shots + spec_.n_queries);
    Episode ep;
    ep.corpus = corpus_;
    ep.max_len = spec_.max_len;
    ep.support.assign(k_count, {});
    ep.query.assign(k_count, {});

    std::fill(taken_.begin(), taken_.end(), false);
    std::vector<std::size_t> order(k_count);
    for (std::size_t i = 0; i < k_count; ++i) order[i] = i;
    rng_.shuffle(order);

    for (std::size_t k : order) {
      std::vector<std::size_t> pool;
      pool.reserve(eligible_[k].size());
      for (std::size_t ci : eligible_[k])
        if (!taken_[ci]) pool.push_back(ci);
      if (pool.size() < needed) throw InfeasibleEpisodeError(corpus_->label_set[k], pool.size(), needed);
      for (std::size_t i = 0; i < needed; ++i) {
        const std::size_t j = i + rng_.uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
        taken_[pool[i]] = true;
        if (i < static_cast<std::size_t>(spec_.n_shots))
          ep.support[k].push_back(pool[i]);
        else
          ep.query[k].push_back(pool[i]);
      }
    }
    return ep;
  }

 private:
  const Corpus* corpus_;
  EpisodeSpec spec_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> eligible_;
  std::vector<bool> taken_;
};

}  // namespace protoseq

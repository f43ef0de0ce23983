#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseq/corpus.hpp"
#include "protoseq/rng.hpp"

namespace protoseq {

// Markov-labeled synthetic conversations: message labels follow the given
// transition matrix; each token comes from the message's label lexicon with
// probability lambda, otherwise from the shared confuser lexicon.
struct SynthSpec {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> transition;    // row-stochastic, labels x labels
  std::vector<std::vector<std::string>> lexicons; // one per label
  std::vector<std::string> confuser;
  double lambda = 1.0;
  std::vector<double> lambda_per_label;           // optional; overrides lambda per label
  std::size_t n_conversations = 100;
  std::size_t len_min = 4, len_max = 10;          // messages per conversation
  std::size_t tokens_min = 3, tokens_max = 8;     // tokens per message
  std::string id_prefix = "synth";

  double label_lambda(std::size_t label) const {
    return lambda_per_label.empty() ? lambda : lambda_per_label[label];
  }
};

inline void validate(const SynthSpec& spec) {
  const std::size_t k = spec.labels.size();
  if (k == 0) throw std::invalid_argument("synth: empty label set");
  if (spec.transition.size() != k) throw std::invalid_argument("synth: transition matrix must be labels x labels");
  for (std::size_t i = 0; i < k; ++i) {
    if (spec.transition[i].size() != k)
      throw std::invalid_argument("synth: transition row " + std::to_string(i) + " has wrong length");
    double row_sum = 0.0;
    for (double p : spec.transition[i]) {
      if (p < 0.0) throw std::invalid_argument("synth: negative entry in transition row " + std::to_string(i));
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > 1e-9)
      throw std::invalid_argument("synth: transition row " + std::to_string(i) + " is not stochastic (sums to " +
                                  std::to_string(row_sum) + ")");
  }
  if (spec.lexicons.size() != k) throw std::invalid_argument("synth: need one lexicon per label");
  for (std::size_t i = 0; i < k; ++i)
    if (spec.lexicons[i].empty()) throw std::invalid_argument("synth: empty lexicon for label " + spec.labels[i]);
  if (spec.lambda < 0.0 || spec.lambda > 1.0) throw std::invalid_argument("synth: lambda must be in [0,1]");
  if (!spec.lambda_per_label.empty() && spec.lambda_per_label.size() != k)
    throw std::invalid_argument("synth: lambda_per_label must have one entry per label");
  bool needs_confuser = spec.lambda < 1.0 && spec.lambda_per_label.empty();
  for (double l : spec.lambda_per_label) {
    if (l < 0.0 || l > 1.0) throw std::invalid_argument("synth: per-label lambda must be in [0,1]");
    if (l < 1.0) needs_confuser = true;
  }
  if (needs_confuser && spec.confuser.empty())
    throw std::invalid_argument("synth: lambda < 1 requires a confuser lexicon");
  if (spec.len_min < 1 || spec.len_max < spec.len_min) throw std::invalid_argument("synth: bad length range");
  if (spec.tokens_min < 1 || spec.tokens_max < spec.tokens_min)
    throw std::invalid_argument("synth: bad tokens-per-message range");
}

inline Corpus generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(substream_seed(seed, "synth"));
  const std::size_t k = spec.labels.size();

  Corpus corpus;
  corpus.conversations.reserve(spec.n_conversations);
  for (std::size_t ci = 0; ci < spec.n_conversations; ++ci) {
    Conversation conv;
    conv.id = spec.id_prefix + "-" + std::to_string(ci);
    const std::size_t len = spec.len_min + rng.uniform_index(spec.len_max - spec.len_min + 1);
    std::size_t label = rng.uniform_index(k);  // initial label uniform
    for (std::size_t mi = 0; mi < len; ++mi) {
      if (mi > 0) label = rng.choice(spec.transition[label]);
      Message m;
      m.speaker = mi % 2 == 0 ? "visitor" : "operator";
      m.label = spec.labels[label];
      const std::size_t ntok = spec.tokens_min + rng.uniform_index(spec.tokens_max - spec.tokens_min + 1);
      const double lam = spec.label_lambda(label);
      for (std::size_t ti = 0; ti < ntok; ++ti) {
        const bool from_label = lam >= 1.0 || rng.uniform() < lam;
        const std::vector<std::string>& lex = from_label ? spec.lexicons[label] : spec.confuser;
        if (ti) m.text += ' ';
        m.text += lex[rng.uniform_index(lex.size())];
      }
      m.tokens = tokenize(m.text);
      conv.messages.push_back(std::move(m));
    }
    corpus.conversations.push_back(std::move(conv));
  }
  corpus.rebuild_label_index();
  return corpus;
}

// Convenience lexicon builder: n distinct tokens with a common prefix.
inline std::vector<std::string> make_lexicon(const std::string& prefix, std::size_t n) {
  std::vector<std::string> lex;
  lex.reserve(n);
  for (std::size_t i = 0; i < n; ++i) lex.push_back(prefix + std::to_string(i));
  return lex;
}

}  // namespace protoseq

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "protoseq/corpus.hpp"
#include "protoseq/rng.hpp"

namespace protoseq {

inline constexpr int kPadIndex = 0;
inline constexpr int kUnkIndex = 1;

struct Vocab {
  std::vector<std::string> tokens;  // index -> token
  std::unordered_map<std::string, int> index;

  Vocab() {
    add("<pad>");
    add("<unk>");
  }

  int add(const std::string& tok) {
    auto it = index.find(tok);
    if (it != index.end()) return it->second;
    int id = static_cast<int>(tokens.size());
    tokens.push_back(tok);
    index[tok] = id;
    return id;
  }

  int lookup(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? kUnkIndex : it->second;
  }

  std::size_t size() const { return tokens.size(); }

  // First-occurrence order over the corpora keeps vocab construction
  // deterministic for a fixed input.
  static Vocab build(std::initializer_list<const Corpus*> corpora) {
    Vocab v;
    for (const Corpus* c : corpora)
      for (const Conversation& conv : c->conversations)
        for (const Message& m : conv.messages)
          for (const std::string& tok : m.tokens) v.add(tok);
    return v;
  }
};

// Frozen [V×dim] token embedding table; row 0 is the all-zero padding row.
struct EmbeddingMatrix {
  std::size_t dim = 0;
  std::vector<double> data;  // V×dim row-major

  std::size_t vocab_size() const { return dim == 0 ? 0 : data.size() / dim; }
  const double* row(int i) const { return &data[static_cast<std::size_t>(i) * dim]; }
  double* row(int i) { return &data[static_cast<std::size_t>(i) * dim]; }
};

struct EmbeddingLoadStats {
  std::size_t found = 0;
  std::size_t missing = 0;        // vocab tokens filled from uniform(-0.05, 0.05)
  std::size_t skipped_lines = 0;  // unparsable rows in the file
};

namespace detail {

// Random rows are keyed on (seed, token string), not on vocab position, so a
// token receives the same vector no matter which corpus built the vocab.
inline void fill_token_row(double* row, std::size_t dim, std::uint64_t seed_base, const std::string& token,
                           double scale) {
  Rng rng(mix64(seed_base ^ hash_tag(token)));
  for (std::size_t j = 0; j < dim; ++j) row[j] = rng.uniform(-scale, scale);
}

}  // namespace detail

// Plain-text word-vector format: optional "count dim" header line, then one
// "token v1 ... vD" row per line. Vocab tokens absent from the file get
// uniform(-0.05, 0.05) rows drawn from the run seed; the padding row stays zero.
inline EmbeddingMatrix load_embeddings(const std::string& path, const Vocab& vocab, std::size_t dim,
                                       std::uint64_t seed, EmbeddingLoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  EmbeddingMatrix mat;
  mat.dim = dim;
  mat.data.assign(vocab.size() * dim, 0.0);
  std::vector<bool> filled(vocab.size(), false);
  EmbeddingLoadStats local;

  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (first) {
      first = false;
      // header detection: exactly two integer fields
      std::istringstream probe(line);
      long long cnt = 0, d = 0;
      std::string extra;
      if (probe >> cnt >> d && !(probe >> extra)) {
        if (static_cast<std::size_t>(d) != dim)
          throw std::runtime_error("embedding file " + path + ": header dimension " + std::to_string(d) +
                                   " does not match configured dimension " + std::to_string(dim));
        continue;
      }
    }
    std::string tok;
    if (!(ls >> tok)) {
      ++local.skipped_lines;
      continue;
    }
    std::vector<double> vec(dim);
    bool ok = true;
    for (std::size_t i = 0; i < dim; ++i)
      if (!(ls >> vec[i])) {
        ok = false;
        break;
      }
    std::string rest;
    if (ok && (ls >> rest)) ok = false;  // trailing fields: wrong dimension
    if (!ok) {
      ++local.skipped_lines;
      continue;
    }
    auto it = vocab.index.find(tok);
    if (it == vocab.index.end() || it->second == kPadIndex) continue;
    std::copy(vec.begin(), vec.end(), mat.row(it->second));
    if (!filled[it->second]) ++local.found;
    filled[it->second] = true;
  }

  const std::uint64_t seed_base = substream_seed(seed, "embeddings");
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i == kPadIndex || filled[i]) continue;
    detail::fill_token_row(mat.row(static_cast<int>(i)), dim, seed_base, vocab.tokens[i], 0.05);
    ++local.missing;
  }
  if (stats) *stats = local;
  return mat;
}

// Embedding table for corpora without a pretrained file (synthetic runs).
inline EmbeddingMatrix random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed,
                                         double scale = 0.05) {
  EmbeddingMatrix mat;
  mat.dim = dim;
  mat.data.assign(vocab.size() * dim, 0.0);
  const std::uint64_t seed_base = substream_seed(seed, "embeddings");
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i == kPadIndex) continue;
    detail::fill_token_row(mat.row(static_cast<int>(i)), dim, seed_base, vocab.tokens[i], scale);
  }
  return mat;
}

}  // namespace protoseq

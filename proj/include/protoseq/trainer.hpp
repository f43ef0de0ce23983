#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "protoseq/adam.hpp"
#include "protoseq/embeddings.hpp"
#include "protoseq/episodes.hpp"
#include "protoseq/metrics.hpp"
#include "protoseq/model.hpp"
#include "protoseq/serialize.hpp"

namespace protoseq {

struct TrainConfig {
  int episodes_per_epoch = 100;
  int val_episodes = 100;
  int test_episodes = 1000;
  int max_epochs = 1000;
  int patience = 100;  // epochs without validation F1-micro improvement
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  EpisodeSpec episode;
  std::vector<std::string> excluded_labels;
  int threads = 1;
  std::string checkpoint_path;  // optional on-disk snapshot of the best weights

  void validate() const {
    if (episodes_per_epoch < 1 || val_episodes < 1 || test_episodes < 1 || max_epochs < 1 || patience < 1)
      throw std::invalid_argument("train config: all counts must be positive");
    if (patience > max_epochs) throw std::invalid_argument("train config: patience must not exceed max_epochs");
    if (threads < 1) throw std::invalid_argument("train config: threads must be positive");
    episode.validate();
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1_micro = 0.0;
  bool is_best = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  int stopped_epoch = 0;
};

namespace detail {

inline std::set<int> resolve_excluded(const Corpus& corpus, const std::vector<std::string>& names) {
  std::set<int> ids;
  for (const std::string& name : names) ids.insert(corpus.label_id(name));
  return ids;
}

struct EpisodePairs {
  std::vector<int> gold;
  std::vector<int> pred;
};

inline EpisodePairs decode_pairs(Model& model, const Episode& ep, const Vocab& vocab, const EmbeddingMatrix& emb) {
  EpisodePairs out;
  for (const DecodedConversation& dc : model.decode_episode(ep, vocab, emb)) {
    out.gold.insert(out.gold.end(), dc.gold.begin(), dc.gold.end());
    out.pred.insert(out.pred.end(), dc.pred.begin(), dc.pred.end());
  }
  return out;
}

inline MetricsReport report_from_pairs(std::vector<EpisodePairs> per_episode, const Corpus& corpus,
                                       const std::set<int>& excluded_ids,
                                       const std::vector<std::string>& excluded_labels, const std::string& variant) {
  MetricsReport report;
  report.variant = variant;
  report.n_episodes = per_episode.size();
  report.excluded_labels = excluded_labels;

  std::vector<int> all_gold, all_pred;
  for (const EpisodePairs& ep : per_episode) {
    F1Result r = f1_scores(ep.pred, ep.gold, static_cast<int>(corpus.num_labels()), excluded_ids);
    report.episode_scores.push_back(r.micro_undefined ? 0.0 : r.micro);
    all_gold.insert(all_gold.end(), ep.gold.begin(), ep.gold.end());
    all_pred.insert(all_pred.end(), ep.pred.begin(), ep.pred.end());
  }

  F1Result pooled = f1_scores(all_pred, all_gold, static_cast<int>(corpus.num_labels()), excluded_ids,
                              &corpus.label_set);
  report.per_class = pooled.per_class;
  report.f1_micro = pooled.micro;
  report.f1_weighted = pooled.weighted;
  report.micro_undefined = pooled.micro_undefined;
  report.mcc_score = mcc(all_pred, all_gold, static_cast<int>(corpus.num_labels()));

  double mean = 0.0;
  for (double s : report.episode_scores) mean += s;
  mean /= static_cast<double>(report.episode_scores.size());
  double var = 0.0;
  for (double s : report.episode_scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(report.episode_scores.size());  // population variance
  report.episode_mean = mean;
  report.episode_std = std::sqrt(var);
  return report;
}

}  // namespace detail

// Decodes n_episodes sampled episodes and reports pooled confusion scores
// (the headline numbers) plus per-episode micro-F1 mean and population
// standard deviation. Episode decoding may fan out across threads: the
// episodes are pre-sampled on one thread, parameters are only read during
// decoding, and results merge deterministically by episode index.
inline MetricsReport evaluate(Model& model, const Corpus& corpus, const Vocab& vocab, const EmbeddingMatrix& emb,
                              const EpisodeSpec& spec, int n_episodes,
                              const std::vector<std::string>& excluded_labels, std::uint64_t seed, int threads = 1) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be positive");
  const bool was_training = model.training();
  model.set_training(false);

  EpisodeSampler sampler(corpus, spec, seed);
  std::vector<Episode> episodes;
  episodes.reserve(n_episodes);
  for (int i = 0; i < n_episodes; ++i) episodes.push_back(sampler.sample());

  const std::set<int> excluded_ids = detail::resolve_excluded(corpus, excluded_labels);
  std::vector<detail::EpisodePairs> pairs(episodes.size());

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(episodes.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < episodes.size(); ++i) pairs[i] = detail::decode_pairs(model, episodes[i], vocab, emb);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = static_cast<std::size_t>(w); i < episodes.size(); i += workers)
            pairs[i] = detail::decode_pairs(model, episodes[i], vocab, emb);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }

  model.set_training(was_training);
  return detail::report_from_pairs(std::move(pairs), corpus, excluded_ids, excluded_labels,
                                   to_string(model.config().variant));
}

// Episodic training with early stopping on validation F1-micro. Each epoch
// draws episodes_per_epoch training episodes and validates on val_episodes
// fresh validation episodes; when the validation score fails to improve for
// `patience` consecutive epochs, training stops and the best weights are
// restored from the in-memory snapshot.
inline TrainResult train(Model& model, const Corpus& train_corpus, const Corpus& val_corpus, const Vocab& vocab,
                         const EmbeddingMatrix& emb, const TrainConfig& cfg) {
  cfg.validate();
  if (train_corpus.label_set != val_corpus.label_set)
    throw std::invalid_argument("train: train/val label sets differ; label indexing must be identical across splits");
  detail::resolve_excluded(train_corpus, cfg.excluded_labels);  // fail fast on unknown names

  // constructing the samplers validates feasibility before any training work
  EpisodeSampler train_sampler(train_corpus, cfg.episode, substream_seed(cfg.seed, "train-episodes"));
  EpisodeSampler val_probe(val_corpus, cfg.episode, substream_seed(cfg.seed, "val-probe"));

  std::vector<Parameter*> params = model.parameters();
  AdamConfig adam{.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2, .eps = cfg.eps};
  Rng dropout_rng(substream_seed(cfg.seed, "dropout"));
  const std::uint64_t val_seed = substream_seed(cfg.seed, "val-episodes");

  TrainResult result;
  std::vector<Tensor> best_snapshot;
  auto snapshot = [&] {
    best_snapshot.clear();
    for (Parameter* p : params) best_snapshot.push_back(p->value);
  };
  snapshot();  // epoch-0 weights in case validation never improves

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    model.set_training(true);
    double loss_sum = 0.0;
    for (int e = 0; e < cfg.episodes_per_epoch; ++e) {
      Episode ep = train_sampler.sample();
      Tape tape;
      Var loss = model.episode_loss(tape, ep, vocab, emb, dropout_rng);
      loss_sum += loss.scalar();
      if (!params.empty()) {
        tape.backward(loss);
        adam_step(params, adam);
      }
    }
    model.set_training(false);

    // fresh random validation episodes every epoch, deterministic per seed
    MetricsReport val = evaluate(model, val_corpus, vocab, emb, cfg.episode, cfg.val_episodes, cfg.excluded_labels,
                                 substream_seed(val_seed, std::to_string(epoch)), cfg.threads);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(cfg.episodes_per_epoch);
    rec.val_f1_micro = val.f1_micro;
    rec.is_best = val.f1_micro > result.best_val_f1 || result.best_epoch == 0;
    if (rec.is_best) {
      result.best_val_f1 = val.f1_micro;
      result.best_epoch = epoch;
      snapshot();
      if (!cfg.checkpoint_path.empty()) save_model(cfg.checkpoint_path, model, train_corpus.label_set);
    }
    result.history.push_back(rec);
    result.stopped_epoch = epoch;
    if (epoch - result.best_epoch >= cfg.patience) break;
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_snapshot[i];
  return result;
}

// One line per epoch: epoch, train loss, validation micro-F1, best flag.
inline void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history log: " + path);
  out << "# epoch\ttrain_loss\tval_f1_micro\tbest\n";
  for (const EpochRecord& r : history)
    out << r.epoch << "\t" << r.train_loss << "\t" << r.val_f1_micro << "\t" << (r.is_best ? 1 : 0) << "\n";
}

}  // namespace protoseq

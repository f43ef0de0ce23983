#pragma once

#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "protoseq/corpus.hpp"

namespace protoseq {

struct ClassStats {
  std::string label;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t support = 0;  // gold count
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct F1Result {
  std::vector<ClassStats> per_class;  // all classes, no exclusion applied
  double micro = 0.0;
  double weighted = 0.0;
  bool micro_undefined = false;  // no scoreable positions after exclusion
};

namespace detail {

inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline double f1_from(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace detail

// Per-class precision/recall/F1 over all classes, plus micro and
// support-weighted F1 over the non-excluded label set. Positions whose gold
// label is excluded contribute nothing to micro/weighted; predicting an
// excluded label on a non-excluded gold position counts as an error.
inline F1Result f1_scores(const std::vector<int>& pred, const std::vector<int>& gold, int num_classes,
                          const std::set<int>& excluded = {},
                          const std::vector<std::string>* label_names = nullptr) {
  if (pred.size() != gold.size())
    throw std::invalid_argument("f1_scores: pred length " + std::to_string(pred.size()) + " != gold length " +
                                std::to_string(gold.size()));
  const std::size_t k = static_cast<std::size_t>(num_classes);
  auto check = [&](int v) {
    if (v < 0 || static_cast<std::size_t>(v) >= k) throw std::out_of_range("f1_scores: label out of range");
  };

  F1Result out;
  out.per_class.resize(k);
  // full counts, no exclusion: feeds the per-class report
  for (std::size_t i = 0; i < pred.size(); ++i) {
    check(pred[i]);
    check(gold[i]);
    out.per_class[gold[i]].support += 1;
    if (pred[i] == gold[i]) {
      out.per_class[gold[i]].tp += 1;
    } else {
      out.per_class[gold[i]].fn += 1;
      out.per_class[pred[i]].fp += 1;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    ClassStats& s = out.per_class[c];
    if (label_names && c < label_names->size()) s.label = (*label_names)[c];
    s.precision = detail::safe_div(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fp));
    s.recall = detail::safe_div(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fn));
    s.f1 = detail::f1_from(s.precision, s.recall);
  }

  // exclusion-applied counts: feed micro and weighted
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  std::size_t kept_positions = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (excluded.count(gold[i])) continue;
    ++kept_positions;
    if (pred[i] == gold[i]) {
      tp[gold[i]] += 1;
    } else {
      fn[gold[i]] += 1;
      if (!excluded.count(pred[i])) fp[pred[i]] += 1;
    }
  }
  if (kept_positions == 0) {
    out.micro_undefined = true;
    return out;
  }
  std::size_t sum_tp = 0, sum_fp = 0, sum_fn = 0;
  double weighted_num = 0.0, weight_total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (excluded.count(static_cast<int>(c))) continue;
    sum_tp += tp[c];
    sum_fp += fp[c];
    sum_fn += fn[c];
    const double p = detail::safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fp[c]));
    const double r = detail::safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fn[c]));
    const double support = static_cast<double>(tp[c] + fn[c]);
    weighted_num += support * detail::f1_from(p, r);
    weight_total += support;
  }
  out.micro = detail::safe_div(2.0 * static_cast<double>(sum_tp),
                               2.0 * static_cast<double>(sum_tp) + static_cast<double>(sum_fp + sum_fn));
  out.weighted = detail::safe_div(weighted_num, weight_total);
  return out;
}

// Multi-class Matthews correlation coefficient (confusion-matrix form);
// 0 whenever a denominator factor vanishes.
inline double mcc(const std::vector<int>& pred, const std::vector<int>& gold, int num_classes) {
  if (pred.size() != gold.size()) throw std::invalid_argument("mcc: pred/gold length mismatch");
  const std::size_t k = static_cast<std::size_t>(num_classes);
  std::vector<double> t(k, 0.0), p(k, 0.0);
  double correct = 0.0;
  const double s = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= k || pred[i] < 0 ||
        static_cast<std::size_t>(pred[i]) >= k)
      throw std::out_of_range("mcc: label out of range");
    t[gold[i]] += 1.0;
    p[pred[i]] += 1.0;
    if (pred[i] == gold[i]) correct += 1.0;
  }
  double tp_dot = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    tp_dot += t[c] * p[c];
    pp += p[c] * p[c];
    tt += t[c] * t[c];
  }
  const double num = correct * s - tp_dot;
  const double den1 = s * s - pp;
  const double den2 = s * s - tt;
  if (den1 <= 0.0 || den2 <= 0.0) return 0.0;
  return num / std::sqrt(den1 * den2);
}

// ---- episode-level evaluation report -------------------------------------------

struct MetricsReport {
  std::string variant;
  std::size_t n_episodes = 0;
  std::vector<std::string> excluded_labels;
  std::vector<ClassStats> per_class;  // pooled over all episodes, no exclusion
  double f1_micro = 0.0;              // pooled, exclusion applied (headline)
  double f1_weighted = 0.0;
  double mcc_score = 0.0;  // all labels
  bool micro_undefined = false;
  std::vector<double> episode_scores;  // per-episode micro F1, exclusion applied
  double episode_mean = 0.0;
  double episode_std = 0.0;  // population standard deviation

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["variant"] = variant;
    j["n_episodes"] = n_episodes;
    j["excluded_labels"] = excluded_labels;
    j["f1_micro"] = f1_micro;
    j["f1_weighted"] = f1_weighted;
    j["mcc"] = mcc_score;
    j["micro_undefined"] = micro_undefined;
    j["episode_mean"] = episode_mean;
    j["episode_std"] = episode_std;
    j["episode_scores"] = episode_scores;
    nlohmann::json pc = nlohmann::json::array();
    for (const ClassStats& s : per_class)
      pc.push_back({{"label", s.label},
                    {"precision", s.precision},
                    {"recall", s.recall},
                    {"f1", s.f1},
                    {"support", s.support}});
    j["per_class"] = pc;
    return j;
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.variant = j.value("variant", std::string());
    r.n_episodes = j.value("n_episodes", std::size_t{0});
    r.excluded_labels = j.value("excluded_labels", std::vector<std::string>{});
    r.f1_micro = j.value("f1_micro", 0.0);
    r.f1_weighted = j.value("f1_weighted", 0.0);
    r.mcc_score = j.value("mcc", 0.0);
    r.micro_undefined = j.value("micro_undefined", false);
    r.episode_mean = j.value("episode_mean", 0.0);
    r.episode_std = j.value("episode_std", 0.0);
    r.episode_scores = j.value("episode_scores", std::vector<double>{});
    if (j.contains("per_class"))
      for (const nlohmann::json& pc : j["per_class"]) {
        ClassStats s;
        s.label = pc.value("label", std::string());
        s.precision = pc.value("precision", 0.0);
        s.recall = pc.value("recall", 0.0);
        s.f1 = pc.value("f1", 0.0);
        s.support = pc.value("support", std::size_t{0});
        r.per_class.push_back(s);
      }
    return r;
  }
};

// ---- correlation analysis -------------------------------------------------------

struct PearsonResult {
  double r = 0.0;
  bool zero_variance = false;
};

inline PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("pearson: need equal nonempty vectors");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

// Pearson r between the indicator "emotion present in any <speaker> message"
// and the indicator "conversation satisfaction == level", for every emotion
// and every level in [-3, 3]. Conversations without a satisfaction score are
// skipped; an empty speaker filter admits every message.
struct CorrelationTable {
  std::vector<std::string> emotions;
  std::vector<std::array<double, 7>> r;            // [emotion][level + 3]
  std::vector<std::array<bool, 7>> zero_variance;  // flags per cell
};

inline CorrelationTable emotion_satisfaction_correlation(const Corpus& corpus,
                                                         const std::string& speaker = "visitor") {
  std::vector<const Conversation*> convs;
  for (const Conversation& c : corpus.conversations)
    if (c.satisfaction) {
      if (*c.satisfaction < -3 || *c.satisfaction > 3)
        throw std::invalid_argument("correlation: satisfaction outside [-3, 3] in conversation " + c.id);
      convs.push_back(&c);
    }
  if (convs.empty()) throw std::invalid_argument("correlation: no conversations carry a satisfaction score");

  CorrelationTable table;
  table.emotions = corpus.label_set;
  table.r.assign(corpus.label_set.size(), {});
  table.zero_variance.assign(corpus.label_set.size(), {});

  for (std::size_t e = 0; e < corpus.label_set.size(); ++e) {
    std::vector<double> present(convs.size(), 0.0);
    for (std::size_t i = 0; i < convs.size(); ++i)
      for (const Message& m : convs[i]->messages)
        if ((speaker.empty() || m.speaker == speaker) && m.label == corpus.label_set[e]) {
          present[i] = 1.0;
          break;
        }
    for (int level = -3; level <= 3; ++level) {
      std::vector<double> target(convs.size(), 0.0);
      for (std::size_t i = 0; i < convs.size(); ++i) target[i] = *convs[i]->satisfaction == level ? 1.0 : 0.0;
      PearsonResult pr = pearson(present, target);
      table.r[e][level + 3] = pr.r;
      table.zero_variance[e][level + 3] = pr.zero_variance;
    }
  }
  return table;
}

}  // namespace protoseq

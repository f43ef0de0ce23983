#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseq/tape.hpp"

namespace protoseq {

// Linear-chain CRF parameters over the global label set, shared and updated
// across episodes. START/STOP boundary scores are stored as separate vectors
// so every stored value stays finite; the padded matrix view below renders
// the conventional (K+2)x(K+2) form with -inf on forbidden transitions.
struct CrfParams {
  int num_labels = 0;
  Parameter transitions;  // [K×K], entry (i, j) scores label i -> label j
  Parameter start;        // [K], START -> k
  Parameter stop;         // [K], k -> STOP
};

inline CrfParams init_crf(const std::string& prefix, int num_labels) {
  CrfParams p;
  p.num_labels = num_labels;
  const std::size_t k = static_cast<std::size_t>(num_labels);
  p.transitions = Parameter(prefix + ".transitions", Tensor::zeros({k, k}));
  p.start = Parameter(prefix + ".start", Tensor::zeros({k}));
  p.stop = Parameter(prefix + ".stop", Tensor::zeros({k}));
  return p;
}

// Logical (K+2)x(K+2) view with START = K and STOP = K+1. Transitions into
// START and out of STOP are -inf and never participate in any computation.
inline std::vector<double> padded_transition_matrix(const CrfParams& p) {
  const int k = p.num_labels;
  const int n = k + 2;
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> m(static_cast<std::size_t>(n) * n, ninf);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m[i * n + j] = p.transitions.value.at(i, j);
  for (int j = 0; j < k; ++j) m[k * n + j] = p.start.value.data[j];       // START -> j
  for (int i = 0; i < k; ++i) m[i * n + (k + 1)] = p.stop.value.data[i];  // i -> STOP
  return m;
}

struct CrfVars {
  Var transitions, start, stop;
};

inline CrfVars bind(Tape& t, CrfParams& p) {
  return CrfVars{t.leaf(p.transitions), t.leaf(p.start), t.leaf(p.stop)};
}

namespace detail {

inline void check_em_shape(const Tensor& em, const Tensor& start, const Tensor& trans, const Tensor& stop) {
  if (em.shape.size() != 2 || em.shape[0] == 0) throw std::invalid_argument("crf: emissions must be [L x K], L >= 1");
  const std::size_t k = em.shape[1];
  if (start.shape != Shape{k} || stop.shape != Shape{k} || trans.shape != Shape{k, k})
    throw std::invalid_argument("crf: parameter shapes do not match emission width " + std::to_string(k));
}

inline void check_gold(const std::vector<int>& gold, std::size_t len, std::size_t k) {
  if (gold.size() != len)
    throw std::invalid_argument("crf: gold length " + std::to_string(gold.size()) + " != sequence length " +
                                std::to_string(len));
  for (int g : gold)
    if (g < 0 || static_cast<std::size_t>(g) >= k)
      throw std::out_of_range("crf: gold label " + std::to_string(g) + " outside [0, " + std::to_string(k) + ")");
}

}  // namespace detail

// Forward-algorithm log partition over all label sequences. The backward pass
// re-uses the per-step softmax weights cached during the forward recursion.
inline Var crf_logz(Var em, Var start, Var trans, Var stop) {
  Tape& t = detail::op_tape({em, start, trans, stop});
  const Tensor& E = em.value();
  detail::check_em_shape(E, start.value(), trans.value(), stop.value());
  const std::size_t L = E.shape[0], K = E.shape[1];
  const Tensor& S = start.value();
  const Tensor& T = trans.value();
  const Tensor& P = stop.value();

  std::vector<double> alpha(K), next(K);
  std::vector<double> w(L > 1 ? (L - 1) * K * K : 0);
  for (std::size_t k = 0; k < K; ++k) alpha[k] = S.data[k] + E.data[k];
  for (std::size_t step = 1; step < L; ++step) {
    double* wstep = w.data() + (step - 1) * K * K;
    for (std::size_t k = 0; k < K; ++k) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < K; ++i) m = std::max(m, alpha[i] + T.data[i * K + k]);
      double s = 0.0;
      for (std::size_t i = 0; i < K; ++i) s += std::exp(alpha[i] + T.data[i * K + k] - m);
      const double lse = m + std::log(s);
      for (std::size_t i = 0; i < K; ++i) wstep[i * K + k] = std::exp(alpha[i] + T.data[i * K + k] - lse);
      next[k] = lse + E.data[step * K + k];
    }
    alpha.swap(next);
  }
  double mfin = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) mfin = std::max(mfin, alpha[k] + P.data[k]);
  double sfin = 0.0;
  for (std::size_t k = 0; k < K; ++k) sfin += std::exp(alpha[k] + P.data[k] - mfin);
  const double logz = mfin + std::log(sfin);
  if (!std::isfinite(logz)) throw std::runtime_error("crf_logz: produced a non-finite value");
  std::vector<double> wfin(K);
  for (std::size_t k = 0; k < K; ++k) wfin[k] = std::exp(alpha[k] + P.data[k] - logz);

  const bool req = detail::op_requires(t, {em, start, trans, stop});
  Var y = t.push(Tensor::scalar(logz), req);
  if (req) {
    const std::size_t ei = em.idx, si = start.idx, ti = trans.idx, pi = stop.idx, yi = y.idx;
    t.set_backprop(yi, [ei, si, ti, pi, yi, L, K, w = std::move(w), wfin = std::move(wfin)](Tape& tp) {
      const double go = tp.grad_buf(yi)[0];
      const bool we = tp.requires_grad(ei), ws = tp.requires_grad(si), wt = tp.requires_grad(ti),
                 wp = tp.requires_grad(pi);
      std::vector<double> ga(K), gprev(K);
      for (std::size_t k = 0; k < K; ++k) ga[k] = go * wfin[k];
      if (wp) {
        std::vector<double>& gp = tp.grad_buf(pi);
        for (std::size_t k = 0; k < K; ++k) gp[k] += go * wfin[k];
      }
      for (std::size_t step = L; step-- > 1;) {
        if (we) {
          std::vector<double>& ge = tp.grad_buf(ei);
          for (std::size_t k = 0; k < K; ++k) ge[step * K + k] += ga[k];
        }
        const double* wstep = w.data() + (step - 1) * K * K;
        std::fill(gprev.begin(), gprev.end(), 0.0);
        if (wt) {
          std::vector<double>& gt = tp.grad_buf(ti);
          for (std::size_t i = 0; i < K; ++i)
            for (std::size_t k = 0; k < K; ++k) {
              const double contrib = ga[k] * wstep[i * K + k];
              gt[i * K + k] += contrib;
              gprev[i] += contrib;
            }
        } else {
          for (std::size_t i = 0; i < K; ++i)
            for (std::size_t k = 0; k < K; ++k) gprev[i] += ga[k] * wstep[i * K + k];
        }
        ga.swap(gprev);
      }
      if (we) {
        std::vector<double>& ge = tp.grad_buf(ei);
        for (std::size_t k = 0; k < K; ++k) ge[k] += ga[k];
      }
      if (ws) {
        std::vector<double>& gs = tp.grad_buf(si);
        for (std::size_t k = 0; k < K; ++k) gs[k] += ga[k];
      }
    });
  }
  return y;
}

// Score of one label path: boundary scores plus emissions plus transitions.
inline Var crf_gold_score(Var em, Var start, Var trans, Var stop, const std::vector<int>& gold) {
  Tape& t = detail::op_tape({em, start, trans, stop});
  const Tensor& E = em.value();
  detail::check_em_shape(E, start.value(), trans.value(), stop.value());
  const std::size_t L = E.shape[0], K = E.shape[1];
  detail::check_gold(gold, L, K);

  double score = start.value().data[gold[0]] + stop.value().data[gold[L - 1]];
  for (std::size_t j = 0; j < L; ++j) score += E.data[j * K + gold[j]];
  const Tensor& T = trans.value();
  for (std::size_t j = 0; j + 1 < L; ++j) score += T.data[gold[j] * K + gold[j + 1]];
  if (!std::isfinite(score)) throw std::runtime_error("crf_gold_score: produced a non-finite value");

  const bool req = detail::op_requires(t, {em, start, trans, stop});
  Var y = t.push(Tensor::scalar(score), req);
  if (req) {
    const std::size_t ei = em.idx, si = start.idx, ti = trans.idx, pi = stop.idx, yi = y.idx;
    t.set_backprop(yi, [ei, si, ti, pi, yi, K, gold](Tape& tp) {
      const double go = tp.grad_buf(yi)[0];
      const std::size_t L = gold.size();
      if (tp.requires_grad(ei)) {
        std::vector<double>& ge = tp.grad_buf(ei);
        for (std::size_t j = 0; j < L; ++j) ge[j * K + gold[j]] += go;
      }
      if (tp.requires_grad(si)) tp.grad_buf(si)[gold[0]] += go;
      if (tp.requires_grad(pi)) tp.grad_buf(pi)[gold[L - 1]] += go;
      if (tp.requires_grad(ti)) {
        std::vector<double>& gt = tp.grad_buf(ti);
        for (std::size_t j = 0; j + 1 < L; ++j) gt[gold[j] * K + gold[j + 1]] += go;
      }
    });
  }
  return y;
}

// log p(gold | emissions) = score(gold) - logZ
inline Var crf_log_likelihood(Var em, const CrfVars& crf, const std::vector<int>& gold) {
  return sub(crf_gold_score(em, crf.start, crf.transitions, crf.stop, gold),
             crf_logz(em, crf.start, crf.transitions, crf.stop));
}

// Sum over rows of softmax cross-entropy against the gold labels (the no-CRF
// training objective).
inline Var ce_rows(Var em, const std::vector<int>& gold) {
  Tape& t = *em.tape;
  const Tensor& E = em.value();
  if (E.shape.size() != 2 || E.shape[0] == 0) throw std::invalid_argument("ce_rows: emissions must be [L x K]");
  const std::size_t L = E.shape[0], K = E.shape[1];
  detail::check_gold(gold, L, K);
  double total = 0.0;
  std::vector<double> lses(L);
  for (std::size_t j = 0; j < L; ++j) {
    lses[j] = detail::lse_span(&E.data[j * K], K, 1);
    total += lses[j] - E.data[j * K + gold[j]];
  }
  if (!std::isfinite(total)) throw std::runtime_error("ce_rows: produced a non-finite value");
  const bool req = detail::op_requires(t, {em});
  Var y = t.push(Tensor::scalar(total), req);
  if (req) {
    const std::size_t ei = em.idx, yi = y.idx;
    t.set_backprop(yi, [ei, yi, K, gold, lses = std::move(lses)](Tape& tp) {
      const double go = tp.grad_buf(yi)[0];
      const Tensor& E = tp.value(ei);
      std::vector<double>& ge = tp.grad_buf(ei);
      for (std::size_t j = 0; j < gold.size(); ++j) {
        for (std::size_t k = 0; k < K; ++k) ge[j * K + k] += go * std::exp(E.data[j * K + k] - lses[j]);
        ge[j * K + gold[j]] -= go;
      }
    });
  }
  return y;
}

// ---- decoding (plain values, no tape) -----------------------------------------

// Highest-scoring label sequence; ties break toward the lower label index.
inline std::vector<int> viterbi_decode(const Tensor& em, const Tensor& trans, const Tensor& start,
                                       const Tensor& stop) {
  detail::check_em_shape(em, start, trans, stop);
  const std::size_t L = em.shape[0], K = em.shape[1];
  std::vector<double> delta(K), next(K);
  std::vector<int> back((L > 1 ? L - 1 : 0) * K);
  for (std::size_t k = 0; k < K; ++k) delta[k] = start.data[k] + em.data[k];
  for (std::size_t step = 1; step < L; ++step) {
    for (std::size_t k = 0; k < K; ++k) {
      double best = delta[0] + trans.data[k];
      int best_i = 0;
      for (std::size_t i = 1; i < K; ++i) {
        const double s = delta[i] + trans.data[i * K + k];
        if (s > best) {
          best = s;
          best_i = static_cast<int>(i);
        }
      }
      next[k] = best + em.data[step * K + k];
      back[(step - 1) * K + k] = best_i;
    }
    delta.swap(next);
  }
  int last = 0;
  double best = delta[0] + stop.data[0];
  for (std::size_t k = 1; k < K; ++k) {
    const double s = delta[k] + stop.data[k];
    if (s > best) {
      best = s;
      last = static_cast<int>(k);
    }
  }
  std::vector<int> path(L);
  path[L - 1] = last;
  for (std::size_t step = L - 1; step-- > 0;) path[step] = back[step * K + path[step + 1]];
  return path;
}

inline std::vector<int> viterbi_decode(const Tensor& em, const CrfParams& p) {
  return viterbi_decode(em, p.transitions.value, p.start.value, p.stop.value);
}

// Per-position argmax of the emission rows (nearest prototype); ties break
// toward the lower label index.
inline std::vector<int> predict_nocrf(const Tensor& em) {
  if (em.shape.size() != 2) throw std::invalid_argument("predict_nocrf: emissions must be [L x K]");
  const std::size_t L = em.shape[0], K = em.shape[1];
  std::vector<int> path(L);
  for (std::size_t j = 0; j < L; ++j) {
    int arg = 0;
    double best = em.data[j * K];
    for (std::size_t k = 1; k < K; ++k)
      if (em.data[j * K + k] > best) {
        best = em.data[j * K + k];
        arg = static_cast<int>(k);
      }
    path[j] = arg;
  }
  return path;
}

// ---- prototypes ---------------------------------------------------------------

struct PrototypeSet {
  Tensor centroids;                // [K×d], one row per class in global label order
  std::vector<std::size_t> counts;  // contributing support utterances per class
};

// Per-class mean of support representations. Every class must contribute at
// least one vector (guaranteed by the episode invariants).
inline PrototypeSet compute_prototypes(const std::vector<std::pair<std::vector<double>, int>>& support_reprs,
                                       int num_classes) {
  if (support_reprs.empty()) throw std::invalid_argument("compute_prototypes: empty support set");
  const std::size_t d = support_reprs[0].first.size();
  const std::size_t k = static_cast<std::size_t>(num_classes);
  PrototypeSet out;
  out.centroids = Tensor::zeros({k, d});
  out.counts.assign(k, 0);
  for (const auto& [vec, label] : support_reprs) {
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw std::out_of_range("compute_prototypes: label out of range");
    if (vec.size() != d) throw std::invalid_argument("compute_prototypes: inconsistent dimensions");
    out.counts[label] += 1;
    for (std::size_t j = 0; j < d; ++j) out.centroids.at(label, j) += vec[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (out.counts[c] == 0)
      throw std::invalid_argument("compute_prototypes: class " + std::to_string(c) + " has no support utterances");
    for (std::size_t j = 0; j < d; ++j) out.centroids.at(c, j) /= static_cast<double>(out.counts[c]);
  }
  return out;
}

// In-tape prototype construction so gradients flow from the loss through the
// centroids into the support-set encoder stack. Returns the [K×d] centroid
// matrix plus per-class counts.
inline std::pair<Var, std::vector<std::size_t>> prototype_matrix([[maybe_unused]] Tape& t, const std::vector<Var>& support_reprs,
                                                                 const std::vector<int>& labels, int num_classes) {
  if (support_reprs.size() != labels.size())
    throw std::invalid_argument("prototype_matrix: reprs/labels size mismatch");
  const std::size_t k = static_cast<std::size_t>(num_classes);
  std::vector<std::vector<Var>> buckets(k);
  for (std::size_t i = 0; i < support_reprs.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw std::out_of_range("prototype_matrix: label out of range");
    buckets[label].push_back(support_reprs[i]);
  }
  std::vector<Var> centroids(k);
  std::vector<std::size_t> counts(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (buckets[c].empty())
      throw std::invalid_argument("prototype_matrix: class " + std::to_string(c) + " has no support utterances");
    counts[c] = buckets[c].size();
    centroids[c] = scale(add_n(buckets[c]), 1.0 / static_cast<double>(buckets[c].size()));
  }
  return {stack_rows(centroids), counts};
}

}  // namespace protoseq

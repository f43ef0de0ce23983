#include <gtest/gtest.h>

#include <cmath>

#include "protoseq/crf.hpp"
#include "protoseq/gradcheck.hpp"

using namespace protoseq;

namespace {

struct BruteForce {
  double logz = 0.0;
  double best_score = 0.0;
  std::vector<int> best_path;
};

// exhaustive enumeration over all K^L paths
BruteForce enumerate_paths(const Tensor& em, const Tensor& trans, const Tensor& start, const Tensor& stop) {
  const std::size_t L = em.shape[0], K = em.shape[1];
  std::vector<int> path(L, 0);
  std::vector<double> scores;
  BruteForce out;
  out.best_score = -1e300;
  while (true) {
    double s = start.data[path[0]] + stop.data[path[L - 1]];
    for (std::size_t j = 0; j < L; ++j) s += em.data[j * K + path[j]];
    for (std::size_t j = 0; j + 1 < L; ++j) s += trans.data[path[j] * K + path[j + 1]];
    scores.push_back(s);
    if (s > out.best_score) {
      out.best_score = s;
      out.best_path = path;
    }
    std::size_t pos = L;
    while (pos-- > 0) {
      if (++path[pos] < static_cast<int>(K)) break;
      path[pos] = 0;
      if (pos == 0) {
        double m = *std::max_element(scores.begin(), scores.end());
        double acc = 0.0;
        for (double v : scores) acc += std::exp(v - m);
        out.logz = m + std::log(acc);
        return out;
      }
    }
  }
}

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(s));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

CrfParams random_crf(int k, Rng& rng) {
  CrfParams p = init_crf("crf", k);
  for (double& v : p.transitions.value.data) v = rng.normal();
  for (double& v : p.start.value.data) v = rng.normal();
  for (double& v : p.stop.value.data) v = rng.normal();
  return p;
}

double crf_ll_value(const Tensor& em_t, CrfParams& crf, const std::vector<int>& gold) {
  Tape t(false);
  Var em = t.constant(em_t);
  CrfVars v = bind(t, crf);
  return crf_log_likelihood(em, v, gold).scalar();
}

}  // namespace

TEST(Prototypes, SingletonMean) {
  PrototypeSet ps = compute_prototypes({{{1.0, 2.0}, 0}, {{5.0, -1.0}, 1}}, 2);
  EXPECT_EQ(ps.centroids.at(0, 0), 1.0);
  EXPECT_EQ(ps.centroids.at(1, 1), -1.0);
  EXPECT_EQ(ps.counts, (std::vector<std::size_t>{1, 1}));
}

TEST(Prototypes, IdenticalVectorsIdempotent) {
  PrototypeSet ps = compute_prototypes({{{2.0, 3.0}, 0}, {{2.0, 3.0}, 0}}, 1);
  EXPECT_EQ(ps.centroids.at(0, 0), 2.0);
  EXPECT_EQ(ps.centroids.at(0, 1), 3.0);
  EXPECT_EQ(ps.counts[0], 2u);
}

TEST(Prototypes, ArithmeticMean) {
  PrototypeSet ps = compute_prototypes({{{0.0, 0.0}, 0}, {{2.0, 4.0}, 0}}, 1);
  EXPECT_EQ(ps.centroids.at(0, 0), 1.0);
  EXPECT_EQ(ps.centroids.at(0, 1), 2.0);
}

TEST(Prototypes, EmptyClassRejected) {
  EXPECT_THROW(compute_prototypes({{{1.0}, 0}}, 2), std::invalid_argument);
}

TEST(Prototypes, TapeVersionMatchesPlainVersion) {
  Rng rng(3);
  std::vector<std::pair<std::vector<double>, int>> reprs;
  std::vector<int> labels;
  std::vector<Tensor> tensors;
  for (int i = 0; i < 7; ++i) {
    Tensor v = random_tensor({4}, rng);
    int label = i % 3;
    reprs.push_back({v.data, label});
    labels.push_back(label);
    tensors.push_back(v);
  }
  PrototypeSet plain = compute_prototypes(reprs, 3);
  Tape t;
  std::vector<Var> vars;
  for (const Tensor& v : tensors) vars.push_back(t.constant(v));
  auto [matrix, counts] = prototype_matrix(t, vars, labels, 3);
  EXPECT_EQ(counts, plain.counts);
  for (std::size_t i = 0; i < plain.centroids.numel(); ++i)
    EXPECT_NEAR(matrix.value().data[i], plain.centroids.data[i], 1e-12);
}

TEST(Emissions, ZeroDistanceIsRowMaximum) {
  Tape t;
  Var r = t.constant(Tensor::matrix(1, 2, {3, 4}));
  Var c = t.constant(Tensor::matrix(2, 2, {3, 4, 0, 0}));
  Var em = neg_sqdist_matrix(r, c);
  EXPECT_DOUBLE_EQ(em.value().at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(em.value().at(0, 1), -25.0);
}

TEST(Emissions, RowArgmaxIsNearestCentroid) {
  Rng rng(5);
  Tensor R = random_tensor({6, 3}, rng);
  Tensor C = random_tensor({4, 3}, rng);
  Tape t;
  Var em = neg_sqdist_matrix(t.constant(R), t.constant(C));
  for (std::size_t j = 0; j < 6; ++j) {
    int nearest = 0;
    double best = 1e300;
    for (std::size_t k = 0; k < 4; ++k) {
      double d = 0;
      for (std::size_t i = 0; i < 3; ++i) d += (R.at(j, i) - C.at(k, i)) * (R.at(j, i) - C.at(k, i));
      if (d < best) {
        best = d;
        nearest = static_cast<int>(k);
      }
    }
    EXPECT_EQ(predict_nocrf(em.value())[j], nearest);
  }
}

TEST(CrfLogLikelihood, SingleClassIsCertain) {
  Rng rng(6);
  CrfParams crf = random_crf(1, rng);
  Tensor em = random_tensor({4, 1}, rng);
  EXPECT_NEAR(crf_ll_value(em, crf, {0, 0, 0, 0}), 0.0, 1e-12);
}

TEST(CrfLogLikelihood, UniformScoresGiveMinusLLogK) {
  for (int k = 2; k <= 4; ++k)
    for (int len = 1; len <= 5; ++len) {
      CrfParams crf = init_crf("crf", k);
      Tensor em = Tensor::zeros({static_cast<std::size_t>(len), static_cast<std::size_t>(k)});
      std::vector<int> gold(len, k - 1);
      EXPECT_NEAR(crf_ll_value(em, crf, gold), -len * std::log(static_cast<double>(k)), 1e-12);
    }
}

TEST(CrfLogLikelihood, GoldLabelOutOfRangeRejected) {
  CrfParams crf = init_crf("crf", 2);
  Tensor em = Tensor::zeros({2, 2});
  Tape t(false);
  Var emv = t.constant(em);
  CrfVars v = bind(t, crf);
  EXPECT_THROW(crf_log_likelihood(emv, v, {0, 2}), std::out_of_range);
  EXPECT_THROW(crf_log_likelihood(emv, v, {0}), std::invalid_argument);
}

TEST(CrfForward, MatchesBruteForceEnumeration) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_index(4));
    const int len = 1 + static_cast<int>(rng.uniform_index(6));
    CrfParams crf = random_crf(k, rng);
    Tensor em = Tensor::zeros({static_cast<std::size_t>(len), static_cast<std::size_t>(k)});
    for (double& v : em.data) v = rng.normal();

    BruteForce bf = enumerate_paths(em, crf.transitions.value, crf.start.value, crf.stop.value);
    Tape t(false);
    Var logz = crf_logz(t.constant(em), t.constant(crf.start.value), t.constant(crf.transitions.value),
                        t.constant(crf.stop.value));
    EXPECT_NEAR(logz.scalar(), bf.logz, 1e-8);
    EXPECT_EQ(viterbi_decode(em, crf), bf.best_path);
  }
}

TEST(CrfNormalization, PathProbabilitiesSumToOne) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_index(3));
    const int len = 1 + static_cast<int>(rng.uniform_index(5));
    CrfParams crf = random_crf(k, rng);
    Tensor em = Tensor::zeros({static_cast<std::size_t>(len), static_cast<std::size_t>(k)});
    for (double& v : em.data) v = rng.normal();

    std::vector<int> gold(len, 0);
    double total = 0.0;
    while (true) {
      total += std::exp(crf_ll_value(em, crf, gold));
      std::size_t pos = len;
      bool done = true;
      while (pos-- > 0) {
        if (++gold[pos] < k) {
          done = false;
          break;
        }
        gold[pos] = 0;
        if (pos == 0) break;
      }
      if (done) break;
    }
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(Viterbi, ZeroTransitionsReduceToRowArgmax) {
  Rng rng(9);
  CrfParams crf = init_crf("crf", 3);
  Tensor em = random_tensor({5, 3}, rng);
  EXPECT_EQ(viterbi_decode(em, crf), predict_nocrf(em));
}

TEST(Viterbi, SinglePositionBoundary) {
  CrfParams crf = init_crf("crf", 3);
  crf.start.value.data = {0.0, 1.0, 0.2};
  crf.stop.value.data = {0.5, 0.0, 0.1};
  Tensor em = Tensor::matrix(1, 3, {0.0, 0.0, 1.5});
  // scores: 0.5, 1.0, 1.8
  EXPECT_EQ(viterbi_decode(em, crf), (std::vector<int>{2}));
}

TEST(Viterbi, EmptySequenceRejected) {
  CrfParams crf = init_crf("crf", 2);
  Tensor em({0, 2}, {});
  EXPECT_THROW(viterbi_decode(em, crf), std::invalid_argument);
}

TEST(Viterbi, BeatsRandomPaths) {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const int k = 3, len = 8;
    CrfParams crf = random_crf(k, rng);
    Tensor em = Tensor::zeros({len, k});
    for (double& v : em.data) v = rng.normal();
    auto path_score = [&](const std::vector<int>& p) {
      double s = crf.start.value.data[p[0]] + crf.stop.value.data[p[len - 1]];
      for (int j = 0; j < len; ++j) s += em.at(j, p[j]);
      for (int j = 0; j + 1 < len; ++j) s += crf.transitions.value.at(p[j], p[j + 1]);
      return s;
    };
    const double best = path_score(viterbi_decode(em, crf));
    for (int r = 0; r < 1000; ++r) {
      std::vector<int> p(len);
      for (int& v : p) v = static_cast<int>(rng.uniform_index(k));
      EXPECT_GE(best, path_score(p));
    }
  }
}

TEST(Viterbi, LogZDominatesEveryPathScore) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(3));
    const int len = 1 + static_cast<int>(rng.uniform_index(5));
    CrfParams crf = random_crf(k, rng);
    Tensor em = Tensor::zeros({static_cast<std::size_t>(len), static_cast<std::size_t>(k)});
    for (double& v : em.data) v = rng.normal();
    BruteForce bf = enumerate_paths(em, crf.transitions.value, crf.start.value, crf.stop.value);
    EXPECT_GT(bf.logz, bf.best_score);  // strict: k >= 2 means several finite paths
  }
}

TEST(Viterbi, EmissionRowShiftInvariance) {
  Rng rng(12);
  const int k = 3, len = 6;
  CrfParams crf = random_crf(k, rng);
  Tensor em = Tensor::zeros({len, k});
  for (double& v : em.data) v = rng.normal();
  Tensor shifted = em;
  std::vector<double> row_consts(len);
  for (int j = 0; j < len; ++j) {
    row_consts[j] = rng.uniform(-5, 5);
    for (int c = 0; c < k; ++c) shifted.at(j, c) += row_consts[j];
  }
  EXPECT_EQ(viterbi_decode(em, crf), viterbi_decode(shifted, crf));

  std::vector<int> gold{0, 1, 2, 1, 0, 2};
  EXPECT_NEAR(crf_ll_value(em, crf, gold), crf_ll_value(shifted, crf, gold), 1e-9);
}

TEST(PredictNoCrf, ExactMatchAndTieRules) {
  Tensor em = Tensor::matrix(2, 3, {-1, 0, -2, /* row argmax 1 */ -5, -5, -7 /* tie -> 0 */});
  EXPECT_EQ(predict_nocrf(em), (std::vector<int>{1, 0}));
}

TEST(CrfGradients, MatchFiniteDifferences) {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(2));
    const int len = 1 + static_cast<int>(rng.uniform_index(4));
    Parameter em("em", random_tensor({static_cast<std::size_t>(len), static_cast<std::size_t>(k)}, rng));
    CrfParams crf = random_crf(k, rng);
    std::vector<int> gold(len);
    for (int& g : gold) g = static_cast<int>(rng.uniform_index(k));
    std::vector<Parameter*> ps{&em, &crf.transitions, &crf.start, &crf.stop};
    auto report = grad_check(
        [&](Tape& t) {
          Var emv = t.leaf(em);
          CrfVars v = bind(t, crf);
          return neg(crf_log_likelihood(emv, v, gold));
        },
        ps);
    EXPECT_LT(report.max_rel_err, 1e-4) << "len " << len << " k " << k << " worst " << report.worst.param;
  }
}

TEST(CrfGradients, CrossEntropyRowsMatchFiniteDifferences) {
  Rng rng(14);
  Parameter em("em", random_tensor({4, 3}, rng));
  std::vector<int> gold{2, 0, 1, 1};
  Parameter* ps[] = {&em};
  auto report = grad_check([&](Tape& t) { return ce_rows(t.leaf(em), gold); }, ps);
  EXPECT_LT(report.max_rel_err, 1e-5);
}

TEST(CrfParams, PaddedMatrixViewHasForbiddenEntries) {
  CrfParams crf = init_crf("crf", 2);
  crf.transitions.value.data = {1, 2, 3, 4};
  crf.start.value.data = {5, 6};
  crf.stop.value.data = {7, 8};
  std::vector<double> m = padded_transition_matrix(crf);
  const int n = 4;  // K + 2 with START = 2, STOP = 3
  EXPECT_EQ(m[0 * n + 1], 2.0);
  EXPECT_EQ(m[2 * n + 0], 5.0);
  EXPECT_EQ(m[1 * n + 3], 8.0);
  EXPECT_TRUE(std::isinf(m[0 * n + 2]) && m[0 * n + 2] < 0);  // into START
  EXPECT_TRUE(std::isinf(m[3 * n + 0]) && m[3 * n + 0] < 0);  // out of STOP
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_TRUE(std::isfinite(m[i * n + j]));
}

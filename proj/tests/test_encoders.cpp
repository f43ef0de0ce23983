#include <gtest/gtest.h>

#include <algorithm>

#include "protoseq/encoders.hpp"
#include "protoseq/gradcheck.hpp"

using namespace protoseq;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros({r, c});
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// independent sliding-window convolution oracle
std::vector<double> naive_cnn(const Tensor& embeds, const CnnParams& p) {
  const std::size_t d = static_cast<std::size_t>(p.input_dim);
  const std::size_t real_t = embeds.shape[0];
  const std::size_t padded_t = std::max(real_t, static_cast<std::size_t>(p.max_width()));
  std::vector<double> out;
  for (const CnnBank& bank : p.banks) {
    const std::size_t w = static_cast<std::size_t>(bank.width);
    for (int f = 0; f < p.filters; ++f) {
      double best = -1e300;
      for (std::size_t pos = 0; pos + w <= padded_t; ++pos) {
        double acc = bank.bias.value.data[f];
        for (std::size_t k = 0; k < w; ++k)
          for (std::size_t j = 0; j < d; ++j) {
            const double x = (pos + k < real_t) ? embeds.data[(pos + k) * d + j] : 0.0;
            acc += x * bank.weight.value.at(k * d + j, f);
          }
        best = std::max(best, std::max(acc, 0.0));
      }
      out.push_back(best);
    }
  }
  return out;
}

LstmParams zero_lstm(int input_dim, int hidden) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.w_in = Parameter("z.w_in", Tensor::zeros({(std::size_t)input_dim, (std::size_t)(4 * hidden)}));
  p.w_rec = Parameter("z.w_rec", Tensor::zeros({(std::size_t)hidden, (std::size_t)(4 * hidden)}));
  p.bias = Parameter("z.bias", Tensor::zeros({(std::size_t)(4 * hidden)}));
  return p;
}

}  // namespace

TEST(EncodeAvg, SingleTokenIsIdentity) {
  Tape t;
  Tensor x = Tensor::matrix(1, 3, {0.5, -1.0, 2.0});
  Var out = encode_avg(t, x, {false});
  EXPECT_EQ(out.value().data, (std::vector<double>{0.5, -1.0, 2.0}));
}

TEST(EncodeAvg, MeanOfTwoBasisVectors) {
  Tape t;
  Tensor x = Tensor::matrix(2, 4, {1, 0, 0, 0, 0, 1, 0, 0});
  Var out = encode_avg(t, x, {false, false});
  EXPECT_EQ(out.value().data, (std::vector<double>{0.5, 0.5, 0, 0}));
}

TEST(EncodeAvg, PaddingExcluded) {
  Tape t;
  Tensor x = Tensor::matrix(2, 2, {3, 4, 0, 0});
  Var out = encode_avg(t, x, {false, true});
  EXPECT_EQ(out.value().data, (std::vector<double>{3, 4}));
}

TEST(EncodeAvg, PermutationInvariantOverUnmasked) {
  Rng rng(3);
  Tensor x = random_matrix(5, 3, rng);
  Tensor perm = x;
  std::vector<std::size_t> order{4, 2, 0, 3, 1};
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) perm.at(i, j) = x.at(order[i], j);
  Tape t;
  Var a = encode_avg(t, x, std::vector<bool>(5, false));
  Var b = encode_avg(t, perm, std::vector<bool>(5, false));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.value().data[j], b.value().data[j], 1e-12);
}

TEST(EncodeAvg, AllMaskedRejected) {
  Tape t;
  Tensor x = Tensor::matrix(1, 2, {1, 2});
  EXPECT_THROW(encode_avg(t, x, {true}), std::invalid_argument);
}

TEST(EncodeCnn, ZeroInputZeroBiasGivesZeroVector) {
  Rng rng(5);
  CnnParams p = init_cnn("cnn", 4, 3, {3, 4, 5}, rng);  // biases init to zero
  Tape t;
  CnnVars v = bind(t, p);
  Var out = encode_cnn(t, Tensor::zeros({6, 4}), p, v);
  ASSERT_EQ(out.numel(), 9u);
  for (double x : out.value().data) EXPECT_DOUBLE_EQ(x, 0.0);
}

TEST(EncodeCnn, SingleTokenEqualsExplicitZeroPadding) {
  Rng rng(6);
  CnnParams p = init_cnn("cnn", 3, 2, {3, 4, 5}, rng);
  for (CnnBank& b : p.banks)
    for (double& x : b.bias.value.data) x = rng.uniform(-0.5, 0.5);
  Tensor one = random_matrix(1, 3, rng);
  Tensor padded = Tensor::zeros({5, 3});
  std::copy(one.data.begin(), one.data.end(), padded.data.begin());
  Tape t;
  CnnVars v = bind(t, p);
  Var a = encode_cnn(t, one, p, v);
  Var b = encode_cnn(t, padded, p, v);
  EXPECT_EQ(a.value().data, b.value().data);
}

TEST(EncodeCnn, MatchesNaiveConvolutionOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    CnnParams p = init_cnn("cnn", 5, 4, {3, 4, 5}, rng);
    for (CnnBank& b : p.banks)
      for (double& x : b.bias.value.data) x = rng.uniform(-0.3, 0.3);
    Tensor embeds = random_matrix(6, 5, rng);
    Tape t;
    CnnVars v = bind(t, p);
    Var out = encode_cnn(t, embeds, p, v);
    std::vector<double> expect = naive_cnn(embeds, p);
    ASSERT_EQ(out.numel(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(out.value().data[i], expect[i], 1e-12);
  }
}

TEST(EncodeCnn, TranslationCovariantUnderMaxPooling) {
  Rng rng(8);
  CnnParams p = init_cnn("cnn", 4, 3, {3, 4, 5}, rng);
  for (CnnBank& b : p.banks)
    for (double& x : b.bias.value.data) x = rng.uniform(-0.2, 0.2);
  Tensor pattern = random_matrix(2, 4, rng);
  auto place = [&](std::size_t offset) {
    Tensor x = Tensor::zeros({12, 4});
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 4; ++j) x.at(offset + i, j) = pattern.at(i, j);
    return x;
  };
  Tape t;
  CnnVars v = bind(t, p);
  Var a = encode_cnn(t, place(4), p, v);
  Var b = encode_cnn(t, place(5), p, v);
  EXPECT_EQ(a.value().data, b.value().data);  // pattern fits fully at both offsets
}

TEST(EncodeCnn, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  CnnParams p = init_cnn("cnn", 3, 2, {2, 3}, rng);
  for (CnnBank& b : p.banks)
    for (double& x : b.bias.value.data) x = rng.uniform(-0.2, 0.2);
  Tensor embeds = random_matrix(4, 3, rng);
  std::vector<Parameter*> ps;
  for (CnnBank& b : p.banks) {
    ps.push_back(&b.weight);
    ps.push_back(&b.bias);
  }
  auto report = grad_check(
      [&](Tape& t) {
        CnnVars v = bind(t, p);
        Var out = encode_cnn(t, embeds, p, v);
        return sum(mul(out, out));
      },
      ps);
  EXPECT_LT(report.max_rel_err, 1e-4);
}

TEST(BiLstmUtterance, ZeroParametersCollapseToZero) {
  BiLstmParams p{zero_lstm(3, 2), zero_lstm(3, 2)};
  Rng rng(10);
  Tensor x = random_matrix(4, 3, rng);
  Tape t;
  BiLstmVars v = bind(t, p);
  Var out = encode_utterance_bilstm(t, x, p, v);
  ASSERT_EQ(out.numel(), 4u);
  for (double e : out.value().data) EXPECT_DOUBLE_EQ(e, 0.0);
}

TEST(BiLstmUtterance, SingleTokenBothDirectionsSeeSameInput) {
  Rng rng(11);
  LstmParams shared = init_lstm("s", 3, 2, rng);
  BiLstmParams p;
  p.fwd = shared;
  p.bwd = shared;
  p.fwd.w_in.name = "f.w_in";
  p.bwd.w_in.name = "b.w_in";
  Tensor x = random_matrix(1, 3, rng);
  Tape t;
  BiLstmVars v = bind(t, p);
  Var out = encode_utterance_bilstm(t, x, p, v);
  ASSERT_EQ(out.numel(), 4u);
  EXPECT_EQ(out.value().data[0], out.value().data[2]);
  EXPECT_EQ(out.value().data[1], out.value().data[3]);
}

TEST(BiLstmUtterance, ReversalSwapsDirectionHalves) {
  Rng rng(12);
  LstmParams A = init_lstm("A", 3, 2, rng);
  LstmParams B = init_lstm("B", 3, 2, rng);
  Tensor x = random_matrix(4, 3, rng);
  Tensor rx = Tensor::zeros({4, 3});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) rx.at(i, j) = x.at(3 - i, j);

  BiLstmParams pab{A, B};
  BiLstmParams pba{B, A};
  Tape t;
  BiLstmVars vab = bind(t, pab);
  BiLstmVars vba = bind(t, pba);
  Var e1 = encode_utterance_bilstm(t, x, pab, vab);
  Var e2 = encode_utterance_bilstm(t, rx, pba, vba);
  // fwd-A over x == bwd-A over reversed x, and vice versa
  EXPECT_EQ(e1.value().data[0], e2.value().data[2]);
  EXPECT_EQ(e1.value().data[1], e2.value().data[3]);
  EXPECT_EQ(e1.value().data[2], e2.value().data[0]);
  EXPECT_EQ(e1.value().data[3], e2.value().data[1]);
}

TEST(EncodeContext, SinglePositionWorks) {
  Rng rng(13);
  BiLstmParams p = init_bilstm("ctx", 3, 2, rng);
  Tape t;
  BiLstmVars v = bind(t, p);
  std::vector<Var> inputs{t.constant(Tensor::vector({0.1, -0.2, 0.3}))};
  std::vector<Var> out = encode_context(t, inputs, p, v);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].numel(), 4u);
}

TEST(EncodeContext, OrderSensitiveUnlessInputsIdentical) {
  Rng rng(14);
  BiLstmParams p = init_bilstm("ctx", 3, 2, rng);
  Tape t;
  BiLstmVars v = bind(t, p);

  Var a = t.constant(Tensor::vector({0.5, 0.1, -0.4}));
  Var b = t.constant(Tensor::vector({-0.3, 0.8, 0.2}));
  std::vector<Var> ab = encode_context(t, std::vector<Var>{a, b}, p, v);
  std::vector<Var> ba = encode_context(t, std::vector<Var>{b, a}, p, v);
  bool differs = false;
  for (std::size_t j = 0; j < 4; ++j) differs = differs || ab[0].value().data[j] != ba[0].value().data[j];
  EXPECT_TRUE(differs);

  std::vector<Var> aa1 = encode_context(t, std::vector<Var>{a, a}, p, v);
  std::vector<Var> aa2 = encode_context(t, std::vector<Var>{a, a}, p, v);
  EXPECT_EQ(aa1[0].value().data, aa2[0].value().data);
  EXPECT_EQ(aa1[1].value().data, aa2[1].value().data);
}

TEST(EncodeContext, ZeroParametersGiveZeroOutputs) {
  BiLstmParams p{zero_lstm(2, 2), zero_lstm(2, 2)};
  Tape t;
  BiLstmVars v = bind(t, p);
  std::vector<Var> inputs{t.constant(Tensor::vector({1.0, 2.0})), t.constant(Tensor::vector({-1.0, 0.5}))};
  std::vector<Var> out = encode_context(t, inputs, p, v);
  for (const Var& o : out)
    for (double e : o.value().data) EXPECT_DOUBLE_EQ(e, 0.0);
}

TEST(EncodeContext, GradientsMatchFiniteDifferences) {
  Rng rng(15);
  BiLstmParams p = init_bilstm("ctx", 3, 2, rng);
  std::vector<Tensor> inputs;
  for (int i = 0; i < 3; ++i) inputs.push_back(random_matrix(1, 3, rng));
  std::vector<Parameter*> ps{&p.fwd.w_in, &p.fwd.w_rec, &p.fwd.bias, &p.bwd.w_in, &p.bwd.w_rec, &p.bwd.bias};
  auto report = grad_check(
      [&](Tape& t) {
        BiLstmVars v = bind(t, p);
        std::vector<Var> in;
        for (const Tensor& x : inputs) in.push_back(t.constant(Tensor::vector(x.data)));
        std::vector<Var> ctx = encode_context(t, in, p, v);
        Var total = sum(mul(ctx[0], ctx[0]));
        for (std::size_t j = 1; j < ctx.size(); ++j) total = add(total, sum(mul(ctx[j], ctx[j])));
        return total;
      },
      ps);
  EXPECT_LT(report.max_rel_err, 1e-4) << report.worst.param << "[" << report.worst.index << "]";
}

TEST(MlpProject, ZeroWeightsGiveZeroVector) {
  Rng rng(16);
  MlpParams p = init_mlp("mlp", 3, 4, 2, 0.2, rng);
  for (double& v : p.w1.value.data) v = 0.0;
  for (double& v : p.w2.value.data) v = 0.0;
  Tape t;
  MlpVars v = bind(t, p);
  Var out = mlp_project(t, t.constant(Tensor::vector({1, 2, 3})), p, v, false, rng);
  EXPECT_EQ(out.value().data, (std::vector<double>{0, 0}));
}

TEST(MlpProject, EvalModeDeterministicAcrossCalls) {
  Rng rng(17);
  MlpParams p = init_mlp("mlp", 3, 4, 2, 0.5, rng);
  Rng drop1(1), drop2(999);
  Tape t;
  MlpVars v = bind(t, p);
  Var in = t.constant(Tensor::vector({0.3, -0.2, 0.9}));
  Var a = mlp_project(t, in, p, v, false, drop1);
  Var b = mlp_project(t, in, p, v, false, drop2);
  EXPECT_EQ(a.value().data, b.value().data);
}

TEST(MlpProject, GradientsThroughBothLayers) {
  Rng rng(18);
  MlpParams p = init_mlp("mlp", 3, 4, 2, 0.2, rng);
  Rng drop(1);
  std::vector<Parameter*> ps{&p.w1, &p.b1, &p.w2, &p.b2};
  auto report = grad_check(
      [&](Tape& t) {
        MlpVars v = bind(t, p);
        Var out = mlp_project(t, t.constant(Tensor::vector({0.4, -0.6, 0.1})), p, v, false, drop);
        return sum(mul(out, out));
      },
      ps);
  EXPECT_LT(report.max_rel_err, 1e-4);
}

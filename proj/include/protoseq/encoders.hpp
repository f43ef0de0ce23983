#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseq/tape.hpp"

namespace protoseq {

inline Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

// ---- text CNN utterance encoder ---------------------------------------------

struct CnnBank {
  int width = 0;
  Parameter weight;  // [width*input_dim × filters]
  Parameter bias;    // [filters]
};

struct CnnParams {
  int input_dim = 0;
  int filters = 0;  // per width
  std::vector<CnnBank> banks;

  int output_dim() const { return filters * static_cast<int>(banks.size()); }
  int max_width() const {
    int w = 1;
    for (const CnnBank& b : banks) w = std::max(w, b.width);
    return w;
  }
};

inline CnnParams init_cnn(const std::string& prefix, int input_dim, int filters, const std::vector<int>& widths,
                          Rng& rng) {
  CnnParams p;
  p.input_dim = input_dim;
  p.filters = filters;
  for (int w : widths) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w * input_dim));
    CnnBank bank;
    bank.width = w;
    bank.weight = Parameter(prefix + ".w" + std::to_string(w),
                            uniform_tensor({static_cast<std::size_t>(w * input_dim), static_cast<std::size_t>(filters)},
                                           bound, rng));
    bank.bias = Parameter(prefix + ".b" + std::to_string(w), Tensor::zeros({static_cast<std::size_t>(filters)}));
    p.banks.push_back(std::move(bank));
  }
  return p;
}

struct CnnVars {
  std::vector<std::pair<Var, Var>> banks;  // (weight, bias)
};

inline CnnVars bind(Tape& t, CnnParams& p) {
  CnnVars v;
  for (CnnBank& b : p.banks) v.banks.emplace_back(t.leaf(b.weight), t.leaf(b.bias));
  return v;
}

// Valid 1-D convolution over token positions, bias, relu, max over positions,
// concatenated across filter widths. Utterances shorter than the widest
// window are zero-padded up to it.
inline Var encode_cnn(Tape& t, const Tensor& token_embeds, const CnnParams& p, const CnnVars& v) {
  if (token_embeds.shape.size() != 2 || token_embeds.shape[1] != static_cast<std::size_t>(p.input_dim))
    throw std::invalid_argument("encode_cnn: expected [T x " + std::to_string(p.input_dim) + "], got " +
                                shape_str(token_embeds.shape));
  const std::size_t real_t = token_embeds.shape[0];
  const std::size_t padded_t = std::max(real_t, static_cast<std::size_t>(p.max_width()));
  const std::size_t d = token_embeds.shape[1];

  std::vector<Var> pooled;
  for (std::size_t bi = 0; bi < p.banks.size(); ++bi) {
    const std::size_t w = static_cast<std::size_t>(p.banks[bi].width);
    const std::size_t positions = padded_t - w + 1;
    Tensor windows = Tensor::zeros({positions, w * d});
    for (std::size_t pos = 0; pos < positions; ++pos)
      for (std::size_t k = 0; k < w; ++k) {
        const std::size_t row = pos + k;
        if (row >= real_t) continue;  // zero padding
        std::copy(&token_embeds.data[row * d], &token_embeds.data[(row + 1) * d], &windows.data[pos * (w * d) + k * d]);
      }
    Var scores = add(matmul(t.constant(std::move(windows)), v.banks[bi].first), v.banks[bi].second);
    pooled.push_back(max_rows(relu(scores)));
  }
  return concat(pooled);
}

// ---- averaging utterance encoder ---------------------------------------------

// Mean of unmasked token embeddings. Embeddings are frozen inputs, so the
// result is a constant node.
inline Var encode_avg(Tape& t, const Tensor& token_embeds, const std::vector<bool>& mask) {
  if (token_embeds.shape.size() != 2) throw std::invalid_argument("encode_avg: expects [T x d]");
  const std::size_t T = token_embeds.shape[0], d = token_embeds.shape[1];
  if (mask.size() != T) throw std::invalid_argument("encode_avg: mask length mismatch");
  Tensor out = Tensor::zeros({d});
  std::size_t n = 0;
  for (std::size_t i = 0; i < T; ++i) {
    if (mask[i]) continue;
    ++n;
    for (std::size_t j = 0; j < d; ++j) out.data[j] += token_embeds.data[i * d + j];
  }
  if (n == 0) throw std::invalid_argument("encode_avg: all tokens masked");
  for (double& v : out.data) v /= static_cast<double>(n);
  return t.constant(std::move(out));
}

// ---- LSTM --------------------------------------------------------------------

struct LstmParams {
  int input_dim = 0;
  int hidden = 0;
  Parameter w_in;   // [input_dim × 4H], gate order i, f, g, o
  Parameter w_rec;  // [H × 4H]
  Parameter bias;   // [4H]
};

// uniform(-1/sqrt(H), 1/sqrt(H)) with forget-gate bias raised by 1
inline LstmParams init_lstm(const std::string& prefix, int input_dim, int hidden, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.w_in = Parameter(prefix + ".w_in",
                     uniform_tensor({static_cast<std::size_t>(input_dim), static_cast<std::size_t>(4 * hidden)}, bound, rng));
  p.w_rec = Parameter(prefix + ".w_rec",
                      uniform_tensor({static_cast<std::size_t>(hidden), static_cast<std::size_t>(4 * hidden)}, bound, rng));
  p.bias = Parameter(prefix + ".bias", uniform_tensor({static_cast<std::size_t>(4 * hidden)}, bound, rng));
  for (int i = hidden; i < 2 * hidden; ++i) p.bias.value.data[i] += 1.0;
  return p;
}

struct BiLstmParams {
  LstmParams fwd;
  LstmParams bwd;
  int output_dim() const { return fwd.hidden + bwd.hidden; }
};

inline BiLstmParams init_bilstm(const std::string& prefix, int input_dim, int hidden, Rng& rng) {
  return BiLstmParams{init_lstm(prefix + ".fwd", input_dim, hidden, rng),
                      init_lstm(prefix + ".bwd", input_dim, hidden, rng)};
}

struct LstmVars {
  Var w_in, w_rec, bias;
};

struct BiLstmVars {
  LstmVars fwd, bwd;
};

inline LstmVars bind(Tape& t, LstmParams& p) { return LstmVars{t.leaf(p.w_in), t.leaf(p.w_rec), t.leaf(p.bias)}; }
inline BiLstmVars bind(Tape& t, BiLstmParams& p) { return BiLstmVars{bind(t, p.fwd), bind(t, p.bwd)}; }

// Runs the cell over `inputs` (front to back, or back to front when reverse);
// returns the hidden state at every position.
inline std::vector<Var> run_lstm(Tape& t, std::span<const Var> inputs, const LstmParams& p, const LstmVars& v,
                                 bool reverse) {
  const std::size_t H = static_cast<std::size_t>(p.hidden);
  const std::size_t L = inputs.size();
  std::vector<Var> states(L);
  Var h = t.constant(Tensor::zeros({H}));
  Var c = t.constant(Tensor::zeros({H}));
  for (std::size_t step = 0; step < L; ++step) {
    const std::size_t pos = reverse ? L - 1 - step : step;
    Var z = add_n({vecmat(inputs[pos], v.w_in), vecmat(h, v.w_rec), v.bias});
    Var gi = sigmoid(slice(z, 0, H));
    Var gf = sigmoid(slice(z, H, H));
    Var gg = tanh_op(slice(z, 2 * H, H));
    Var go = sigmoid(slice(z, 3 * H, H));
    c = add(mul(gf, c), mul(gi, gg));
    h = mul(go, tanh_op(c));
    states[pos] = h;
  }
  return states;
}

// Contextual representation v_j for every position: forward state (past
// context) concatenated with backward state (future context).
inline std::vector<Var> encode_context(Tape& t, std::span<const Var> utt_vecs, const BiLstmParams& p,
                                       const BiLstmVars& v) {
  if (utt_vecs.empty()) throw std::invalid_argument("encode_context: empty conversation");
  std::vector<Var> fwd = run_lstm(t, utt_vecs, p.fwd, v.fwd, false);
  std::vector<Var> bwd = run_lstm(t, utt_vecs, p.bwd, v.bwd, true);
  std::vector<Var> out(utt_vecs.size());
  for (std::size_t j = 0; j < utt_vecs.size(); ++j) out[j] = concat({fwd[j], bwd[j]});
  return out;
}

// Token-level BiLSTM utterance encoder: forward last state ++ backward state
// at the first position.
inline Var encode_utterance_bilstm(Tape& t, const Tensor& token_embeds, const BiLstmParams& p, const BiLstmVars& v) {
  if (token_embeds.shape.size() != 2 || token_embeds.shape[0] == 0)
    throw std::invalid_argument("encode_utterance_bilstm: expects a nonempty [T x d] matrix");
  const std::size_t T = token_embeds.shape[0], d = token_embeds.shape[1];
  std::vector<Var> rows(T);
  for (std::size_t i = 0; i < T; ++i)
    rows[i] = t.constant(Tensor({d}, std::vector<double>(&token_embeds.data[i * d], &token_embeds.data[(i + 1) * d])));
  std::vector<Var> fwd = run_lstm(t, rows, p.fwd, v.fwd, false);
  std::vector<Var> bwd = run_lstm(t, rows, p.bwd, v.bwd, true);
  return concat({fwd.back(), bwd.front()});
}

// ---- MLP projection head -------------------------------------------------------

struct MlpParams {
  int input_dim = 0;
  int hidden = 0;
  int output_dim = 0;
  double dropout_p = 0.2;
  Parameter w1, b1, w2, b2;
};

inline MlpParams init_mlp(const std::string& prefix, int input_dim, int hidden, int output_dim, double dropout_p,
                          Rng& rng) {
  MlpParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.output_dim = output_dim;
  p.dropout_p = dropout_p;
  p.w1 = Parameter(prefix + ".w1",
                   uniform_tensor({static_cast<std::size_t>(input_dim), static_cast<std::size_t>(hidden)},
                                  1.0 / std::sqrt(static_cast<double>(input_dim)), rng));
  p.b1 = Parameter(prefix + ".b1", Tensor::zeros({static_cast<std::size_t>(hidden)}));
  p.w2 = Parameter(prefix + ".w2",
                   uniform_tensor({static_cast<std::size_t>(hidden), static_cast<std::size_t>(output_dim)},
                                  1.0 / std::sqrt(static_cast<double>(hidden)), rng));
  p.b2 = Parameter(prefix + ".b2", Tensor::zeros({static_cast<std::size_t>(output_dim)}));
  return p;
}

struct MlpVars {
  Var w1, b1, w2, b2;
};

inline MlpVars bind(Tape& t, MlpParams& p) {
  return MlpVars{t.leaf(p.w1), t.leaf(p.b1), t.leaf(p.w2), t.leaf(p.b2)};
}

// affine -> relu -> dropout -> affine
inline Var mlp_project([[maybe_unused]] Tape& t, Var x, const MlpParams& p, const MlpVars& v, bool training, Rng& rng) {
  Var h = dropout(relu(add(vecmat(x, v.w1), v.b1)), p.dropout_p, training, rng);
  return add(vecmat(h, v.w2), v.b2);
}

}  // namespace protoseq

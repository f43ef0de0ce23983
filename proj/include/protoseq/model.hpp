#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseq/corpus.hpp"
#include "protoseq/crf.hpp"
#include "protoseq/embeddings.hpp"
#include "protoseq/encoders.hpp"
#include "protoseq/episodes.hpp"

namespace protoseq {

enum class Variant { proto, warmproto_crf, protoseq, protoseq_cnn, protoseq_avg, protoseq_nocrf };

inline const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"proto",        "warmproto-crf", "protoseq",
                                              "protoseq-cnn", "protoseq-avg",  "protoseq-nocrf"};
  return names;
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::proto: return "proto";
    case Variant::warmproto_crf: return "warmproto-crf";
    case Variant::protoseq: return "protoseq";
    case Variant::protoseq_cnn: return "protoseq-cnn";
    case Variant::protoseq_avg: return "protoseq-avg";
    case Variant::protoseq_nocrf: return "protoseq-nocrf";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& name) {
  if (name == "proto") return Variant::proto;
  if (name == "warmproto-crf") return Variant::warmproto_crf;
  if (name == "protoseq") return Variant::protoseq;
  if (name == "protoseq-cnn") return Variant::protoseq_cnn;
  if (name == "protoseq-avg") return Variant::protoseq_avg;
  if (name == "protoseq-nocrf") return Variant::protoseq_nocrf;
  std::string valid;
  for (const std::string& n : variant_names()) valid += (valid.empty() ? "" : ", ") + n;
  if (name == "protoseq-tr")
    throw std::invalid_argument("variant \"protoseq-tr\" is reserved but not available; valid variants: " + valid);
  throw std::invalid_argument("unknown variant \"" + name + "\"; valid variants: " + valid);
}

// Variant selector plus every architecture hyperparameter. Defaults follow
// the reference configuration (300-d embeddings, 3x50 CNN filters, 150-unit
// BiLSTM per direction, 128-d prototype space); tests shrink them freely.
struct ModelConfig {
  Variant variant = Variant::protoseq;
  int embed_dim = 300;
  int cnn_filters = 50;
  std::vector<int> cnn_widths = {3, 4, 5};
  int lstm_hidden = 150;
  int mlp_hidden = 128;
  int proto_dim = 128;
  double dropout = 0.2;

  bool uses_cnn() const {
    return variant == Variant::protoseq || variant == Variant::protoseq_cnn || variant == Variant::protoseq_nocrf;
  }
  bool uses_avg() const { return variant == Variant::proto || variant == Variant::protoseq_avg; }
  bool uses_utterance_bilstm() const { return variant == Variant::warmproto_crf; }
  bool has_context_encoder() const {
    return variant == Variant::protoseq || variant == Variant::protoseq_avg || variant == Variant::protoseq_nocrf;
  }
  bool has_mlp() const {
    return variant == Variant::protoseq || variant == Variant::protoseq_cnn || variant == Variant::protoseq_avg ||
           variant == Variant::protoseq_nocrf;
  }
  bool has_crf() const { return variant != Variant::proto && variant != Variant::protoseq_nocrf; }

  int utterance_dim() const {
    if (uses_cnn()) return cnn_filters * static_cast<int>(cnn_widths.size());
    if (uses_utterance_bilstm()) return 2 * lstm_hidden;
    return embed_dim;  // averaging encoder
  }
  // The context encoder's input width follows the selected utterance encoder.
  int context_input_dim() const { return utterance_dim(); }
  int mlp_input_dim() const { return has_context_encoder() ? 2 * lstm_hidden : utterance_dim(); }
  // Dimension of the space prototypes live in.
  int repr_dim() const {
    if (has_mlp()) return proto_dim;
    if (has_context_encoder()) return 2 * lstm_hidden;
    return utterance_dim();
  }
};

// Per-query-conversation decode of one episode.
struct DecodedConversation {
  std::size_t conv_index = 0;
  std::vector<int> gold;
  std::vector<int> pred;
};

// The full few-shot tagger: utterance encoder -> optional context encoder ->
// optional MLP projection -> prototypes -> distance emissions -> CRF or
// nearest-prototype prediction. Prototypes are rebuilt from each episode's
// support set on the episode's own tape, so gradients flow through them.
class Model {
 public:
  Model(ModelConfig cfg, int num_labels, std::uint64_t seed) : cfg_(cfg), num_labels_(num_labels) {
    Rng rng(substream_seed(seed, "init"));
    if (num_labels < 1) throw std::invalid_argument("model: need at least one label");
    if (cfg_.uses_cnn()) cnn_ = init_cnn("cnn", cfg_.embed_dim, cfg_.cnn_filters, cfg_.cnn_widths, rng);
    if (cfg_.uses_utterance_bilstm()) utt_lstm_ = init_bilstm("utt", cfg_.embed_dim, cfg_.lstm_hidden, rng);
    if (cfg_.has_context_encoder()) ctx_ = init_bilstm("ctx", cfg_.context_input_dim(), cfg_.lstm_hidden, rng);
    if (cfg_.has_mlp()) mlp_ = init_mlp("mlp", cfg_.mlp_input_dim(), cfg_.mlp_hidden, cfg_.proto_dim, cfg_.dropout, rng);
    if (cfg_.has_crf()) crf_ = init_crf("crf", num_labels);
  }

  const ModelConfig& config() const { return cfg_; }
  int num_labels() const { return num_labels_; }
  bool training() const { return training_; }
  void set_training(bool on) { training_ = on; }

  // every trainable tensor, registered exactly once
  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps;
    if (cnn_)
      for (CnnBank& b : cnn_->banks) {
        ps.push_back(&b.weight);
        ps.push_back(&b.bias);
      }
    if (utt_lstm_) append_lstm(ps, *utt_lstm_);
    if (ctx_) append_lstm(ps, *ctx_);
    if (mlp_) {
      ps.push_back(&mlp_->w1);
      ps.push_back(&mlp_->b1);
      ps.push_back(&mlp_->w2);
      ps.push_back(&mlp_->b2);
    }
    if (crf_) {
      ps.push_back(&crf_->transitions);
      ps.push_back(&crf_->start);
      ps.push_back(&crf_->stop);
    }
    return ps;
  }

  CrfParams* crf() { return crf_ ? &*crf_ : nullptr; }

  // Mean over the episode's query conversations of the sequence NLL (CRF
  // variants) or the summed per-utterance cross-entropy (no-CRF variants).
  Var episode_loss(Tape& tape, const Episode& ep, const Vocab& vocab, const EmbeddingMatrix& emb, Rng& dropout_rng) {
    Bound bound = bind_all(tape);
    Var protos = support_prototypes(tape, ep, vocab, emb, bound, dropout_rng);

    std::vector<Var> losses;
    for (std::size_t k = 0; k < ep.query.size(); ++k) {
      for (std::size_t ci : ep.query[k]) {
        const PaddedConversation view = pad_or_trim(ep.corpus->conversations[ci], ep.max_len);
        std::vector<Var> reprs = conversation_reprs(tape, view, vocab, emb, bound, dropout_rng);
        Var em = neg_sqdist_matrix(stack_rows(reprs), protos);
        std::vector<int> gold = gold_labels(view, *ep.corpus);
        if (cfg_.has_crf())
          losses.push_back(neg(crf_log_likelihood(em, *bound.crf, gold)));
        else
          losses.push_back(ce_rows(em, gold));
      }
    }
    if (losses.empty()) throw std::invalid_argument("episode_loss: episode has no query conversations");
    return scale(add_n(losses), 1.0 / static_cast<double>(losses.size()));
  }

  // Grad-free forward pass decoding every query conversation of the episode.
  std::vector<DecodedConversation> decode_episode(const Episode& ep, const Vocab& vocab, const EmbeddingMatrix& emb) {
    Tape tape(false);
    Rng no_dropout(0);  // eval mode: dropout is identity
    Bound bound = bind_all(tape);
    Var protos = support_prototypes(tape, ep, vocab, emb, bound, no_dropout);

    std::vector<DecodedConversation> out;
    for (std::size_t k = 0; k < ep.query.size(); ++k) {
      for (std::size_t ci : ep.query[k]) {
        const PaddedConversation view = pad_or_trim(ep.corpus->conversations[ci], ep.max_len);
        std::vector<Var> reprs = conversation_reprs(tape, view, vocab, emb, bound, no_dropout);
        Var em = neg_sqdist_matrix(stack_rows(reprs), protos);
        DecodedConversation dc;
        dc.conv_index = ci;
        dc.gold = gold_labels(view, *ep.corpus);
        if (cfg_.has_crf())
          dc.pred = viterbi_decode(em.value(), *crf_);
        else
          dc.pred = predict_nocrf(em.value());
        out.push_back(std::move(dc));
      }
    }
    return out;
  }

  // Prototype-space representations of one conversation, eval mode. Used by
  // diagnostics; training goes through episode_loss.
  std::vector<std::vector<double>> representations(const PaddedConversation& view, const Vocab& vocab,
                                                   const EmbeddingMatrix& emb) {
    Tape tape(false);
    Rng no_dropout(0);
    Bound bound = bind_all(tape);
    std::vector<Var> reprs = conversation_reprs(tape, view, vocab, emb, bound, no_dropout);
    std::vector<std::vector<double>> out;
    for (const Var& r : reprs) out.push_back(r.value().data);
    return out;
  }

 private:
  struct Bound {
    std::optional<CnnVars> cnn;
    std::optional<BiLstmVars> utt;
    std::optional<BiLstmVars> ctx;
    std::optional<MlpVars> mlp;
    std::optional<CrfVars> crf;
  };

  static void append_lstm(std::vector<Parameter*>& ps, BiLstmParams& p) {
    ps.push_back(&p.fwd.w_in);
    ps.push_back(&p.fwd.w_rec);
    ps.push_back(&p.fwd.bias);
    ps.push_back(&p.bwd.w_in);
    ps.push_back(&p.bwd.w_rec);
    ps.push_back(&p.bwd.bias);
  }

  Bound bind_all(Tape& tape) {
    Bound b;
    if (cnn_) b.cnn = bind(tape, *cnn_);
    if (utt_lstm_) b.utt = bind(tape, *utt_lstm_);
    if (ctx_) b.ctx = bind(tape, *ctx_);
    if (mlp_) b.mlp = bind(tape, *mlp_);
    if (crf_) b.crf = bind(tape, *crf_);
    return b;
  }

  Tensor token_matrix(const Message& msg, const Vocab& vocab, const EmbeddingMatrix& emb) const {
    if (emb.dim != static_cast<std::size_t>(cfg_.embed_dim))
      throw std::invalid_argument("model: embedding dim " + std::to_string(emb.dim) +
                                  " does not match configured dim " + std::to_string(cfg_.embed_dim));
    const std::size_t T = msg.tokens.size();
    Tensor m = Tensor::zeros({T, emb.dim});
    for (std::size_t i = 0; i < T; ++i) {
      const double* row = emb.row(vocab.lookup(msg.tokens[i]));
      std::copy(row, row + emb.dim, &m.data[i * emb.dim]);
    }
    return m;
  }

  Var encode_utterance(Tape& tape, const Message& msg, const Vocab& vocab, const EmbeddingMatrix& emb,
                       const Bound& bound) const {
    Tensor tokens = token_matrix(msg, vocab, emb);
    if (cfg_.uses_cnn()) return encode_cnn(tape, tokens, *cnn_, *bound.cnn);
    if (cfg_.uses_utterance_bilstm()) return encode_utterance_bilstm(tape, tokens, *utt_lstm_, *bound.utt);
    return encode_avg(tape, tokens, std::vector<bool>(tokens.shape[0], false));
  }

  std::vector<Var> conversation_reprs(Tape& tape, const PaddedConversation& view, const Vocab& vocab,
                                      const EmbeddingMatrix& emb, const Bound& bound, Rng& dropout_rng) const {
    std::vector<Var> utts;
    utts.reserve(view.real_len);
    for (std::size_t j = 0; j < view.real_len; ++j)
      utts.push_back(encode_utterance(tape, view.message(j), vocab, emb, bound));
    if (cfg_.has_context_encoder()) utts = encode_context(tape, utts, *ctx_, *bound.ctx);
    if (cfg_.has_mlp())
      for (Var& u : utts) u = mlp_project(tape, u, *mlp_, *bound.mlp, training_, dropout_rng);
    return utts;
  }

  static std::vector<int> gold_labels(const PaddedConversation& view, const Corpus& corpus) {
    std::vector<int> gold(view.real_len);
    for (std::size_t j = 0; j < view.real_len; ++j) gold[j] = corpus.label_id(view.message(j).label);
    return gold;
  }

  Var support_prototypes(Tape& tape, const Episode& ep, const Vocab& vocab, const EmbeddingMatrix& emb, Bound& bound,
                         Rng& dropout_rng) {
    std::vector<Var> reprs;
    std::vector<int> labels;
    for (std::size_t k = 0; k < ep.support.size(); ++k) {
      for (std::size_t ci : ep.support[k]) {
        const PaddedConversation view = pad_or_trim(ep.corpus->conversations[ci], ep.max_len);
        std::vector<Var> conv_reprs = conversation_reprs(tape, view, vocab, emb, bound, dropout_rng);
        for (std::size_t j = 0; j < conv_reprs.size(); ++j) {
          reprs.push_back(conv_reprs[j]);
          labels.push_back(ep.corpus->label_id(view.message(j).label));
        }
      }
    }
    auto [matrix, counts] = prototype_matrix(tape, reprs, labels, num_labels_);
    return matrix;
  }

  ModelConfig cfg_;
  int num_labels_ = 0;
  bool training_ = false;
  std::optional<CnnParams> cnn_;
  std::optional<BiLstmParams> utt_lstm_;
  std::optional<BiLstmParams> ctx_;
  std::optional<MlpParams> mlp_;
  std::optional<CrfParams> crf_;
};

}  // namespace protoseq

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tagrec/corpus.hpp"
#include "tagrec/features.hpp"
#include "tagrec/rng.hpp"

namespace tagrec {

struct EncoderConfig {
  int s_max = 10;
  int w_max = 50;
  int embed_dim = 100;   // E
  int hidden_dim = 50;   // H; document embedding dimension is 2H
  int attn_dim = 100;    // A
  int n_tags = 300;      // T
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 0;

  bool operator==(const EncoderConfig&) const = default;
};

// One GRU cell, update rule h = (1-z) . h_prev + z . h~
struct GruCellParams {
  Eigen::MatrixXd w_z, w_r, w_h;  // hidden x input
  Eigen::MatrixXd u_z, u_r, u_h;  // hidden x hidden
  Eigen::VectorXd b_z, b_r, b_h;

  int hidden_dim() const { return static_cast<int>(w_z.rows()); }
  int input_dim() const { return static_cast<int>(w_z.cols()); }
};

struct AttentionParams {
  Eigen::MatrixXd w;  // attn x state
  Eigen::VectorXd b;  // attn
  Eigen::VectorXd u;  // attn
};

struct EncoderParams {
  Eigen::MatrixXd word_embeddings;   // V x E
  GruCellParams word_fwd, word_bwd;  // E -> H
  AttentionParams word_attn;         // 2H -> A
  GruCellParams sent_fwd, sent_bwd;  // 2H -> H
  AttentionParams sent_attn;
  Eigen::MatrixXd w_out;  // T x 2H
  Eigen::VectorXd b_out;  // T
};

// Calls f once per parameter block, with the matching block of every
// passed params struct. Block order is fixed; serialization, the
// optimizer and the gradient checks all rely on it.
template <typename F, typename... P>
void visit_encoder_blocks(F&& f, P&... p) {
  f("word_embeddings", p.word_embeddings...);
  f("word_fwd.w_z", p.word_fwd.w_z...);
  f("word_fwd.w_r", p.word_fwd.w_r...);
  f("word_fwd.w_h", p.word_fwd.w_h...);
  f("word_fwd.u_z", p.word_fwd.u_z...);
  f("word_fwd.u_r", p.word_fwd.u_r...);
  f("word_fwd.u_h", p.word_fwd.u_h...);
  f("word_fwd.b_z", p.word_fwd.b_z...);
  f("word_fwd.b_r", p.word_fwd.b_r...);
  f("word_fwd.b_h", p.word_fwd.b_h...);
  f("word_bwd.w_z", p.word_bwd.w_z...);
  f("word_bwd.w_r", p.word_bwd.w_r...);
  f("word_bwd.w_h", p.word_bwd.w_h...);
  f("word_bwd.u_z", p.word_bwd.u_z...);
  f("word_bwd.u_r", p.word_bwd.u_r...);
  f("word_bwd.u_h", p.word_bwd.u_h...);
  f("word_bwd.b_z", p.word_bwd.b_z...);
  f("word_bwd.b_r", p.word_bwd.b_r...);
  f("word_bwd.b_h", p.word_bwd.b_h...);
  f("word_attn.w", p.word_attn.w...);
  f("word_attn.b", p.word_attn.b...);
  f("word_attn.u", p.word_attn.u...);
  f("sent_fwd.w_z", p.sent_fwd.w_z...);
  f("sent_fwd.w_r", p.sent_fwd.w_r...);
  f("sent_fwd.w_h", p.sent_fwd.w_h...);
  f("sent_fwd.u_z", p.sent_fwd.u_z...);
  f("sent_fwd.u_r", p.sent_fwd.u_r...);
  f("sent_fwd.u_h", p.sent_fwd.u_h...);
  f("sent_fwd.b_z", p.sent_fwd.b_z...);
  f("sent_fwd.b_r", p.sent_fwd.b_r...);
  f("sent_fwd.b_h", p.sent_fwd.b_h...);
  f("sent_bwd.w_z", p.sent_bwd.w_z...);
  f("sent_bwd.w_r", p.sent_bwd.w_r...);
  f("sent_bwd.w_h", p.sent_bwd.w_h...);
  f("sent_bwd.u_z", p.sent_bwd.u_z...);
  f("sent_bwd.u_r", p.sent_bwd.u_r...);
  f("sent_bwd.u_h", p.sent_bwd.u_h...);
  f("sent_bwd.b_z", p.sent_bwd.b_z...);
  f("sent_bwd.b_r", p.sent_bwd.b_r...);
  f("sent_bwd.b_h", p.sent_bwd.b_h...);
  f("sent_attn.w", p.sent_attn.w...);
  f("sent_attn.b", p.sent_attn.b...);
  f("sent_attn.u", p.sent_attn.u...);
  f("w_out", p.w_out...);
  f("b_out", p.b_out...);
}

EncoderParams init_encoder_params(int vocab_size, const EncoderConfig& cfg, Rng& rng);
EncoderParams zeros_like(const EncoderParams& p);

// --- forward pieces ---------------------------------------------------------

// z = sigmoid(w_z x + u_z h + b_z); r likewise;
// h~ = tanh(w_h x + u_h (r.h) + b_h); h' = (1-z).h + z.h~
Eigen::VectorXd gru_cell_forward(const GruCellParams& p, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& h_prev);

struct AttentionResult {
  Eigen::VectorXd context;
  Eigen::VectorXd weights;              // alpha, sums to 1; masked positions 0
  std::vector<Eigen::VectorXd> proj;    // tanh(w h + b) per position, kept for backprop
};

// e_t = u' tanh(w h_t + b), alpha = softmax over unmasked positions.
AttentionResult attention_pool(const std::vector<Eigen::VectorXd>& states,
                               const AttentionParams& p,
                               const std::vector<char>* mask = nullptr);

struct GruSequenceCache {
  std::vector<Eigen::VectorXd> h;        // size n+1; h[0] is the zero initial state
  std::vector<Eigen::VectorXd> z, r, c;  // size n, indexed by processing step
};

struct BiGruCache {
  GruSequenceCache fwd;                 // step t <-> position t
  GruSequenceCache bwd;                 // step t <-> position n-1-t
  std::vector<Eigen::VectorXd> states;  // per position: [h_fwd; h_bwd]
};

BiGruCache run_bigru(const GruCellParams& fwd, const GruCellParams& bwd,
                     const std::vector<Eigen::VectorXd>& inputs);

struct DocumentForward {
  Eigen::VectorXd tag_probs;  // T, each in (0,1)
  Eigen::VectorXd doc_vec;    // 2H
  Eigen::VectorXd logits;
  // attention trace
  std::vector<Eigen::VectorXd> word_attention;  // per used sentence
  Eigen::VectorXd sentence_attention;
  // caches for backprop
  std::vector<std::vector<int>> used_sentences;  // token ids, empty sentences dropped
  std::vector<BiGruCache> word_rnn;
  std::vector<AttentionResult> word_pool;
  std::vector<Eigen::VectorXd> sentence_vectors;
  BiGruCache sent_rnn;
  AttentionResult sent_pool;
};

DocumentForward forward_document(const Document& doc, const EncoderParams& params);

Eigen::VectorXd labels_vector(const std::vector<int>& tags, int n_tags);

// Mean over tags of -[y ln p + (1-y) ln(1-p)], probs clamped to
// [1e-7, 1-1e-7] before the logs.
double bce_loss(const Eigen::VectorXd& tag_probs, const Eigen::VectorXd& labels);

// Runs forward + full backprop; accumulates d(mean BCE)/d(params) into
// grads and returns the loss. forward_out, when non-null, receives the
// forward trace.
double encoder_backward(const Document& doc, const EncoderParams& params,
                        const Eigen::VectorXd& labels, EncoderParams& grads,
                        DocumentForward* forward_out = nullptr);

// --- training ---------------------------------------------------------------

struct EncoderTrainResult {
  EncoderParams params;
  std::vector<double> epoch_losses;  // mean BCE per epoch over training docs
};

// Trains on documents with at least one in-range tag label. Adam with
// beta 0.9/0.999, mini-batches, seeded init and shuffling; fully
// deterministic single-threaded.
EncoderTrainResult train_encoder(const std::vector<Document>& docs, int vocab_size,
                                 const EncoderConfig& cfg);

// One 2H-vector per item; items without usable text get the zero
// vector (count of those is returned via n_missing if non-null).
DenseItemEmbeddings export_embeddings(const std::vector<Document>& docs, int n_items,
                                      const EncoderParams& params, int* n_missing = nullptr);

}  // namespace tagrec

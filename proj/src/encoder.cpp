#include "tagrec/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "tagrec/errors.hpp"

namespace tagrec {

namespace {

constexpr double kProbEps = 1e-7;

GruCellParams make_gru(int input, int hidden) {
  GruCellParams p;
  p.w_z = Eigen::MatrixXd::Zero(hidden, input);
  p.w_r = Eigen::MatrixXd::Zero(hidden, input);
  p.w_h = Eigen::MatrixXd::Zero(hidden, input);
  p.u_z = Eigen::MatrixXd::Zero(hidden, hidden);
  p.u_r = Eigen::MatrixXd::Zero(hidden, hidden);
  p.u_h = Eigen::MatrixXd::Zero(hidden, hidden);
  p.b_z = Eigen::VectorXd::Zero(hidden);
  p.b_r = Eigen::VectorXd::Zero(hidden);
  p.b_h = Eigen::VectorXd::Zero(hidden);
  return p;
}

AttentionParams make_attention(int state, int attn) {
  AttentionParams p;
  p.w = Eigen::MatrixXd::Zero(attn, state);
  p.b = Eigen::VectorXd::Zero(attn);
  p.u = Eigen::VectorXd::Zero(attn);
  return p;
}

struct GruStepGrads {
  Eigen::VectorXd dh_prev;
  Eigen::VectorXd dx;
};

// Backprop through one cell step. z/r/c are the cached activations of
// this step, h_prev the incoming state.
GruStepGrads gru_cell_backward(const GruCellParams& p, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& h_prev, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& r, const Eigen::VectorXd& c,
                               const Eigen::VectorXd& dh, GruCellParams& g) {
  const Eigen::VectorXd hr = r.cwiseProduct(h_prev);
  const Eigen::VectorXd da_c =
      dh.cwiseProduct(z).cwiseProduct(Eigen::VectorXd::Ones(c.size()) - c.cwiseProduct(c));
  const Eigen::VectorXd dz = dh.cwiseProduct(c - h_prev);
  const Eigen::VectorXd da_z = dz.cwiseProduct(z).cwiseProduct(Eigen::VectorXd::Ones(z.size()) - z);
  const Eigen::VectorXd dhr = p.u_h.transpose() * da_c;
  const Eigen::VectorXd dr = dhr.cwiseProduct(h_prev);
  const Eigen::VectorXd da_r = dr.cwiseProduct(r).cwiseProduct(Eigen::VectorXd::Ones(r.size()) - r);

  g.w_h.noalias() += da_c * x.transpose();
  g.u_h.noalias() += da_c * hr.transpose();
  g.b_h += da_c;
  g.w_r.noalias() += da_r * x.transpose();
  g.u_r.noalias() += da_r * h_prev.transpose();
  g.b_r += da_r;
  g.w_z.noalias() += da_z * x.transpose();
  g.u_z.noalias() += da_z * h_prev.transpose();
  g.b_z += da_z;

  GruStepGrads out;
  out.dh_prev = dh.cwiseProduct(Eigen::VectorXd::Ones(z.size()) - z) + dhr.cwiseProduct(r) +
                p.u_r.transpose() * da_r + p.u_z.transpose() * da_z;
  out.dx = p.w_h.transpose() * da_c + p.w_r.transpose() * da_r + p.w_z.transpose() * da_z;
  return out;
}

GruSequenceCache run_gru_sequence(const GruCellParams& p, const std::vector<Eigen::VectorXd>& inputs) {
  const int n = static_cast<int>(inputs.size());
  GruSequenceCache cache;
  cache.h.resize(n + 1);
  cache.z.resize(n);
  cache.r.resize(n);
  cache.c.resize(n);
  cache.h[0] = Eigen::VectorXd::Zero(p.hidden_dim());
  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd& x = inputs[t];
    const Eigen::VectorXd& h_prev = cache.h[t];
    cache.z[t] = ((p.w_z * x + p.u_z * h_prev + p.b_z).array().logistic()).matrix();
    cache.r[t] = ((p.w_r * x + p.u_r * h_prev + p.b_r).array().logistic()).matrix();
    cache.c[t] =
        ((p.w_h * x + p.u_h * cache.r[t].cwiseProduct(h_prev) + p.b_h).array().tanh()).matrix();
    cache.h[t + 1] = (Eigen::VectorXd::Ones(p.hidden_dim()) - cache.z[t]).cwiseProduct(h_prev) +
                     cache.z[t].cwiseProduct(cache.c[t]);
  }
  return cache;
}

// Backprop through a unidirectional chain. dstate[t] is the gradient
// arriving at the state emitted for processing step t. Returns dinputs
// in processing order.
std::vector<Eigen::VectorXd> gru_sequence_backward(const GruCellParams& p,
                                                   const std::vector<Eigen::VectorXd>& inputs,
                                                   const GruSequenceCache& cache,
                                                   const std::vector<Eigen::VectorXd>& dstate,
                                                   GruCellParams& g) {
  const int n = static_cast<int>(inputs.size());
  std::vector<Eigen::VectorXd> dinputs(n);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(p.hidden_dim());
  for (int t = n - 1; t >= 0; --t) {
    const Eigen::VectorXd dh = dstate[t] + carry;
    auto step = gru_cell_backward(p, inputs[t], cache.h[t], cache.z[t], cache.r[t], cache.c[t], dh, g);
    carry = std::move(step.dh_prev);
    dinputs[t] = std::move(step.dx);
  }
  return dinputs;
}

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw NumericError("non-finite value in " + where);
}

}  // namespace

EncoderParams init_encoder_params(int vocab_size, const EncoderConfig& cfg, Rng& rng) {
  if (vocab_size < 1 || cfg.embed_dim < 1 || cfg.hidden_dim < 1 || cfg.attn_dim < 1 ||
      cfg.n_tags < 1) {
    throw ConfigError("encoder dimensions must be positive");
  }
  EncoderParams p;
  p.word_embeddings = Eigen::MatrixXd::Zero(vocab_size, cfg.embed_dim);
  p.word_fwd = make_gru(cfg.embed_dim, cfg.hidden_dim);
  p.word_bwd = make_gru(cfg.embed_dim, cfg.hidden_dim);
  p.word_attn = make_attention(2 * cfg.hidden_dim, cfg.attn_dim);
  p.sent_fwd = make_gru(2 * cfg.hidden_dim, cfg.hidden_dim);
  p.sent_bwd = make_gru(2 * cfg.hidden_dim, cfg.hidden_dim);
  p.sent_attn = make_attention(2 * cfg.hidden_dim, cfg.attn_dim);
  p.w_out = Eigen::MatrixXd::Zero(cfg.n_tags, 2 * cfg.hidden_dim);
  p.b_out = Eigen::VectorXd::Zero(cfg.n_tags);

  visit_encoder_blocks(
      [&](const char*, auto& block) {
        double* data = block.data();
        for (Eigen::Index i = 0; i < block.size(); ++i) data[i] = rng.uniform(-0.05, 0.05);
      },
      p);
  // Glorot range for the attention projections. With the small uniform init
  // the softmax starts indistinguishable from a flat average and takes most
  // of training to wake up; fan-scaled weights give it usable logits early.
  auto glorot = [&](auto& block, int fan_in, int fan_out) {
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    double* data = block.data();
    for (Eigen::Index i = 0; i < block.size(); ++i) data[i] = rng.uniform(-r, r);
  };
  for (AttentionParams* a : {&p.word_attn, &p.sent_attn}) {
    glorot(a->w, 2 * cfg.hidden_dim, cfg.attn_dim);
    a->b.setZero();
    glorot(a->u, cfg.attn_dim, 1);
  }
  return p;
}

EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z = p;
  visit_encoder_blocks([](const char*, auto& block) { block.setZero(); }, z);
  return z;
}

Eigen::VectorXd gru_cell_forward(const GruCellParams& p, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& h_prev) {
  if (x.size() != p.input_dim() || h_prev.size() != p.hidden_dim()) {
    throw ConfigError("gru_cell_forward: dimension mismatch");
  }
  const Eigen::VectorXd z = ((p.w_z * x + p.u_z * h_prev + p.b_z).array().logistic()).matrix();
  const Eigen::VectorXd r = ((p.w_r * x + p.u_r * h_prev + p.b_r).array().logistic()).matrix();
  const Eigen::VectorXd c =
      ((p.w_h * x + p.u_h * r.cwiseProduct(h_prev) + p.b_h).array().tanh()).matrix();
  return (Eigen::VectorXd::Ones(p.hidden_dim()) - z).cwiseProduct(h_prev) + z.cwiseProduct(c);
}

AttentionResult attention_pool(const std::vector<Eigen::VectorXd>& states,
                               const AttentionParams& p, const std::vector<char>* mask) {
  const int n = static_cast<int>(states.size());
  if (n == 0) throw DataError("attention_pool: empty state sequence");
  if (mask && static_cast<int>(mask->size()) != n) {
    throw ConfigError("attention_pool: mask length mismatch");
  }

  AttentionResult res;
  res.proj.resize(n);
  Eigen::VectorXd scores(n);
  double max_score = -std::numeric_limits<double>::infinity();
  int active = 0;
  for (int t = 0; t < n; ++t) {
    if (mask && !(*mask)[t]) continue;
    res.proj[t] = ((p.w * states[t] + p.b).array().tanh()).matrix();
    scores[t] = p.u.dot(res.proj[t]);
    max_score = std::max(max_score, scores[t]);
    ++active;
  }
  if (active == 0) throw DataError("attention_pool: all positions masked");

  res.weights = Eigen::VectorXd::Zero(n);
  double denom = 0.0;
  for (int t = 0; t < n; ++t) {
    if (mask && !(*mask)[t]) continue;
    res.weights[t] = std::exp(scores[t] - max_score);
    denom += res.weights[t];
  }
  res.context = Eigen::VectorXd::Zero(states[0].size());
  for (int t = 0; t < n; ++t) {
    if (mask && !(*mask)[t]) continue;
    res.weights[t] /= denom;
    res.context += res.weights[t] * states[t];
  }
  return res;
}

namespace {

// dcontext -> accumulates parameter grads and adds per-state grads
// into dstates. Masked positions (weight exactly 0, no proj) are
// skipped.
void attention_backward(const AttentionParams& p, const std::vector<Eigen::VectorXd>& states,
                        const AttentionResult& res, const Eigen::VectorXd& dcontext,
                        AttentionParams& g, std::vector<Eigen::VectorXd>& dstates) {
  const int n = static_cast<int>(states.size());
  Eigen::VectorXd dalpha = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < n; ++t) {
    if (res.proj[t].size() == 0) continue;
    dalpha[t] = dcontext.dot(states[t]);
    dstates[t] += res.weights[t] * dcontext;
  }
  double dot = 0.0;
  for (int t = 0; t < n; ++t) dot += res.weights[t] * dalpha[t];
  for (int t = 0; t < n; ++t) {
    if (res.proj[t].size() == 0) continue;
    const double de = res.weights[t] * (dalpha[t] - dot);
    g.u += de * res.proj[t];
    const Eigen::VectorXd dm = de * p.u;
    const Eigen::VectorXd da =
        dm.cwiseProduct(Eigen::VectorXd::Ones(dm.size()) -
                        res.proj[t].cwiseProduct(res.proj[t]));
    g.w.noalias() += da * states[t].transpose();
    g.b += da;
    dstates[t] += p.w.transpose() * da;
  }
}

}  // namespace

BiGruCache run_bigru(const GruCellParams& fwd, const GruCellParams& bwd,
                     const std::vector<Eigen::VectorXd>& inputs) {
  const int n = static_cast<int>(inputs.size());
  BiGruCache cache;
  cache.fwd = run_gru_sequence(fwd, inputs);
  std::vector<Eigen::VectorXd> rev(inputs.rbegin(), inputs.rend());
  cache.bwd = run_gru_sequence(bwd, rev);
  cache.states.resize(n);
  const int h = fwd.hidden_dim();
  for (int t = 0; t < n; ++t) {
    cache.states[t].resize(2 * h);
    cache.states[t].head(h) = cache.fwd.h[t + 1];
    cache.states[t].tail(h) = cache.bwd.h[n - t];  // bwd step n-1-t emits h[n-t]
  }
  return cache;
}

namespace {

std::vector<Eigen::VectorXd> bigru_backward(const GruCellParams& fwd, const GruCellParams& bwd,
                                            const std::vector<Eigen::VectorXd>& inputs,
                                            const BiGruCache& cache,
                                            const std::vector<Eigen::VectorXd>& dstates,
                                            GruCellParams& gfwd, GruCellParams& gbwd) {
  const int n = static_cast<int>(inputs.size());
  const int h = fwd.hidden_dim();
  std::vector<Eigen::VectorXd> dfwd(n), dbwd(n);
  for (int t = 0; t < n; ++t) {
    dfwd[t] = dstates[t].head(h);
    dbwd[n - 1 - t] = dstates[t].tail(h);  // back to processing order
  }
  auto din_f = gru_sequence_backward(fwd, inputs, cache.fwd, dfwd, gfwd);
  std::vector<Eigen::VectorXd> rev(inputs.rbegin(), inputs.rend());
  auto din_b = gru_sequence_backward(bwd, rev, cache.bwd, dbwd, gbwd);
  std::vector<Eigen::VectorXd> dinputs(n);
  for (int t = 0; t < n; ++t) dinputs[t] = din_f[t] + din_b[n - 1 - t];
  return dinputs;
}

}  // namespace

Eigen::VectorXd labels_vector(const std::vector<int>& tags, int n_tags) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_tags);
  for (int t : tags) {
    if (t >= 0 && t < n_tags) y[t] = 1.0;
  }
  return y;
}

double bce_loss(const Eigen::VectorXd& tag_probs, const Eigen::VectorXd& labels) {
  if (tag_probs.size() != labels.size()) throw ConfigError("bce_loss: size mismatch");
  const int t = static_cast<int>(tag_probs.size());
  double sum = 0.0;
  for (int k = 0; k < t; ++k) {
    const double p = std::clamp(tag_probs[k], kProbEps, 1.0 - kProbEps);
    sum += -(labels[k] * std::log(p) + (1.0 - labels[k]) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(t);
}

DocumentForward forward_document(const Document& doc, const EncoderParams& params) {
  DocumentForward out;
  for (const auto& sent : doc.sentences) {
    if (!sent.empty()) out.used_sentences.push_back(sent);
  }
  if (out.used_sentences.empty()) {
    throw DataError("forward_document: document " + std::to_string(doc.item_id) + " has no text");
  }
  const int v = static_cast<int>(params.word_embeddings.rows());

  for (const auto& sent : out.used_sentences) {
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(sent.size());
    for (int w : sent) {
      if (w < 0 || w >= v) {
        throw DataError("forward_document: token id " + std::to_string(w) +
                        " outside vocabulary of size " + std::to_string(v));
      }
      xs.push_back(params.word_embeddings.row(w).transpose());
    }
    out.word_rnn.push_back(run_bigru(params.word_fwd, params.word_bwd, xs));
    out.word_pool.push_back(attention_pool(out.word_rnn.back().states, params.word_attn));
    out.sentence_vectors.push_back(out.word_pool.back().context);
    out.word_attention.push_back(out.word_pool.back().weights);
  }

  out.sent_rnn = run_bigru(params.sent_fwd, params.sent_bwd, out.sentence_vectors);
  out.sent_pool = attention_pool(out.sent_rnn.states, params.sent_attn);
  out.doc_vec = out.sent_pool.context;
  out.sentence_attention = out.sent_pool.weights;

  out.logits = params.w_out * out.doc_vec + params.b_out;
  out.tag_probs = (out.logits.array().logistic()).matrix();
  return out;
}

double encoder_backward(const Document& doc, const EncoderParams& params,
                        const Eigen::VectorXd& labels, EncoderParams& grads,
                        DocumentForward* forward_out) {
  DocumentForward fwd = forward_document(doc, params);
  const double loss = bce_loss(fwd.tag_probs, labels);
  const int t = static_cast<int>(labels.size());
  if (fwd.tag_probs.size() != t) throw ConfigError("encoder_backward: label size mismatch");

  // d(mean BCE)/dlogit = (p - y)/T; the clamp only guards the loss
  // value, the logit gradient is the exact unclamped one
  const Eigen::VectorXd dlogits = (fwd.tag_probs - labels) / static_cast<double>(t);
  grads.w_out.noalias() += dlogits * fwd.doc_vec.transpose();
  grads.b_out += dlogits;
  const Eigen::VectorXd ddoc = params.w_out.transpose() * dlogits;

  // sentence-level attention + bi-GRU
  const int n_sent = static_cast<int>(fwd.sentence_vectors.size());
  std::vector<Eigen::VectorXd> dsent_states(n_sent,
                                            Eigen::VectorXd::Zero(fwd.sent_rnn.states[0].size()));
  attention_backward(params.sent_attn, fwd.sent_rnn.states, fwd.sent_pool, ddoc, grads.sent_attn,
                     dsent_states);
  std::vector<Eigen::VectorXd> dsent_vecs =
      bigru_backward(params.sent_fwd, params.sent_bwd, fwd.sentence_vectors, fwd.sent_rnn,
                     dsent_states, grads.sent_fwd, grads.sent_bwd);

  // word level, per sentence
  for (int i = 0; i < n_sent; ++i) {
    const auto& sent = fwd.used_sentences[i];
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(sent.size());
    for (int w : sent) xs.push_back(params.word_embeddings.row(w).transpose());

    std::vector<Eigen::VectorXd> dword_states(
        sent.size(), Eigen::VectorXd::Zero(fwd.word_rnn[i].states[0].size()));
    attention_backward(params.word_attn, fwd.word_rnn[i].states, fwd.word_pool[i], dsent_vecs[i],
                       grads.word_attn, dword_states);
    std::vector<Eigen::VectorXd> dxs =
        bigru_backward(params.word_fwd, params.word_bwd, xs, fwd.word_rnn[i], dword_states,
                       grads.word_fwd, grads.word_bwd);
    for (std::size_t k = 0; k < sent.size(); ++k) {
      grads.word_embeddings.row(sent[k]) += dxs[k].transpose();
    }
  }

  if (forward_out) *forward_out = std::move(fwd);
  return loss;
}

namespace {

struct AdamState {
  EncoderParams m, v;
  long long t = 0;
};

void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  visit_encoder_blocks(
      [&](const char*, auto& p, auto& g, auto& m, auto& v) {
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = (kBeta2 * v.array() + (1.0 - kBeta2) * g.array().square()).matrix();
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
      },
      params, const_cast<EncoderParams&>(grads), state.m, state.v);
}

}  // namespace

EncoderTrainResult train_encoder(const std::vector<Document>& docs, int vocab_size,
                                 const EncoderConfig& cfg) {
  Rng rng(cfg.seed);
  EncoderTrainResult result;
  result.params = init_encoder_params(vocab_size, cfg, rng);

  std::vector<int> eligible;
  for (int i = 0; i < static_cast<int>(docs.size()); ++i) {
    const auto& d = docs[i];
    const bool has_text =
        std::any_of(d.sentences.begin(), d.sentences.end(), [](const auto& s) { return !s.empty(); });
    const bool has_tag =
        std::any_of(d.tags.begin(), d.tags.end(), [&](int t) { return t >= 0 && t < cfg.n_tags; });
    if (has_text && has_tag) eligible.push_back(i);
  }
  if (eligible.empty()) throw DataError("train_encoder: no documents with usable text and tags");

  AdamState adam;
  adam.m = zeros_like(result.params);
  adam.v = zeros_like(result.params);
  EncoderParams grads = zeros_like(result.params);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(eligible);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < eligible.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(eligible.size(), start + cfg.batch_size);
      visit_encoder_blocks([](const char*, auto& b) { b.setZero(); }, grads);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const Document& d = docs[eligible[k]];
        batch_loss += encoder_backward(d, result.params, labels_vector(d.tags, cfg.n_tags), grads);
      }
      const double batch_n = static_cast<double>(end - start);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train_encoder: loss diverged at epoch " + std::to_string(epoch) +
                           ", batch starting at " + std::to_string(start));
      }
      visit_encoder_blocks([&](const char*, auto& b) { b /= batch_n; }, grads);
      adam_step(result.params, grads, adam, cfg.learning_rate);
      epoch_loss += batch_loss;
      seen += end - start;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
    check_finite(result.epoch_losses.back(), "train_encoder epoch " + std::to_string(epoch));
  }
  return result;
}

DenseItemEmbeddings export_embeddings(const std::vector<Document>& docs, int n_items,
                                      const EncoderParams& params, int* n_missing) {
  DenseItemEmbeddings emb;
  emb.n_items = n_items;
  emb.dim = 2 * params.word_fwd.hidden_dim();
  emb.values.assign(static_cast<std::size_t>(n_items) * emb.dim, 0.0);
  std::vector<char> filled(n_items, 0);
  int missing = 0;
  for (const auto& doc : docs) {
    if (doc.item_id < 0 || doc.item_id >= n_items) continue;
    const bool has_text = std::any_of(doc.sentences.begin(), doc.sentences.end(),
                                      [](const auto& s) { return !s.empty(); });
    if (!has_text) continue;
    const DocumentForward f = forward_document(doc, params);
    double* row = emb.row(doc.item_id);
    for (int k = 0; k < emb.dim; ++k) row[k] = f.doc_vec[k];
    filled[doc.item_id] = 1;
  }
  for (int j = 0; j < n_items; ++j) {
    if (!filled[j]) ++missing;
  }
  if (missing > 0) {
    std::cerr << "warning: " << missing << " of " << n_items
              << " items have no text; exported zero vectors for them\n";
  }
  if (n_missing) *n_missing = missing;
  return emb;
}

}  // namespace tagrec

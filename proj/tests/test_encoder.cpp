#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tagrec/encoder.hpp"
#include "tagrec/errors.hpp"
#include "tagrec/rng.hpp"

using namespace tagrec;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.s_max = 4;
  cfg.w_max = 6;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 2;
  cfg.attn_dim = 3;
  cfg.n_tags = 2;
  cfg.seed = 9;
  return cfg;
}

Document doc_of(std::vector<std::vector<int>> sentences, std::vector<int> tags) {
  Document d;
  d.item_id = 0;
  d.sentences = std::move(sentences);
  d.tags = std::move(tags);
  return d;
}

}  // namespace

TEST_CASE("scalar gru cell reproduces the hand-computed trajectory") {
  GruCellParams p;
  p.w_z = Eigen::MatrixXd::Constant(1, 1, 0.5);
  p.u_z = Eigen::MatrixXd::Constant(1, 1, -0.3);
  p.b_z = Eigen::VectorXd::Constant(1, 0.1);
  p.w_r = Eigen::MatrixXd::Constant(1, 1, -0.4);
  p.u_r = Eigen::MatrixXd::Constant(1, 1, 0.2);
  p.b_r = Eigen::VectorXd::Constant(1, -0.1);
  p.w_h = Eigen::MatrixXd::Constant(1, 1, 0.7);
  p.u_h = Eigen::MatrixXd::Constant(1, 1, 0.6);
  p.b_h = Eigen::VectorXd::Constant(1, 0.05);

  Eigen::VectorXd h = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd x1 = Eigen::VectorXd::Constant(1, 1.0);
  Eigen::VectorXd x2 = Eigen::VectorXd::Constant(1, -0.5);
  h = gru_cell_forward(p, x1, h);
  CHECK(h(0) == doctest::Approx(0.4100879265015595).epsilon(1e-14));
  h = gru_cell_forward(p, x2, h);
  CHECK(h(0) == doctest::Approx(0.1618558254571806).epsilon(1e-14));
}

TEST_CASE("gru with all-zero parameters keeps the state at zero") {
  GruCellParams p;
  p.w_z = p.w_r = p.w_h = Eigen::MatrixXd::Zero(2, 3);
  p.u_z = p.u_r = p.u_h = Eigen::MatrixXd::Zero(2, 2);
  p.b_z = p.b_r = p.b_h = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(2);
  h = gru_cell_forward(p, Eigen::VectorXd::Ones(3), h);
  // z = 0.5 but the candidate is tanh(0) = 0, so h stays 0
  CHECK(h.norm() == 0.0);
}

TEST_CASE("attention weights match a constructed softmax") {
  // two 2-dim states e_1 - e_2 = ln 3  ->  alpha = (0.75, 0.25)
  AttentionParams p;
  p.w = Eigen::MatrixXd::Zero(2, 2);
  p.w(0, 0) = 1.0;
  p.w(1, 1) = 1.0;
  p.b = Eigen::VectorXd::Zero(2);
  p.u = Eigen::VectorXd::Zero(2);
  p.u(0) = 1.4425167001044055;  // ln 3 / tanh 1

  std::vector<Eigen::VectorXd> states(2);
  states[0] = Eigen::VectorXd::Zero(2);
  states[0](0) = 1.0;
  states[1] = Eigen::VectorXd::Zero(2);
  states[1](1) = 1.0;

  AttentionResult res = attention_pool(states, p);
  CHECK(res.weights(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(res.weights(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(res.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(res.context(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(res.context(1) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("identical states give uniform attention") {
  AttentionParams p;
  Rng rng(4);
  p.w = Eigen::MatrixXd::Zero(3, 2).unaryExpr([&](double) { return rng.uniform(-1, 1); });
  p.b = Eigen::VectorXd::Zero(3).unaryExpr([&](double) { return rng.uniform(-1, 1); });
  p.u = Eigen::VectorXd::Zero(3).unaryExpr([&](double) { return rng.uniform(-1, 1); });
  std::vector<Eigen::VectorXd> states(4, Eigen::VectorXd::Constant(2, 0.3));
  AttentionResult res = attention_pool(states, p);
  for (int t = 0; t < 4; ++t) CHECK(res.weights(t) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("masked positions get exactly zero weight") {
  AttentionParams p;
  p.w = Eigen::MatrixXd::Ones(2, 2);
  p.b = Eigen::VectorXd::Zero(2);
  p.u = Eigen::VectorXd::Ones(2);
  std::vector<Eigen::VectorXd> states(3, Eigen::VectorXd::Ones(2));
  states[1] = Eigen::VectorXd::Constant(2, 100.0);  // would dominate if unmasked
  std::vector<char> mask = {1, 0, 1};
  AttentionResult res = attention_pool(states, p, &mask);
  CHECK(res.weights(1) == 0.0);
  CHECK(res.weights(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));

  std::vector<char> all_masked = {0, 0, 0};
  CHECK_THROWS_AS(attention_pool(states, p, &all_masked), DataError);
  std::vector<Eigen::VectorXd> empty;
  CHECK_THROWS_AS(attention_pool(empty, p), DataError);
}

TEST_CASE("a single state gets full attention") {
  AttentionParams p;
  p.w = Eigen::MatrixXd::Ones(2, 2);
  p.b = Eigen::VectorXd::Zero(2);
  p.u = Eigen::VectorXd::Ones(2);
  std::vector<Eigen::VectorXd> states(1, Eigen::VectorXd::Constant(2, -0.7));
  AttentionResult res = attention_pool(states, p);
  CHECK(res.weights(0) == 1.0);
  CHECK(res.context == states[0]);
}

TEST_CASE("bce matches the frozen reference value") {
  Eigen::VectorXd probs(2), labels(2);
  probs << 0.9, 0.2;
  labels << 1.0, 0.0;
  CHECK(bce_loss(probs, labels) == doctest::Approx(0.164252033486018).epsilon(1e-12));
}

TEST_CASE("bce clamp keeps extreme probabilities finite") {
  Eigen::VectorXd probs(2), labels(2);
  probs << 1.0, 0.0;
  labels << 0.0, 1.0;
  const double loss = bce_loss(probs, labels);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
}

TEST_CASE("perfect predictions give near-zero bce") {
  Eigen::VectorXd probs(2), labels(2);
  probs << 1.0, 0.0;
  labels << 1.0, 0.0;
  CHECK(bce_loss(probs, labels) == doctest::Approx(1e-7).epsilon(1e-3));
}

TEST_CASE("labels_vector sets indicator entries") {
  Eigen::VectorXd y = labels_vector({0, 3}, 5);
  REQUIRE(y.size() == 5);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == 0.0);
  CHECK(y(3) == 1.0);
  CHECK(y.sum() == 2.0);
}

TEST_CASE("initialization is deterministic and inside the expected ranges") {
  EncoderConfig cfg = tiny_config();
  Rng r1(cfg.seed), r2(cfg.seed);
  EncoderParams a = init_encoder_params(10, cfg, r1);
  EncoderParams b = init_encoder_params(10, cfg, r2);
  bool equal = true;
  double max_abs = 0.0;
  visit_encoder_blocks(
      [&](const char* name, const auto& x, const auto& y) {
        equal = equal && x == y;
        std::string n(name);
        if (n.find("attn") == std::string::npos)
          max_abs = std::max(max_abs, x.cwiseAbs().maxCoeff());
      },
      a, b);
  CHECK(equal);
  CHECK(max_abs <= 0.05);
  CHECK(max_abs > 0.0);
  // attention projections use glorot ranges, biases start at zero
  const double w_bound = std::sqrt(6.0 / (cfg.attn_dim + 2 * cfg.hidden_dim));
  const double u_bound = std::sqrt(6.0 / (cfg.attn_dim + 1));
  for (const AttentionParams* at : {&a.word_attn, &a.sent_attn}) {
    CHECK(at->w.cwiseAbs().maxCoeff() <= w_bound);
    CHECK(at->w.cwiseAbs().maxCoeff() > 0.05);
    CHECK(at->u.cwiseAbs().maxCoeff() <= u_bound);
    CHECK(at->b.isZero());
  }
  CHECK(a.word_embeddings.rows() == 10);
  CHECK(a.word_embeddings.cols() == cfg.embed_dim);
  CHECK(a.w_out.rows() == cfg.n_tags);
  CHECK(a.w_out.cols() == 2 * cfg.hidden_dim);
}

TEST_CASE("forward output shapes and ranges") {
  EncoderConfig cfg = tiny_config();
  Rng rng(cfg.seed);
  EncoderParams params = init_encoder_params(8, cfg, rng);
  Document d = doc_of({{2, 3, 4}, {5, 6}}, {1});
  DocumentForward f = forward_document(d, params);
  CHECK(f.doc_vec.size() == 2 * cfg.hidden_dim);
  CHECK(f.tag_probs.size() == cfg.n_tags);
  for (int t = 0; t < cfg.n_tags; ++t) {
    CHECK(f.tag_probs(t) > 0.0);
    CHECK(f.tag_probs(t) < 1.0);
  }
  CHECK(f.sentence_attention.size() == 2);
  CHECK(f.sentence_attention.sum() == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(f.word_attention.size() == 2);
  CHECK(f.word_attention[0].size() == 3);
  CHECK(f.word_attention[1].size() == 2);
}

TEST_CASE("empty sentences are skipped in the forward pass") {
  EncoderConfig cfg = tiny_config();
  Rng rng(1);
  EncoderParams params = init_encoder_params(8, cfg, rng);
  Document with_empty = doc_of({{2, 3}, {}, {4}}, {0});
  Document without = doc_of({{2, 3}, {4}}, {0});
  DocumentForward a = forward_document(with_empty, params);
  DocumentForward b = forward_document(without, params);
  CHECK(a.doc_vec == b.doc_vec);
  CHECK(a.used_sentences.size() == 2);
}

TEST_CASE("documents with no usable text are rejected") {
  EncoderConfig cfg = tiny_config();
  Rng rng(1);
  EncoderParams params = init_encoder_params(8, cfg, rng);
  Document empty = doc_of({}, {0});
  CHECK_THROWS_AS(forward_document(empty, params), DataError);
  Document only_empty = doc_of({{}, {}}, {0});
  CHECK_THROWS_AS(forward_document(only_empty, params), DataError);
}

TEST_CASE("out-of-range token ids are a data error") {
  EncoderConfig cfg = tiny_config();
  Rng rng(1);
  EncoderParams params = init_encoder_params(8, cfg, rng);
  Document bad = doc_of({{2, 99}}, {0});
  CHECK_THROWS_AS(forward_document(bad, params), DataError);
}

TEST_CASE("single-word single-sentence documents work") {
  EncoderConfig cfg = tiny_config();
  Rng rng(2);
  EncoderParams params = init_encoder_params(8, cfg, rng);
  Document d = doc_of({{5}}, {0});
  DocumentForward f = forward_document(d, params);
  CHECK(f.word_attention[0](0) == 1.0);
  CHECK(f.sentence_attention(0) == 1.0);
  // full attention on the only sentence: the document vector is that
  // sentence's bi-gru state
  CHECK(f.doc_vec == f.sent_rnn.states[0]);
}

TEST_CASE("training with zero epochs returns the seeded initialization") {
  EncoderConfig cfg = tiny_config();
  cfg.epochs = 0;
  std::vector<Document> docs = {doc_of({{2, 3}}, {0}), doc_of({{4}}, {1})};
  EncoderTrainResult r = train_encoder(docs, 8, cfg);
  Rng rng(cfg.seed);
  EncoderParams expect = init_encoder_params(8, cfg, rng);
  bool equal = true;
  visit_encoder_blocks([&](const char*, const auto& x, const auto& y) { equal = equal && x == y; },
                       r.params, expect);
  CHECK(equal);
  CHECK(r.epoch_losses.empty());
}

TEST_CASE("training is deterministic and decreases the loss") {
  EncoderConfig cfg = tiny_config();
  cfg.epochs = 8;
  cfg.batch_size = 2;
  cfg.learning_rate = 0.05;
  std::vector<Document> docs = {
      doc_of({{2, 3}, {4}}, {0}),
      doc_of({{5, 6}}, {1}),
      doc_of({{2, 4, 6}}, {0, 1}),
      doc_of({{7}}, {1}),
  };
  EncoderTrainResult a = train_encoder(docs, 8, cfg);
  EncoderTrainResult b = train_encoder(docs, 8, cfg);
  CHECK(a.epoch_losses == b.epoch_losses);
  CHECK(a.epoch_losses.back() < a.epoch_losses.front());

  cfg.seed = 77;
  EncoderTrainResult c = train_encoder(docs, 8, cfg);
  CHECK(a.epoch_losses != c.epoch_losses);
}

TEST_CASE("documents without text or labels are left out of training") {
  EncoderConfig cfg = tiny_config();
  cfg.epochs = 1;
  std::vector<Document> docs = {
      doc_of({{2, 3}}, {0}),
      doc_of({}, {1}),       // no text
      doc_of({{4}}, {}),      // no labels
      doc_of({{5}}, {7}),     // label outside [0, n_tags)
  };
  EncoderTrainResult r = train_encoder(docs, 8, cfg);
  CHECK(r.epoch_losses.size() == 1);

  std::vector<Document> none = {doc_of({}, {0}), doc_of({{2}}, {})};
  CHECK_THROWS_AS(train_encoder(none, 8, cfg), DataError);
}

TEST_CASE("export writes zero vectors for items without text") {
  EncoderConfig cfg = tiny_config();
  Rng rng(3);
  EncoderParams params = init_encoder_params(8, cfg, rng);
  std::vector<Document> docs = {doc_of({{2, 3}}, {0}), doc_of({}, {})};
  docs[1].item_id = 1;
  int n_missing = -1;
  DenseItemEmbeddings emb = export_embeddings(docs, 3, params, &n_missing);
  CHECK(emb.n_items == 3);
  CHECK(emb.dim == 2 * cfg.hidden_dim);
  CHECK(n_missing == 2);  // item 1 (empty doc) and item 2 (no doc at all)
  Eigen::Map<const Eigen::VectorXd> row1(emb.row(1), emb.dim);
  CHECK(row1.norm() == 0.0);
  Eigen::Map<const Eigen::VectorXd> row0(emb.row(0), emb.dim);
  CHECK(row0.norm() > 0.0);
  DocumentForward f = forward_document(docs[0], params);
  for (int k = 0; k < emb.dim; ++k) CHECK(row0(k) == f.doc_vec(k));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "tagrec/config.hpp"
#include "tagrec/errors.hpp"

using namespace tagrec;

namespace {

bool mentions_line(const std::exception& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
  PipelineConfig cfg = parse_config("");
  CHECK(cfg.corpus.vocab_size == 20000);
  CHECK(cfg.corpus.s_max == 10);
  CHECK(cfg.corpus.w_max == 50);
  CHECK(cfg.corpus.n_tags == 300);
  CHECK(cfg.split.p == 10);
  CHECK(cfg.split.seed == 42);
  CHECK(cfg.encoder.embed_dim == 100);
  CHECK(cfg.encoder.hidden_dim == 50);
  CHECK(cfg.encoder.attn_dim == 100);
  CHECK(cfg.encoder.batch_size == 64);
  CHECK(cfg.mf.loss == LossKind::warp);
  CHECK(cfg.mf.latent_dim == 200);
  CHECK(cfg.mf.learning_rate == 0.05);
  CHECK(cfg.mf.l2 == 1e-5);
  CHECK(cfg.mf.max_warp_trials == 100);
  CHECK(cfg.mf.dense_mode == DenseMode::none);
  CHECK(cfg.item_features == FeatureKind::identity);
  CHECK(cfg.eval.ks == std::vector<int>{50, 100, 150, 200});
  CHECK(cfg.data.format == DataFormat::auto_detect);
  // corpus limits are mirrored into the encoder config
  CHECK(cfg.encoder.s_max == cfg.corpus.s_max);
  CHECK(cfg.encoder.w_max == cfg.corpus.w_max);
  CHECK(cfg.encoder.n_tags == cfg.corpus.n_tags);
}

TEST_CASE("parse reads sections, comments and whitespace") {
  const std::string text =
      "# pipeline settings\n"
      "[data]\n"
      "interactions = users.dat\n"
      "documents = raw-data.csv\n"
      "item_tags = item-tag.dat\n"
      "tags = tags.dat\n"
      "format = citeulike\n"
      "\n"
      "[corpus]\n"
      "vocab_size = 5000\n"
      "s_max = 6\n"
      "w_max = 20   # truncation\n"
      "n_tags = 40\n"
      "\n"
      "[split]\n"
      "p = 5\n"
      "seed = 7\n"
      "\n"
      "[encoder]\n"
      "embed_dim = 32\n"
      "hidden_dim = 16\n"
      "attn_dim = 24\n"
      "learning_rate = 0.002\n"
      "batch_size = 8\n"
      "epochs = 3\n"
      "seed = 11\n"
      "\n"
      "[mf]\n"
      "loss = bpr\n"
      "latent_dim = 64\n"
      "l2 = 0.0001\n"
      "epochs = 12\n"
      "learning_rate = 0.1\n"
      "max_warp_trials = 60\n"
      "seed = 13\n"
      "dense_mode = bias\n"
      "item_features = tags\n"
      "embeddings = emb.txt\n"
      "\n"
      "[eval]\n"
      "ks = 10, 20, 30\n";
  PipelineConfig cfg = parse_config(text);
  CHECK(cfg.data.interactions == "users.dat");
  CHECK(cfg.data.format == DataFormat::citeulike);
  CHECK(cfg.corpus.vocab_size == 5000);
  CHECK(cfg.corpus.w_max == 20);
  CHECK(cfg.split.p == 5);
  CHECK(cfg.split.seed == 7);
  CHECK(cfg.encoder.embed_dim == 32);
  CHECK(cfg.encoder.hidden_dim == 16);
  CHECK(cfg.encoder.attn_dim == 24);
  CHECK(cfg.encoder.learning_rate == 0.002);
  CHECK(cfg.encoder.batch_size == 8);
  CHECK(cfg.encoder.epochs == 3);
  CHECK(cfg.encoder.seed == 11);
  CHECK(cfg.encoder.s_max == 6);
  CHECK(cfg.encoder.w_max == 20);
  CHECK(cfg.encoder.n_tags == 40);
  CHECK(cfg.mf.loss == LossKind::bpr);
  CHECK(cfg.mf.latent_dim == 64);
  CHECK(cfg.mf.l2 == 0.0001);
  CHECK(cfg.mf.epochs == 12);
  CHECK(cfg.mf.learning_rate == 0.1);
  CHECK(cfg.mf.max_warp_trials == 60);
  CHECK(cfg.mf.seed == 13);
  CHECK(cfg.mf.dense_mode == DenseMode::bias);
  CHECK(cfg.item_features == FeatureKind::tags);
  CHECK(cfg.embeddings == "emb.txt");
  CHECK(cfg.eval.ks == std::vector<int>{10, 20, 30});
}

TEST_CASE("serialize then parse is the identity") {
  PipelineConfig cfg;
  cfg.data.interactions = "a.tsv";
  cfg.data.documents = "b.jsonl";
  cfg.data.item_tags = "c.dat";
  cfg.data.tags = "d.txt";
  cfg.data.format = DataFormat::canonical;
  cfg.corpus.vocab_size = 123;
  cfg.corpus.s_max = 4;
  cfg.corpus.w_max = 9;
  cfg.corpus.n_tags = 17;
  cfg.split.p = 3;
  cfg.split.seed = 99;
  cfg.encoder.embed_dim = 10;
  cfg.encoder.hidden_dim = 5;
  cfg.encoder.attn_dim = 7;
  cfg.encoder.learning_rate = 0.001;
  cfg.encoder.batch_size = 2;
  cfg.encoder.epochs = 1;
  cfg.encoder.seed = 5;
  cfg.encoder.s_max = 4;
  cfg.encoder.w_max = 9;
  cfg.encoder.n_tags = 17;
  cfg.mf.loss = LossKind::bpr;
  cfg.mf.latent_dim = 33;
  cfg.mf.l2 = 0.1 + 0.2;  // 0.30000000000000004, forces precise formatting
  cfg.mf.epochs = 8;
  cfg.mf.learning_rate = 1.0 / 3.0;
  cfg.mf.max_warp_trials = 41;
  cfg.mf.seed = 1234567890123456789ULL;
  cfg.mf.dense_mode = DenseMode::bias_factors;
  cfg.item_features = FeatureKind::tfidf;
  cfg.embeddings = "dense.txt";
  cfg.eval.ks = {1, 2, 300};

  const std::string text = serialize_config(cfg);
  PipelineConfig back = parse_config(text);
  CHECK(back == cfg);
  // and the round-trip is a fixed point
  CHECK(serialize_config(back) == text);
}

TEST_CASE("unknown keys and sections are rejected with the line number") {
  try {
    parse_config("[corpus]\nvocab_size = 10\nbogus = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions_line(e, "bogus"));
    CHECK(mentions_line(e, "3"));
  }
  CHECK_THROWS_AS(parse_config("[nope]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("loose = 1\n"), ConfigError);        // key before any section
  CHECK_THROWS_AS(parse_config("[corpus]\nvocab_size\n"), ConfigError);  // missing '='
  CHECK_THROWS_AS(parse_config("[corpus]\nvocab_size = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[corpus]\ns_max = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[mf]\nloss = hinge\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[mf]\ndense_mode = everything\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[mf]\nitem_features = dense\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[data]\nformat = parquet\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[eval]\nks = 5, x\n"), ConfigError);
}

TEST_CASE("enum names round-trip") {
  for (LossKind k : {LossKind::bpr, LossKind::warp}) CHECK(loss_from_string(to_string(k)) == k);
  for (DenseMode m : {DenseMode::none, DenseMode::bias, DenseMode::bias_factors}) {
    CHECK(dense_mode_from_string(to_string(m)) == m);
  }
  for (FeatureKind k : {FeatureKind::identity, FeatureKind::tags, FeatureKind::tfidf}) {
    CHECK(feature_kind_from_string(to_string(k)) == k);
  }
  for (DataFormat f : {DataFormat::auto_detect, DataFormat::citeulike, DataFormat::canonical}) {
    CHECK(data_format_from_string(to_string(f)) == f);
  }
  CHECK_THROWS_AS(loss_from_string("hinge"), ConfigError);
  CHECK_THROWS_AS(feature_kind_from_string(""), ConfigError);
}

TEST_CASE("validate rejects out-of-range settings") {
  PipelineConfig ok;
  CHECK_NOTHROW(validate_config(ok));

  PipelineConfig bad = ok;
  bad.corpus.vocab_size = 0;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.corpus.s_max = -1;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.split.p = 0;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.encoder.learning_rate = 0.0;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.encoder.batch_size = 0;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.mf.latent_dim = -5;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.mf.l2 = -1e-9;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.mf.max_warp_trials = 0;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.mf.epochs = -1;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.eval.ks = {};
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  bad = ok;
  bad.eval.ks = {10, 0};
  CHECK_THROWS_AS(validate_config(bad), ConfigError);

  // a dense channel needs a source file
  bad = ok;
  bad.mf.dense_mode = DenseMode::bias;
  bad.embeddings.clear();
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad.embeddings = "emb.txt";
  CHECK_NOTHROW(validate_config(bad));
}

TEST_CASE("load_config reads a file and reports missing paths") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("tagrec_cfg_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path file = dir / "run.cfg";
  {
    std::ofstream out(file);
    out << "[corpus]\nvocab_size = 777\n";
  }
  PipelineConfig cfg = load_config(file.string());
  CHECK(cfg.corpus.vocab_size == 777);
  CHECK_THROWS_AS(load_config((dir / "absent.cfg").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("doubles survive serialization exactly") {
  PipelineConfig cfg;
  for (double v : {1e-300, 0.1, 1.0 / 3.0, 123456.789, 5e-324, 1e17}) {
    cfg.mf.l2 = v;
    PipelineConfig back = parse_config(serialize_config(cfg));
    CHECK(back.mf.l2 == v);
  }
}

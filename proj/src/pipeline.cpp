#include "tagrec/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tagrec/errors.hpp"
#include "tagrec/serialize.hpp"

namespace fs = std::filesystem;

namespace tagrec {

namespace {

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " path configured");
  if (!fs::exists(path)) {
    throw DataError(std::string(what) + " file not found: " + path);
  }
}

InteractionFormat resolve_interaction_format(const PipelineConfig& cfg) {
  switch (cfg.data.format) {
    case DataFormat::citeulike: return InteractionFormat::adjacency;
    case DataFormat::canonical: return InteractionFormat::pairs;
    case DataFormat::auto_detect: break;
  }
  // auto: a pairs file is tab separated, adjacency lines are not
  std::ifstream in(cfg.data.interactions);
  if (!in) throw DataError("cannot open file: " + cfg.data.interactions);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    return line.find('\t') != std::string::npos ? InteractionFormat::pairs
                                                : InteractionFormat::adjacency;
  }
  return InteractionFormat::pairs;
}

std::string format_stats_line(int users, int items, std::size_t pairs, double density) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d users, %d items, %zu pairs, density %.2f%%", users, items,
                pairs, density * 100.0);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

void write_loss_log(const std::string& path, const std::vector<double>& losses) {
  std::ostringstream out;
  out << "epoch\tloss\n";
  char buf[48];
  for (std::size_t e = 0; e < losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\n", e + 1, losses[e]);
    out << buf;
  }
  write_text(path, out.str());
}

FeatureMatrix build_item_channel(FeatureKind kind, const Dataset& ds) {
  const int n_items = ds.interactions.n_items;
  switch (kind) {
    case FeatureKind::identity:
      return build_identity_features(n_items);
    case FeatureKind::tags:
      return build_tag_features(ds.documents, n_items, static_cast<int>(ds.tags.size()), true);
    case FeatureKind::tfidf:
      return build_tfidf_features(ds.documents, n_items, ds.vocab_size, true);
    case FeatureKind::dense:
      break;
  }
  throw ConfigError("dense is not a sparse item feature channel");
}

std::string resolve_embeddings_path(const PipelineConfig& cfg, const std::string& dir) {
  if (!cfg.embeddings.empty()) {
    if (fs::exists(cfg.embeddings)) return cfg.embeddings;
    const std::string in_dir = join(dir, cfg.embeddings.c_str());
    if (fs::exists(in_dir)) return in_dir;
    throw DataError("embeddings file not found: " + cfg.embeddings);
  }
  const std::string fallback = join(dir, artifact::kEmbeddings);
  if (fs::exists(fallback)) return fallback;
  throw ConfigError("dense mode needs an embeddings file (mf.embeddings)");
}

std::string default_model_name(const MfConfig& mf, FeatureKind item_features) {
  std::string name = to_string(mf.loss);
  if (item_features != FeatureKind::identity) name += "+" + to_string(item_features);
  if (mf.dense_mode != DenseMode::none) name += "+dense";
  return name;
}

struct LoadedModel {
  MfCheckpoint ckpt;
  FeatureMatrix item_features;
  DenseItemEmbeddings dense;
  bool has_dense = false;
};

LoadedModel load_model_for_dataset(const PipelineConfig& cfg, const std::string& dir,
                                   const Dataset& ds, const FeatureMatrix& user_features,
                                   const std::string& path) {
  LoadedModel lm;
  lm.ckpt = load_mf_checkpoint(path);
  if (lm.ckpt.split_p != cfg.split.p || lm.ckpt.split_seed != cfg.split.seed) {
    throw ConfigError("checkpoint " + path + " was trained on a different split (p=" +
                      std::to_string(lm.ckpt.split_p) + ", seed=" +
                      std::to_string(lm.ckpt.split_seed) + ")");
  }
  lm.item_features = build_item_channel(lm.ckpt.item_features, ds);
  if (lm.ckpt.model.n_user_features != user_features.n_features) {
    throw ConfigError("checkpoint " + path + " user feature space (" +
                      std::to_string(lm.ckpt.model.n_user_features) +
                      ") does not match this dataset (" +
                      std::to_string(user_features.n_features) + ")");
  }
  if (lm.ckpt.model.n_item_features != lm.item_features.n_features) {
    throw ConfigError("checkpoint " + path + " item feature space (" +
                      std::to_string(lm.ckpt.model.n_item_features) +
                      ") does not match this dataset (" +
                      std::to_string(lm.item_features.n_features) + ")");
  }
  if (lm.ckpt.model.dense_mode != DenseMode::none) {
    lm.dense = read_embeddings(resolve_embeddings_path(cfg, dir));
    lm.has_dense = true;
    if (lm.dense.n_items != ds.interactions.n_items) {
      throw DataError("embeddings cover " + std::to_string(lm.dense.n_items) + " items, dataset has " +
                      std::to_string(ds.interactions.n_items));
    }
    if (lm.dense.dim != lm.ckpt.model.dense_dim) {
      throw ConfigError("checkpoint " + path + " expects dense dim " +
                        std::to_string(lm.ckpt.model.dense_dim) + ", embeddings file has " +
                        std::to_string(lm.dense.dim));
    }
  }
  return lm;
}

}  // namespace

IngestStats run_ingest(const PipelineConfig& cfg, const std::string& out_dir) {
  require_file(cfg.data.interactions, "interactions");
  require_file(cfg.data.documents, "documents");
  require_file(cfg.data.item_tags, "item_tags");
  require_file(cfg.data.tags, "tags");

  InteractionMatrix m = parse_interactions(cfg.data.interactions, resolve_interaction_format(cfg));
  const std::vector<std::string> raw_tags = read_tag_names(cfg.data.tags);
  CorpusConfig corpus_cfg;
  corpus_cfg.vocab_size = cfg.corpus.vocab_size;
  corpus_cfg.s_max = cfg.corpus.s_max;
  corpus_cfg.w_max = cfg.corpus.w_max;
  ParsedDocuments parsed = parse_documents(cfg.data.documents, cfg.data.item_tags, corpus_cfg,
                                           static_cast<int>(raw_tags.size()));
  const TagVocabulary tag_vocab =
      build_tag_vocabulary(parsed.documents, raw_tags, cfg.corpus.n_tags);

  const int n_items = std::max(m.n_items, static_cast<int>(parsed.documents.size()));
  m.n_items = n_items;
  for (int i = static_cast<int>(parsed.documents.size()); i < n_items; ++i) {
    Document d;
    d.item_id = i;
    parsed.documents.push_back(std::move(d));
  }

  std::vector<std::string> titles = read_raw_titles(cfg.data.documents);
  titles.resize(n_items);
  std::vector<std::string> title_lines;
  title_lines.reserve(n_items);
  for (int i = 0; i < n_items; ++i) {
    std::string t = titles[i];
    for (char& c : t) {
      if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    title_lines.push_back(std::to_string(i) + "\t" + t);
  }

  fs::create_directories(out_dir);
  write_interactions_tsv(m, join(out_dir, artifact::kInteractions));
  write_documents_jsonl(parsed.documents, join(out_dir, artifact::kDocuments));
  write_lines(tag_vocab.tags, join(out_dir, artifact::kTags));
  write_lines(parsed.vocab.words, join(out_dir, artifact::kVocab));
  write_lines(title_lines, join(out_dir, artifact::kTitles));

  IngestStats stats;
  stats.n_users = m.n_users;
  stats.n_items = n_items;
  stats.n_tags = tag_vocab.size();
  stats.vocab_size = parsed.vocab.size();
  stats.n_pairs = m.total_pairs();
  stats.density = static_cast<double>(stats.n_pairs) /
                  (static_cast<double>(m.n_users) * static_cast<double>(n_items));
  stats.summary = format_stats_line(stats.n_users, stats.n_items, stats.n_pairs, stats.density);

  nlohmann::json j;
  j["users"] = stats.n_users;
  j["items"] = stats.n_items;
  j["pairs"] = stats.n_pairs;
  j["tags"] = stats.n_tags;
  j["vocab"] = stats.vocab_size;
  j["density"] = stats.density;
  write_text(join(out_dir, artifact::kStats), j.dump(2) + "\n");
  return stats;
}

Dataset load_dataset(const PipelineConfig& cfg, const std::string& dir) {
  Dataset ds;
  ds.interactions = read_interactions_tsv(join(dir, artifact::kInteractions));
  ds.documents = read_documents_jsonl(join(dir, artifact::kDocuments));
  ds.tags = read_lines(join(dir, artifact::kTags));
  ds.vocab_size = static_cast<int>(read_lines(join(dir, artifact::kVocab)).size());

  const int n_items =
      std::max(ds.interactions.n_items, static_cast<int>(ds.documents.size()));
  ds.interactions.n_items = n_items;
  for (int i = static_cast<int>(ds.documents.size()); i < n_items; ++i) {
    Document d;
    d.item_id = i;
    ds.documents.push_back(std::move(d));
  }
  for (int i = 0; i < n_items; ++i) {
    if (ds.documents[i].item_id != i) {
      throw DataError("documents are not in item order at line " + std::to_string(i + 1));
    }
    for (int t : ds.documents[i].tags) {
      if (t < 0 || t >= static_cast<int>(ds.tags.size())) {
        throw DataError("document " + std::to_string(i) + " references tag id " +
                        std::to_string(t) + " outside the tag vocabulary");
      }
    }
  }

  SplitConfig split_cfg;
  split_cfg.p_train_per_user = cfg.split.p;
  split_cfg.rng_seed = cfg.split.seed;
  split_leave_p_in(ds.interactions, split_cfg);
  return ds;
}

void run_features(const PipelineConfig& cfg, const std::string& dir) {
  const Dataset ds = load_dataset(cfg, dir);
  write_features_tsv(build_item_channel(FeatureKind::tags, ds),
                     join(dir, artifact::kTagFeatures));
  write_features_tsv(build_item_channel(FeatureKind::tfidf, ds),
                     join(dir, artifact::kTfidfFeatures));
}

std::vector<double> run_train_encoder(const PipelineConfig& cfg, const std::string& dir) {
  const Dataset ds = load_dataset(cfg, dir);
  if (cfg.encoder.n_tags != static_cast<int>(ds.tags.size())) {
    throw ConfigError("config says " + std::to_string(cfg.encoder.n_tags) +
                      " tags but the dataset has " + std::to_string(ds.tags.size()));
  }
  EncoderTrainResult result = train_encoder(ds.documents, ds.vocab_size, cfg.encoder);

  EncoderCheckpoint ckpt;
  ckpt.config = cfg.encoder;
  ckpt.vocab_size = ds.vocab_size;
  ckpt.params = std::move(result.params);
  save_encoder_checkpoint(join(dir, artifact::kEncoderCheckpoint), ckpt);
  write_loss_log(join(dir, artifact::kEncoderLog), result.epoch_losses);
  return result.epoch_losses;
}

int run_embed(const PipelineConfig& cfg, const std::string& dir) {
  const Dataset ds = load_dataset(cfg, dir);
  const EncoderCheckpoint ckpt = load_encoder_checkpoint(join(dir, artifact::kEncoderCheckpoint));
  if (ckpt.vocab_size != ds.vocab_size) {
    throw ConfigError("encoder checkpoint vocabulary (" + std::to_string(ckpt.vocab_size) +
                      ") does not match the dataset (" + std::to_string(ds.vocab_size) + ")");
  }
  int n_missing = 0;
  const DenseItemEmbeddings emb =
      export_embeddings(ds.documents, ds.interactions.n_items, ckpt.params, &n_missing);
  write_embeddings(emb, join(dir, artifact::kEmbeddings));
  return n_missing;
}

std::vector<double> run_train_mf(const PipelineConfig& cfg, const std::string& dir,
                                 const std::string& model_out, const std::string& name) {
  const Dataset ds = load_dataset(cfg, dir);
  const FeatureMatrix user_features = build_identity_features(ds.interactions.n_users);
  const FeatureMatrix item_features = build_item_channel(cfg.item_features, ds);

  DenseItemEmbeddings dense;
  const DenseItemEmbeddings* dense_ptr = nullptr;
  if (cfg.mf.dense_mode != DenseMode::none) {
    dense = read_embeddings(resolve_embeddings_path(cfg, dir));
    if (dense.n_items != ds.interactions.n_items) {
      throw DataError("embeddings cover " + std::to_string(dense.n_items) +
                      " items, dataset has " + std::to_string(ds.interactions.n_items));
    }
    dense_ptr = &dense;
  }

  Rng rng(cfg.mf.seed);
  FactorizationModel model =
      init_factorization_model(user_features.n_features, item_features.n_features,
                               dense_ptr ? dense.dim : 0, cfg.mf, rng);
  MfTrainer trainer(model, ds.interactions, user_features, item_features, dense_ptr, cfg.mf);
  std::vector<double> losses = trainer.train();

  MfCheckpoint ckpt;
  ckpt.config = cfg.mf;
  ckpt.item_features = cfg.item_features;
  ckpt.split_p = cfg.split.p;
  ckpt.split_seed = cfg.split.seed;
  ckpt.name = name.empty() ? default_model_name(cfg.mf, cfg.item_features) : name;
  ckpt.model = std::move(model);
  save_mf_checkpoint(model_out, ckpt);
  write_loss_log(model_out + ".log", losses);
  return losses;
}

EvaluationReport run_evaluate(const PipelineConfig& cfg, const std::string& dir,
                              const std::vector<std::string>& checkpoints, int threads) {
  if (checkpoints.empty()) throw ConfigError("evaluate needs at least one checkpoint");
  const Dataset ds = load_dataset(cfg, dir);
  const FeatureMatrix user_features = build_identity_features(ds.interactions.n_users);

  EvaluationReport report;
  report.ks = cfg.eval.ks;
  std::vector<RecallReport> recalls;
  for (const std::string& path : checkpoints) {
    const LoadedModel lm = load_model_for_dataset(cfg, dir, ds, user_features, path);
    const MfScorer scorer(lm.ckpt.model, user_features, lm.item_features,
                          lm.has_dense ? &lm.dense : nullptr);
    RecallReport rec = evaluate(scorer, ds.interactions, cfg.eval.ks, threads);
    EvaluationRow row;
    row.name = lm.ckpt.name.empty() ? fs::path(path).stem().string() : lm.ckpt.name;
    row.recall = rec.mean_recall;
    report.rows.push_back(std::move(row));
    recalls.push_back(std::move(rec));
  }
  report.users = static_cast<int>(recalls.front().users.size());
  report.excluded = recalls.front().excluded_users;

  const std::size_t n_ks = report.ks.size();
  if (report.rows.size() > 1) {
    for (std::size_t r = 1; r < report.rows.size(); ++r) {
      std::vector<double> a(recalls[r].per_user.size()), b(a.size());
      for (std::size_t ki = 0; ki < n_ks; ++ki) {
        for (std::size_t u = 0; u < a.size(); ++u) {
          a[u] = recalls[r].per_user[u][ki];
          b[u] = recalls[0].per_user[u][ki];
        }
        report.rows[r].vs_baseline.push_back(paired_ttest(a, b));
      }
    }
  }

  // render
  std::size_t name_w = 5;  // "model"
  for (const auto& row : report.rows) name_w = std::max(name_w, row.name.size());
  std::ostringstream out;
  char buf[64];
  out << std::string(name_w, ' ').replace(0, 5, "model");
  for (int k : report.ks) {
    std::snprintf(buf, sizeof buf, "%10s", ("R@" + std::to_string(k)).c_str());
    out << buf;
  }
  out << "\n";
  for (const auto& row : report.rows) {
    out << row.name << std::string(name_w - row.name.size(), ' ');
    for (double v : row.recall) {
      std::snprintf(buf, sizeof buf, "%10.4f", v);
      out << buf;
    }
    out << "\n";
  }
  if (report.rows.size() > 1) {
    out << "\ntwo-sided paired t-test p-values vs " << report.rows.front().name << ":\n";
    for (std::size_t r = 1; r < report.rows.size(); ++r) {
      const auto& row = report.rows[r];
      out << row.name << std::string(name_w - row.name.size(), ' ');
      for (const TTestResult& t : row.vs_baseline) {
        std::snprintf(buf, sizeof buf, "%10.3g", t.p);
        out << buf;
      }
      out << "\n";
    }
  }
  std::snprintf(buf, sizeof buf, "\n%d users evaluated, %d excluded\n", report.users,
                report.excluded);
  out << buf;
  report.table = out.str();

  nlohmann::json j;
  j["ks"] = report.ks;
  j["users"] = report.users;
  j["excluded"] = report.excluded;
  j["baseline"] = report.rows.front().name;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    nlohmann::json jr;
    jr["name"] = report.rows[r].name;
    jr["recall"] = report.rows[r].recall;
    if (r > 0) {
      std::vector<double> ps, ts;
      for (const TTestResult& t : report.rows[r].vs_baseline) {
        ps.push_back(t.p);
        ts.push_back(t.t);
      }
      jr["p_vs_baseline"] = ps;
      jr["t_vs_baseline"] = ts;
    }
    rows.push_back(std::move(jr));
  }
  j["models"] = std::move(rows);
  write_text(join(dir, artifact::kEvalReport), j.dump(2) + "\n");
  return report;
}

std::vector<Recommendation> run_recommend(const PipelineConfig& cfg, const std::string& dir,
                                          const std::string& checkpoint, int user, int k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  const Dataset ds = load_dataset(cfg, dir);
  const FeatureMatrix user_features = build_identity_features(ds.interactions.n_users);
  const LoadedModel lm = load_model_for_dataset(cfg, dir, ds, user_features, checkpoint);
  const MfScorer scorer(lm.ckpt.model, user_features, lm.item_features,
                        lm.has_dense ? &lm.dense : nullptr);
  const RankingResult ranking = rank_candidates(scorer, user, ds.interactions, k);

  std::vector<std::string> titles(ds.interactions.n_items);
  const std::string titles_path = join(dir, artifact::kTitles);
  if (fs::exists(titles_path)) {
    for (const std::string& line : read_lines(titles_path)) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      const int id = std::stoi(line.substr(0, tab));
      if (id >= 0 && id < static_cast<int>(titles.size())) titles[id] = line.substr(tab + 1);
    }
  }

  std::vector<Recommendation> recs;
  for (std::size_t i = 0; i < ranking.items.size(); ++i) {
    Recommendation r;
    r.item = ranking.items[i];
    r.score = ranking.scores[i];
    r.title = titles[r.item];
    recs.push_back(std::move(r));
  }
  return recs;
}

}  // namespace tagrec

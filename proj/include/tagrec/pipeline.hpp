#pragma once

#include <string>
#include <vector>

#include "tagrec/config.hpp"
#include "tagrec/corpus.hpp"
#include "tagrec/evaluation.hpp"
#include "tagrec/features.hpp"

namespace tagrec {

// File names inside a dataset/artifact directory.
namespace artifact {
inline constexpr const char* kInteractions = "interactions.tsv";
inline constexpr const char* kDocuments = "documents.jsonl";
inline constexpr const char* kTags = "tags.txt";
inline constexpr const char* kVocab = "vocab.txt";
inline constexpr const char* kTitles = "titles.tsv";
inline constexpr const char* kStats = "stats.json";
inline constexpr const char* kEmbeddings = "embeddings.txt";
inline constexpr const char* kEncoderCheckpoint = "encoder.ckpt";
inline constexpr const char* kEncoderLog = "encoder_train_log.tsv";
inline constexpr const char* kMfCheckpoint = "mf.ckpt";
inline constexpr const char* kTagFeatures = "item_features_tags.tsv";
inline constexpr const char* kTfidfFeatures = "item_features_tfidf.tsv";
inline constexpr const char* kEvalReport = "evaluation.json";
}  // namespace artifact

// Canonical artifacts loaded back into memory, split applied.
struct Dataset {
  InteractionMatrix interactions;
  std::vector<Document> documents;   // documents[k].item_id == k
  std::vector<std::string> tags;     // selected tag names, id order
  int vocab_size = 0;                // lines of vocab.txt, specials included
};

Dataset load_dataset(const PipelineConfig& cfg, const std::string& dir);

struct IngestStats {
  int n_users = 0;
  int n_items = 0;
  int n_tags = 0;
  int vocab_size = 0;
  std::size_t n_pairs = 0;
  double density = 0.0;   // fraction, not percent
  std::string summary;    // the one-line report the CLI prints
};

IngestStats run_ingest(const PipelineConfig& cfg, const std::string& out_dir);

// Materializes the sparse item feature channels as TSVs.
void run_features(const PipelineConfig& cfg, const std::string& dir);

// Returns per-epoch mean losses; writes checkpoint + log into dir.
std::vector<double> run_train_encoder(const PipelineConfig& cfg, const std::string& dir);

// Encoder checkpoint -> document embedding file. Returns the number of
// items without text (zero vectors).
int run_embed(const PipelineConfig& cfg, const std::string& dir);

std::vector<double> run_train_mf(const PipelineConfig& cfg, const std::string& dir,
                                 const std::string& model_out, const std::string& name);

struct EvaluationRow {
  std::string name;
  std::vector<double> recall;          // per K
  std::vector<TTestResult> vs_baseline;  // per K; empty on the baseline row
};

struct EvaluationReport {
  std::vector<int> ks;
  std::vector<EvaluationRow> rows;  // rows[0] is the baseline
  int users = 0;
  int excluded = 0;
  std::string table;  // rendered text the CLI prints
};

EvaluationReport run_evaluate(const PipelineConfig& cfg, const std::string& dir,
                              const std::vector<std::string>& checkpoints, int threads);

struct Recommendation {
  int item = -1;
  double score = 0.0;
  std::string title;  // empty when no titles file is present
};

std::vector<Recommendation> run_recommend(const PipelineConfig& cfg, const std::string& dir,
                                          const std::string& checkpoint, int user, int k);

}  // namespace tagrec

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagrec/encoder.hpp"
#include "tagrec/factorization.hpp"
#include "tagrec/features.hpp"

namespace tagrec {

enum class DataFormat { auto_detect, citeulike, canonical };

// Everything the pipeline needs, read from one sectioned key/value
// file. Corpus limits (s_max, w_max, n_tags) are stated once under
// [corpus] and copied into the encoder config on parse.
struct PipelineConfig {
  struct Data {
    std::string interactions;
    std::string documents;
    std::string item_tags;  // per-item raw tag id lists
    std::string tags;       // raw tag names, one per line
    DataFormat format = DataFormat::auto_detect;
    bool operator==(const Data&) const = default;
  } data;

  struct Corpus {
    int vocab_size = 20000;
    int s_max = 10;
    int w_max = 50;
    int n_tags = 300;
    bool operator==(const Corpus&) const = default;
  } corpus;

  struct SplitSection {
    int p = 10;
    std::uint64_t seed = 42;
    bool operator==(const SplitSection&) const = default;
  } split;

  EncoderConfig encoder;
  MfConfig mf;
  FeatureKind item_features = FeatureKind::identity;  // identity | tags | tfidf
  std::string embeddings;  // dense channel file, needed when mf.dense_mode != none

  struct Eval {
    std::vector<int> ks{50, 100, 150, 200};
    bool operator==(const Eval&) const = default;
  } eval;

  bool operator==(const PipelineConfig&) const = default;
};

PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::string& path);
std::string serialize_config(const PipelineConfig& cfg);

// Numeric range checks; file existence is checked by the stages that
// actually read the files.
void validate_config(const PipelineConfig& cfg);

std::string to_string(LossKind k);
std::string to_string(DenseMode m);
std::string to_string(FeatureKind k);
std::string to_string(DataFormat f);

LossKind loss_from_string(const std::string& s);
DenseMode dense_mode_from_string(const std::string& s);
FeatureKind feature_kind_from_string(const std::string& s);
DataFormat data_format_from_string(const std::string& s);

}  // namespace tagrec

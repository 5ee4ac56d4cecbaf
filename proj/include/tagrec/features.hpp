#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tagrec/corpus.hpp"

namespace tagrec {

enum class FeatureKind { identity, tags, tfidf, dense };

// Sparse binary/weighted feature rows, one per entity (items here;
// users reuse the same shape with identity features only).
struct FeatureMatrix {
  int n_rows = 0;
  int n_features = 0;
  FeatureKind kind = FeatureKind::identity;
  std::vector<std::vector<std::pair<int, double>>> rows;  // sorted by feature id

  bool operator==(const FeatureMatrix&) const = default;
};

struct DenseItemEmbeddings {
  int n_items = 0;
  int dim = 0;
  std::vector<double> values;  // row-major n_items x dim

  const double* row(int item) const { return values.data() + static_cast<std::size_t>(item) * dim; }
  double* row(int item) { return values.data() + static_cast<std::size_t>(item) * dim; }
};

// row j = {(j, 1.0)}
FeatureMatrix build_identity_features(int n_rows);

// identity block (optional) ++ T tag indicators; weight 1 at each of
// the item's top-T tags.
FeatureMatrix build_tag_features(const std::vector<Document>& documents, int n_items, int n_tags,
                                 bool include_identity);

// tf = raw count, idf = ln(N/df), L2-normalized rows; terms present in
// every document vanish (idf = 0) and are dropped. Token ids < 2 (pad,
// oov) never become features.
FeatureMatrix build_tfidf_features(const std::vector<Document>& documents, int n_items,
                                   int vocab_size, bool include_identity);

void write_features_tsv(const FeatureMatrix& fm, const std::string& path);

// "n_items dim" header, then "item_id v1 ... v_dim" with 9 significant
// digits per value.
void write_embeddings(const DenseItemEmbeddings& emb, const std::string& path);
DenseItemEmbeddings read_embeddings(const std::string& path);

}  // namespace tagrec

#include "tagrec/features.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tagrec/errors.hpp"

namespace tagrec {

FeatureMatrix build_identity_features(int n_rows) {
  if (n_rows < 1) throw ConfigError("identity features need at least one row");
  FeatureMatrix fm;
  fm.n_rows = n_rows;
  fm.n_features = n_rows;
  fm.kind = FeatureKind::identity;
  fm.rows.resize(n_rows);
  for (int j = 0; j < n_rows; ++j) fm.rows[j] = {{j, 1.0}};
  return fm;
}

FeatureMatrix build_tag_features(const std::vector<Document>& documents, int n_items, int n_tags,
                                 bool include_identity) {
  FeatureMatrix fm;
  fm.n_rows = n_items;
  fm.kind = FeatureKind::tags;
  const int base = include_identity ? n_items : 0;
  fm.n_features = base + n_tags;
  fm.rows.resize(n_items);
  if (include_identity) {
    for (int j = 0; j < n_items; ++j) fm.rows[j].emplace_back(j, 1.0);
  }
  for (const auto& doc : documents) {
    if (doc.item_id < 0 || doc.item_id >= n_items) continue;
    for (int tag : doc.tags) {
      if (tag < 0 || tag >= n_tags) {
        throw DataError("tag id " + std::to_string(tag) + " outside [0, " +
                        std::to_string(n_tags) + ") for item " + std::to_string(doc.item_id));
      }
      fm.rows[doc.item_id].emplace_back(base + tag, 1.0);
    }
  }
  return fm;
}

FeatureMatrix build_tfidf_features(const std::vector<Document>& documents, int n_items,
                                   int vocab_size, bool include_identity) {
  if (documents.empty()) throw DataError("tf-idf needs a non-empty corpus");
  FeatureMatrix fm;
  fm.n_rows = n_items;
  fm.kind = FeatureKind::tfidf;
  const int base = include_identity ? n_items : 0;
  fm.n_features = base + vocab_size;
  fm.rows.resize(n_items);

  // document frequencies; pad/oov ids never count as terms
  const double n_docs = static_cast<double>(documents.size());
  std::vector<std::int64_t> df(vocab_size, 0);
  std::vector<std::map<int, int>> tf(documents.size());
  for (std::size_t k = 0; k < documents.size(); ++k) {
    for (const auto& sent : documents[k].sentences) {
      for (int w : sent) {
        if (w < 2 || w >= vocab_size) continue;
        ++tf[k][w];
      }
    }
    for (const auto& [w, c] : tf[k]) ++df[w];
  }

  if (include_identity) {
    for (int j = 0; j < n_items; ++j) fm.rows[j].emplace_back(j, 1.0);
  }
  for (std::size_t k = 0; k < documents.size(); ++k) {
    const int item = documents[k].item_id;
    if (item < 0 || item >= n_items) continue;
    std::vector<std::pair<int, double>> weights;
    double norm_sq = 0.0;
    for (const auto& [w, c] : tf[k]) {
      const double idf = std::log(n_docs / static_cast<double>(df[w]));
      const double weight = static_cast<double>(c) * idf;
      if (weight > 0.0) {
        weights.emplace_back(w, weight);
        norm_sq += weight * weight;
      }
    }
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (auto& [w, weight] : weights) {
        fm.rows[item].emplace_back(base + w, weight * inv);
      }
    }
  }
  return fm;
}

void write_features_tsv(const FeatureMatrix& fm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  char buf[64];
  for (int j = 0; j < fm.n_rows; ++j) {
    for (const auto& [f, w] : fm.rows[j]) {
      std::snprintf(buf, sizeof(buf), "%.9g", w);
      out << j << '\t' << f << '\t' << buf << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_embeddings(const DenseItemEmbeddings& emb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << emb.n_items << ' ' << emb.dim << '\n';
  char buf[64];
  for (int j = 0; j < emb.n_items; ++j) {
    out << j;
    const double* v = emb.row(j);
    for (int k = 0; k < emb.dim; ++k) {
      std::snprintf(buf, sizeof(buf), "%.9g", v[k]);
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

DenseItemEmbeddings read_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  DenseItemEmbeddings emb;
  if (!(in >> emb.n_items >> emb.dim) || emb.n_items < 0 || emb.dim < 1) {
    throw DataError(path + ": bad embeddings header");
  }
  emb.values.assign(static_cast<std::size_t>(emb.n_items) * emb.dim, 0.0);
  for (int j = 0; j < emb.n_items; ++j) {
    int id = -1;
    if (!(in >> id) || id != j) {
      throw DataError(path + ": expected item id " + std::to_string(j));
    }
    double* v = emb.row(j);
    for (int k = 0; k < emb.dim; ++k) {
      if (!(in >> v[k]) || !std::isfinite(v[k])) {
        throw DataError(path + ": bad value for item " + std::to_string(j));
      }
    }
  }
  return emb;
}

}  // namespace tagrec

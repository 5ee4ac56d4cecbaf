#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tagrec/errors.hpp"

namespace tagrec {

enum class Split : unsigned char { train = 0, test = 1 };

// Sparse user x item implicit-feedback matrix. Rows are sorted and
// duplicate-free; split tags are aligned with rows once a split has
// been applied. Immutable after construction, safe to share read-only.
struct InteractionMatrix {
  int n_users = 0;
  int n_items = 0;
  std::vector<std::vector<int>> rows;
  std::vector<std::vector<Split>> split;  // empty until split_leave_p_in
  std::vector<char> excluded;             // per user: no test items

  bool has_split() const { return !split.empty(); }
  std::size_t total_pairs() const;
  std::vector<int> train_items(int user) const;
  std::vector<int> test_items(int user) const;
  bool is_train(int user, int item) const;
};

// One item's text as sentences of token ids plus its tag label set.
// Tag ids live in the raw tag space after parsing and are re-indexed
// into [0, T) by build_tag_vocabulary.
struct Document {
  int item_id = -1;
  std::vector<std::vector<int>> sentences;
  std::vector<int> tags;  // sorted, unique

  bool operator==(const Document&) const = default;
};

struct TagVocabulary {
  std::vector<std::string> tags;       // ordered: frequency desc, name asc
  std::vector<std::int64_t> frequency;  // item-occurrence counts, aligned

  int size() const { return static_cast<int>(tags.size()); }
};

struct WordVocabulary {
  static constexpr int kPadId = 0;
  static constexpr int kOovId = 1;

  std::vector<std::string> words;  // index = token id; [0]=<pad>, [1]=<oov>
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(words.size()); }
  int id_of(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? kOovId : it->second;
  }
};

struct SplitConfig {
  int p_train_per_user = 10;
  std::uint64_t rng_seed = 0;
};

struct CorpusConfig {
  int vocab_size = 20000;  // top-N words kept; everything else -> OOV
  int s_max = 10;          // max sentences per document
  int w_max = 50;          // max tokens per sentence
};

enum class InteractionFormat { adjacency, pairs };

// --- text utilities -------------------------------------------------------

// Lowercase, split on non-alphanumeric, drop pure-digit tokens.
std::vector<std::string> tokenize(std::string_view text);

// Split on [.!?]+ followed by whitespace (or end of text).
std::vector<std::string> split_sentences(std::string_view text);

// --- parsing --------------------------------------------------------------

// adjacency: line k = user k, whitespace-separated item ids, optional
// leading count field (detected when the first field equals the number
// of remaining fields). pairs: "user_id\titem_id" per line.
InteractionMatrix parse_interactions(const std::string& path, InteractionFormat format);

struct ParsedDocuments {
  std::vector<Document> documents;  // documents[k].item_id == k
  WordVocabulary vocab;
};

// text_path: either "title\tabstract" per line (line k = item k) or a
// citeulike-style CSV (detected by .csv extension) with doc.id /
// raw.title / raw.abstract columns. tag_map_path: line k = item k,
// leading count then raw tag ids. n_raw_tags >= 0 enables tag id
// validation.
ParsedDocuments parse_documents(const std::string& text_path, const std::string& tag_map_path,
                                const CorpusConfig& cfg, int n_raw_tags = -1);

// Reads one tag name per line (line k = raw tag id k).
std::vector<std::string> read_tag_names(const std::string& path);

// Raw titles only, same input detection as parse_documents. Used to
// label recommendations.
std::vector<std::string> read_raw_titles(const std::string& text_path);

// Selects the top-t tags by item-occurrence frequency (ties broken by
// name) and re-indexes every document's tags into [0, t). Items whose
// tags all fall outside the top-t end up with empty label sets.
TagVocabulary build_tag_vocabulary(std::vector<Document>& documents,
                                   const std::vector<std::string>& raw_tags, int t);

// Tags min(P, |items|) random items per user as train, the rest as
// test; users left without test items get the excluded flag.
void split_leave_p_in(InteractionMatrix& m, const SplitConfig& cfg);

// --- canonical on-disk formats ---------------------------------------------

void write_interactions_tsv(const InteractionMatrix& m, const std::string& path);
InteractionMatrix read_interactions_tsv(const std::string& path);

void write_documents_jsonl(const std::vector<Document>& docs, const std::string& path);
std::vector<Document> read_documents_jsonl(const std::string& path);

void write_lines(const std::vector<std::string>& lines, const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace tagrec

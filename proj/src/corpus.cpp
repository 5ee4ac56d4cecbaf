#include "tagrec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tagrec/rng.hpp"

namespace tagrec {

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

bool is_ascii_alnum(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z');
}

bool is_digit_token(const std::string& t) {
  return std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Splits a whitespace-separated line of non-negative integers.
std::vector<long long> parse_int_fields(const std::string& line, const std::string& path,
                                        std::size_t line_no) {
  std::vector<long long> out;
  std::istringstream iss(line);
  std::string field;
  while (iss >> field) {
    long long v = 0;
    try {
      std::size_t pos = 0;
      v = std::stoll(field, &pos);
      if (pos != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed field '" + field + "'");
    }
    if (v < 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": negative id " + field);
    }
    out.push_back(v);
  }
  return out;
}

void check_id_range(long long v, const std::string& path, std::size_t line_no) {
  constexpr long long kMaxId = 100'000'000;
  if (v > kMaxId) {
    throw DataError(path + ":" + std::to_string(line_no) + ": id " + std::to_string(v) +
                    " exceeds supported range");
  }
}

void sort_dedup(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Minimal RFC4180-ish CSV: quoted fields may contain commas, escaped
// quotes ("") and newlines.
std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      record.push_back(std::move(field));
      field.clear();
      if (record.size() > 1 || !record[0].empty()) records.push_back(std::move(record));
      record.clear();
    } else {
      field += c;
    }
  }
  if (!field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

struct RawText {
  std::string title;
  std::string abstract;
};

std::vector<RawText> load_raw_text_tsv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<RawText> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    RawText t;
    if (tab == std::string::npos) {
      t.title = line;
    } else {
      t.title = line.substr(0, tab);
      t.abstract = line.substr(tab + 1);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<RawText> load_raw_text_csv(const std::string& path) {
  auto records = read_csv(path);
  if (records.empty()) return {};
  const auto& header = records.front();
  auto col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int id_col = col("doc.id");
  int title_col = col("raw.title");
  if (title_col < 0) title_col = col("title");
  int abstract_col = col("raw.abstract");
  if (abstract_col < 0) abstract_col = col("abstract");
  if (id_col < 0 || title_col < 0) {
    throw DataError(path + ": missing doc.id/title columns in CSV header");
  }
  std::vector<RawText> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (static_cast<int>(rec.size()) <= std::max(title_col, id_col)) {
      throw DataError(path + ":" + std::to_string(r + 1) + ": too few CSV fields");
    }
    long long id = 0;
    try {
      id = std::stoll(rec[id_col]);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(r + 1) + ": bad doc.id '" + rec[id_col] + "'");
    }
    // citeulike doc ids are 1-based
    const long long item = id - 1;
    if (item < 0) throw DataError(path + ":" + std::to_string(r + 1) + ": doc.id below 1");
    check_id_range(item, path, r + 1);
    if (static_cast<long long>(out.size()) <= item) out.resize(item + 1);
    out[item].title = rec[title_col];
    if (abstract_col >= 0 && abstract_col < static_cast<int>(rec.size())) {
      out[item].abstract = rec[abstract_col];
    }
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::size_t InteractionMatrix::total_pairs() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  return n;
}

std::vector<int> InteractionMatrix::train_items(int user) const {
  std::vector<int> out;
  const auto& r = rows[user];
  const auto& s = split[user];
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (s[i] == Split::train) out.push_back(r[i]);
  }
  return out;
}

std::vector<int> InteractionMatrix::test_items(int user) const {
  std::vector<int> out;
  const auto& r = rows[user];
  const auto& s = split[user];
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (s[i] == Split::test) out.push_back(r[i]);
  }
  return out;
}

bool InteractionMatrix::is_train(int user, int item) const {
  const auto& r = rows[user];
  const auto it = std::lower_bound(r.begin(), r.end(), item);
  if (it == r.end() || *it != item) return false;
  return split[user][static_cast<std::size_t>(it - r.begin())] == Split::train;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_ascii_alnum(c)) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      if (!is_digit_token(cur)) out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty() && !is_digit_token(cur)) out.push_back(cur);
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i;
      while (j + 1 < text.size() && (text[j + 1] == '.' || text[j + 1] == '!' || text[j + 1] == '?')) {
        ++j;
      }
      const bool at_end = (j + 1 == text.size());
      const bool before_space =
          !at_end && std::isspace(static_cast<unsigned char>(text[j + 1]));
      if (at_end || before_space) {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
        i = j;
        continue;
      }
    }
    cur += c;
  }
  if (!cur.empty()) out.push_back(cur);
  // trim and keep only sentences with at least one token-able character
  std::vector<std::string> filtered;
  for (auto& s : out) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    if (b == e) continue;
    std::string t = s.substr(b, e - b);
    if (std::any_of(t.begin(), t.end(), is_ascii_alnum)) filtered.push_back(std::move(t));
  }
  return filtered;
}

InteractionMatrix parse_interactions(const std::string& path, InteractionFormat format) {
  std::ifstream in = open_or_throw(path);
  InteractionMatrix m;
  std::string line;
  std::size_t line_no = 0;
  long long max_item = -1;

  if (format == InteractionFormat::adjacency) {
    // leading count detection is a whole-file decision: counted only
    // when every non-empty line's first field equals the remaining
    // field count (citeulike's users.dat has this shape)
    std::vector<std::vector<long long>> lines;
    bool counted = false, saw_fields = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(parse_int_fields(line, path, line_no));
      const auto& fields = lines.back();
      if (!fields.empty()) {
        const bool fits = fields[0] == static_cast<long long>(fields.size()) - 1;
        counted = saw_fields ? (counted && fits) : fits;
        saw_fields = true;
      }
    }
    line_no = 0;
    for (auto& fields : lines) {
      ++line_no;
      if (counted && !fields.empty()) fields.erase(fields.begin());
      std::vector<int> row;
      row.reserve(fields.size());
      for (long long v : fields) {
        check_id_range(v, path, line_no);
        row.push_back(static_cast<int>(v));
        max_item = std::max(max_item, v);
      }
      sort_dedup(row);
      m.rows.push_back(std::move(row));
    }
  } else {
    std::vector<std::pair<int, int>> pairs;
    long long max_user = -1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = parse_int_fields(line, path, line_no);
      if (fields.size() != 2) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": expected 'user<TAB>item', got " + std::to_string(fields.size()) +
                        " fields");
      }
      check_id_range(fields[0], path, line_no);
      check_id_range(fields[1], path, line_no);
      pairs.emplace_back(static_cast<int>(fields[0]), static_cast<int>(fields[1]));
      max_user = std::max(max_user, fields[0]);
      max_item = std::max(max_item, fields[1]);
    }
    m.rows.resize(max_user + 1);
    for (auto [u, i] : pairs) m.rows[u].push_back(i);
    for (auto& r : m.rows) sort_dedup(r);
  }

  m.n_users = static_cast<int>(m.rows.size());
  m.n_items = static_cast<int>(max_item + 1);
  return m;
}

std::vector<std::string> read_raw_titles(const std::string& text_path) {
  std::vector<RawText> raw = ends_with(text_path, ".csv") ? load_raw_text_csv(text_path)
                                                          : load_raw_text_tsv(text_path);
  std::vector<std::string> titles;
  titles.reserve(raw.size());
  for (auto& t : raw) titles.push_back(std::move(t.title));
  return titles;
}

ParsedDocuments parse_documents(const std::string& text_path, const std::string& tag_map_path,
                                const CorpusConfig& cfg, int n_raw_tags) {
  std::vector<RawText> raw = ends_with(text_path, ".csv") ? load_raw_text_csv(text_path)
                                                          : load_raw_text_tsv(text_path);

  // tag map: line k = item k, leading count then tag ids
  std::vector<std::vector<int>> item_tags;
  {
    std::ifstream in = open_or_throw(tag_map_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      auto fields = parse_int_fields(line, tag_map_path, line_no);
      if (!fields.empty() && fields[0] == static_cast<long long>(fields.size()) - 1) {
        fields.erase(fields.begin());
      }
      std::vector<int> tags;
      for (long long v : fields) {
        if (n_raw_tags >= 0 && v >= n_raw_tags) {
          throw DataError(tag_map_path + ":" + std::to_string(line_no) + ": tag id " +
                          std::to_string(v) + " >= raw tag count " + std::to_string(n_raw_tags));
        }
        check_id_range(v, tag_map_path, line_no);
        tags.push_back(static_cast<int>(v));
      }
      sort_dedup(tags);
      item_tags.push_back(std::move(tags));
    }
  }

  const std::size_t n_items = std::max(raw.size(), item_tags.size());
  raw.resize(n_items);
  item_tags.resize(n_items);

  // pass 1: word frequencies over title + abstract
  std::unordered_map<std::string, std::int64_t> freq;
  for (const auto& rt : raw) {
    for (const auto& t : tokenize(rt.title)) ++freq[t];
    for (const auto& t : tokenize(rt.abstract)) ++freq[t];
  }

  // vocabulary: top vocab_size by (frequency desc, word asc), ids from 2
  std::vector<std::pair<std::string, std::int64_t>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(by_freq.size()) > cfg.vocab_size) by_freq.resize(cfg.vocab_size);

  ParsedDocuments out;
  out.vocab.words = {"<pad>", "<oov>"};
  for (const auto& [w, f] : by_freq) {
    out.vocab.index.emplace(w, out.vocab.size());
    out.vocab.words.push_back(w);
  }

  // pass 2: documents; title is sentence 0, abstract split on [.!?]
  out.documents.reserve(n_items);
  for (std::size_t k = 0; k < n_items; ++k) {
    Document doc;
    doc.item_id = static_cast<int>(k);
    std::vector<std::string> sents;
    if (!raw[k].title.empty()) sents.push_back(raw[k].title);
    for (auto& s : split_sentences(raw[k].abstract)) sents.push_back(std::move(s));
    for (const auto& s : sents) {
      if (static_cast<int>(doc.sentences.size()) >= cfg.s_max) break;
      auto tokens = tokenize(s);
      if (tokens.empty()) continue;
      if (static_cast<int>(tokens.size()) > cfg.w_max) tokens.resize(cfg.w_max);
      std::vector<int> ids;
      ids.reserve(tokens.size());
      for (const auto& t : tokens) ids.push_back(out.vocab.id_of(t));
      doc.sentences.push_back(std::move(ids));
    }
    doc.tags = item_tags[k];
    out.documents.push_back(std::move(doc));
  }
  return out;
}

std::vector<std::string> read_tag_names(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

TagVocabulary build_tag_vocabulary(std::vector<Document>& documents,
                                   const std::vector<std::string>& raw_tags, int t) {
  if (t < 1) throw ConfigError("tag vocabulary size must be >= 1");
  std::vector<std::int64_t> counts(raw_tags.size(), 0);
  for (const auto& doc : documents) {
    for (int tag : doc.tags) {
      if (tag < 0 || tag >= static_cast<int>(raw_tags.size())) {
        throw DataError("tag id " + std::to_string(tag) + " outside raw tag list of size " +
                        std::to_string(raw_tags.size()));
      }
      ++counts[tag];
    }
  }

  std::vector<int> occurring;
  for (int i = 0; i < static_cast<int>(counts.size()); ++i) {
    if (counts[i] > 0) occurring.push_back(i);
  }
  if (t > static_cast<int>(occurring.size())) {
    throw DataError("requested top-" + std::to_string(t) + " tags but only " +
                    std::to_string(occurring.size()) + " distinct tags occur");
  }
  std::sort(occurring.begin(), occurring.end(), [&](int a, int b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return raw_tags[a] < raw_tags[b];
  });
  occurring.resize(t);

  TagVocabulary vocab;
  std::unordered_map<int, int> remap;
  vocab.tags.reserve(t);
  vocab.frequency.reserve(t);
  for (int new_id = 0; new_id < t; ++new_id) {
    const int raw_id = occurring[new_id];
    remap.emplace(raw_id, new_id);
    vocab.tags.push_back(raw_tags[raw_id]);
    vocab.frequency.push_back(counts[raw_id]);
  }

  for (auto& doc : documents) {
    std::vector<int> mapped;
    for (int tag : doc.tags) {
      auto it = remap.find(tag);
      if (it != remap.end()) mapped.push_back(it->second);
    }
    sort_dedup(mapped);
    doc.tags = std::move(mapped);
  }
  return vocab;
}

void split_leave_p_in(InteractionMatrix& m, const SplitConfig& cfg) {
  if (cfg.p_train_per_user < 1) throw ConfigError("p_train_per_user must be >= 1");
  Rng rng(cfg.rng_seed);
  m.split.assign(m.n_users, {});
  m.excluded.assign(m.n_users, 0);
  for (int u = 0; u < m.n_users; ++u) {
    const auto& row = m.rows[u];
    const int n = static_cast<int>(row.size());
    const int p = std::min(cfg.p_train_per_user, n);
    // partial Fisher-Yates over positions; first p land in train
    std::vector<int> pos(n);
    for (int i = 0; i < n; ++i) pos[i] = i;
    for (int i = 0; i < p; ++i) {
      const int j = i + static_cast<int>(rng.below(n - i));
      std::swap(pos[i], pos[j]);
    }
    m.split[u].assign(n, Split::test);
    for (int i = 0; i < p; ++i) m.split[u][pos[i]] = Split::train;
    if (n - p == 0) m.excluded[u] = 1;
  }
}

void write_interactions_tsv(const InteractionMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (int u = 0; u < m.n_users; ++u) {
    for (int i : m.rows[u]) out << u << '\t' << i << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

InteractionMatrix read_interactions_tsv(const std::string& path) {
  return parse_interactions(path, InteractionFormat::pairs);
}

void write_documents_jsonl(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (const auto& doc : docs) {
    nlohmann::json j;
    j["id"] = doc.item_id;
    j["sentences"] = doc.sentences;
    j["tags"] = doc.tags;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<Document> read_documents_jsonl(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    Document doc;
    doc.item_id = j.at("id").get<int>();
    doc.sentences = j.at("sentences").get<std::vector<std::vector<int>>>();
    doc.tags = j.at("tags").get<std::vector<int>>();
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DataError("write failed: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

}  // namespace tagrec

#include "tagrec/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tagrec/errors.hpp"

namespace tagrec {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int parse_i(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    if (x < -1000000000LL || x > 1000000000LL) throw std::out_of_range("range");
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("bad integer for '" + key + "': " + v);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("sign");
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad seed for '" + key + "': " + v);
  }
}

// strtod wrapper: std::stod throws out_of_range even for subnormals,
// which are perfectly representable. Only true overflow is an error.
bool str_to_double(const std::string& v, double& out) {
  if (v.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) return false;
  if (errno == ERANGE && (x == HUGE_VAL || x == -HUGE_VAL)) return false;
  out = x;
  return true;
}

double parse_d(const std::string& key, const std::string& v) {
  double x = 0.0;
  if (!str_to_double(v, x) || !std::isfinite(x)) {
    throw ConfigError("bad number for '" + key + "': " + v);
  }
  return x;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) throw ConfigError("empty element in '" + key + "'");
    out.push_back(parse_i(key, part));
  }
  if (out.empty()) throw ConfigError("empty list for '" + key + "'");
  return out;
}

// Shortest decimal form that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    if (str_to_double(buf, back) && back == v) break;
  }
  return buf;
}

}  // namespace

std::string to_string(LossKind k) { return k == LossKind::bpr ? "bpr" : "warp"; }

std::string to_string(DenseMode m) {
  switch (m) {
    case DenseMode::none: return "none";
    case DenseMode::bias: return "bias";
    case DenseMode::bias_factors: return "bias_factors";
  }
  return "none";
}

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::identity: return "identity";
    case FeatureKind::tags: return "tags";
    case FeatureKind::tfidf: return "tfidf";
    case FeatureKind::dense: return "dense";
  }
  return "identity";
}

std::string to_string(DataFormat f) {
  switch (f) {
    case DataFormat::auto_detect: return "auto";
    case DataFormat::citeulike: return "citeulike";
    case DataFormat::canonical: return "canonical";
  }
  return "auto";
}

LossKind loss_from_string(const std::string& s) {
  if (s == "bpr") return LossKind::bpr;
  if (s == "warp") return LossKind::warp;
  throw ConfigError("unknown loss '" + s + "' (expected bpr or warp)");
}

DenseMode dense_mode_from_string(const std::string& s) {
  if (s == "none") return DenseMode::none;
  if (s == "bias") return DenseMode::bias;
  if (s == "bias_factors") return DenseMode::bias_factors;
  throw ConfigError("unknown dense_mode '" + s + "'");
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "identity") return FeatureKind::identity;
  if (s == "tags") return FeatureKind::tags;
  if (s == "tfidf") return FeatureKind::tfidf;
  throw ConfigError("unknown item_features '" + s + "' (expected identity, tags or tfidf)");
}

DataFormat data_format_from_string(const std::string& s) {
  if (s == "auto") return DataFormat::auto_detect;
  if (s == "citeulike") return DataFormat::citeulike;
  if (s == "canonical") return DataFormat::canonical;
  throw ConfigError("unknown data format '" + s + "'");
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    // inline comments: '#' preceded by whitespace starts one
    for (std::size_t i = 1; i < line.size(); ++i) {
      if (line[i] == '#' && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
        line = trim(line.substr(0, i));
        break;
      }
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "corpus" && section != "split" &&
          section != "encoder" && section != "mf" && section != "eval") {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section +
                          "]");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
    }

    bool known = true;
    if (section == "data") {
      if (key == "interactions") cfg.data.interactions = val;
      else if (key == "documents") cfg.data.documents = val;
      else if (key == "item_tags") cfg.data.item_tags = val;
      else if (key == "tags") cfg.data.tags = val;
      else if (key == "format") cfg.data.format = data_format_from_string(val);
      else known = false;
    } else if (section == "corpus") {
      if (key == "vocab_size") cfg.corpus.vocab_size = parse_i(key, val);
      else if (key == "s_max") cfg.corpus.s_max = parse_i(key, val);
      else if (key == "w_max") cfg.corpus.w_max = parse_i(key, val);
      else if (key == "n_tags") cfg.corpus.n_tags = parse_i(key, val);
      else known = false;
    } else if (section == "split") {
      if (key == "p") cfg.split.p = parse_i(key, val);
      else if (key == "seed") cfg.split.seed = parse_u64(key, val);
      else known = false;
    } else if (section == "encoder") {
      if (key == "embed_dim") cfg.encoder.embed_dim = parse_i(key, val);
      else if (key == "hidden_dim") cfg.encoder.hidden_dim = parse_i(key, val);
      else if (key == "attn_dim") cfg.encoder.attn_dim = parse_i(key, val);
      else if (key == "learning_rate") cfg.encoder.learning_rate = parse_d(key, val);
      else if (key == "batch_size") cfg.encoder.batch_size = parse_i(key, val);
      else if (key == "epochs") cfg.encoder.epochs = parse_i(key, val);
      else if (key == "seed") cfg.encoder.seed = parse_u64(key, val);
      else known = false;
    } else if (section == "mf") {
      if (key == "loss") cfg.mf.loss = loss_from_string(val);
      else if (key == "latent_dim") cfg.mf.latent_dim = parse_i(key, val);
      else if (key == "l2") cfg.mf.l2 = parse_d(key, val);
      else if (key == "epochs") cfg.mf.epochs = parse_i(key, val);
      else if (key == "learning_rate") cfg.mf.learning_rate = parse_d(key, val);
      else if (key == "max_warp_trials") cfg.mf.max_warp_trials = parse_i(key, val);
      else if (key == "seed") cfg.mf.seed = parse_u64(key, val);
      else if (key == "dense_mode") cfg.mf.dense_mode = dense_mode_from_string(val);
      else if (key == "item_features") cfg.item_features = feature_kind_from_string(val);
      else if (key == "embeddings") cfg.embeddings = val;
      else known = false;
    } else if (section == "eval") {
      if (key == "ks") cfg.eval.ks = parse_int_list(key, val);
      else known = false;
    }
    if (!known) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key +
                        "' in section [" + section + "]");
    }
  }

  cfg.encoder.s_max = cfg.corpus.s_max;
  cfg.encoder.w_max = cfg.corpus.w_max;
  cfg.encoder.n_tags = cfg.corpus.n_tags;
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "[data]\n";
  out << "interactions = " << cfg.data.interactions << "\n";
  out << "documents = " << cfg.data.documents << "\n";
  out << "item_tags = " << cfg.data.item_tags << "\n";
  out << "tags = " << cfg.data.tags << "\n";
  out << "format = " << to_string(cfg.data.format) << "\n";
  out << "\n[corpus]\n";
  out << "vocab_size = " << cfg.corpus.vocab_size << "\n";
  out << "s_max = " << cfg.corpus.s_max << "\n";
  out << "w_max = " << cfg.corpus.w_max << "\n";
  out << "n_tags = " << cfg.corpus.n_tags << "\n";
  out << "\n[split]\n";
  out << "p = " << cfg.split.p << "\n";
  out << "seed = " << cfg.split.seed << "\n";
  out << "\n[encoder]\n";
  out << "embed_dim = " << cfg.encoder.embed_dim << "\n";
  out << "hidden_dim = " << cfg.encoder.hidden_dim << "\n";
  out << "attn_dim = " << cfg.encoder.attn_dim << "\n";
  out << "learning_rate = " << fmt_double(cfg.encoder.learning_rate) << "\n";
  out << "batch_size = " << cfg.encoder.batch_size << "\n";
  out << "epochs = " << cfg.encoder.epochs << "\n";
  out << "seed = " << cfg.encoder.seed << "\n";
  out << "\n[mf]\n";
  out << "loss = " << to_string(cfg.mf.loss) << "\n";
  out << "latent_dim = " << cfg.mf.latent_dim << "\n";
  out << "l2 = " << fmt_double(cfg.mf.l2) << "\n";
  out << "epochs = " << cfg.mf.epochs << "\n";
  out << "learning_rate = " << fmt_double(cfg.mf.learning_rate) << "\n";
  out << "max_warp_trials = " << cfg.mf.max_warp_trials << "\n";
  out << "seed = " << cfg.mf.seed << "\n";
  out << "dense_mode = " << to_string(cfg.mf.dense_mode) << "\n";
  out << "item_features = " << to_string(cfg.item_features) << "\n";
  out << "embeddings = " << cfg.embeddings << "\n";
  out << "\n[eval]\n";
  out << "ks = ";
  for (std::size_t i = 0; i < cfg.eval.ks.size(); ++i) {
    if (i) out << ",";
    out << cfg.eval.ks[i];
  }
  out << "\n";
  return out.str();
}

void validate_config(const PipelineConfig& cfg) {
  const auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(cfg.corpus.vocab_size >= 1, "corpus.vocab_size must be >= 1");
  need(cfg.corpus.s_max >= 1, "corpus.s_max must be >= 1");
  need(cfg.corpus.w_max >= 1, "corpus.w_max must be >= 1");
  need(cfg.corpus.n_tags >= 1, "corpus.n_tags must be >= 1");
  need(cfg.split.p >= 1, "split.p must be >= 1");
  need(cfg.encoder.embed_dim >= 1, "encoder.embed_dim must be >= 1");
  need(cfg.encoder.hidden_dim >= 1, "encoder.hidden_dim must be >= 1");
  need(cfg.encoder.attn_dim >= 1, "encoder.attn_dim must be >= 1");
  need(cfg.encoder.learning_rate > 0, "encoder.learning_rate must be > 0");
  need(cfg.encoder.batch_size >= 1, "encoder.batch_size must be >= 1");
  need(cfg.encoder.epochs >= 0, "encoder.epochs must be >= 0");
  need(cfg.mf.latent_dim >= 1, "mf.latent_dim must be >= 1");
  need(cfg.mf.l2 >= 0, "mf.l2 must be >= 0");
  need(cfg.mf.epochs >= 0, "mf.epochs must be >= 0");
  need(cfg.mf.learning_rate > 0, "mf.learning_rate must be > 0");
  need(cfg.mf.max_warp_trials >= 1, "mf.max_warp_trials must be >= 1");
  need(cfg.item_features != FeatureKind::dense, "mf.item_features cannot be 'dense'");
  need(!cfg.eval.ks.empty(), "eval.ks must not be empty");
  for (int k : cfg.eval.ks) need(k >= 1, "eval.ks entries must be >= 1");
  if (cfg.mf.dense_mode != DenseMode::none) {
    need(!cfg.embeddings.empty(), "mf.embeddings path required when dense_mode != none");
  }
}

}  // namespace tagrec

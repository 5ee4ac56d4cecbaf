#include "tagrec/factorization.hpp"

#include <algorithm>
#include <cmath>

#include "tagrec/errors.hpp"

namespace tagrec {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_row(int idx, int n, const char* side) {
  if (idx < 0 || idx >= n) {
    throw DataError(std::string(side) + " index " + std::to_string(idx) + " outside [0, " +
                    std::to_string(n) + ")");
  }
}

}  // namespace

FactorizationModel init_factorization_model(int n_user_features, int n_item_features,
                                            int dense_dim, const MfConfig& cfg, Rng& rng) {
  if (cfg.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (cfg.max_warp_trials < 1) throw ConfigError("max_warp_trials must be >= 1");
  if (cfg.dense_mode != DenseMode::none && dense_dim < 1) {
    throw ConfigError("dense metadata mode requires embeddings");
  }
  FactorizationModel m;
  m.d = cfg.latent_dim;
  m.l2 = cfg.l2;
  m.dense_mode = cfg.dense_mode;
  m.dense_dim = cfg.dense_mode == DenseMode::none ? 0 : dense_dim;
  m.n_user_features = n_user_features;
  m.n_item_features = n_item_features;

  const double stddev = 1.0 / static_cast<double>(m.d);
  m.user_vectors.resize(static_cast<std::size_t>(n_user_features) * m.d);
  for (auto& v : m.user_vectors) v = rng.normal(0.0, stddev);
  m.item_vectors.resize(static_cast<std::size_t>(n_item_features) * m.d);
  for (auto& v : m.item_vectors) v = rng.normal(0.0, stddev);
  m.user_biases.assign(n_user_features, 0.0);
  m.item_biases.assign(n_item_features, 0.0);
  if (m.dense_mode != DenseMode::none) {
    m.dense_bias_w.assign(m.dense_dim, 0.0);
    if (m.dense_mode == DenseMode::bias_factors) {
      m.dense_factor_w.assign(static_cast<std::size_t>(m.dense_dim) * m.d, 0.0);
    }
  }
  return m;
}

void user_representation(const FactorizationModel& m, int user, const FeatureMatrix& user_features,
                         std::vector<double>& q) {
  check_row(user, user_features.n_rows, "user");
  q.assign(m.d, 0.0);
  for (const auto& [f, w] : user_features.rows[user]) {
    const double* v = m.user_vectors.data() + static_cast<std::size_t>(f) * m.d;
    for (int k = 0; k < m.d; ++k) q[k] += w * v[k];
  }
}

void item_representation(const FactorizationModel& m, int item, const FeatureMatrix& item_features,
                         const DenseItemEmbeddings* dense, std::vector<double>& p, double& b) {
  check_row(item, item_features.n_rows, "item");
  p.assign(m.d, 0.0);
  b = 0.0;
  for (const auto& [f, w] : item_features.rows[item]) {
    const double* v = m.item_vectors.data() + static_cast<std::size_t>(f) * m.d;
    for (int k = 0; k < m.d; ++k) p[k] += w * v[k];
    b += w * m.item_biases[f];
  }
  if (m.dense_mode != DenseMode::none) {
    if (!dense) throw ConfigError("model expects dense embeddings but none were given");
    check_row(item, dense->n_items, "item");
    const double* e = dense->row(item);
    for (int k = 0; k < m.dense_dim; ++k) b += m.dense_bias_w[k] * e[k];
    b += m.dense_bias_intercept;
    if (m.dense_mode == DenseMode::bias_factors) {
      for (int k = 0; k < m.dense_dim; ++k) {
        const double* row = m.dense_factor_w.data() + static_cast<std::size_t>(k) * m.d;
        for (int l = 0; l < m.d; ++l) p[l] += e[k] * row[l];
      }
    }
  }
}

double score(const FactorizationModel& m, int user, int item, const FeatureMatrix& user_features,
             const FeatureMatrix& item_features, const DenseItemEmbeddings* dense) {
  std::vector<double> q, p;
  double b = 0.0;
  user_representation(m, user, user_features, q);
  item_representation(m, item, item_features, dense, p, b);
  return dot(q, p) + b;
}

double predict_proba(const FactorizationModel& m, int user, int item,
                     const FeatureMatrix& user_features, const FeatureMatrix& item_features,
                     const DenseItemEmbeddings* dense) {
  return sigmoid(score(m, user, item, user_features, item_features, dense));
}

double WarpRankWeights::operator()(int k) const {
  if (k < 0) throw ConfigError("rank weight needs k >= 0");
  while (static_cast<int>(phi_.size()) <= k) {
    phi_.push_back(phi_.back() + 1.0 / static_cast<double>(phi_.size()));
  }
  return phi_[k];
}

namespace {

// Shared pairwise machinery: objective = multiplier-specific transform
// of delta = s_pos - s_neg, minus l2 * sum of squared participating
// parameters. `dmult` is d(objective)/d(delta).
PairGradients pair_gradients_impl(const FactorizationModel& m, int user, int pos, int neg,
                                  const FeatureMatrix& user_features,
                                  const FeatureMatrix& item_features,
                                  const DenseItemEmbeddings* dense, bool bpr, double phi,
                                  bool want_grads) {
  std::vector<double> q, p_pos, p_neg;
  double b_pos = 0.0, b_neg = 0.0;
  user_representation(m, user, user_features, q);
  item_representation(m, pos, item_features, dense, p_pos, b_pos);
  item_representation(m, neg, item_features, dense, p_neg, b_neg);
  const double s_pos = dot(q, p_pos) + b_pos;
  const double s_neg = dot(q, p_neg) + b_neg;
  const double delta = s_pos - s_neg;

  PairGradients out;
  out.delta = delta;
  const double dmult = bpr ? sigmoid(-delta) : phi;
  // ln sigmoid(delta) = -softplus(-delta), overflow-safe
  const double softplus_neg = std::max(-delta, 0.0) + std::log1p(std::exp(-std::abs(delta)));
  const double base = bpr ? -softplus_neg : phi * (delta - 1.0);

  // itemwise feature weights for pos/neg, merged over the union
  std::vector<std::pair<int, std::pair<double, double>>> item_feats;  // f -> (w_pos, w_neg)
  {
    const auto& rp = item_features.rows[pos];
    const auto& rn = item_features.rows[neg];
    std::size_t i = 0, j = 0;
    while (i < rp.size() || j < rn.size()) {
      if (j == rn.size() || (i < rp.size() && rp[i].first < rn[j].first)) {
        item_feats.push_back({rp[i].first, {rp[i].second, 0.0}});
        ++i;
      } else if (i == rp.size() || rn[j].first < rp[i].first) {
        item_feats.push_back({rn[j].first, {0.0, rn[j].second}});
        ++j;
      } else {
        item_feats.push_back({rp[i].first, {rp[i].second, rn[j].second}});
        ++i;
        ++j;
      }
    }
  }

  double reg = 0.0;
  for (const auto& [f, w] : user_features.rows[user]) {
    const auto v = m.user_vec(f);
    reg += dot(v, v);
    if (want_grads) {
      std::vector<double> g(m.d);
      for (int k = 0; k < m.d; ++k) g[k] = dmult * w * (p_pos[k] - p_neg[k]) - 2.0 * m.l2 * v[k];
      out.user_vectors.push_back({f, std::move(g)});
    }
  }
  for (const auto& [f, ws] : item_feats) {
    const auto v = m.item_vec(f);
    const double wd = ws.first - ws.second;
    reg += dot(v, v) + m.item_biases[f] * m.item_biases[f];
    if (want_grads) {
      std::vector<double> g(m.d);
      for (int k = 0; k < m.d; ++k) g[k] = dmult * wd * q[k] - 2.0 * m.l2 * v[k];
      out.item_vectors.push_back({f, std::move(g)});
      out.item_biases.push_back({f, dmult * wd - 2.0 * m.l2 * m.item_biases[f]});
    }
  }
  if (m.dense_mode != DenseMode::none) {
    const double* e_pos = dense->row(pos);
    const double* e_neg = dense->row(neg);
    for (int k = 0; k < m.dense_dim; ++k) reg += m.dense_bias_w[k] * m.dense_bias_w[k];
    if (want_grads) {
      out.dense_bias_w.resize(m.dense_dim);
      for (int k = 0; k < m.dense_dim; ++k) {
        out.dense_bias_w[k] = dmult * (e_pos[k] - e_neg[k]) - 2.0 * m.l2 * m.dense_bias_w[k];
      }
    }
    if (m.dense_mode == DenseMode::bias_factors) {
      for (double v : m.dense_factor_w) reg += v * v;
      if (want_grads) {
        out.dense_factor_w.resize(m.dense_factor_w.size());
        for (int k = 0; k < m.dense_dim; ++k) {
          for (int l = 0; l < m.d; ++l) {
            const std::size_t idx = static_cast<std::size_t>(k) * m.d + l;
            out.dense_factor_w[idx] =
                dmult * (e_pos[k] - e_neg[k]) * q[l] - 2.0 * m.l2 * m.dense_factor_w[idx];
          }
        }
      }
    }
  }
  out.objective = base - m.l2 * reg;
  return out;
}

}  // namespace

PairGradients bpr_pair_gradients(const FactorizationModel& m, int user, int pos, int neg,
                                 const FeatureMatrix& user_features,
                                 const FeatureMatrix& item_features,
                                 const DenseItemEmbeddings* dense, bool want_grads) {
  return pair_gradients_impl(m, user, pos, neg, user_features, item_features, dense, true, 0.0,
                             want_grads);
}

PairGradients warp_pair_gradients(const FactorizationModel& m, int user, int pos, int neg,
                                  double phi, const FeatureMatrix& user_features,
                                  const FeatureMatrix& item_features,
                                  const DenseItemEmbeddings* dense, bool want_grads) {
  return pair_gradients_impl(m, user, pos, neg, user_features, item_features, dense, false, phi,
                             want_grads);
}

MfTrainer::MfTrainer(FactorizationModel& model, const InteractionMatrix& interactions,
                     const FeatureMatrix& user_features, const FeatureMatrix& item_features,
                     const DenseItemEmbeddings* dense, const MfConfig& cfg)
    : model_(model),
      interactions_(interactions),
      user_features_(user_features),
      item_features_(item_features),
      dense_(dense),
      cfg_(cfg) {
  if (!interactions.has_split()) throw DataError("MfTrainer: interactions carry no split tags");
  if (model.dense_mode != DenseMode::none && !dense) {
    throw ConfigError("MfTrainer: dense metadata mode without embeddings");
  }
  train_counts_.resize(interactions.n_users, 0);
  for (int u = 0; u < interactions.n_users; ++u) {
    for (Split s : interactions.split[u]) {
      if (s == Split::train) ++train_counts_[u];
    }
  }
  acc_user_vectors_.assign(model.user_vectors.size(), 1.0);
  acc_item_vectors_.assign(model.item_vectors.size(), 1.0);
  acc_item_biases_.assign(model.item_biases.size(), 1.0);
  acc_dense_bias_w_.assign(model.dense_bias_w.size(), 1.0);
  acc_dense_factor_w_.assign(model.dense_factor_w.size(), 1.0);
}

int MfTrainer::sample_negative(int user, Rng& rng) {
  // uniform over items outside the user's train set; test items are
  // legal negatives
  for (;;) {
    const int item = rng.index(interactions_.n_items);
    if (!interactions_.is_train(user, item)) return item;
  }
}

void MfTrainer::apply(const PairGradients& g) {
  const double lr = cfg_.learning_rate;
  auto adagrad = [lr](double& param, double& acc, double grad) {
    acc += grad * grad;
    param += lr * grad / std::sqrt(acc);
    if (!std::isfinite(param)) throw NumericError("MF parameter became non-finite");
  };
  for (const auto& [f, gv] : g.user_vectors) {
    double* v = model_.user_vectors.data() + static_cast<std::size_t>(f) * model_.d;
    double* a = acc_user_vectors_.data() + static_cast<std::size_t>(f) * model_.d;
    for (int k = 0; k < model_.d; ++k) adagrad(v[k], a[k], gv[k]);
  }
  for (const auto& [f, gv] : g.item_vectors) {
    double* v = model_.item_vectors.data() + static_cast<std::size_t>(f) * model_.d;
    double* a = acc_item_vectors_.data() + static_cast<std::size_t>(f) * model_.d;
    for (int k = 0; k < model_.d; ++k) adagrad(v[k], a[k], gv[k]);
  }
  for (const auto& [f, gb] : g.item_biases) adagrad(model_.item_biases[f], acc_item_biases_[f], gb);
  for (std::size_t k = 0; k < g.dense_bias_w.size(); ++k) {
    adagrad(model_.dense_bias_w[k], acc_dense_bias_w_[k], g.dense_bias_w[k]);
  }
  for (std::size_t k = 0; k < g.dense_factor_w.size(); ++k) {
    adagrad(model_.dense_factor_w[k], acc_dense_factor_w_[k], g.dense_factor_w[k]);
  }
}

double MfTrainer::bpr_step(int user, int pos, Rng& rng) {
  if (train_counts_[user] >= interactions_.n_items) return 0.0;  // nothing to sample
  const int neg = sample_negative(user, rng);
  const PairGradients g =
      bpr_pair_gradients(model_, user, pos, neg, user_features_, item_features_, dense_);
  apply(g);
  // loss proxy: -ln sigmoid(delta)
  return std::max(-g.delta, 0.0) + std::log1p(std::exp(-std::abs(g.delta)));
}

double MfTrainer::warp_step(int user, int pos, Rng& rng) {
  if (train_counts_[user] >= interactions_.n_items) return 0.0;
  const int candidates = interactions_.n_items - train_counts_[user];

  std::vector<double> q, p_pos, p;
  double b_pos = 0.0, b = 0.0;
  user_representation(model_, user, user_features_, q);
  item_representation(model_, pos, item_features_, dense_, p_pos, b_pos);
  const double s_pos = dot(q, p_pos) + b_pos;

  for (int trial = 1; trial <= cfg_.max_warp_trials; ++trial) {
    const int neg = sample_negative(user, rng);
    item_representation(model_, neg, item_features_, dense_, p, b);
    const double s_neg = dot(q, p) + b;
    if (1.0 + s_neg - s_pos > 0.0) {
      const int k = candidates / trial;
      const double phi = phi_(k);
      if (phi == 0.0) return 0.0;
      const PairGradients g =
          warp_pair_gradients(model_, user, pos, neg, phi, user_features_, item_features_, dense_);
      apply(g);
      return phi * (1.0 + s_neg - s_pos);
    }
  }
  return 0.0;  // no violator: parameters untouched
}

std::vector<double> MfTrainer::train() {
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < interactions_.n_users; ++u) {
    const auto& row = interactions_.rows[u];
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (interactions_.split[u][i] == Split::train) pairs.push_back({u, row[i]});
    }
  }

  Rng rng(cfg_.seed);
  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    rng.shuffle(pairs);
    double loss = 0.0;
    for (const auto& [u, pos] : pairs) {
      loss += cfg_.loss == LossKind::bpr ? bpr_step(u, pos, rng) : warp_step(u, pos, rng);
    }
    const double mean = pairs.empty() ? 0.0 : loss / static_cast<double>(pairs.size());
    if (!std::isfinite(mean)) {
      throw NumericError("MF training loss diverged at epoch " + std::to_string(epoch));
    }
    epoch_losses.push_back(mean);
  }
  return epoch_losses;
}

}  // namespace tagrec

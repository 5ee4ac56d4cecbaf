#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tagrec/corpus.hpp"
#include "tagrec/features.hpp"
#include "tagrec/rng.hpp"

namespace tagrec {

enum class LossKind { bpr, warp };

// How the dense document embedding enters the model: as a learned
// scalar projection into the item bias (default), optionally also as a
// projection into the item latent vector.
enum class DenseMode { none, bias, bias_factors };

struct MfConfig {
  LossKind loss = LossKind::warp;
  int latent_dim = 200;
  double l2 = 1e-5;
  int epochs = 100;
  double learning_rate = 0.05;
  int max_warp_trials = 100;
  std::uint64_t seed = 0;
  DenseMode dense_mode = DenseMode::none;

  bool operator==(const MfConfig&) const = default;
};

// Feature-based MF: an entity's latent vector is the weighted sum of
// its feature vectors; the item bias is the sum of its feature biases
// plus the dense-metadata projection when enabled.
struct FactorizationModel {
  int d = 0;
  double l2 = 1e-5;
  DenseMode dense_mode = DenseMode::none;
  int dense_dim = 0;
  int n_user_features = 0;
  int n_item_features = 0;

  std::vector<double> user_vectors;  // n_user_features x d, row-major
  std::vector<double> item_vectors;  // n_item_features x d
  std::vector<double> user_biases;   // kept for checkpoint symmetry; not in Eq-1 scoring
  std::vector<double> item_biases;
  std::vector<double> dense_bias_w;  // dense_dim
  double dense_bias_intercept = 0.0;
  std::vector<double> dense_factor_w;  // dense_dim x d (bias_factors mode)

  std::span<const double> user_vec(int f) const {
    return {user_vectors.data() + static_cast<std::size_t>(f) * d, static_cast<std::size_t>(d)};
  }
  std::span<const double> item_vec(int f) const {
    return {item_vectors.data() + static_cast<std::size_t>(f) * d, static_cast<std::size_t>(d)};
  }
};

FactorizationModel init_factorization_model(int n_user_features, int n_item_features,
                                            int dense_dim, const MfConfig& cfg, Rng& rng);

// q_i = sum of the user's feature vectors (weighted)
void user_representation(const FactorizationModel& m, int user, const FeatureMatrix& user_features,
                         std::vector<double>& q);

// p_j and b_j including the dense channel when active
void item_representation(const FactorizationModel& m, int item, const FeatureMatrix& item_features,
                         const DenseItemEmbeddings* dense, std::vector<double>& p, double& b);

// raw score s = q . p + b
double score(const FactorizationModel& m, int user, int item, const FeatureMatrix& user_features,
             const FeatureMatrix& item_features, const DenseItemEmbeddings* dense = nullptr);

// sigmoid(score)
double predict_proba(const FactorizationModel& m, int user, int item,
                     const FeatureMatrix& user_features, const FeatureMatrix& item_features,
                     const DenseItemEmbeddings* dense = nullptr);

// Phi(k) = sum_{i=1..k} 1/i, the WARP rank weight. Table-backed with
// the same summation order as the direct loop.
class WarpRankWeights {
 public:
  double operator()(int k) const;

 private:
  mutable std::vector<double> phi_{0.0};
};

// Sparse per-step gradient of a pairwise objective, for one sampled
// (user, positive, negative) triplet. Gradients are ascent directions
// of `objective`.
struct PairGradients {
  double objective = 0.0;
  double delta = 0.0;  // s_pos - s_neg
  std::vector<std::pair<int, std::vector<double>>> user_vectors;  // feature -> d grads
  std::vector<std::pair<int, std::vector<double>>> item_vectors;
  std::vector<std::pair<int, double>> item_biases;
  std::vector<double> dense_bias_w;    // empty when dense inactive
  std::vector<double> dense_factor_w;  // empty unless bias_factors
};

// objective = ln sigmoid(s_pos - s_neg) - l2 * ||participating params||^2
PairGradients bpr_pair_gradients(const FactorizationModel& m, int user, int pos, int neg,
                                 const FeatureMatrix& user_features,
                                 const FeatureMatrix& item_features,
                                 const DenseItemEmbeddings* dense, bool want_grads = true);

// objective = phi * (s_pos - s_neg - 1) - l2 * ||participating||^2,
// valid where the hinge is active (1 + s_neg - s_pos > 0)
PairGradients warp_pair_gradients(const FactorizationModel& m, int user, int pos, int neg,
                                  double phi, const FeatureMatrix& user_features,
                                  const FeatureMatrix& item_features,
                                  const DenseItemEmbeddings* dense, bool want_grads = true);

// SGD trainer with Adagrad per-parameter step sizes. Single-threaded,
// deterministic under a fixed config seed.
class MfTrainer {
 public:
  MfTrainer(FactorizationModel& model, const InteractionMatrix& interactions,
            const FeatureMatrix& user_features, const FeatureMatrix& item_features,
            const DenseItemEmbeddings* dense, const MfConfig& cfg);

  // One update for a sampled positive; negative drawn from items
  // outside the user's train set. Returns the step's loss proxy.
  double bpr_step(int user, int pos, Rng& rng);

  // Samples negatives until a rank violator appears or max_warp_trials
  // is exhausted; no violator means no update.
  double warp_step(int user, int pos, Rng& rng);

  // epochs x (one pass over shuffled train pairs); returns per-epoch
  // mean loss proxy.
  std::vector<double> train();

 private:
  int sample_negative(int user, Rng& rng);
  void apply(const PairGradients& g);

  FactorizationModel& model_;
  const InteractionMatrix& interactions_;
  const FeatureMatrix& user_features_;
  const FeatureMatrix& item_features_;
  const DenseItemEmbeddings* dense_;
  MfConfig cfg_;
  WarpRankWeights phi_;
  std::vector<int> train_counts_;  // per user
  // adagrad accumulators
  std::vector<double> acc_user_vectors_, acc_item_vectors_, acc_item_biases_;
  std::vector<double> acc_dense_bias_w_, acc_dense_factor_w_;
};

}  // namespace tagrec

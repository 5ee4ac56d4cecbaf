#pragma once

#include <memory>
#include <vector>

#include "tagrec/corpus.hpp"
#include "tagrec/factorization.hpp"
#include "tagrec/features.hpp"

namespace tagrec {

// Anything that can score every item for a user. Implementations must
// be pure per user so evaluation can shard across threads.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual int n_items() const = 0;
  virtual void score_user(int user, std::vector<double>& out) const = 0;
};

// Feature-based MF scorer with item representations precomputed once.
class MfScorer : public Scorer {
 public:
  MfScorer(const FactorizationModel& model, const FeatureMatrix& user_features,
           const FeatureMatrix& item_features, const DenseItemEmbeddings* dense = nullptr);

  int n_items() const override { return n_items_; }
  void score_user(int user, std::vector<double>& out) const override;

 private:
  const FactorizationModel& model_;
  const FeatureMatrix& user_features_;
  int n_items_;
  std::vector<double> item_reps_;  // n_items x d
  std::vector<double> item_bias_;
};

// Fixed score matrix; used by toy oracles and tests.
class MatrixScorer : public Scorer {
 public:
  MatrixScorer(int n_users, int n_items) : n_users_(n_users), n_items_(n_items) {
    values_.assign(static_cast<std::size_t>(n_users) * n_items, 0.0);
  }
  double& at(int user, int item) { return values_[static_cast<std::size_t>(user) * n_items_ + item]; }
  int n_items() const override { return n_items_; }
  void score_user(int user, std::vector<double>& out) const override {
    out.assign(values_.begin() + static_cast<std::size_t>(user) * n_items_,
               values_.begin() + static_cast<std::size_t>(user + 1) * n_items_);
  }

 private:
  int n_users_, n_items_;
  std::vector<double> values_;
};

struct RankingResult {
  int user = -1;
  std::vector<int> items;     // descending score, ties by ascending id
  std::vector<double> scores;  // aligned
};

// Candidates are all items minus the user's train items. Requires the
// split to be applied. Works for excluded users too (recommendation
// still makes sense for them; recall does not).
RankingResult rank_candidates(const Scorer& scorer, int user, const InteractionMatrix& m,
                              int k_max);

// |top-k intersect test_items| / |test_items|; test_items sorted.
double recall_at_k(const RankingResult& ranking, const std::vector<int>& test_items, int k);

struct RecallReport {
  std::vector<int> ks;
  std::vector<double> mean_recall;            // per K, over non-excluded users
  std::vector<int> users;                     // evaluated user ids, ascending
  std::vector<std::vector<double>> per_user;  // [user idx][K idx]
  int excluded_users = 0;
};

RecallReport evaluate(const Scorer& scorer, const InteractionMatrix& m, const std::vector<int>& ks,
                      int threads = 1);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool zero_variance = false;
  int df = 0;
};

// Two-sided paired t-test. All-zero differences give t=0, p=1;
// zero-variance nonzero differences report t=+-inf with the flag set.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// P(|T_df| > |t|)
double student_t_two_sided_p(double t, int df);

}  // namespace tagrec

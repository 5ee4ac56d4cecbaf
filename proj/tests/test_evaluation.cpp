#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tagrec/errors.hpp"
#include "tagrec/evaluation.hpp"
#include "tagrec/rng.hpp"

using namespace tagrec;

namespace {

InteractionMatrix split_matrix(int n_users, int n_items,
                               std::vector<std::vector<int>> train,
                               std::vector<std::vector<int>> test) {
  InteractionMatrix m;
  m.n_users = n_users;
  m.n_items = n_items;
  m.rows.resize(n_users);
  m.split.resize(n_users);
  m.excluded.assign(n_users, 0);
  for (int u = 0; u < n_users; ++u) {
    std::vector<std::pair<int, Split>> z;
    for (int i : train[u]) z.emplace_back(i, Split::train);
    for (int i : test[u]) z.emplace_back(i, Split::test);
    std::sort(z.begin(), z.end());
    for (auto& [item, s] : z) {
      m.rows[u].push_back(item);
      m.split[u].push_back(s);
    }
    if (test[u].empty()) m.excluded[u] = 1;
  }
  return m;
}

}  // namespace

TEST_CASE("ranking excludes train items and breaks ties by id") {
  MatrixScorer sc(1, 5);
  sc.at(0, 0) = 9.0;  // train, must not appear
  sc.at(0, 1) = 1.0;
  sc.at(0, 2) = 3.0;
  sc.at(0, 3) = 3.0;  // tied with 2: id order decides
  sc.at(0, 4) = -2.0;
  InteractionMatrix m = split_matrix(1, 5, {{0}}, {{2}});
  RankingResult r = rank_candidates(sc, 0, m, 10);
  CHECK(r.items == std::vector<int>{2, 3, 1, 4});
  CHECK(r.scores == std::vector<double>{3.0, 3.0, 1.0, -2.0});
  CHECK(r.user == 0);
}

TEST_CASE("ranking clamps k to the candidate count") {
  MatrixScorer sc(1, 3);
  sc.at(0, 1) = 2.0;
  InteractionMatrix m = split_matrix(1, 3, {{0}}, {{1}});
  RankingResult r = rank_candidates(sc, 0, m, 2);
  CHECK(r.items.size() == 2);
  CHECK(r.items == std::vector<int>{1, 2});
  RankingResult all = rank_candidates(sc, 0, m, 99);
  CHECK(all.items.size() == 2);
}

TEST_CASE("ranking works for excluded users and rejects bad input") {
  MatrixScorer sc(2, 3);
  InteractionMatrix m = split_matrix(2, 3, {{0}, {1}}, {{1}, {}});
  CHECK(m.excluded[1] == 1);
  RankingResult r = rank_candidates(sc, 1, m, 3);
  CHECK(r.items == std::vector<int>{0, 2});

  CHECK_THROWS_AS(rank_candidates(sc, 7, m, 3), DataError);
  InteractionMatrix unsplit;
  unsplit.n_users = 2;
  unsplit.n_items = 3;
  unsplit.rows = {{0}, {1}};
  CHECK_THROWS_AS(rank_candidates(sc, 0, unsplit, 3), DataError);
}

TEST_CASE("ranking agrees with a brute-force sort oracle") {
  const int n_users = 6, n_items = 40;
  Rng rng(11);
  MatrixScorer sc(n_users, n_items);
  std::vector<std::vector<int>> train(n_users), test(n_users);
  for (int u = 0; u < n_users; ++u) {
    for (int i = 0; i < n_items; ++i) {
      // coarse grid forces plenty of exact ties
      sc.at(u, i) = std::floor(rng.uniform(-3.0, 3.0)) / 2.0;
      const double roll = rng.real();
      if (roll < 0.25) train[u].push_back(i);
      else if (roll < 0.4) test[u].push_back(i);
    }
    if (test[u].empty()) test[u].push_back((u * 7) % n_items);
  }
  InteractionMatrix m = split_matrix(n_users, n_items, train, test);

  for (int u = 0; u < n_users; ++u) {
    std::vector<std::pair<double, int>> oracle;
    for (int i = 0; i < n_items; ++i) {
      if (!m.is_train(u, i)) oracle.emplace_back(-sc.at(u, i), i);
    }
    std::sort(oracle.begin(), oracle.end());
    RankingResult r = rank_candidates(sc, u, m, n_items);
    REQUIRE(r.items.size() == oracle.size());
    for (std::size_t k = 0; k < oracle.size(); ++k) {
      CHECK(r.items[k] == oracle[k].second);
      CHECK(r.scores[k] == -oracle[k].first);
    }
  }
}

TEST_CASE("recall counts hits in the top k") {
  RankingResult r;
  r.items = {4, 9, 1, 7, 3};
  const std::vector<int> test_items = {1, 3, 9};  // sorted
  CHECK(recall_at_k(r, test_items, 1) == 0.0);
  CHECK(recall_at_k(r, test_items, 2) == doctest::Approx(1.0 / 3));
  CHECK(recall_at_k(r, test_items, 3) == doctest::Approx(2.0 / 3));
  CHECK(recall_at_k(r, test_items, 5) == doctest::Approx(1.0));
  CHECK(recall_at_k(r, test_items, 50) == doctest::Approx(1.0));  // k beyond list
  CHECK_THROWS_AS(recall_at_k(r, {}, 3), DataError);
}

TEST_CASE("recall is monotone in k") {
  Rng rng(3);
  RankingResult r;
  for (int i = 0; i < 30; ++i) r.items.push_back(i);
  rng.shuffle(r.items);
  std::vector<int> test_items = {2, 5, 11, 17, 23};
  double prev = 0.0;
  for (int k = 1; k <= 30; ++k) {
    const double cur = recall_at_k(r, test_items, k);
    CHECK(cur >= prev);
    prev = cur;
  }
  CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("evaluate averages recall over non-excluded users") {
  MatrixScorer sc(3, 4);
  // user 0: test item 2 ranked first among candidates {1,2,3}
  sc.at(0, 2) = 5.0;
  // user 1: test item 3 ranked last among {0,1,3}
  sc.at(1, 0) = 3.0;
  sc.at(1, 1) = 2.0;
  sc.at(1, 3) = -1.0;
  InteractionMatrix m = split_matrix(3, 4, {{0}, {2}, {0, 1}}, {{2}, {3}, {}});
  RecallReport rep = evaluate(sc, m, {1, 3});
  CHECK(rep.users == std::vector<int>{0, 1});
  CHECK(rep.excluded_users == 1);
  CHECK(rep.mean_recall[0] == doctest::Approx(0.5));  // (1 + 0) / 2
  CHECK(rep.mean_recall[1] == doctest::Approx(1.0));
  REQUIRE(rep.per_user.size() == 2);
  CHECK(rep.per_user[0][0] == doctest::Approx(1.0));
  CHECK(rep.per_user[1][0] == doctest::Approx(0.0));

  InteractionMatrix none = split_matrix(1, 2, {{0}}, {{}});
  CHECK_THROWS_AS(evaluate(sc, none, {1}), DataError);
}

TEST_CASE("evaluate gives the same answer sharded across threads") {
  const int n_users = 23, n_items = 60;
  Rng rng(17);
  MatrixScorer sc(n_users, n_items);
  std::vector<std::vector<int>> train(n_users), test(n_users);
  for (int u = 0; u < n_users; ++u) {
    for (int i = 0; i < n_items; ++i) {
      sc.at(u, i) = rng.uniform(-1.0, 1.0);
      const double roll = rng.real();
      if (roll < 0.3) train[u].push_back(i);
      else if (roll < 0.42 && u % 5 != 0) test[u].push_back(i);
    }
  }
  InteractionMatrix m = split_matrix(n_users, n_items, train, test);
  const std::vector<int> ks = {5, 10, 25};
  RecallReport one = evaluate(sc, m, ks, 1);
  RecallReport four = evaluate(sc, m, ks, 4);
  RecallReport many = evaluate(sc, m, ks, 64);  // more threads than users
  CHECK(one.users == four.users);
  CHECK(one.mean_recall == four.mean_recall);
  CHECK(one.per_user == four.per_user);
  CHECK(one.mean_recall == many.mean_recall);
  CHECK(one.excluded_users == four.excluded_users);
}

TEST_CASE("recall is invariant under strictly increasing score transforms") {
  const int n_users = 8, n_items = 30;
  Rng rng(29);
  MatrixScorer raw(n_users, n_items), warped(n_users, n_items);
  std::vector<std::vector<int>> train(n_users), test(n_users);
  for (int u = 0; u < n_users; ++u) {
    for (int i = 0; i < n_items; ++i) {
      const double s = rng.uniform(-2.0, 2.0);
      raw.at(u, i) = s;
      warped.at(u, i) = std::exp(0.5 * s) + 3.0;  // strictly increasing
      const double roll = rng.real();
      if (roll < 0.2) train[u].push_back(i);
      else if (roll < 0.35) test[u].push_back(i);
    }
    if (test[u].empty()) test[u].push_back((u + 13) % n_items);
  }
  InteractionMatrix m = split_matrix(n_users, n_items, train, test);
  const std::vector<int> ks = {1, 5, 10};
  RecallReport a = evaluate(raw, m, ks);
  RecallReport b = evaluate(warped, m, ks);
  CHECK(a.per_user == b.per_user);
  CHECK(a.mean_recall == b.mean_recall);
}

TEST_CASE("constant scores rank by id, matching the closed-form recall") {
  // with all-equal scores the top k are the k lowest candidate ids, so
  // expected recall is computable exactly per user
  const int n_items = 25;
  MatrixScorer sc(1, n_items);
  InteractionMatrix m = split_matrix(1, n_items, {{0, 1}}, {{4, 10, 20}});
  RankingResult r = rank_candidates(sc, 0, m, n_items);
  CHECK(r.items[0] == 2);
  CHECK(recall_at_k(r, {4, 10, 20}, 3) == doctest::Approx(1.0 / 3));   // ids 2,3,4
  CHECK(recall_at_k(r, {4, 10, 20}, 9) == doctest::Approx(2.0 / 3));   // up to id 10
  CHECK(recall_at_k(r, {4, 10, 20}, 19) == doctest::Approx(1.0));      // up to id 20
}

TEST_CASE("mf scorer matches the direct scoring function") {
  Rng rng(41);
  const int n_users = 4, n_items = 9;
  FeatureMatrix uf = build_identity_features(n_users);
  FeatureMatrix itf = build_identity_features(n_items);
  itf.n_features = n_items + 3;
  for (int j = 0; j < n_items; ++j) itf.rows[j].emplace_back(n_items + j % 3, 0.5);
  MfConfig cfg;
  cfg.latent_dim = 5;
  cfg.dense_mode = DenseMode::bias_factors;
  FactorizationModel model = init_factorization_model(n_users, itf.n_features, 2, cfg, rng);
  for (auto& b : model.item_biases) b = rng.uniform(-0.3, 0.3);
  for (auto& w : model.dense_bias_w) w = rng.uniform(-0.5, 0.5);
  for (auto& w : model.dense_factor_w) w = rng.uniform(-0.5, 0.5);
  model.dense_bias_intercept = -0.1;
  DenseItemEmbeddings emb;
  emb.n_items = n_items;
  emb.dim = 2;
  for (int i = 0; i < n_items * 2; ++i) emb.values.push_back(rng.uniform(-1.0, 1.0));

  MfScorer scorer(model, uf, itf, &emb);
  CHECK(scorer.n_items() == n_items);
  std::vector<double> out;
  for (int u = 0; u < n_users; ++u) {
    scorer.score_user(u, out);
    REQUIRE(out.size() == static_cast<std::size_t>(n_items));
    for (int i = 0; i < n_items; ++i) {
      CHECK(out[i] == doctest::Approx(score(model, u, i, uf, itf, &emb)).epsilon(1e-12));
    }
  }
}

TEST_CASE("incomplete beta matches reference values") {
  // reference numbers from scipy.special.betainc
  CHECK(incomplete_beta(1.5, 0.5, 1.0 / 6.0) == doctest::Approx(0.030466291662170977).epsilon(1e-12));
  CHECK(incomplete_beta(2.5, 3.5, 0.3) == doctest::Approx(0.29675298929566646).epsilon(1e-12));
  CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(incomplete_beta(2.0, 2.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 2.0, 1.0) == 1.0);
}

TEST_CASE("student t tail probabilities match reference values") {
  // 2 * t.sf(|t|, df) from scipy.stats
  CHECK(student_t_two_sided_p(1.7, 5) == doctest::Approx(0.14987678684832376).epsilon(1e-12));
  CHECK(student_t_two_sided_p(-1.7, 5) == doctest::Approx(0.14987678684832376).epsilon(1e-12));
  CHECK(student_t_two_sided_p(12.0, 1) == doctest::Approx(0.05292935211917974).epsilon(1e-12));
  CHECK(student_t_two_sided_p(0.0, 9) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(student_t_two_sided_p(std::numeric_limits<double>::infinity(), 4) == 0.0);
}

TEST_CASE("paired t-test matches a reference computation") {
  const std::vector<double> a = {0.5, 0.6, 0.55, 0.7};
  const std::vector<double> b = {0.4, 0.4, 0.4, 0.65};
  TTestResult r = paired_ttest(a, b);
  CHECK(r.df == 3);
  CHECK(r.t == doctest::Approx(3.8729833462074157).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.030466291662170998).epsilon(1e-10));
  CHECK_FALSE(r.zero_variance);

  TTestResult flipped = paired_ttest(b, a);
  CHECK(flipped.t == doctest::Approx(-r.t).epsilon(1e-12));
  CHECK(flipped.p == doctest::Approx(r.p).epsilon(1e-10));
}

TEST_CASE("paired t-test degenerate conventions") {
  TTestResult same = paired_ttest({0.3, 0.4, 0.5}, {0.3, 0.4, 0.5});
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);
  CHECK(same.zero_variance);

  // differences must be *exactly* equal for zero variance, so stick to
  // values whose gaps are representable (quarters)
  TTestResult shift = paired_ttest({0.5, 0.75, 1.0}, {0.25, 0.5, 0.75});
  CHECK(std::isinf(shift.t));
  CHECK(shift.t > 0);
  CHECK(shift.p == 0.0);
  CHECK(shift.zero_variance);

  TTestResult down = paired_ttest({0.25, 0.5}, {0.5, 0.75});
  CHECK(std::isinf(down.t));
  CHECK(down.t < 0);

  CHECK_THROWS_AS(paired_ttest({0.1}, {0.2}), ConfigError);
  CHECK_THROWS_AS(paired_ttest({0.1, 0.2}, {0.2}), ConfigError);
}

#include "tagrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "tagrec/errors.hpp"

namespace tagrec {

MfScorer::MfScorer(const FactorizationModel& model, const FeatureMatrix& user_features,
                   const FeatureMatrix& item_features, const DenseItemEmbeddings* dense)
    : model_(model), user_features_(user_features), n_items_(item_features.n_rows) {
  item_reps_.resize(static_cast<std::size_t>(n_items_) * model.d);
  item_bias_.resize(n_items_);
  std::vector<double> p;
  for (int j = 0; j < n_items_; ++j) {
    double b = 0.0;
    item_representation(model, j, item_features, dense, p, b);
    std::copy(p.begin(), p.end(), item_reps_.begin() + static_cast<std::size_t>(j) * model.d);
    item_bias_[j] = b;
  }
}

void MfScorer::score_user(int user, std::vector<double>& out) const {
  std::vector<double> q;
  user_representation(model_, user, user_features_, q);
  out.assign(n_items_, 0.0);
  for (int j = 0; j < n_items_; ++j) {
    const double* p = item_reps_.data() + static_cast<std::size_t>(j) * model_.d;
    double s = item_bias_[j];
    for (int k = 0; k < model_.d; ++k) s += q[k] * p[k];
    out[j] = s;
  }
}

RankingResult rank_candidates(const Scorer& scorer, int user, const InteractionMatrix& m,
                              int k_max) {
  if (!m.has_split()) throw DataError("rank_candidates: split not applied");
  if (user < 0 || user >= m.n_users) throw DataError("rank_candidates: unknown user");
  std::vector<double> scores;
  scorer.score_user(user, scores);
  if (static_cast<int>(scores.size()) != m.n_items) {
    throw ConfigError("rank_candidates: scorer item count mismatch");
  }

  std::vector<int> candidates;
  candidates.reserve(m.n_items);
  const auto& row = m.rows[user];
  const auto& split = m.split[user];
  std::size_t r = 0;
  for (int j = 0; j < m.n_items; ++j) {
    while (r < row.size() && row[r] < j) ++r;
    const bool is_train = r < row.size() && row[r] == j && split[r] == Split::train;
    if (!is_train) candidates.push_back(j);
  }

  const auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const int k = std::min<int>(k_max, static_cast<int>(candidates.size()));
  std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(), better);
  candidates.resize(k);

  RankingResult res;
  res.user = user;
  res.items = std::move(candidates);
  res.scores.reserve(k);
  for (int j : res.items) res.scores.push_back(scores[j]);
  return res;
}

double recall_at_k(const RankingResult& ranking, const std::vector<int>& test_items, int k) {
  if (test_items.empty()) throw DataError("recall_at_k: empty test set");
  if (k < 1) throw ConfigError("recall_at_k: k must be >= 1");
  const int top = std::min<int>(k, static_cast<int>(ranking.items.size()));
  int hits = 0;
  for (int i = 0; i < top; ++i) {
    if (std::binary_search(test_items.begin(), test_items.end(), ranking.items[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_items.size());
}

RecallReport evaluate(const Scorer& scorer, const InteractionMatrix& m, const std::vector<int>& ks,
                      int threads) {
  if (!m.has_split()) throw DataError("evaluate: split not applied");
  if (ks.empty()) throw ConfigError("evaluate: no K values");
  RecallReport report;
  report.ks = ks;
  for (int u = 0; u < m.n_users; ++u) {
    if (m.excluded[u]) {
      ++report.excluded_users;
    } else {
      report.users.push_back(u);
    }
  }
  if (report.users.empty()) throw DataError("evaluate: no evaluable users");

  const int k_max = *std::max_element(ks.begin(), ks.end());
  report.per_user.assign(report.users.size(), std::vector<double>(ks.size(), 0.0));

  const auto eval_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const int u = report.users[i];
      const RankingResult ranking = rank_candidates(scorer, u, m, k_max);
      const std::vector<int> test = m.test_items(u);
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        report.per_user[i][ki] = recall_at_k(ranking, test, ks[ki]);
      }
    }
  };

  const int n_threads = std::max(1, threads);
  if (n_threads == 1 || report.users.size() < 2) {
    eval_range(0, report.users.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t per =
        (report.users.size() + n_threads - 1) / static_cast<std::size_t>(n_threads);
    for (int t = 0; t < n_threads; ++t) {
      const std::size_t lo = std::min(report.users.size(), t * per);
      const std::size_t hi = std::min(report.users.size(), lo + per);
      if (lo < hi) pool.emplace_back(eval_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  report.mean_recall.assign(ks.size(), 0.0);
  for (const auto& row : report.per_user) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) report.mean_recall[ki] += row[ki];
  }
  for (auto& v : report.mean_recall) v /= static_cast<double>(report.users.size());
  return report;
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int df) {
  if (df < 1) throw ConfigError("student_t_two_sided_p: df must be >= 1");
  if (std::isinf(t)) return 0.0;
  const double nu = static_cast<double>(df);
  return incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("paired_ttest: length mismatch");
  const int n = static_cast<int>(a.size());
  if (n < 2) throw ConfigError("paired_ttest: need at least 2 pairs");

  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double var = ss / (n - 1);

  TTestResult res;
  res.df = n - 1;
  if (var == 0.0) {
    res.zero_variance = true;
    if (mean == 0.0) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = mean > 0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
      res.p = 0.0;
    }
    return res;
  }
  res.t = mean / std::sqrt(var / n);
  res.p = student_t_two_sided_p(res.t, res.df);
  return res;
}

}  // namespace tagrec

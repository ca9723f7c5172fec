#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "vaoi/risk_metrics.hpp"

using namespace vaoi;

namespace {

EvalTrace single_user(std::vector<int> v) {
  EvalTrace t;
  t.n_users = 1;
  for (int x : v) t.append({x}, 0);
  return t;
}

std::vector<double> random_samples(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 300);
  std::uniform_int_distribution<int> kind(0, 2);
  const int m = size(rng);
  std::vector<double> s(static_cast<std::size_t>(m));
  switch (kind(rng)) {
    case 0: {
      std::uniform_int_distribution<int> d(0, 50);
      for (auto& x : s) x = d(rng);
      break;
    }
    case 1: {
      std::exponential_distribution<double> e(0.3);
      for (auto& x : s) x = e(rng);
      break;
    }
    default: {
      std::normal_distribution<double> n(0.0, 10.0);
      for (auto& x : s) x = n(rng);
    }
  }
  return s;
}

}  // namespace

TEST(AverageVaoi, Examples) {
  EXPECT_DOUBLE_EQ(average_vaoi(single_user({1, 2, 0, 1, 1, 2, 2, 0})), 1.125);
  EXPECT_EQ(average_vaoi(single_user({0, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(average_vaoi(single_user({4, 4, 4, 4})), 4.0);
  EvalTrace two;
  two.n_users = 2;
  two.append({1, 3}, 1);
  two.append({0, 4}, 2);
  EXPECT_DOUBLE_EQ(average_vaoi(two), 2.0);
  EXPECT_EQ(two.at(1, 1), 4);
  EXPECT_THROW(average_vaoi(EvalTrace{}), ArgumentError);
  EXPECT_THROW(two.append({1}, 0), ArgumentError);
}

TEST(AverageCost, Examples) {
  EXPECT_DOUBLE_EQ(average_cost(std::vector<int>{0, 1, 2, 0}), 0.5);
  EXPECT_EQ(average_cost(std::vector<int>{0, 0, 0}), 0.0);
  EXPECT_EQ(average_cost(std::vector<int>{3, 1, 2}), 1.0);
  EXPECT_THROW(average_cost(std::vector<int>{}), ArgumentError);
}

TEST(AverageCost, RunningSeriesEndsAtTheAverage) {
  const std::vector<int> a{1, 0, 0, 2, 1, 0, 0, 0};
  const auto eta = running_cost_series(a);
  ASSERT_EQ(eta.size(), a.size());
  EXPECT_EQ(eta[0], 1.0);
  EXPECT_EQ(eta[1], 0.5);
  EXPECT_DOUBLE_EQ(eta.back(), average_cost(a));
}

TEST(EmpiricalCvar, HandExamples) {
  EXPECT_EQ(empirical_cvar({0, 0, 0, 4}, 0.5), 2.0);
  EXPECT_EQ(empirical_cvar({0, 1, 2, 3}, 0.75), 3.0);
  EXPECT_EQ(cvar_rockafellar_uryasev({0, 0, 0, 4}, 0.5), 2.0);
  EXPECT_EQ(cvar_rockafellar_uryasev({0, 1, 2, 3}, 0.75), 3.0);
  for (double a : {0.01, 0.3, 0.75, 0.99}) EXPECT_DOUBLE_EQ(empirical_cvar({2.5, 2.5, 2.5}, a), 2.5);
}

TEST(EmpiricalCvar, FractionalTail) {
  // m = 5, alpha = 0.7: k = 1.5, tail = (5 + 0.5 * 4) / 1.5
  EXPECT_NEAR(cvar_tail_average({1, 2, 3, 4, 5}, 0.7), 7.0 / 1.5, 1e-15);
  EXPECT_NEAR(empirical_cvar({1, 2, 3, 4, 5}, 0.7), 7.0 / 1.5, 1e-12);
}

TEST(EmpiricalCvar, DualFormsAgreeOnRandomSets) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> level(0.01, 0.99);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = random_samples(rng);
    const double a = level(rng);
    const double ru = cvar_rockafellar_uryasev(s, a);
    const double tail = cvar_tail_average(s, a);
    worst = std::max(worst, std::abs(ru - tail) / std::max(1.0, std::abs(tail)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(EmpiricalCvar, Invariants) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_samples(rng);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    const double mx = *std::max_element(s.begin(), s.end());
    double prev = -INFINITY;
    for (double a : {0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99}) {
      const double c = empirical_cvar(s, a);
      EXPECT_GE(c, mean - 1e-9);
      EXPECT_LE(c, mx + 1e-9);
      EXPECT_GE(c, prev - 1e-9);
      prev = c;
    }
  }
}

TEST(EmpiricalCvar, StrictlyAboveMeanUnlessConstant) {
  const std::vector<double> s{1, 1, 1, 2};
  EXPECT_GT(empirical_cvar(s, 0.5), 1.25);
  EXPECT_DOUBLE_EQ(empirical_cvar({3, 3}, 0.5), 3.0);
}

TEST(EmpiricalCvar, Errors) {
  EXPECT_THROW(empirical_cvar(std::vector<double>{}, 0.5), ArgumentError);
  EXPECT_THROW(empirical_cvar(std::vector<double>{1.0}, 0.0), ArgumentError);
  EXPECT_THROW(empirical_cvar(std::vector<double>{1.0}, 1.0), ArgumentError);
  EXPECT_THROW(empirical_cvar(std::vector<double>{1.0}, -0.2), ArgumentError);
}

TEST(EmpiricalCvar, TraceIsPooledAcrossUsers) {
  EvalTrace t;
  t.n_users = 2;
  t.append({0, 4}, 1);
  t.append({0, 0}, 0);
  EXPECT_EQ(empirical_cvar(t, 0.5), 2.0);
}

TEST(Metrics, PermutationInvariantOverSlots) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> v(0, 9), a(0, 3);
  EvalTrace t;
  t.n_users = 3;
  std::vector<std::vector<int>> rows;
  std::vector<int> acts;
  for (int i = 0; i < 50; ++i) {
    rows.push_back({v(rng), v(rng), v(rng)});
    acts.push_back(a(rng));
    t.append(rows.back(), acts.back());
  }
  std::vector<int> order(50);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  EvalTrace p;
  p.n_users = 3;
  for (int i : order) p.append(rows[static_cast<std::size_t>(i)], acts[static_cast<std::size_t>(i)]);
  EXPECT_DOUBLE_EQ(average_vaoi(t), average_vaoi(p));
  EXPECT_DOUBLE_EQ(average_cost(t), average_cost(p));
  EXPECT_DOUBLE_EQ(empirical_cvar(t, 0.75), empirical_cvar(p, 0.75));
}

TEST(WeightedCvar, MatchesEmpiricalOnUniformWeights) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_samples(rng);
    const std::vector<double> w(s.size(), 1.0 / static_cast<double>(s.size()));
    for (double a : {0.5, 0.75, 0.9}) EXPECT_NEAR(weighted_cvar(s, w, a), empirical_cvar(s, a), 1e-9 * std::max(1.0, std::abs(empirical_cvar(s, a))));
  }
  EXPECT_DOUBLE_EQ(weighted_cvar({0, 4}, {0.75, 0.25}, 0.5), 2.0);
  EXPECT_THROW(weighted_cvar({1, 2}, {1.0}, 0.5), ArgumentError);
  EXPECT_THROW(weighted_cvar({1}, {1.0}, 1.0), ArgumentError);
}

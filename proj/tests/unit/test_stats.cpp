#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/stats.hpp"
#include "forge/util.hpp"
#include "support.hpp"

using namespace forge;
using testing_support::fixture;

TEST(Pearson, FrozenTwentyPairs) {
  auto j = nlohmann::json::parse(read_text_file(fixture("stats/pearson20.json")));
  auto xs = j["xs"].get<std::vector<double>>();
  auto ys = j["ys"].get<std::vector<double>>();
  auto r = pearson(xs, ys);
  EXPECT_NEAR(r.r, 0.38750572101732573493, 1e-9);
  EXPECT_NEAR(r.p, 0.091393800940297414452, 1e-9);
}

TEST(Pearson, PerfectCorrelation) {
  std::vector<double> xs{1, 4, 2, 8, 5, 7};
  std::vector<double> neg;
  for (double x : xs) neg.push_back(-x);
  EXPECT_EQ(pearson(xs, xs).r, 1.0);
  EXPECT_EQ(pearson(xs, neg).r, -1.0);
  EXPECT_EQ(pearson(xs, xs).p, 0.0);
}

TEST(Pearson, Degenerate) {
  EXPECT_THROW(pearson({1, 2}, {1, 2}), DegenerateInput);
  EXPECT_THROW(pearson({1, 2, 3}, {1, 2}), DegenerateInput);
  EXPECT_THROW(pearson({1, 1, 1}, {1, 2, 3}), DegenerateInput);
}

// r = 0.0859 over 202 functions is reported with p = 0.224155.
TEST(Pearson, ReportedCyclesVersusGain) {
  double r = 0.0859, n = 202;
  double t = r * std::sqrt((n - 2) / (1 - r * r));
  EXPECT_NEAR(student_t_two_sided(t, n - 2), 0.224155, 1e-5);
}

TEST(Pearson, IncompleteBetaKnownValues) {
  EXPECT_NEAR(incomplete_beta(1, 1, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);  // 1 - sum_{k<2} C(4,k) .4^k .6^(4-k)
  EXPECT_EQ(incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(incomplete_beta(2, 3, 1.0), 1.0);
  // t with 1 df is Cauchy: p = 1 - 2 atan(t) / pi
  EXPECT_NEAR(student_t_two_sided(1.0, 1), 0.5, 1e-12);
  EXPECT_NEAR(student_t_two_sided(0.0, 10), 1.0, 1e-12);
}

TEST(Improvement, SixtySixOfHundredNinetyNine) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < 199; ++i) pairs.emplace_back(4, i < 66 ? 6 : (i % 2 ? 4 : 3));
  auto s = improvement_stats(pairs);
  EXPECT_EQ(s.n, 199);
  EXPECT_EQ(s.n_improved, 66);
  EXPECT_NEAR(s.improvement_rate, 33.2, 0.05);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", s.improvement_rate);
  EXPECT_STREQ(buf, "33.2");
}

TEST(Improvement, ZeroToEight) {
  auto s = improvement_stats({{0, 8}, {5, 5}, {6, 4}});
  EXPECT_EQ(s.max_gain, 8);
  EXPECT_EQ(s.median_gain, 0);
}

TEST(Improvement, AllFlat) {
  auto s = improvement_stats({{3, 3}, {0, 0}, {8, 8}});
  EXPECT_EQ(s.n_improved, 0);
  EXPECT_EQ(s.median_gain, 0);
  EXPECT_EQ(s.improvement_rate, 0.0);
  EXPECT_THROW(improvement_stats(std::vector<std::pair<int, int>>{}), EmptyInput);
}

TEST(Improvement, LowerMedian) {
  EXPECT_EQ(improvement_stats({{0, 1}, {0, 3}, {0, 5}, {0, 7}}).median_gain, 3);
}

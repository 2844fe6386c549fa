#include <gtest/gtest.h>

#include <numbers>
#include <thread>

#include "test_util.hpp"

using namespace mebn;
using namespace mebn::testing;

namespace {

GroupedDataset sized(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd v(static_cast<Eigen::Index>(n), 4);
  std::vector<int> g;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    g.push_back(static_cast<int>(r % 4));
    for (Eigen::Index c = 0; c < 4; ++c) v(r, c) = standard_normal(rng) + (c > 0 ? 0.8 * v(r, c - 1) : 0.0);
  }
  return make_dataset(v, g, 4);
}

Dag random_dag(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> nm;
  for (std::size_t i = 0; i < n; ++i) nm.push_back("X" + std::to_string(i + 1));
  Dag g(nm);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (uniform01(rng) < 0.4) g.set_arc(perm[a], perm[b], true);
  return g;
}

}  // namespace

TEST(Score, PenaltyExamples) {
  auto d = sized(100, 1);
  EXPECT_NEAR(bic_node(d, 1, {0}, Strategy::GBN).penalty, std::log(100.0) / 2 * 3, 1e-12);
  EXPECT_NEAR(bic_node(d, 2, {0, 1}, Strategy::LME).penalty, std::log(100.0) / 2 * 10, 1e-12);
  EXPECT_NEAR(bic_node(d, 2, {1}, Strategy::CGBN).penalty, std::log(100.0) / 2 * 12, 1e-12);
}

TEST(Score, HandComputedParentlessNode) {
  Eigen::MatrixXd v(5, 1);
  v << 1.0, 2.0, 4.0, 7.0, 11.0;
  auto d = make_dataset(v, {0, 0, 0, 0, 0}, 1);
  // mean 5, squared deviations 16 + 9 + 1 + 4 + 36 = 66, ML variance 13.2
  const double ll = -2.5 * (std::log(2 * std::numbers::pi * 13.2) + 1.0);
  auto s = bic_node(d, 0, {}, Strategy::GBN);
  EXPECT_NEAR(s.loglik, ll, 1e-9);
  EXPECT_NEAR(s.total, ll - std::log(5.0), 1e-9);
  EXPECT_EQ(s.total, s.loglik - s.penalty);
}

TEST(Score, GaussianLoglikMatchesDirectDensity) {
  auto d = chain_data(10, 3, 2);
  for (auto s : {Strategy::GBN, Strategy::CGBN}) {
    auto m = fit_parameters(Dag::from_arcs({"X1", "X2", "X3"}, {{"X1", "X2"}}), d, s);
    double direct = 0.0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const auto lg = m.locals[1].for_group(static_cast<std::size_t>(d.groups[r]));
      const double x = d.values(static_cast<Eigen::Index>(r), 1);
      const double mu = lg.intercept + lg.coefficients(0) * d.values(static_cast<Eigen::Index>(r), 0);
      direct += -0.5 * std::log(2 * std::numbers::pi * lg.variance) - 0.5 * (x - mu) * (x - mu) / lg.variance;
    }
    EXPECT_NEAR(bic_node(d, 1, {0}, s).loglik, direct, 1e-8);
  }
}

TEST(Score, DecomposableAndEmptyGraphSum) {
  auto d = sized(80, 3);
  Dag empty({"X1", "X2", "X3", "X4"});
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) sum += bic_node(d, i, {}, Strategy::GBN).total;
  EXPECT_EQ(bic_total(d, empty, Strategy::GBN, nullptr), sum);

  Dag one = empty;
  one.set_arc(0, 1, true);
  for (auto s : {Strategy::GBN, Strategy::CGBN, Strategy::LME}) {
    const double delta = bic_total(d, one, s, nullptr) - bic_total(d, empty, s, nullptr);
    EXPECT_NEAR(delta, bic_node(d, 1, {0}, s).total - bic_node(d, 1, {}, s).total, 1e-9);
  }
}

TEST(Score, CacheIsBitIdenticalToRecomputation) {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    auto d = sized(40 + static_cast<std::size_t>(rep), 100 + static_cast<std::uint64_t>(rep));
    auto dag = random_dag(4, rng);
    const auto s = static_cast<Strategy>(rep % 3);
    ScoreCache cache;
    const double first = bic_total(d, dag, s, &cache);
    const double cached = bic_total(d, dag, s, &cache);
    const double plain = bic_total(d, dag, s, nullptr);
    EXPECT_EQ(first, plain);
    EXPECT_EQ(cached, plain);
    EXPECT_GT(cache.hits(), 0u);
  }
}

TEST(Score, CacheUnderConcurrentUse) {
  auto d = sized(60, 5);
  ScoreCache cache;
  std::vector<double> results(4);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      double s = 0.0;
      for (std::size_t v = 0; v < 4; ++v)
        for (std::size_t u = 0; u < 4; ++u)
          if (u != v) s += cache.get(d, v, {u}, Strategy::LME).total;
      results[static_cast<std::size_t>(t)] = s;
    });
  for (auto& th : pool) th.join();
  for (double r : results) EXPECT_EQ(r, results[0]);
  EXPECT_EQ(cache.size(), 12u);
}

TEST(Score, PenaltyIncreasesWithParents) {
  auto d = sized(50, 6);
  for (auto s : {Strategy::GBN, Strategy::CGBN, Strategy::LME}) {
    double prev = -1.0;
    std::vector<std::size_t> parents;
    for (std::size_t k = 0; k < 3; ++k) {
      const double p = bic_node(d, 3, parents, s).penalty;
      EXPECT_GT(p, prev);
      prev = p;
      parents.push_back(k);
    }
  }
}

TEST(Score, FailureCarriesNodeContext) {
  Eigen::MatrixXd v(4, 2);
  v << 1, 5, 1, 6, 1, 7, 1, 8;  // constant X1 cannot act as an LME slope
  auto d = make_dataset(v, {0, 1, 0, 1}, 2);
  try {
    bic_node(d, 1, {0}, Strategy::LME);
    FAIL() << "expected a NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("X2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("X1"), std::string::npos);
  }
}

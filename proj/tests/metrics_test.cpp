#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace mebn;
using namespace mebn::testing;

namespace {

LinearGaussian lg(double a, std::vector<double> b, double v) {
  return {a, Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())), v};
}

}  // namespace

TEST(Metrics, ShdExamples) {
  auto chain = Dag::from_arcs({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});
  auto collider = Dag::from_arcs({"A", "B", "C"}, {{"A", "B"}, {"C", "B"}});
  EXPECT_EQ(shd(chain, chain), 0);
  EXPECT_EQ(shd(chain, collider), 2);
  EXPECT_EQ(shd(Dag({"A", "B", "C"}), collider), 2);
  auto full = Dag::from_arcs({"A", "B", "C", "D"}, {{"A", "B"}, {"A", "C"}, {"A", "D"}});
  EXPECT_EQ(shd(Dag({"A", "B", "C", "D"}), full), 3);
}

TEST(Metrics, ShdZeroExactlyOnMarkovEquivalence) {
  for (std::size_t n = 2; n <= 4; ++n) {
    auto dags = all_dags(n);
    for (std::size_t a = 0; a < dags.size(); ++a)
      for (std::size_t b = a; b < dags.size(); ++b) {
        const int d = shd(dags[a], dags[b]);
        EXPECT_EQ(d, shd(dags[b], dags[a]));
        EXPECT_EQ(d == 0, equivalence_key(dags[a]) == equivalence_key(dags[b]));
      }
  }
}

TEST(Metrics, ShdMatchesNodesByName) {
  auto g1 = Dag::from_arcs({"A", "B"}, {{"A", "B"}});
  auto g2 = Dag::from_arcs({"B", "A"}, {{"A", "B"}});
  EXPECT_EQ(shd(g1, g2), 0);
  EXPECT_THROW(shd(g1, Dag({"A", "C"})), DataError);
  EXPECT_THROW(shd(g1, Dag({"A", "B", "C"})), DataError);
}

TEST(Metrics, GroupNodeExtension) {
  auto g = Dag::from_arcs({"A", "B"}, {{"A", "B"}});
  auto ext = with_group_node(g, "F");
  EXPECT_EQ(ext.size(), 3u);
  EXPECT_EQ(ext.arc_count(), 1u);
  EXPECT_EQ(without_group_node(ext), g);
  // A GBN graph pays one unit for every missing F arc.
  auto truth = Dag::from_arcs({"A", "B", "F"}, {{"A", "B"}, {"F", "A"}, {"F", "B"}}, "F");
  EXPECT_EQ(shd(truth, ext), 2);
}

TEST(Metrics, GaussianKlExamples) {
  Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1), o1 = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd I1 = Eigen::MatrixXd::Identity(1, 1);
  EXPECT_NEAR(gaussian_kl(z1, I1, z1, I1), 0.0, 1e-15);
  EXPECT_NEAR(gaussian_kl(z1, I1, o1, I1), 0.5, 1e-12);
  Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_NEAR(gaussian_kl(Eigen::Vector2d::Zero(), I2, Eigen::Vector2d::Zero(), 2.0 * I2),
              0.5 * (1.0 - 2.0 + std::log(4.0)), 1e-12);
  EXPECT_NEAR(gaussian_kl(Eigen::Vector2d::Zero(), I2, Eigen::Vector2d::Zero(), 2.0 * I2), 0.19315, 1e-5);
  EXPECT_THROW(gaussian_kl(z1, -I1, z1, I1), NumericError);
}

TEST(Metrics, ModelKlZeroOnTruth) {
  Rng rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    auto m = random_model(4, 3, rng);
    EXPECT_NEAR(model_kl(m, m), 0.0, 1e-10);
  }
}

TEST(Metrics, ModelKlTwoGroupsVersusPooled) {
  auto truth = hand_model(Dag({"X"}), {{lg(0, {}, 1), lg(2, {}, 1)}}, Eigen::Vector2d(0.5, 0.5));
  auto pooled = hand_model(Dag({"X"}), {{lg(1, {}, 2)}}, Eigen::Vector2d(0.5, 0.5), Strategy::GBN);
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  const double expected = 0.5 * gaussian_kl(Eigen::VectorXd::Zero(1), one, p, 2.0 * one) +
                          0.5 * gaussian_kl(Eigen::VectorXd::Constant(1, 2.0), one, p, 2.0 * one);
  const double kl = model_kl(truth, pooled);
  EXPECT_NEAR(kl, expected, 1e-12);
  EXPECT_NEAR(kl, 0.5 * std::log(2.0), 1e-12);
  auto mc = oracle::mc_joint_kl(truth, pooled, 1000000, 2);
  EXPECT_NEAR(kl, mc.value, 3.0 * mc.std_error);
}

TEST(Metrics, ModelKlMatchesMonteCarloOnRandomPairs) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto truth = random_model(4, 3, rng);
    auto learned = random_model(4, 3, rng, rep % 2 ? Strategy::GBN : Strategy::CGBN);
    const double kl = model_kl(truth, learned);
    EXPECT_GE(kl, -1e-9);
    auto mc = oracle::mc_joint_kl(truth, learned, 40000, 100 + static_cast<std::uint64_t>(rep));
    EXPECT_NEAR(kl, mc.value, 3.0 * mc.std_error) << "pair " << rep;
  }
}

TEST(Metrics, ModelKlPriorTermAndAlignment) {
  auto a = hand_model(Dag({"X"}), {{lg(0, {}, 1), lg(0, {}, 1)}}, Eigen::Vector2d(0.5, 0.5));
  auto b = a;
  b.group_prior = Eigen::Vector2d(0.25, 0.75);
  EXPECT_NEAR(model_kl(a, b), 0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75), 1e-12);
  // Variables in a different order give the same KL.
  Rng rng(4);
  auto t = random_model(3, 2, rng);
  auto l = random_model(3, 2, rng);
  BnModel r = l;
  std::reverse(r.variables.begin(), r.variables.end());
  std::reverse(r.locals.begin(), r.locals.end());
  for (auto& loc : r.locals)
    for (auto& p : loc.parents) p = 2 - p;
  Dag rd = canonical_dag(r.variables, r.group_node, r.strategy);
  for (auto arc : l.dag.arcs()) {
    auto map = [&](std::size_t i) { return l.dag.is_group(i) ? rd.index_of(r.group_node) : rd.index_of(l.dag.name(i)); };
    rd.set_arc(map(arc.from), map(arc.to), true);
  }
  r.dag = rd;
  EXPECT_NEAR(model_kl(t, r), model_kl(t, l), 1e-10);
  auto other = hand_model(Dag({"Y"}), {{lg(0, {}, 1), lg(0, {}, 1)}}, Eigen::Vector2d(0.5, 0.5));
  EXPECT_THROW(model_kl(a, other), DataError);
}

TEST(Metrics, XMarginalDiagnosticIsZeroOnTruth) {
  Rng rng(5);
  auto m = random_model(3, 2, rng);
  auto r = mc_kl_x_marginal(m, m, 500, 6);
  EXPECT_NEAR(r.value, 0.0, 1e-12);
  auto pooled = hand_model(Dag({"X"}), {{lg(1, {}, 2)}}, Eigen::Vector2d(0.5, 0.5), Strategy::GBN);
  auto truth = hand_model(Dag({"X"}), {{lg(0, {}, 1), lg(2, {}, 1)}}, Eigen::Vector2d(0.5, 0.5));
  auto mc = mc_kl_x_marginal(truth, pooled, 20000, 7);
  // The marginal drops the group, so it cannot exceed the joint KL.
  EXPECT_LT(mc.value, model_kl(truth, pooled));
  EXPECT_GT(mc.value, 0.0);
}

TEST(Metrics, RmadExamples) {
  Eigen::MatrixXd x(2, 1), xh(2, 1);
  x << 1, 2;
  xh << 2, 1;
  EXPECT_NEAR(rmad(x, x).value, 0.0, 1e-15);
  EXPECT_NEAR(rmad(x, xh).value, 0.75, 1e-15);
  Eigen::MatrixXd x2(2, 2), xh2(2, 2);
  x2 << 3, 1, 4, 2;
  xh2 << 3, 2, 4, 1;
  EXPECT_NEAR(rmad(x2, xh2).value, 0.375, 1e-15);
  Eigen::MatrixXd z(2, 1), zh(2, 1);
  z << 0, 2;
  zh << 5, 1;
  auto r = rmad(z, zh);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_NEAR(r.value, 0.5, 1e-15);
  EXPECT_THROW(rmad(x, x2), std::invalid_argument);
}

TEST(Metrics, MacroF1Examples) {
  std::vector<std::size_t> t{0, 1, 2, 0};
  EXPECT_DOUBLE_EQ(macro_f1(t, t, 3), 1.0);
  // Binary: TP = 2, FP = 1, FN = 1 for class 0.
  std::vector<std::size_t> bt{0, 0, 0, 1, 1}, bp{0, 0, 1, 0, 1};
  EXPECT_NEAR(macro_f1(bt, bp, 2), 2.0 / 3.0, 1e-15);
  // Per-class F1 of (1, 0.5, 0).
  std::vector<std::size_t> mt{0, 1, 1, 2}, mp{0, 1, 2, 1};
  EXPECT_NEAR(macro_f1(mt, mp, 3), 0.5, 1e-15);
  // A class that never appears scores 0.
  std::vector<std::size_t> only{0, 0};
  EXPECT_NEAR(macro_f1(only, only, 3), 1.0 / 3.0, 1e-15);
}

TEST(Metrics, SamplesPerParameter) {
  auto m = hand_model(Dag::from_arcs({"A", "B"}, {{"A", "B"}}), {{lg(0, {}, 1), lg(0, {}, 1)}, {lg(0, {1}, 1), lg(0, {1}, 1)}},
                      Eigen::Vector2d(0.5, 0.5));
  EXPECT_NEAR(samples_per_parameter({10, 10}, m), 20.0 / 11.0, 1e-15);
  EXPECT_NEAR(samples_per_parameter({20, 20}, m), 2.0 * 20.0 / 11.0, 1e-15);
  auto one = hand_model(Dag({"A"}), {{lg(0, {}, 1)}}, Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(samples_per_parameter({10}, one), 5.0, 1e-15);
}

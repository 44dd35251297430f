#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "predin/metrics.hpp"
#include "predin/scoring.hpp"

using namespace predin;

namespace {

std::vector<bool> mask_of(std::initializer_list<int> v) { return std::vector<bool>(v.begin(), v.end()); }

std::unique_ptr<bool[]> to_array(const std::vector<bool>& m) {
  auto out = std::make_unique<bool[]>(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i];
  return out;
}

std::optional<double> incon_of(const std::vector<int>& a, const std::vector<int>& b,
                               const std::vector<bool>& known) {
  auto arr = to_array(known);
  return incon_metric(a, b, std::span<const bool>(arr.get(), known.size()));
}

}  // namespace

// scoring

TEST(Similarity, OrthogonalGivesZero) {
  Eigen::MatrixXd P(2, 3);
  P << 1, 0, 0, 0, 1, 0;
  Eigen::VectorXd z(3);
  z << 0, 0, 5;
  EXPECT_TRUE(branch_similarity(z, P).isZero(0.0));
}

TEST(Similarity, SelfSimilarityIsSquaredNorm) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXd P(4, 6);
  for (Eigen::Index i = 0; i < P.size(); ++i) P(i) = g(rng);
  for (Eigen::Index k = 1; k < 4; ++k) P.row(k).normalize();
  const Eigen::VectorXd z = P.row(0).transpose();
  EXPECT_EQ(branch_similarity(z, P)(0), P.row(0).squaredNorm());
}

TEST(Similarity, MatchesScalarLoop) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd P(5, 7);
  Eigen::VectorXd z(7);
  for (Eigen::Index i = 0; i < P.size(); ++i) P(i) = g(rng);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = g(rng);
  const Eigen::VectorXd s = branch_similarity(z, P);
  for (int k = 0; k < 5; ++k) {
    double ref = 0.0;
    for (int d = 0; d < 7; ++d) ref += z(d) * P(k, d);
    EXPECT_NEAR(s(k), ref, 1e-12);
  }
}

TEST(Similarity, DimMismatchThrows) {
  EXPECT_THROW(branch_similarity(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(2, 4)),
               InvalidArgument);
}

TEST(Fuse, MeanOfTwo) {
  Eigen::VectorXd a(1), b(1);
  a << 2;
  b << 4;
  EXPECT_EQ(fuse_scores(std::vector<Eigen::VectorXd>{a, b})(0), 3.0);
}

TEST(Fuse, SingleBranchIdentity) {
  Eigen::VectorXd a(3);
  a << 0.1, -2, 7;
  EXPECT_EQ(fuse_scores(std::vector<Eigen::VectorXd>{a}), a);
}

TEST(Fuse, FiveEqualBranches) {
  Eigen::VectorXd v(3);
  v << 0.25, 0.5, -1.0;
  EXPECT_EQ(fuse_scores(std::vector<Eigen::VectorXd>(5, v)), v);
}

TEST(Fuse, LengthMismatchThrows) {
  EXPECT_THROW(fuse_scores(std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(2),
                                                         Eigen::VectorXd::Zero(3)}),
               InvalidArgument);
  EXPECT_THROW(fuse_scores(std::vector<Eigen::VectorXd>{}), InvalidArgument);
}

TEST(Fuse, ConstantShiftKeepsArgmax) {
  Eigen::VectorXd a(3), b(3);
  a << 0.2, 0.9, 0.1;
  b << 0.4, 0.3, 0.2;
  const auto base = classify(fuse_scores(std::vector<Eigen::VectorXd>{a, b}));
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 2.5);
  const auto shifted = classify(fuse_scores(std::vector<Eigen::VectorXd>{a + c, b + c}));
  EXPECT_EQ(base.predicted, shifted.predicted);
  EXPECT_NEAR(shifted.s_max, base.s_max + 2.5, 1e-12);
}

TEST(Classify, Argmax) {
  Eigen::VectorXd s(3);
  s << 0.1, 0.9, 0.3;
  const auto c = classify(s);
  EXPECT_EQ(c.s_max, 0.9);
  EXPECT_EQ(c.predicted, 1);  // 0-based
}

TEST(Classify, TiesGoLowest) {
  EXPECT_EQ(classify(Eigen::VectorXd::Constant(4, 0.3)).predicted, 0);
  Eigen::VectorXd s(4);
  s << 0.1, 0.5, 0.5, 0.2;
  EXPECT_EQ(classify(s).predicted, 1);
}

TEST(Classify, PermutationEquivariance) {
  Eigen::VectorXd s(4);
  s << 0.1, 0.7, 0.3, 0.2;
  std::vector<int> perm{2, 0, 3, 1};
  Eigen::VectorXd t(4);
  for (int i = 0; i < 4; ++i) t(perm[i]) = s(i);
  EXPECT_EQ(classify(t).predicted, perm[classify(s).predicted]);
}

TEST(Threshold, NearestRankOneToHundred) {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  const auto t = calibrate_threshold(s, 0.95);
  EXPECT_EQ(t.value, 5.0);
  EXPECT_DOUBLE_EQ(t.achieved_retention, 0.96);
  EXPECT_EQ(t.calibration_size, 100u);
}

TEST(Threshold, HalfOfTwo) {
  const auto t = calibrate_threshold(std::vector<double>{2.0, 1.0}, 0.5);
  EXPECT_EQ(t.value, 1.0);
  EXPECT_EQ(t.achieved_retention, 1.0);
}

TEST(Threshold, AllEqual) {
  const auto t = calibrate_threshold(std::vector<double>(7, 0.4), 0.95);
  EXPECT_EQ(t.value, 0.4);
  EXPECT_EQ(t.achieved_retention, 1.0);
}

TEST(Threshold, Errors) {
  EXPECT_THROW(calibrate_threshold(std::vector<double>{}, 0.95), InvalidArgument);
  EXPECT_THROW(calibrate_threshold(std::vector<double>{1.0}, 1.0), InvalidArgument);
  EXPECT_THROW(calibrate_threshold(std::vector<double>{1.0}, 0.0), InvalidArgument);
}

TEST(Threshold, SelfCalibrationRetainsTarget) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + trial * 7);
    for (auto& v : s) v = std::round(g(rng) * 3.0) / 3.0;
    for (double r : {0.5, 0.9, 0.95, 0.99}) {
      const auto t = calibrate_threshold(s, r);
      std::size_t kept = 0;
      for (double v : s) kept += decide(v, 0, t).accepted;
      EXPECT_GE(static_cast<double>(kept) / static_cast<double>(s.size()), r);
    }
  }
}

TEST(Decide, Boundary) {
  Threshold t;
  t.value = 0.5;
  EXPECT_TRUE(decide(0.7, 2, t).accepted);
  EXPECT_EQ(decide(0.7, 2, t).predicted, 2);
  EXPECT_FALSE(decide(0.3, 2, t).accepted);
  EXPECT_TRUE(decide(0.5, 2, t).accepted);
}

TEST(ScoreSamples, InvariantsHold) {
  Eigen::MatrixXd a(2, 3), b(2, 3);
  a << 1, 2, 3, 0, 0, 1;
  b << 3, 2, 1, 4, 0, 1;
  Labels y(2);
  y << 1, -1;
  const auto out = score_samples({a, b}, y);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].fused_scores, Eigen::Vector3d(2, 2, 2));
  EXPECT_EQ(out[0].predicted_class, 0);
  EXPECT_EQ(out[1].s_max, 2.0);
  EXPECT_EQ(out[1].predicted_class, 0);
  EXPECT_EQ(out[1].true_label, -1);
  EXPECT_EQ(out[1].sims_per_branch.size(), 2u);
}

// metrics

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.5, 0.1}), 0.75);
  const std::vector<double> v{0.3, 0.1, 0.7, 0.7};
  EXPECT_EQ(auc(v, v), 0.5);
}

TEST(Auc, EmptyThrows) {
  EXPECT_THROW(auc(std::vector<double>{}, std::vector<double>{1.0}), InvalidArgument);
  EXPECT_THROW(auc(std::vector<double>{1.0}, std::vector<double>{}), InvalidArgument);
}

TEST(Auc, SwapComplementsWithoutTies) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    auto in = oracle::random_instance(rng, 60);
    for (auto& s : in.known_scores) s += 1e-7 * std::sin(s * 1e3 + 1.0);  // break quantized ties
    std::vector<double> all = in.known_scores;
    all.insert(all.end(), in.unknown.begin(), in.unknown.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end()) continue;
    EXPECT_NEAR(auc(in.known_scores, in.unknown) + auc(in.unknown, in.known_scores), 1.0, 1e-12);
  }
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(closed_acc(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}), 1.0);
  EXPECT_EQ(closed_acc(std::vector<int>{1, 0}, std::vector<int>{0, 1}), 0.0);
  EXPECT_EQ(closed_acc(std::vector<int>{0, 1, 2, 3}, std::vector<int>{0, 1, 2, 0}), 0.75);
  EXPECT_THROW(closed_acc(std::vector<int>{}, std::vector<int>{}), InvalidArgument);
  EXPECT_THROW(closed_acc(std::vector<int>{1}, std::vector<int>{1, 2}), InvalidArgument);
}

TEST(Oscr, Examples) {
  std::vector<KnownOutcome> k{{0.9, true}, {0.8, false}};
  EXPECT_EQ(oscr(k, std::vector<double>{0.85}), 0.5);
  std::vector<KnownOutcome> perfect{{0.9, true}, {0.8, true}};
  EXPECT_EQ(oscr(perfect, std::vector<double>{0.1, 0.2}), 1.0);
  std::vector<KnownOutcome> wrong{{0.9, false}, {0.8, false}};
  EXPECT_EQ(oscr(wrong, std::vector<double>{0.1, 0.95}), 0.0);
  EXPECT_THROW(oscr(std::vector<KnownOutcome>{}, std::vector<double>{0.1}), InvalidArgument);
  EXPECT_THROW(oscr(k, std::vector<double>{}), InvalidArgument);
}

TEST(Oracle, HandExamples) {
  EXPECT_EQ(oracle::sweep_oscr({{0.9, true}, {0.8, false}}, {0.85}), 0.5);
  EXPECT_EQ(oracle::pairwise_auc({0.9, 0.4}, {0.5, 0.1}), 0.75);
}

TEST(Metrics, MatchBruteForceOracles) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto in = oracle::random_instance(rng, 300);
    EXPECT_NEAR(auc(in.known_scores, in.unknown), oracle::pairwise_auc(in.known_scores, in.unknown),
                1e-9);
    EXPECT_NEAR(oscr(in.known, in.unknown), oracle::sweep_oscr(in.known, in.unknown), 1e-9);
  }
}

TEST(Metrics, MonotoneTransformInvariance) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    auto in = oracle::random_instance(rng, 80);
    auto f = [](double x) { return std::exp(0.5 * x) * 3.0 - 1.0; };
    auto t = in;
    for (auto& s : t.known_scores) s = f(s);
    for (auto& k : t.known) k.s_max = f(k.s_max);
    for (auto& u : t.unknown) u = f(u);
    EXPECT_EQ(auc(in.known_scores, in.unknown), auc(t.known_scores, t.unknown));
    EXPECT_EQ(oscr(in.known, in.unknown), oscr(t.known, t.unknown));
  }
}

TEST(Metrics, OscrBoundedByAccuracy) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto in = oracle::random_instance(rng, 100);
    double acc = 0.0;
    for (const auto& k : in.known) acc += k.correct;
    acc /= static_cast<double>(in.known.size());
    EXPECT_LE(oscr(in.known, in.unknown), acc + 1e-12);
  }
}

TEST(Incon, RatioArithmetic) {
  // known: 1 of 10 differs, unknown: 2 of 5 differ
  std::vector<int> a(15, 0), b(15, 0);
  std::vector<bool> known(15, false);
  for (int i = 0; i < 10; ++i) known[i] = true;
  b[0] = 1;
  b[10] = 2;
  b[11] = 1;
  EXPECT_NEAR(*incon_of(a, b, known), 4.0, 1e-12);
}

TEST(Incon, EqualFractions) {
  std::vector<int> a{0, 0, 1, 1}, b{1, 0, 0, 1};
  EXPECT_EQ(*incon_of(a, b, mask_of({1, 1, 0, 0})), 1.0);
}

TEST(Incon, UndefinedWhenKnownAgree) {
  EXPECT_FALSE(incon_of({0, 1, 0}, {0, 1, 2}, mask_of({1, 1, 0})).has_value());
  EXPECT_FALSE(incon_of({0, 1, 0}, {0, 1, 0}, mask_of({1, 1, 0})).has_value());
}

TEST(Incon, Errors) {
  EXPECT_THROW(incon_of({0, 1}, {0, 1}, mask_of({1, 1})), InvalidArgument);
  EXPECT_THROW(incon_of({0, 1}, {0, 1}, mask_of({0, 0})), InvalidArgument);
  EXPECT_THROW(incon_of({0, 1}, {0}, mask_of({0, 1})), InvalidArgument);
}

TEST(Proximity, OrthonormalUniform) {
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(4, 6);
  const Eigen::MatrixXd M = proximity_matrix(P);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(M(i, j), i == j ? 0.0 : 1.0 / 3.0, 1e-12);
}

TEST(Proximity, NearDuplicateDominates) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(4, 4) * 3.0;
  P.row(1) = P.row(0);
  P(1, 1) = 0.1;
  const Eigen::MatrixXd M = proximity_matrix(P);
  EXPECT_GT(M(0, 1), 0.9);
  EXPECT_GT(M(1, 0), 0.9);
  EXPECT_EQ(M.rows(), 4);
  EXPECT_EQ(M.cols(), 4);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(M(k, k), 0.0);
    EXPECT_NEAR(M.row(k).sum(), 1.0, 1e-12);
  }
}

TEST(Proximity, NeedsTwoPrototypes) {
  EXPECT_THROW(proximity_matrix(Eigen::MatrixXd::Ones(1, 3)), InvalidArgument);
}

TEST(Agreement, IdenticalListsAreDiagonal) {
  std::vector<int> p{0, 2, 1, 2, 0};
  auto m = to_array(std::vector<bool>(5, true));
  const Eigen::MatrixXi C =
      agreement_confusion(p, p, std::span<const bool>(m.get(), 5), Subset::known, 3);
  EXPECT_EQ(C.sum(), 5);
  EXPECT_EQ(C.diagonal().sum(), 5);
  EXPECT_EQ(C(2, 2), 2);
  EXPECT_EQ(off_diagonal_fraction(C), 0.0);
}

TEST(Agreement, TotalsEqualSubsetSize) {
  std::vector<int> a{0, 1, 2, 0, 1, 2, 0}, b{1, 1, 0, 0, 2, 2, 1};
  const auto known = mask_of({1, 0, 1, 0, 1, 1, 0});
  auto m = to_array(known);
  std::span<const bool> s(m.get(), known.size());
  const Eigen::MatrixXi K = agreement_confusion(a, b, s, Subset::known, 3);
  const Eigen::MatrixXi U = agreement_confusion(a, b, s, Subset::unknown, 3);
  EXPECT_EQ(K.sum(), 4);
  EXPECT_EQ(U.sum(), 3);
  EXPECT_EQ(K(0, 1), 1);
  EXPECT_NEAR(off_diagonal_fraction(U), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(off_diagonal_fraction(Eigen::MatrixXi::Zero(3, 3)), 0.0);
}

TEST(Agreement, OutOfRangeThrows) {
  std::vector<int> a{3}, b{0};
  auto m = to_array({true});
  EXPECT_THROW(agreement_confusion(a, b, std::span<const bool>(m.get(), 1), Subset::known, 3),
               InvalidArgument);
}

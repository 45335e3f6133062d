#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "bnp_dcgx/model.hpp"
#include "bnp_dcgx/stability.hpp"

using namespace dcgx;
using Eigen::MatrixXd;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Parse;
}

}  // namespace

TEST(Dataset, ValidShapes) {
  const auto d = validate_dataset(MatrixXd::Ones(3, 2), MatrixXd::Ones(3, 1));
  EXPECT_EQ(d.n(), 3);
  EXPECT_EQ(d.p(), 2);
  EXPECT_EQ(d.q(), 1);
  ASSERT_EQ(d.gene_names.size(), 2u);
  EXPECT_EQ(d.gene_names[0], "g1");
}

TEST(Dataset, NanIsRejected) {
  MatrixXd Y = MatrixXd::Ones(3, 2);
  Y(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { validate_dataset(Y, MatrixXd::Ones(3, 1)); }), Errc::NonFinite);
}

TEST(Dataset, RowMismatchIsRejected) {
  EXPECT_EQ(code_of([&] { validate_dataset(MatrixXd::Ones(3, 2), MatrixXd::Ones(4, 1)); }), Errc::ShapeMismatch);
}

TEST(Dataset, TooSmallIsRejected) {
  EXPECT_EQ(code_of([&] { validate_dataset(MatrixXd::Ones(1, 2), MatrixXd::Ones(1, 1)); }), Errc::TooSmall);
  EXPECT_EQ(code_of([&] { validate_dataset(MatrixXd::Ones(3, 1), MatrixXd::Ones(3, 1)); }), Errc::TooSmall);
}

TEST(Hyperparams, DefaultsValidate) { EXPECT_NO_THROW(Hyperparams{}.validate()); }

TEST(Hyperparams, BadValuesRejected) {
  Hyperparams hp;
  hp.temperatures = {2.0, 1.5};
  EXPECT_THROW(hp.validate(), Error);
  hp = {};
  hp.temperatures = {1.0, 2.0, 2.0};
  EXPECT_THROW(hp.validate(), Error);
  hp = {};
  hp.n_burn = hp.n_iter;
  EXPECT_THROW(hp.validate(), Error);
  hp = {};
  hp.nu0 = 1.0;
  EXPECT_THROW(hp.validate(), Error);
}

TEST(InitState, SingleClusterStart) {
  const auto d = validate_dataset(MatrixXd::Random(5, 3), MatrixXd::Random(5, 2));
  Hyperparams hp;
  hp.init_clusters = 1;
  Rng rng = make_stream(1, 0);
  const auto s = init_state(d, hp, 1.0, rng);
  EXPECT_EQ(s.num_clusters(), 1);
  for (int label : s.xi) EXPECT_EQ(label, 0);
  EXPECT_TRUE(s.clusters[0].B.isZero());
  EXPECT_TRUE(is_stable(s.clusters[0].B, hp.eps_stab));
  EXPECT_TRUE((s.tau.array() == 1.0).all());
}

TEST(InitState, TemperatureIsCopied) {
  const auto d = validate_dataset(MatrixXd::Random(5, 3), MatrixXd::Random(5, 2));
  Rng rng = make_stream(1, 0);
  EXPECT_EQ(init_state(d, Hyperparams{}, 2.5, rng).temperature, 2.5);
}

TEST(InitState, SameSeedSameState) {
  const auto d = validate_dataset(MatrixXd::Random(20, 3), MatrixXd::Random(20, 2));
  Hyperparams hp;
  Rng a = make_stream(9, 0);
  Rng b = make_stream(9, 0);
  const auto sa = init_state(d, hp, 1.0, a);
  const auto sb = init_state(d, hp, 1.0, b);
  EXPECT_EQ(sa.xi, sb.xi);
  ASSERT_EQ(sa.num_clusters(), sb.num_clusters());
  for (int l = 0; l < sa.num_clusters(); ++l) {
    EXPECT_EQ(sa.clusters[l].sigma, sb.clusters[l].sigma);
    EXPECT_EQ(sa.clusters[l].eta, sb.clusters[l].eta);
  }
}

TEST(InitState, KmeansSeparatesWellSplitGroups) {
  MatrixXd X(30, 2);
  for (int i = 0; i < 30; ++i) {
    const double centre = (i / 10) * 10.0;
    X(i, 0) = centre + 0.01 * i;
    X(i, 1) = -centre;
  }
  Rng rng = make_stream(2, 0);
  const auto labels = kmeans_labels(X, 3, rng);
  for (int g = 0; g < 3; ++g) {
    for (int i = 1; i < 10; ++i) EXPECT_EQ(labels[g * 10 + i], labels[g * 10]);
  }
  EXPECT_NE(labels[0], labels[10]);
  EXPECT_NE(labels[10], labels[20]);
  EXPECT_EQ(labels[0], 0);
}

TEST(CompactLabels, DropsEmptyAndRelabels) {
  ChainState s;
  s.xi = {2, 0, 2};
  s.clusters.resize(3);
  s.clusters[0].eta = 10;
  s.clusters[2].eta = 30;
  compact_labels(s);
  EXPECT_EQ(s.xi, (std::vector<int>{0, 1, 0}));
  ASSERT_EQ(s.num_clusters(), 2);
  EXPECT_EQ(s.clusters[0].eta, 30);
  EXPECT_EQ(s.clusters[1].eta, 10);
}

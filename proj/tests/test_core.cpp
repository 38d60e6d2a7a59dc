#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "hubertl/core.hpp"
#include "hubertl/rng.hpp"
#include "hubertl/solver.hpp"
#include "test_util.hpp"

using namespace hubertl;

namespace {

Dataset column_dataset(std::initializer_list<double> col) {
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(col.size()), 1);
  d.y.resize(static_cast<Eigen::Index>(col.size()));
  Eigen::Index i = 0;
  for (double v : col) {
    d.X(i, 0) = v;
    d.y(i) = 0.0;
    ++i;
  }
  return d;
}

}  // namespace

TEST_CASE("standardize maps (1,2,3) to (-sqrt(3/2),0,sqrt(3/2))") {
  Dataset d = column_dataset({1.0, 2.0, 3.0});
  auto [sd, stats] = standardize(d);
  const double v = std::sqrt(1.5);
  CHECK(sd.X(0, 0) == doctest::Approx(-v).epsilon(1e-12));
  CHECK(sd.X(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sd.X(2, 0) == doctest::Approx(v).epsilon(1e-12));
  CHECK(stats.means(0) == doctest::Approx(2.0));
  CHECK(stats.scales(0) == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("standardize is idempotent") {
  Dataset d = testing::make_instance(40, 3, 101);
  auto [s1, st1] = standardize(d);
  auto [s2, st2] = standardize(s1);
  CHECK((s2.X - s1.X).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(st2.means.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((st2.scales.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize rejects constant columns with a column index") {
  Dataset d = testing::make_instance(10, 2, 7);
  d.X.col(1).setConstant(3.0);
  CHECK_THROWS_WITH_AS(standardize(d), doctest::Contains("column 2"), DataError);
}

TEST_CASE("fit on standardized data maps back to raw-data fit at lambda=0") {
  Dataset d = testing::make_instance(60, 4, 303, 0.3);
  auto [sd, stats] = standardize(d);
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.lambda = 0.0;
  cfg.tol = 1e-10;
  FitResult raw = fit(d, cfg);
  FitResult std_fit = fit(sd, cfg);
  CoefVector back = destandardize_coef(std_fit.coef, stats);
  Eigen::VectorXd pr = predict(d.X, raw.coef);
  Eigen::VectorXd pb = predict(d.X, back);
  CHECK((pr - pb).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("l1_distance basics") {
  CoefVector a(0.0, Eigen::VectorXd::Zero(20));
  for (int j = 0; j < 14; ++j) a.slopes(j) = 0.3;
  CHECK(l1_distance(a, a) == 0.0);
  CoefVector b = a;
  b.slopes(4) += 0.2;
  CHECK(l1_distance(a, b) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("l1_distance of a Rademacher shift is (h/p)(p+1)") {
  const int p = 37;
  const double h = 4.0;
  Rng rng(55);
  CoefVector a(0.1, Eigen::VectorXd::Random(p));
  CoefVector b = a;
  b.intercept += (h / p) * rng.rademacher();
  for (int j = 0; j < p; ++j) b.slopes(j) += (h / p) * rng.rademacher();
  CHECK(l1_distance(a, b) == doctest::Approx((h / p) * (p + 1)).epsilon(1e-12));
}

TEST_CASE("l1_distance is a metric on random triples") {
  Rng rng(66);
  for (int t = 0; t < 20; ++t) {
    const int p = 5;
    auto rand_coef = [&]() {
      Eigen::VectorXd s(p);
      for (int j = 0; j < p; ++j) s(j) = rng.normal();
      return CoefVector(rng.normal(), s);
    };
    CoefVector a = rand_coef(), b = rand_coef(), c = rand_coef();
    const double dab = l1_distance(a, b);
    const double dba = l1_distance(b, a);
    CHECK(dab == dba);
    CHECK(dab >= 0.0);
    CHECK(l1_distance(a, c) <= dab + l1_distance(b, c) + 1e-12);
    CHECK(l1_distance(a, a) == 0.0);
  }
}

TEST_CASE("l1_distance rejects dimension mismatch") {
  CoefVector a(0.0, Eigen::VectorXd::Zero(3));
  CoefVector b(0.0, Eigen::VectorXd::Zero(4));
  CHECK_THROWS_AS(l1_distance(a, b), DataError);
}

TEST_CASE("dataset validation catches shape and finiteness problems") {
  Dataset d = testing::make_instance(5, 2, 9);
  CHECK_NOTHROW(d.validate());
  Dataset bad = d;
  bad.y.resize(4);
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.X(2, 1) = std::nan("");
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  bad.y(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("csv round trip preserves values exactly") {
  Dataset d = testing::make_instance(25, 4, 77);
  d.label = "roundtrip";
  const std::string path = "test_core_roundtrip.csv";
  write_dataset_csv(d, path);
  Dataset r = read_dataset_csv(path, "roundtrip");
  CHECK(r.n() == d.n());
  CHECK(r.p() == d.p());
  CHECK((r.y - d.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.X - d.X).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("csv reader rejects malformed input") {
  const std::string path = "test_core_bad.csv";
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("y,x1,x2\n1.0,2.0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_dataset_csv(path, "bad"), DataError);
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("y,x1\n1.0,abc\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_dataset_csv(path, "bad"), DataError);
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("resp,x1\n1.0,2.0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_dataset_csv(path, "bad"), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("subset picks the requested rows") {
  Dataset d = testing::make_instance(10, 2, 31);
  Dataset s = d.subset({1, 4, 7});
  CHECK(s.n() == 3);
  CHECK(s.y(0) == d.y(1));
  CHECK(s.y(2) == d.y(7));
  CHECK(s.X(1, 1) == d.X(4, 1));
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pdfm/errors.hpp"
#include "pdfm/idw.hpp"
#include "pdfm/rng.hpp"

using namespace pdfm;
using namespace pdfm::baselines;

TEST(Idw, SinglePointPredictsItsValueEverywhere) {
  auto model = idw_fit(std::vector<LatLon>{{10, 20}}, std::vector<double>{7.5});
  EXPECT_DOUBLE_EQ(idw_predict_one(model, {10, 20}), 7.5);
  EXPECT_DOUBLE_EQ(idw_predict_one(model, {-30, 100}), 7.5);
}

TEST(Idw, ExactAtTrainingCoordinates) {
  std::vector<LatLon> coords{{0, 0}, {0, 1}, {1, 0}, {2, 2}};
  std::vector<double> values{1, 2, 3, 4};
  auto model = idw_fit(coords, values);
  for (std::size_t i = 0; i < coords.size(); ++i)
    EXPECT_DOUBLE_EQ(idw_predict_one(model, coords[i]), values[i]);
}

TEST(Idw, CoincidentPointsAverage) {
  std::vector<LatLon> coords{{0, 0}, {0, 0}, {0, 1}};
  std::vector<double> values{2, 4, 100};
  auto model = idw_fit(coords, values);
  EXPECT_DOUBLE_EQ(idw_predict_one(model, {0, 0}), 3.0);
}

TEST(Idw, EquidistantSymmetry) {
  // Query midway between values 0 and 10 -> 5.
  std::vector<LatLon> coords{{0, -1}, {0, 1}};
  std::vector<double> values{0, 10};
  auto model = idw_fit(coords, values);
  EXPECT_NEAR(idw_predict_one(model, {0, 0}), 5.0, 1e-9);
}

TEST(Idw, ThreePointHandFixture) {
  // Direct formula evaluation with p=2, k=3 on an asymmetric query.
  std::vector<LatLon> coords{{0, 0}, {0, 1}, {0, 2}};
  std::vector<double> values{1, 5, 9};
  auto model = idw_fit(coords, values, 2.0, 3);
  const LatLon q{0, 0.4};
  double wsum = 0, vsum = 0;
  for (int i = 0; i < 3; ++i) {
    const double d = geodesic_distance_miles(coords[i], q);
    const double w = 1.0 / (d * d);
    wsum += w;
    vsum += w * values[i];
  }
  EXPECT_NEAR(idw_predict_one(model, q), vsum / wsum, 1e-12);
}

TEST(Idw, ConvexHullProperty) {
  Rng rng(61);
  std::vector<LatLon> coords;
  std::vector<double> values;
  for (int i = 0; i < 50; ++i) {
    coords.push_back({rng.uniform(30, 40), rng.uniform(-110, -90)});
    values.push_back(rng.uniform(-5, 5));
  }
  auto model = idw_fit(coords, values, 2.0, 8);
  const double lo = *std::min_element(values.begin(), values.end());
  const double hi = *std::max_element(values.begin(), values.end());
  for (int t = 0; t < 2000; ++t) {
    const LatLon q{rng.uniform(28, 42), rng.uniform(-112, -88)};
    const double p = idw_predict_one(model, q);
    EXPECT_GE(p, lo - 1e-12);
    EXPECT_LE(p, hi + 1e-12);
  }
}

TEST(Idw, PermutationInvariant) {
  Rng rng(62);
  std::vector<LatLon> coords;
  std::vector<double> values;
  for (int i = 0; i < 30; ++i) {
    coords.push_back({rng.uniform(30, 40), rng.uniform(-110, -90)});
    values.push_back(rng.normal());
  }
  auto m1 = idw_fit(coords, values, 2.0, 5);
  // reverse the training order
  std::vector<LatLon> rc(coords.rbegin(), coords.rend());
  std::vector<double> rv(values.rbegin(), values.rend());
  auto m2 = idw_fit(rc, rv, 2.0, 5);
  for (int t = 0; t < 500; ++t) {
    const LatLon q{rng.uniform(29, 41), rng.uniform(-111, -89)};
    EXPECT_DOUBLE_EQ(idw_predict_one(m1, q), idw_predict_one(m2, q));
  }
}

TEST(Idw, KNearestRestriction) {
  // With k=1 the prediction equals the nearest point's value.
  std::vector<LatLon> coords{{0, 0}, {0, 5}};
  std::vector<double> values{1.0, 100.0};
  auto model = idw_fit(coords, values, 2.0, 1);
  EXPECT_DOUBLE_EQ(idw_predict_one(model, {0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(idw_predict_one(model, {0, 4}), 100.0);
}

TEST(Idw, InputValidation) {
  EXPECT_THROW(idw_fit({}, {}), ValidationError);
  std::vector<LatLon> coords{{0, 0}};
  EXPECT_THROW(idw_fit(coords, std::vector<double>{1, 2}), SchemaError);
  EXPECT_THROW(idw_fit(coords, std::vector<double>{1}, 0.0), ConfigError);
  EXPECT_THROW(idw_fit(coords, std::vector<double>{1}, 2.0, 0), ConfigError);
}

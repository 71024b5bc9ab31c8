// Copyright 2026 The kmotion Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>
#include <kmotion/geometry.hpp>
#include <kmotion/random.hpp>

#include <cmath>
#include <numbers>

using namespace kmotion;

namespace {

constexpr double kPi = std::numbers::pi;

double det3(const Mat3<double>& r) {
  return r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
         r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
         r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
}

double orthonormality_error(const Mat3<double>& r) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += r[k][i] * r[k][j];
      worst = std::max(worst, std::abs(d - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

void expect_point(const Point3<double>& p, double x, double y, double z, double tol = 1e-12) {
  EXPECT_NEAR(p.x, x, tol);
  EXPECT_NEAR(p.y, y, tol);
  EXPECT_NEAR(p.z, z, tol);
}

const CameraIntrinsics kUnit{1, 1, 0, 0};
const CameraIntrinsics kWide{100, 50, 320, 96};

RigidTransform<double> random_transform(Rng& rng, double angle, double trans) {
  RigidTransform<double> t;
  t.axis_angle = rng.on_sphere(rng.uniform(0.0, angle));
  for (double& v : t.translation) v = rng.uniform(-trans, trans);
  return t;
}

}  // namespace

TEST(Backproject, IdentityIntrinsics) {
  expect_point(backproject(PixelCoord<double>{2, 3}, 2.0, kUnit), 4, 6, 2);
}

TEST(Backproject, PrincipalPointRay) {
  expect_point(backproject(PixelCoord<double>{kWide.cx, kWide.cy}, 5.0, kWide), 0, 0, 5);
}

TEST(Backproject, HandEvaluated) {
  expect_point(backproject(PixelCoord<double>{420, 146}, 10.0, kWide), 10, 10, 10);
}

TEST(Backproject, NonPositiveDepthIsDomainError) {
  EXPECT_THROW(backproject(PixelCoord<double>{1, 1}, 0.0, kUnit), DomainError);
  EXPECT_THROW(backproject(PixelCoord<double>{1, 1}, -2.0, kUnit), DomainError);
}

TEST(Project, IdentityIntrinsics) {
  const auto p = project(Point3<double>{4, 6, 2}, kUnit);
  ASSERT_TRUE(p.in_front);
  EXPECT_DOUBLE_EQ(p.pixel.u, 2.0);
  EXPECT_DOUBLE_EQ(p.pixel.v, 3.0);
}

TEST(Project, HandEvaluated) {
  const auto p = project(Point3<double>{10, 10, 10}, kWide);
  EXPECT_DOUBLE_EQ(p.pixel.u, 420.0);
  EXPECT_DOUBLE_EQ(p.pixel.v, 146.0);
}

TEST(Project, BehindCameraIsFlaggedNotThrown) {
  EXPECT_FALSE(project(Point3<double>{1, 1, 0.0}, kUnit).in_front);
  EXPECT_FALSE(project(Point3<double>{1, 1, 1e-6}, kUnit).in_front);
  EXPECT_FALSE(project(Point3<double>{1, 1, -3.0}, kUnit).in_front);
  EXPECT_TRUE(project(Point3<double>{1, 1, 2e-6}, kUnit).in_front);
}

TEST(Project, RoundTripProperty) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const PixelCoord<double> p{rng.uniform(-50, 700), rng.uniform(-50, 250)};
    const double d = std::exp(rng.uniform(-6, 6));
    const auto q = project(backproject(p, d, kWide), kWide);
    ASSERT_TRUE(q.in_front);
    EXPECT_NEAR(q.pixel.u, p.u, 1e-10);
    EXPECT_NEAR(q.pixel.v, p.v, 1e-10);
  }
}

TEST(Rotation, ZeroIsIdentity) {
  const auto r = rotation_of(RigidTransform<double>{});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(r[i][j], i == j ? 1.0 : 0.0);
  }
}

TEST(Rotation, QuarterTurnAboutX) {
  const RigidTransform<double> t{{kPi / 2, 0, 0}, {0, 0, 0}};
  expect_point(apply_transform(t, Point3<double>{0, 1, 0}), 0, 0, 1);
}

TEST(Rotation, OrthonormalHandPicked) {
  const auto r = rotation_of(RigidTransform<double>{{0.1, 0.2, 0.3}, {}});
  EXPECT_LT(orthonormality_error(r), 1e-12);
  EXPECT_NEAR(det3(r), 1.0, 1e-12);
}

TEST(Rotation, OrthonormalAtAllScalesProperty) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const double angle = std::pow(10.0, rng.uniform(-12, 0.5));
    const auto r = rotation_of(RigidTransform<double>{rng.on_sphere(angle), {}});
    EXPECT_LT(orthonormality_error(r), 1e-9);
    EXPECT_NEAR(det3(r), 1.0, 1e-9);
  }
}

TEST(Rotation, SeriesBranchMatchesClosedForm) {
  // Just below and above the switch the two branches agree.
  const auto lo = rotation_of(RigidTransform<double>{{0.99e-4, 0, 0}, {}});
  const auto hi = rotation_of(RigidTransform<double>{{1.01e-4, 0, 0}, {}});
  EXPECT_NEAR(lo[1][2], -std::sin(0.99e-4), 1e-18);
  EXPECT_NEAR(hi[1][2], -std::sin(1.01e-4), 1e-18);
}

TEST(Transform, IdentityLeavesPointUnchanged) {
  expect_point(apply_transform(RigidTransform<double>::identity(), Point3<double>{1, -2, 3}), 1, -2, 3);
}

TEST(Transform, PureTranslation) {
  const RigidTransform<double> t{{0, 0, 0}, {0, 0, -1}};
  expect_point(apply_transform(t, Point3<double>{0, 0, 5}), 0, 0, 4);
}

TEST(Transform, RotationThenTranslation) {
  const RigidTransform<double> t{{kPi / 2, 0, 0}, {1, 0, 0}};
  expect_point(apply_transform(t, Point3<double>{0, 1, 0}), 1, 0, 1);
}

TEST(Transform, IsometryProperty) {
  Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    const auto t = random_transform(rng, 3.0, 5.0);
    Point3<double> a{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    Point3<double> b{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    auto dist = [](const Point3<double>& p, const Point3<double>& q) {
      return std::hypot(p.x - q.x, p.y - q.y, p.z - q.z);
    };
    EXPECT_NEAR(dist(apply_transform(t, a), apply_transform(t, b)), dist(a, b), 1e-9);
  }
}

TEST(DecodePose, ZeroIsIdentity) {
  const auto t = decode_pose(std::array<double, 6>{});
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(t.axis_angle[i], 0.0);
    EXPECT_EQ(t.translation[i], 0.0);
  }
}

TEST(DecodePose, TranslationScale) {
  const auto t = decode_pose(std::array<double, 6>{0, 0, 0, 100, 0, 0});
  EXPECT_DOUBLE_EQ(t.translation[0], 1.0);
}

TEST(DecodePose, QuarterTurn) {
  const auto t = decode_pose(std::array<double, 6>{100 * kPi / 2, 0, 0, 0, 0, 0});
  expect_point(apply_transform(t, Point3<double>{0, 1, 0}), 0, 0, 1);
}

TEST(DecodePose, WrongLengthIsContractError) {
  const std::vector<double> raw(5, 0.0);
  EXPECT_THROW(decode_pose<double>(std::span<const double>(raw)), ContractError);
}

TEST(DecodePose, EncodeRoundTrip) {
  Rng rng(8);
  const auto t = random_transform(rng, 0.5, 2.0);
  const auto back = decode_pose(encode_pose(t));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(back.axis_angle[i], t.axis_angle[i], 1e-15);
    EXPECT_NEAR(back.translation[i], t.translation[i], 1e-15);
  }
}

TEST(Intrinsics, NonPositiveFocalIsRejected) {
  EXPECT_THROW((CameraIntrinsics{0, 1, 0, 0}.validate()), ContractError);
  EXPECT_THROW((CameraIntrinsics{1, -1, 0, 0}.validate()), ContractError);
}

// Composite geometric program: backproject, rotate+translate, project, for
// every input (depth, 6 raw pose values) at random smooth points.
TEST(GeometryGradients, FullChainProperty) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const PixelCoord<double> p{rng.uniform(0, 63), rng.uniform(0, 47)};
    const CameraIntrinsics intr{48, 50, 31.5, 23.5};
    std::vector<double> x{std::log(rng.uniform(2, 10))};
    for (int i = 0; i < 3; ++i) x.push_back(rng.uniform(-8, 8));   // raw rotation
    for (int i = 0; i < 3; ++i) x.push_back(rng.uniform(-30, 30));  // raw translation
    const double wu = rng.uniform(-1, 1), wv = rng.uniform(-1, 1);
    auto f = [&](auto v) {
      using T = std::remove_cvref_t<decltype(v[0])>;
      const T d = diff::exp(v[0]);
      const auto tf = decode_pose<T>(v.subspan(1, 6));
      const auto q = project(apply_transform(tf, backproject(p, d, intr)), intr);
      return wu * q.pixel.u + wv * q.pixel.v;
    };
    const auto r = diff::grad_check(f, x, 1e-5);
    EXPECT_LT(r.max_relative_error, 1e-4) << "trial " << trial << " coordinate " << r.worst_coordinate;
  }
}

TEST(GeometryGradients, RotationAtIdentity) {
  // The series branch is the initialization point; its gradient must be exact.
  const std::vector<double> x(3, 0.0);
  auto f = [](auto v) {
    using T = std::remove_cvref_t<decltype(v[0])>;
    const RigidTransform<T> t{{v[0], v[1], v[2]}, {T(0.0), T(0.0), T(0.0)}};
    const auto q = apply_transform(t, Point3<T>{T(1.0), T(2.0), T(3.0)});
    return q.x;
  };
  const auto g = diff::backward(diff::forward(f, x));
  // R x = x + w cross x near w = 0, so d(q.x)/dw = x cross e_x = (0, 3, -2).
  EXPECT_NEAR(g[0], 0.0, 1e-12);
  EXPECT_NEAR(g[1], 3.0, 1e-12);
  EXPECT_NEAR(g[2], -2.0, 1e-12);
}

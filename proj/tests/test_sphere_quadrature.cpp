#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "secpn/angular_basis.hpp"
#include "secpn/sphere_quadrature.hpp"

using namespace secpn;

namespace {

Eigen::Vector3d random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v(n(rng), n(rng), n(rng));
  return v.normalized();
}

// Random polynomial of total degree <= d in (x, y, z).
struct RandomPoly {
  std::vector<std::array<int, 3>> powers;
  std::vector<double> coeffs;

  RandomPoly(int d, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int a = 0; a <= d; ++a)
      for (int b = 0; a + b <= d; ++b)
        for (int c = 0; a + b + c <= d; ++c) {
          powers.push_back({a, b, c});
          coeffs.push_back(u(rng));
        }
  }
  double operator()(const Eigen::Vector3d& w) const {
    double v = 0.0;
    for (size_t i = 0; i < powers.size(); ++i)
      v += coeffs[i] * std::pow(w.x(), powers[i][0]) * std::pow(w.y(), powers[i][1]) * std::pow(w.z(), powers[i][2]);
    return v;
  }
};

}  // namespace

TEST(GaussLegendre, IntegratesPolynomials) {
  for (int n = 1; n <= 20; ++n) {
    const auto gl = gauss_legendre(n);
    double s = 0.0;
    for (double w : gl.weights) s += w;
    EXPECT_NEAR(s, 2.0, 1e-14);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double v = 0.0;
      for (int i = 0; i < n; ++i) v += gl.weights[static_cast<size_t>(i)] * std::pow(gl.nodes[static_cast<size_t>(i)], k);
      EXPECT_NEAR(v, k % 2 ? 0.0 : 2.0 / (k + 1), 1e-14) << "n=" << n << " k=" << k;
    }
  }
  EXPECT_THROW(gauss_legendre(0), InvalidInput);
}

TEST(FullSphereRule, HandIntegrals) {
  const auto r = full_sphere_rule(3);
  EXPECT_NEAR(r.integrate([](const Eigen::Vector3d&) { return 1.0; }), 12.566371, 1e-6);
  EXPECT_NEAR(r.integrate([](const Eigen::Vector3d& w) { return w.z() * w.z(); }), 4.1887902, 1e-7);
  const auto r4 = full_sphere_rule(4);
  const double v = r4.integrate([](const Eigen::Vector3d& w) {
    const double s = eval_sh({2, 1}, Direction::from_cartesian(w));
    return s * s;
  });
  EXPECT_NEAR(v, 1.0, 1e-13);
}

TEST(FullSphereRule, WeightsAndExactness) {
  for (int d = 0; d <= 14; ++d) {
    const auto r = full_sphere_rule(d);
    for (double w : r.weights) EXPECT_GT(w, 0.0);
    EXPECT_NEAR(r.total_weight(), kFourPi, 1e-12);
    const int lmax = d;
    std::vector<BasisIndex> idx;
    for (int l = 0; l <= lmax; ++l)
      for (int m = -l; m <= l; ++m) idx.push_back({l, m});
    for (const auto& a : idx)
      for (const auto& b : idx) {
        if (a.l + b.l > d) continue;
        const double v = r.integrate([&](const Eigen::Vector3d& w) {
          const auto dir = Direction::from_cartesian(w);
          return eval_sh(a, dir) * eval_sh(b, dir);
        });
        EXPECT_NEAR(v, a == b ? 1.0 : 0.0, 1e-12) << d;
      }
  }
}

TEST(FullSphereRule, OddDegreeIsAntipodal) {
  const auto r = full_sphere_rule(7);
  for (const auto& p : r.points) {
    bool found = false;
    for (const auto& q : r.points) found = found || (p + q).norm() < 1e-12;
    EXPECT_TRUE(found);
  }
}

TEST(HalfSphereRule, HandIntegrals) {
  const auto r = half_sphere_rule(Eigen::Vector3d::UnitZ(), 4);
  EXPECT_NEAR(r.integrate([](const Eigen::Vector3d&) { return 1.0; }), 2.0 * kPi, 1e-12);
  EXPECT_NEAR(r.integrate([](const Eigen::Vector3d& w) { return w.z(); }), -kPi, 1e-12);
  const auto rx = half_sphere_rule(Eigen::Vector3d::UnitX(), 4);
  EXPECT_NEAR(rx.integrate([](const Eigen::Vector3d& w) { return w.x(); }), -kPi, 1e-12);
}

TEST(HalfSphereRule, StrictInflowAndWeights) {
  std::mt19937 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto n = random_unit(rng);
    const auto r = half_sphere_rule(n, 9);
    EXPECT_NEAR(r.total_weight(), 2.0 * kPi, 1e-12);
    for (size_t q = 0; q < r.size(); ++q) {
      EXPECT_LT(n.dot(r.points[q]), 0.0);
      EXPECT_GT(r.weights[q], 0.0);
      EXPECT_NEAR((r.nodes[q].omega() - r.points[q]).norm(), 0.0, 1e-14);
    }
  }
  for (const Eigen::Vector3d& n : {Eigen::Vector3d(Eigen::Vector3d::UnitZ()), Eigen::Vector3d(-Eigen::Vector3d::UnitZ())}) {
    for (const auto& p : half_sphere_rule(n, 5).points) EXPECT_LT(n.dot(p), 0.0);
  }
}

TEST(HalfSphereRule, RejectsNonUnitNormal) {
  EXPECT_THROW(half_sphere_rule(Eigen::Vector3d(0, 0, 2), 3), InvalidInput);
}

TEST(HalfSphereRule, RotationConsistency) {
  std::mt19937 rng(2);
  const int d = 6;
  const auto ref = half_sphere_rule(-Eigen::Vector3d::UnitZ(), d);  // upper hemisphere, identity rotation
  for (int t = 0; t < 20; ++t) {
    const auto n = random_unit(rng);
    const RandomPoly f(d, rng);
    const Eigen::Matrix3d r = rotation_to_inward(n);
    EXPECT_NEAR((r * Eigen::Vector3d::UnitZ() + n).norm(), 0.0, 1e-14);
    EXPECT_NEAR((r.transpose() * r - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-14);
    const double direct = half_sphere_rule(n, d).integrate(f);
    const double via = ref.integrate([&](const Eigen::Vector3d& w) { return f(r * w); });
    EXPECT_NEAR(direct, via, 1e-12);
  }
}

TEST(HalfSphereRule, Additivity) {
  std::mt19937 rng(4);
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + t % 8;
    const auto n = random_unit(rng);
    const RandomPoly f(d, rng);
    const double full = full_sphere_rule(d).integrate(f);
    const double halves = half_sphere_rule(n, d).integrate(f) + half_sphere_rule(-n, d).integrate(f);
    EXPECT_NEAR(full, halves, 1e-12) << "d=" << d;
    EXPECT_NEAR(mirrored(half_sphere_rule(n, d)).integrate(f), half_sphere_rule(-n, d).integrate(f), 1e-12);
  }
}

TEST(RotationToInward, DegenerateCases) {
  EXPECT_TRUE(rotation_to_inward(-Eigen::Vector3d::UnitZ()).isApprox(Eigen::Matrix3d::Identity()));
  const Eigen::Matrix3d flip = Eigen::Vector3d(1, -1, -1).asDiagonal();
  EXPECT_TRUE(rotation_to_inward(Eigen::Vector3d::UnitZ()).isApprox(flip));
}

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "secpn/pn_assembly.hpp"

using namespace secpn;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(SlabClosedForm, HandValues) {
  const Eigen::MatrixXd t1 = slab_tz_closed_form(1);
  EXPECT_NEAR(t1(0, 1), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(t1(1, 0), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_EQ(t1(0, 0), 0.0);
  const Eigen::MatrixXd t3 = slab_tz_closed_form(3);
  EXPECT_NEAR(t3(0, 1), 0.5773503, 1e-7);
  EXPECT_NEAR(t3(1, 2), 0.5163978, 1e-7);
  EXPECT_EQ(t3.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(slab_tz_closed_form(0), InvalidInput);
}

TEST(FluxMatrices, SlabMatchesClosedForm) {
  for (int n = 1; n <= 9; n += 2) {
    const auto b = build_basis(Geometry::slab1d, n);
    const auto f = assemble_flux_matrices(b, full_sphere_rule(2 * n + 2));
    ASSERT_EQ(f.axes, std::vector<int>{2});
    EXPECT_LT(max_abs(f[2] - slab_tz_closed_form(n)), 1e-13) << "N=" << n;
  }
}

TEST(FluxMatrices, PlanarHandValue) {
  const auto b = build_basis(Geometry::planar2d, 1);
  const auto f = assemble_flux_matrices(b, full_sphere_rule(4));
  EXPECT_NEAR(f[0](0, 2), 1.0 / std::sqrt(3.0), 1e-14);
  EXPECT_EQ(f.axes, (std::vector<int>{0, 1}));
}

TEST(FluxMatrices, SymmetricAndParityDecoupled) {
  for (auto g : {Geometry::slab1d, Geometry::planar2d, Geometry::full3d}) {
    for (int n = 1; n <= 7; n += 2) {
      const auto b = build_basis(g, n);
      const auto f = assemble_flux_matrices(b, full_sphere_rule(2 * n + 2));
      for (int a : f.axes) {
        EXPECT_LT(max_abs(f[a] - f[a].transpose()), 1e-12);
        const auto blocks = split_even_odd(f[a], b);
        EXPECT_LT(max_abs(blocks.ee), 1e-12);
        EXPECT_LT(max_abs(blocks.oo), 1e-12);
        EXPECT_LT(max_abs(blocks.oe - blocks.eo.transpose()), 1e-13);
      }
    }
  }
}

TEST(EvenOddBlocks, SlabN1Isotropic) {
  const auto m = generate_model(Geometry::slab1d, 1, IsotropicKernel{});
  ASSERT_EQ(m.blocks.te[2].rows(), 1);
  EXPECT_NEAR(m.blocks.te[2](0, 0), 1.0 / std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(m.blocks.c_oo(0.3, 1.2)(0, 0), -1.5, 1e-14);
}

TEST(EvenOddBlocks, FullShapes) {
  const auto m = generate_model(Geometry::full3d, 3, IsotropicKernel{});
  for (int a : {0, 1, 2}) {
    EXPECT_EQ(m.blocks.te[static_cast<size_t>(a)].rows(), 6);
    EXPECT_EQ(m.blocks.te[static_cast<size_t>(a)].cols(), 10);
    EXPECT_EQ(m.blocks.to[static_cast<size_t>(a)].rows(), 10);
    EXPECT_EQ(m.blocks.to[static_cast<size_t>(a)].cols(), 6);
  }
}

TEST(CooFactorization, IsotropicDiagonal) {
  const auto m = generate_model(Geometry::full3d, 3, IsotropicKernel{});
  const CooFactorization f(m.blocks, 0.5, 1.5);
  EXPECT_LT(max_abs(f.coo() + 2.0 * Eigen::MatrixXd::Identity(10, 10)), 1e-12);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(10, -1.0, 2.0);
  EXPECT_LT(max_abs(f.solve(v) + v / 2.0), 1e-12);
}

TEST(CooFactorization, HgSlab) {
  const auto m = generate_model(Geometry::slab1d, 3, make_hg_kernel(0.5));
  const auto f = factorize_coo(m.blocks, 0.0, 1.0);
  EXPECT_NEAR(f.coo()(0, 0), -0.5, 1e-10);
  EXPECT_NEAR(f.coo()(1, 1), -0.875, 1e-10);
  EXPECT_NEAR(f.coo()(0, 1), 0.0, 1e-10);
}

TEST(CooFactorization, EigenvalueBound) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (const Kernel& k : {Kernel{IsotropicKernel{}}, make_hg_kernel(0.5), make_hg_kernel(-0.5), make_hg_kernel(0.7)}) {
    const auto m = generate_model(Geometry::full3d, 3, k);
    const double kappa0 = kernel_minimum(k, full_sphere_rule(m.sigma_degree));
    for (int t = 0; t < 20; ++t) {
      const double sa = u(rng), ss = u(rng);
      const Eigen::MatrixXd coo = m.blocks.c_oo(sa, ss);
      EXPECT_LT(max_abs(coo - coo.transpose()), 1e-12);
      const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(coo).eigenvalues().maxCoeff();
      EXPECT_LE(lmax, -(ss * kappa0 + sa) + 1e-10);
      EXPECT_LT(lmax, 0.0);
    }
  }
}

TEST(CooFactorization, RejectsNonPositiveAttenuation) {
  const auto m = generate_model(Geometry::slab1d, 1, IsotropicKernel{});
  EXPECT_THROW(CooFactorization(m.blocks, 0.0, 0.0), ModelAssumptionViolation);
  EXPECT_THROW(diffusion_blocks(m.blocks, -1.0, 0.5), ModelAssumptionViolation);
}

TEST(DiffusionBlocks, SlabN1IsDiffusionCoefficient) {
  const auto m = generate_model(Geometry::slab1d, 1, IsotropicKernel{});
  for (double st : {0.5, 1.0, 4.0}) {
    const auto d = diffusion_blocks(m.blocks, 0.1 * st, 0.9 * st);
    EXPECT_NEAR(d(2, 2)(0, 0), -1.0 / (3.0 * st), 1e-14);
  }
}

TEST(DiffusionBlocks, SlabN3IsotropicClosedForm) {
  const auto m = generate_model(Geometry::slab1d, 3, IsotropicKernel{});
  const Eigen::MatrixXd t = slab_tz_closed_form(3);
  Eigen::MatrixXd te(2, 2);  // rows l = 0, 2; columns l = 1, 3
  te << t(0, 1), t(0, 3), t(2, 1), t(2, 3);
  const auto d = diffusion_blocks(m.blocks, 0.0, 1.0);
  EXPECT_LT(max_abs(d(2, 2) + te * te.transpose()), 1e-13);
  EXPECT_NEAR(d(2, 2)(0, 0), -1.0 / 3.0, 1e-13);
}

TEST(DiffusionBlocks, TransposeRelation) {
  for (const Kernel& k : {Kernel{IsotropicKernel{}}, make_hg_kernel(0.6)}) {
    for (auto g : {Geometry::planar2d, Geometry::full3d}) {
      const auto m = generate_model(g, 3, k);
      const auto d = diffusion_blocks(m.blocks, 0.2, 1.3);
      for (int i : d.axes)
        for (int j : d.axes) EXPECT_LT(max_abs(d(i, j).transpose() - d(j, i)), 1e-12);
    }
  }
}

TEST(DiffusionBlocks, DriftKernelRejected) {
  const auto m = generate_model(Geometry::full3d, 3, drift_example_kernel());
  EXPECT_FALSE(m.blocks.no_drift.passes);
  EXPECT_THROW(diffusion_blocks(m.blocks, 0.1, 1.0), ModelAssumptionViolation);
}

TEST(DiffusionBlockCache, Memoizes) {
  const auto m = generate_model(Geometry::slab1d, 3, IsotropicKernel{});
  DiffusionBlockCache cache(m.blocks);
  const auto* a = &cache.at(0.1, 1.0);
  EXPECT_EQ(a, &cache.at(0.1, 1.0));
  cache.at(0.2, 1.0);
  EXPECT_EQ(cache.size(), 2u);
}

TEST(GenerateModel, QuadratureDegreeChecks) {
  EXPECT_THROW(generate_model(Geometry::slab1d, 3, IsotropicKernel{}, 6), InvalidInput);
  const auto m = generate_model(Geometry::slab1d, 3, IsotropicKernel{}, 7);
  EXPECT_EQ(m.quadrature_degree, 7);
  EXPECT_GE(m.sigma_degree, 7);
  EXPECT_EQ(default_quadrature_degree(3), 8);
}

// Substituting u_o = C_oo^{-1} T_o u_e' into T_e u_o' - C_ee u_e, evaluated by
// central differences, reproduces K u_e'' - C_ee u_e at second order.
TEST(BlockElimination, FiniteDifferenceConsistency) {
  const auto m = generate_model(Geometry::slab1d, 5, make_hg_kernel(0.4));
  const auto& b = m.blocks;
  const double sa = 0.3, ss = 1.1;
  const CooFactorization coo(b, sa, ss);
  const auto d = diffusion_blocks(b, sa, ss);
  const Eigen::MatrixXd cee = b.c_ee(sa, ss);
  const int ne = b.n_even();
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd amp(ne, 3);
  for (Eigen::Index i = 0; i < amp.size(); ++i) amp.data()[i] = u(rng);
  auto ue = [&](double z) {
    Eigen::VectorXd v(ne);
    for (int k = 0; k < ne; ++k) v[k] = amp(k, 0) * std::sin(1.3 * z) + amp(k, 1) * std::cos(2.1 * z) + amp(k, 2) * z * z;
    return v;
  };
  auto ue2 = [&](double z) {
    Eigen::VectorXd v(ne);
    for (int k = 0; k < ne; ++k)
      v[k] = -1.69 * amp(k, 0) * std::sin(1.3 * z) - 4.41 * amp(k, 1) * std::cos(2.1 * z) + 2.0 * amp(k, 2);
    return v;
  };
  std::vector<double> errs;
  for (double h : {0.02, 0.01, 0.005, 0.0025}) {
    double err = 0.0;
    for (double z = 0.2; z <= 0.8 + 1e-12; z += 0.1) {
      auto uo = [&](double zz) { return Eigen::VectorXd(coo.solve(b.to[2] * (ue(zz + h) - ue(zz - h)) / (2 * h))); };
      const Eigen::VectorXd lhs = b.te[2] * (uo(z + h) - uo(z - h)) / (2 * h) - cee * ue(z);
      const Eigen::VectorXd rhs = d(2, 2) * ue2(z) - cee * ue(z);
      err = std::max(err, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    errs.push_back(err);
  }
  for (size_t i = 1; i < errs.size(); ++i) EXPECT_GE(std::log2(errs[i - 1] / errs[i]), 1.9);
}

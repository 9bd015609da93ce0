#include <gtest/gtest.h>

#include "common.hpp"
#include "csck/estimates.hpp"

using namespace csck;

namespace {

constexpr double pi = std::numbers::pi;

template <int Dim>
Background<Dim> curved_bg(int N, std::uint64_t seed, double amp) {
  return testutil::curved(Lattice<Dim>(N), seed, amp);
}

// exact solution on a curved background: g_phi is the flat metric
template <int Dim>
MetricState<Dim> flat_solution(const Background<Dim>& bg) {
  return assemble(bg, map(bg->rho0, [](double v) { return -v; }));
}

template <int Dim>
MetricState<Dim> perturbed(const Background<Dim>& bg, std::uint64_t seed, double size) {
  auto v = testutil::series<Dim>(seed, size).sample(bg->lattice());
  ScalarField<Dim> phi = map(bg->rho0, [](double x) { return -x; });
  for (std::size_t p = 0; p < phi.size(); ++p) phi[p] += v[p];
  return assemble(bg, phi);
}

TEST(Entropy, ZeroPotential) {
  Lattice<2> L(8);
  EXPECT_EQ(entropy(assemble(flat_background(L), ScalarField<2>(L))), 0.0);
}

TEST(Entropy, SingleModeQuadratureOracle) {
  Lattice<1> L(64);
  const double a = 0.01, b = a * pi * pi;
  auto st = assemble(flat_background(L), sample(L, [&](auto x) { return a * std::cos(2 * pi * x[0]); }));
  // e^F = 1 - b cos(2 pi x); periodic trapezoid on a much finer grid
  const int M = 4096;
  double oracle = 0.0;
  for (int k = 0; k < M; ++k) {
    double e = 1 - b * std::cos(2 * pi * k / M);
    oracle += e * std::log(e);
  }
  oracle /= M;
  EXPECT_NEAR(entropy(st), oracle, 1e-14);
  EXPECT_NEAR(oracle, b * b / 4, 0.01 * b * b / 4);
  EXPECT_NEAR(oracle, 2.44e-3, 0.01e-3);
}

TEST(Entropy, JensenOnRandomStates) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    auto st = testutil::random_state(Lattice<2>(16), s, 0.004, s % 2 ? 0.03 : 0.0);
    EXPECT_GE(entropy(st), -1e-8);
    EXPECT_TRUE(volume_check(st).pass) << volume_check(st).value;
    EXPECT_TRUE(entropy_check(st).pass);
  }
}

TEST(Prop21, FlatConstantAndZeroPotential) {
  Lattice<2> L(8);
  auto st = assemble(flat_background(L), ScalarField<2>(L));
  auto r = prop21_check(st);
  EXPECT_DOUBLE_EQ(r.extras.at("C21"), 1.0);
  EXPECT_DOUBLE_EQ(r.value, 1.0);  // n/2
  EXPECT_DOUBLE_EQ(r.bound, 4.0);  // 2n
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.anchor, "Prop2.1");
  EXPECT_EQ(r.site, std::vector<int>({0, 0, 0, 0}));
}

TEST(Prop21, FlatSolutionGlobalBound) {
  auto st = flat_solution(curved_bg<2>(16, 3, 0.04));
  auto r = prop21_check(st);
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.margin, 0.0);
  EXPECT_EQ(r.extras.at("global_bound_holds"), 1.0);
  EXPECT_GT(st.F.min(), r.extras.at("implied_lower_bound"));
  for (std::size_t p = 0; p < st.F.size(); p += 97) EXPECT_NEAR(st.F[p], -std::log(st.bg().det_g[p]), 1e-12);
}

TEST(Thm21, DegenerateAndFlatSolution) {
  Lattice<2> L(8);
  auto r0 = thm21_check(assemble(flat_background(L), ScalarField<2>(L)));
  EXPECT_TRUE(r0.pass);
  EXPECT_EQ(r0.extras.at("degenerate"), 1.0);
  auto r = thm21_check(flat_solution(curved_bg<2>(16, 3, 0.04)));
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(std::isfinite(r.extras.at("ratio")));
  EXPECT_GE(r.extras.at("K"), 1.0);
}

TEST(Thm21, NeedsCurvatureBounds) {
  auto bg = make_background(testutil::series<1>(4, 0.03, 1).sample(Lattice<1>(16)), false);
  EXPECT_THROW(thm21_check(flat_solution(bg)), std::invalid_argument);
}

TEST(Thm22, FlatLambdaAndFlatSolution) {
  Lattice<2> L(16);
  auto phi = testutil::series<2>(5, 0.004).sample(L);
  auto st = assemble(flat_background(L), phi);
  auto r = thm22_check(st);
  EXPECT_NEAR(r.extras.at("lambda"), 10 * (phi.sup_abs() + 1), 1e-14);
  EXPECT_TRUE(r.pass);
  auto z = thm22_check(assemble(flat_background(L), ScalarField<2>(L)));
  EXPECT_EQ(z.extras.at("sup_ratio"), 0.0);
  EXPECT_TRUE(z.pass);
  auto s = thm22_check(flat_solution(curved_bg<2>(16, 3, 0.04)));
  EXPECT_TRUE(s.pass);
  EXPECT_GT(s.margin, 0.0);
}

TEST(MaxPrinciple, TwistCorrectedPerturbations) {
  for (double amp : {0.0, 0.03}) {
    auto bg = amp > 0 ? curved_bg<2>(16, 7, amp) : flat_background(Lattice<2>(16));
    for (std::uint64_t s = 1; s <= 3; ++s) {
      auto st = perturbed(bg, 20 + s, 1e-3);
      ASSERT_GT(st.twist.sup_abs(), 1e-6);
      for (auto r : {prop21_check(st), thm21_check(st), thm22_check(st)}) EXPECT_TRUE(r.pass) << r.name << " " << r.margin;
      EstimateOptions strict;
      strict.twist_correction = false;
      EXPECT_THROW(prop21_check(st, strict), NotSolved);
      EXPECT_THROW(l1_gradF_check(st, strict), NotSolved);
    }
  }
}

TEST(L1GradF, SolvedAndTwistedStates) {
  Lattice<2> L(8);
  auto z = l1_gradF_check(assemble(flat_background(L), ScalarField<2>(L)));
  EXPECT_EQ(z.value, 0.0);
  auto bg = curved_bg<2>(16, 9, 0.04);
  auto s = l1_gradF_check(flat_solution(bg));
  EXPECT_TRUE(s.pass) << s.value;
  EXPECT_GT(s.extras.at("lhs"), 0.0);
  auto t = l1_gradF_check(perturbed(bg, 3, 1e-3));
  EXPECT_TRUE(t.pass) << t.value;
}

TEST(Pointwise, RandomStates) {
  for (std::uint64_t s = 1; s <= 4; ++s) {
    auto st2 = testutil::random_state(Lattice<2>(16), s, 0.005, s % 2 ? 0.03 : 0.0);
    auto c2 = pointwise_checks(st2);
    ASSERT_EQ(c2.size(), 4u);
    for (const auto& c : c2) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
    auto c1 = pointwise_checks(testutil::random_state(Lattice<1>(32), s, 0.02, 0.0));
    ASSERT_EQ(c1.size(), 3u);
    for (const auto& c : c1) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
  }
}

TEST(W2p, ValuesAndExponents) {
  Lattice<2> L(8);
  auto st = assemble(flat_background(L), ScalarField<2>(L));
  EXPECT_NEAR(w2p_integral(st, 3.0, 0.0), 8.0, 1e-13);
  EXPECT_EQ(gamma_p(2, 2), 12.0);
  EXPECT_EQ(gamma_p(1, 5), 6.0);
  EXPECT_EQ(p_n_bound(2), 27);
  EXPECT_EQ(p_n_bound(1), 0);
  EXPECT_THROW(w2p_integral(st, 0.0, 1.0), std::invalid_argument);
  auto s = flat_solution(curved_bg<2>(16, 3, 0.04));
  std::vector<double> v;
  for (double a : {0.0, 1.0, 2.0, 3.0, 4.0}) v.push_back(w2p_integral(s, 4.0, a));
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    EXPECT_TRUE(std::isfinite(v[k]));
    EXPECT_LT(std::abs(v[k + 1] - v[k]), 0.5 * v[k]);
  }
}

TEST(KEnergy, TrivialCases) {
  Lattice<2> L(8);
  auto z = kenergy(flat_background(L), ScalarField<2>(L));
  EXPECT_EQ(z.value, 0.0);
  Lattice<2> M(16);
  auto phi = testutil::series<2>(2, 0.004).sample(M);
  auto st = assemble(flat_background(M), phi);
  auto k = kenergy(st.background, phi);
  EXPECT_EQ(k.J, 0.0);
  EXPECT_NEAR(k.value, entropy(st), 1e-15);
}

TEST(KEnergy, PathAndRichardson) {
  auto bg = curved_bg<1>(32, 4, 0.03);
  auto big = map(bg->rho0, [](double v) { return -60.0 * v; });
  EXPECT_THROW(kenergy(bg, big), PathNotKahler);
  auto phi = testutil::series<1>(5, 0.01).sample(bg->lattice());
  auto k = kenergy(bg, phi);
  EXPECT_LT(k.error, 1e-6 * std::max(1.0, std::abs(k.J)));
  EXPECT_NEAR(k.entropy, entropy(assemble(bg, phi)), 1e-14);
}

TEST(KEnergy, FlatSolutionIsMinimal) {
  auto bg = curved_bg<1>(32, 6, 0.04);
  ScalarField<1> star = map(bg->rho0, [](double v) { return -v; });
  const double k0 = kenergy(bg, star).value;
  for (std::uint64_t s = 1; s <= 8; ++s) {
    auto v = testutil::series<1>(100 + s, 1.0).sample(bg->lattice());
    ScalarField<1> phi = star;
    for (std::size_t p = 0; p < phi.size(); ++p) phi[p] += 0.01 * v[p];
    EXPECT_GT(kenergy(bg, phi).value - k0, 0.0) << s;
  }
}

TEST(Alpha, Integral) {
  Lattice<2> L(8);
  auto bg = flat_background(L);
  EXPECT_NEAR(alpha_integral(bg, ScalarField<2>(L), 2.0), 1.0, 1e-15);
  Lattice<1> M(32);
  auto b1 = flat_background(M);
  auto mode = [&](double a) { return sample(M, [&](auto x) { return a * std::cos(2 * pi * x[0]); }); };
  EXPECT_NEAR(alpha_integral(b1, mode(0.05), 1e-9), 1.0, 1e-9);
  double prev = 1.0;
  for (double a : {0.02, 0.04, 0.06, 0.08}) {
    double v = alpha_integral(b1, mode(a), 3.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_THROW(alpha_integral(b1, mode(0.2), 1.0), NotPsh);
}

TEST(Thm52, TrivialAndDensity) {
  Lattice<2> L(8);
  auto st = assemble(flat_background(L), ScalarField<2>(L));
  auto [d, a] = thm52_density(st);
  EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_DOUBLE_EQ(d.max(), 1.0);
  auto r = thm52_quantity(st, ScalarField<2>(L), 0.5);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_TRUE(r.pass);
  auto s = flat_solution(curved_bg<2>(16, 3, 0.04));
  auto [ds, as] = thm52_density(s);
  EXPECT_NEAR(integrate(ds, s.bg().det_g), 1.0, 1e-13);
  EXPECT_GT(as, 1.0);
}

TEST(Report, SortedAndConsistent) {
  auto st = perturbed(curved_bg<2>(16, 7, 0.03), 2, 1e-3);
  auto rep = estimate_report(st);
  ASSERT_GE(rep.checks.size(), 10u);
  for (std::size_t k = 0; k + 1 < rep.checks.size(); ++k) EXPECT_LT(rep.checks[k].name, rep.checks[k + 1].name);
  for (const auto& c : rep.checks) {
    EXPECT_TRUE(c.pass) << c.name;
    EXPECT_FALSE(c.anchor.empty()) << c.name;
    EXPECT_DOUBLE_EQ(c.margin, c.bound + c.slack - c.value);
  }
  EXPECT_EQ(rep.inf_F, st.F.min());
  EXPECT_EQ(rep.sup_phi, st.phi.max());
  EXPECT_EQ(rep.w2p.size(), 4u);
  EXPECT_NEAR(rep.entropy, entropy(st), 0.0);
}

}  // namespace

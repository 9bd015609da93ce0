#include <gtest/gtest.h>

#include <sstream>

#include "csck/localanalysis.hpp"

using namespace csck;

namespace {

const double abp_paraboloid = 6.0 / std::sqrt(std::numbers::pi);

TEST(BallGrid, Geometry) {
  BallGrid g(2, 1.0, 1.0 / 16);
  for (std::size_t q : g.points()) EXPECT_LT(g.norm(q), 1.0);
  for (std::size_t q : g.boundary_band()) {
    EXPECT_GE(g.norm(q), 1.0);
    EXPECT_LE(g.norm(q), 1.0 + 1.0 / 16);
  }
  EXPECT_NEAR(g.integrate([](std::size_t) { return 1.0; }), std::numbers::pi, 0.05);
  auto u = g.sample([](const std::vector<double>& x) { return x[0] * x[0] * x[1]; });
  std::size_t q = g.points()[g.points().size() / 3];
  auto x = g.x(q);
  EXPECT_NEAR(g.d1(u, q, 0), 2 * x[0] * x[1], 1e-12);
  EXPECT_NEAR(g.d2(u, q, 0, 1), 2 * x[0], 1e-11);
  EXPECT_THROW(BallGrid(5, 1.0, 0.1), std::invalid_argument);
}

TEST(ContactSet, ParaboloidDisk) {
  BallGrid g(2, 1.0, 1.0 / 64);
  auto u = g.sample(paraboloid);
  auto cs = contact_set(g, u);
  EXPECT_NEAR(cs.M, 1.0, 1e-12);
  EXPECT_NEAR(cs.cap, 1.0 / 6, 1e-12);
  const auto& pts = g.points();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double r = g.norm(pts[k]);
    if (r < 1.0 / 12 - 1e-9) {
      EXPECT_TRUE(cs.member[k]);
    }
    if (r > 1.0 / 12 + 1e-9) {
      EXPECT_FALSE(cs.member[k]);
    }
  }
}

TEST(ContactSet, AffineConstantConvex) {
  BallGrid g(2, 1.0, 1.0 / 32);
  auto aff = g.sample([](const std::vector<double>& x) { return 0.3 * x[0] - 0.2 * x[1]; });
  EXPECT_EQ(contact_set(g, aff).count(), 0u);
  auto cst = g.sample([](const std::vector<double>&) { return 2.0; });
  EXPECT_EQ(contact_set(g, cst).count(), g.points().size());
  auto cvx = g.sample([](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1]; });
  EXPECT_EQ(contact_set(g, cvx).count(), 0u);
  EXPECT_EQ(contact_set(g, cvx, 10.0).count(), 0u);
}

TEST(ContactSet, MonotoneInCap) {
  BallGrid g(2, 1.0, 1.0 / 32);
  auto u = g.sample(ConcaveBump(3));
  std::size_t prev = 0;
  for (double cap : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    auto cs = contact_set(g, u, cap);
    auto wider = contact_set(g, u, 2 * cap);
    for (std::size_t k = 0; k < cs.member.size(); ++k)
      if (cs.member[k]) {
        EXPECT_TRUE(wider.member[k]);
      }
    EXPECT_GE(cs.count(), prev);
    prev = cs.count();
  }
}

TEST(Abp, ParaboloidRatio) {
  BallGrid g(2, 1.0, 1.0 / 128);
  auto r = abp_check(g, g.sample(paraboloid));
  EXPECT_NEAR(r.value, abp_paraboloid, 0.05 * abp_paraboloid);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.anchor, "Lemma.abp");
  // closed form: M = 1, det(-D^2 u) = 4 on the disk of radius 1/12
  EXPECT_NEAR(r.extras.at("integral"), 4 * std::numbers::pi / 144, 0.1 * 4 * std::numbers::pi / 144);
}

TEST(Abp, DegenerateM) {
  BallGrid g(2, 1.0, 1.0 / 32);
  auto r = abp_check(g, g.sample([](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1] - 1.0; }));
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.extras.at("degenerate"), 1.0);
}

TEST(Abp, ConcaveFamilyStableUnderRefinement) {
  BallGrid coarse(2, 1.0, 1.0 / 64), fine(2, 1.0, 1.0 / 128);
  for (std::uint64_t s = 1; s <= 10; ++s) {
    ConcaveBump u(s);
    auto a = abp_check(coarse, coarse.sample(u), 10 * abp_paraboloid);
    auto b = abp_check(fine, fine.sample(u), 10 * abp_paraboloid);
    EXPECT_TRUE(a.pass && b.pass) << s;
    EXPECT_NEAR(a.value / b.value, 1.0, 0.10) << s << " " << a.value << " " << b.value;
  }
}

MoserInputs gaussian(const BallGrid& g, double amp, bool aniso) {
  const double s2 = 0.2;
  MoserInputs in;
  in.u = g.sample([&](const std::vector<double>& x) { return amp * std::exp(-(x[0] * x[0] + x[1] * x[1]) / s2); });
  in.a.resize(g.box_size());
  in.f.assign(g.box_size(), 1.0);
  in.g.resize(g.box_size());
  for (std::size_t q = 0; q < g.box_size(); ++q) {
    auto x = g.x(q);
    const double u = in.u[q];
    const double u1 = -2 * x[0] / s2 * u, u11 = (4 * x[0] * x[0] / (s2 * s2) - 2 / s2) * u;
    const double u22 = (4 * x[1] * x[1] / (s2 * s2) - 2 / s2) * u;
    Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
    double div = u11 + u22;
    if (aniso) {
      a(0, 0) = 1 + x[0] * x[0];
      div = 2 * x[0] * u1 + (1 + x[0] * x[0]) * u11 + u22;
    }
    in.a[q] = a;
    in.g[q] = div - in.f[q] * u;
  }
  return in;
}

TEST(Moser, ConstantSolution) {
  BallGrid g(2, 1.0, 1.0 / 32);
  MoserInputs in{std::vector<double>(g.box_size(), 1.0), std::vector<Eigen::MatrixXd>(g.box_size(), Eigen::Matrix2d::Identity()),
                 std::vector<double>(g.box_size(), 0.0), std::vector<double>(g.box_size(), 0.0)};
  auto r = moser_supbound_check(g, in);
  EXPECT_LT(r.value, 1.0);
  EXPECT_NEAR(r.value, 1.0 / (std::numbers::pi + 1), 0.01);
  EXPECT_DOUBLE_EQ(r.extras.at("p"), 4.0);
  EXPECT_NEAR(r.extras.at("lambda_Lp"), std::pow(std::numbers::pi, 0.25), 0.01);
}

TEST(Moser, GaussianBumpAndScaling) {
  BallGrid g(2, 1.0, 1.0 / 32);
  for (bool aniso : {false, true}) {
    auto base = moser_supbound_check(g, gaussian(g, 1.0, aniso));
    EXPECT_TRUE(std::isfinite(base.value));
    EXPECT_GT(base.value, 0.0);
    const double cap = base.extras.at("sup_half") / base.extras.at("l1");
    double prev = base.value;
    for (double s : {2.0, 4.0, 8.0}) {
      auto r = moser_supbound_check(g, gaussian(g, s, aniso));
      EXPECT_GT(r.value, prev);
      EXPECT_LT(r.value, s * base.value);
      EXPECT_LT(r.value, cap);
      EXPECT_NEAR(r.extras.at("g_Lp2"), s * base.extras.at("g_Lp2"), 1e-9 * s);
      prev = r.value;
    }
  }
}

TEST(Moser, HypothesisViolated) {
  BallGrid g(2, 1.0, 1.0 / 32);
  auto in = gaussian(g, 1.0, false);
  for (double& v : in.g) v += 1.0;
  EXPECT_THROW(moser_supbound_check(g, in), HypothesisViolated);
  auto neg = gaussian(g, 1.0, false);
  for (double& v : neg.u) v -= 2.0;
  EXPECT_THROW(moser_supbound_check(g, neg), HypothesisViolated);
}

TEST(BallCsv, Header) {
  BallGrid g(2, 1.0, 1.0 / 8);
  auto u = g.sample(paraboloid);
  std::ostringstream os;
  write_ball_csv(os, g, {{"u", &u}});
  std::istringstream is(os.str());
  std::string l1, l2, l3;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  EXPECT_EQ(l1, "n,N,domain");
  EXPECT_EQ(l2, "2,8,ball");
  EXPECT_EQ(l3, "x1,x2,u");
}

}  // namespace

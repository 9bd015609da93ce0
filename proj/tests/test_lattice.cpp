#include <gtest/gtest.h>

#include <sstream>

#include "common.hpp"
#include "csck/hermitian.hpp"

using namespace csck;
using testutil::fd2;

namespace {

constexpr double pi = std::numbers::pi;

TEST(Lattice, SizeAndValidation) {
  Lattice<2> L(16);
  EXPECT_EQ(L.size(), std::size_t(16 * 16 * 16 * 16));
  EXPECT_DOUBLE_EQ(L.h(), 1.0 / 16);
  EXPECT_THROW(Lattice<1>(4), std::invalid_argument);
  EXPECT_THROW(Lattice<1>(24), std::invalid_argument);
  for (std::size_t p : {std::size_t(0), std::size_t(17), std::size_t(4095)}) EXPECT_EQ(L.index(L.coords(p)), p);
  // x1 is the fastest axis
  EXPECT_EQ(L.coords(1)[0], 1);
  EXPECT_EQ(L.coords(16)[1], 1);
}

TEST(Derive, SineAlongX1) {
  Lattice<1> L(16);
  auto f = sample(L, [](auto x) { return std::sin(2 * pi * x[0]); });
  auto d = derive_real(f, {dx(0)});
  for (std::size_t p = 0; p < L.size(); ++p) EXPECT_NEAR(d[p], 2 * pi * std::cos(2 * pi * L.point(p)[0]), 1e-12);
}

TEST(Derive, ConstantHasZeroDerivatives) {
  Lattice<2> L(8);
  ScalarField<2> f(L, 3.5);
  for (auto idx : {std::vector<Axis>{dx(0)}, {dz(1), dzb(0)}, {dy(1), dy(1), dx(0), dz(1)}}) {
    auto d = derive(f, std::span<const Axis>(idx));
    for (std::size_t p = 0; p < L.size(); ++p) EXPECT_LT(std::abs(d[p]), 1e-12);
  }
}

TEST(Derive, DdbarIsQuarterLaplacian) {
  Lattice<1> L(16);
  auto f = sample(L, [](auto x) { return std::cos(2 * pi * x[0]); });
  auto d = derive(f, {dz(0), dzb(0)});
  for (std::size_t p = 0; p < L.size(); ++p) {
    EXPECT_NEAR(d[p].real(), -pi * pi * f[p], 1e-11);
    EXPECT_NEAR(d[p].imag(), 0.0, 1e-12);
  }
}

TEST(Derive, RejectsAxesBeyondDimension) {
  Lattice<1> L(8);
  ScalarField<1> f(L);
  EXPECT_THROW(derive(f, {dx(1)}), std::out_of_range);
  EXPECT_THROW(derive(f, {dz(0), dz(0), dz(0), dz(0), dz(0)}), std::invalid_argument);
}

TEST(Derive, HolomorphicDerivativeOfExponential) {
  // d/dz of Re exp(2 pi i (x1 + y1)) checked against the closed form
  Lattice<1> L(16);
  auto f = sample(L, [](auto x) { return std::cos(2 * pi * (x[0] + x[1])); });
  auto d = derive(f, {dz(0)});
  for (std::size_t p = 0; p < L.size(); ++p) {
    auto x = L.point(p);
    double s = -2 * pi * std::sin(2 * pi * (x[0] + x[1]));
    cplx expect = 0.5 * (s - cplx(0, 1) * s);
    EXPECT_LT(std::abs(d[p] - expect), 1e-11);
  }
}

TEST(Hessian, ZeroAndSingleMode) {
  Lattice<1> L(16);
  auto z = complex_hessian(ScalarField<1>(L));
  for (std::size_t p = 0; p < L.size(); ++p) EXPECT_EQ(z(p)(0, 0), cplx(0.0));
  const double a = 0.3;
  auto f = sample(L, [&](auto x) { return a * std::cos(2 * pi * x[0]); });
  auto H = complex_hessian(f);
  for (std::size_t p = 0; p < L.size(); ++p)
    EXPECT_NEAR(H(p)(0, 0).real(), -a * pi * pi * std::cos(2 * pi * L.point(p)[0]), 1e-12);
}

// Max deviation between the spectral Hessian and a fourth-order difference Hessian.
double fd_hessian_gap(int N) {
  Lattice<2> L(N);
  auto phi = testutil::series<2>(7, 0.01, 1).sample(L);
  auto H = complex_hessian(phi);
  double gap = 0.0;
  for (std::size_t p = 0; p < L.size(); p += 7) {
    Mat<2> fd;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double re = fd2(phi, p, 2 * i, 2 * j) + fd2(phi, p, 2 * i + 1, 2 * j + 1);
        double im = fd2(phi, p, 2 * i, 2 * j + 1) - fd2(phi, p, 2 * i + 1, 2 * j);
        fd(i, j) = 0.25 * cplx(re, im);
      }
    gap = std::max(gap, (fd - H(p)).cwiseAbs().maxCoeff());
    EXPECT_LT((H(p) - H(p).adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  }
  return gap;
}

TEST(Hessian, MatchesFourthOrderDifferences) {
  double g16 = fd_hessian_gap(16);
  double g32 = fd_hessian_gap(32);
  EXPECT_LT(g16, 1e-2);
  // fourth order: one refinement gains about 16x
  EXPECT_GT(g16 / g32, 12.0);
}

TEST(Integrate, Examples) {
  Lattice<1> L(16);
  ScalarField<1> one(L, 1.0);
  EXPECT_DOUBLE_EQ(integrate(one, one), 1.0);
  auto c = sample(L, [](auto x) { return std::cos(2 * pi * x[0]); });
  EXPECT_NEAR(integrate(c, one), 0.0, 1e-15);
  auto c2 = map(c, [](double v) { return v * v; });
  EXPECT_NEAR(integrate(c2, one), 0.5, 1e-15);
}

TEST(Properties, DerivativesCommute) {
  Lattice<2> L(16);
  auto f = testutil::series<2>(3, 1.0).sample(L);
  for (auto [a, b] : {std::pair{0, 1}, {0, 3}, {2, 3}}) {
    auto make = [](int ax) { return ax % 2 == 0 ? dx(ax / 2) : dy(ax / 2); };
    Spectrum<2> s(f);
    auto ab = s.real_part(DiffOp{{1.0, {make(a), make(b)}}});
    auto ba = s.real_part(DiffOp{{1.0, {make(b), make(a)}}});
    for (std::size_t p = 0; p < L.size(); ++p) ASSERT_NEAR(ab[p], ba[p], 1e-10);
  }
}

TEST(Properties, DerivativesIntegrateToZero) {
  Lattice<2> L(16);
  auto f = testutil::series<2>(4, 1.0).sample(L);
  for (Axis a : {dx(0), dy(0), dx(1), dy(1)}) EXPECT_NEAR(integrate(derive_real(f, {a})), 0.0, 1e-10);
}

TEST(Properties, ParsevalAndRoundTrip) {
  Lattice<2> L(16);
  auto f = testutil::series<2>(5, 1.0).sample(L);
  Spectrum<2> s(f);
  auto f2 = map(f, [](double v) { return v * v; });
  EXPECT_NEAR(integrate(f2), s.parseval(), 1e-10);
  auto back = s.synthesize();
  double scale = f.sup_abs();
  for (std::size_t p = 0; p < L.size(); ++p) ASSERT_LE(std::abs(back[p] - f[p]), 1e-12 * scale);
}

TEST(FourierSeries, SampleMatchesPointEvaluation) {
  auto fs = testutil::series<2>(9, 1.0);
  Lattice<2> L(8);
  auto f = fs.sample(L);
  EXPECT_EQ(f.band_limit, std::optional<int>(2));
  for (std::size_t p = 0; p < L.size(); p += 13) EXPECT_NEAR(f[p], fs(L.point(p)), 1e-13);
  FourierSeries<1> coarse{{{{4, 0}, 1.0, 0.0}}};
  EXPECT_THROW(coarse.sample(Lattice<1>(8)), std::invalid_argument);
}

TEST(Csv, HeaderAndRows) {
  Lattice<1> L(8);
  ScalarField<1> a(L, 1.0), b(L, 0.25);
  std::ostringstream os;
  write_csv<1>(os, {{"phi", &a}, {"F", &b}});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "n,N,domain");
  std::getline(is, line);
  EXPECT_EQ(line, "1,8,torus");
  std::getline(is, line);
  EXPECT_EQ(line, "phi,F");
  std::getline(is, line);
  EXPECT_EQ(line, "1,0.25");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 64);
}

}  // namespace

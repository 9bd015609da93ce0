#pragma once

// Ball-domain checks in R^d: the lower contact set and the ABP ratio, and the
// sup bound for divergence-form subsolutions. Fields live on a cubic box that
// contains the ball with a margin wide enough for 4th-order flux stencils.

#include <Eigen/Dense>
#include <random>

#include "csck/estimates.hpp"

namespace csck {

class BallGrid {
 public:
  static constexpr int margin = 4;

  BallGrid(int d, double radius, double h) : d_(d), r_(radius), h_(h) {
    if (d < 1 || d > 4) throw std::invalid_argument("ball dimension must be 1..4");
    if (!(radius > 0) || !(h > 0) || h > radius) throw std::invalid_argument("need 0 < h <= radius");
    K_ = int(std::ceil(radius / h - 1e-9)) + margin;
    side_ = 2 * K_ + 1;
    total_ = 1;
    for (int a = 0; a < d; ++a) total_ *= std::size_t(side_);
    for (std::size_t q = 0; q < total_; ++q) {
      const double rho = norm(q);
      if (rho < r_) points_.push_back(q);
      else if (rho <= r_ + h_) band_.push_back(q);
    }
  }

  int d() const { return d_; }
  double radius() const { return r_; }
  double h() const { return h_; }
  double diam() const { return 2 * r_; }
  std::size_t box_size() const { return total_; }
  // box indices strictly inside the ball, and those in the outer shell r <= |x| <= r + h
  const std::vector<std::size_t>& points() const { return points_; }
  const std::vector<std::size_t>& boundary_band() const { return band_; }

  std::vector<double> x(std::size_t q) const {
    std::vector<double> v(d_);
    for (int a = 0; a < d_; ++a) {
      v[a] = (int(q % side_) - K_) * h_;
      q /= side_;
    }
    return v;
  }
  double norm(std::size_t q) const {
    double s = 0.0;
    for (double c : x(q)) s += c * c;
    return std::sqrt(s);
  }
  std::size_t shift(std::size_t q, int axis, int s) const {
    std::size_t stride = 1;
    for (int a = 0; a < axis; ++a) stride *= side_;
    return q + std::ptrdiff_t(s) * std::ptrdiff_t(stride);
  }

  template <class Fn>
  std::vector<double> sample(Fn&& fn) const {
    std::vector<double> v(total_);
    for (std::size_t q = 0; q < total_; ++q) v[q] = fn(x(q));
    return v;
  }

  // 4th-order central differences
  double d1(const std::vector<double>& u, std::size_t q, int a) const {
    return (-u[shift(q, a, 2)] + 8 * u[shift(q, a, 1)] - 8 * u[shift(q, a, -1)] + u[shift(q, a, -2)]) / (12 * h_);
  }
  double d2(const std::vector<double>& u, std::size_t q, int a, int b) const {
    if (a == b)
      return (-u[shift(q, a, 2)] + 16 * u[shift(q, a, 1)] - 30 * u[q] + 16 * u[shift(q, a, -1)] - u[shift(q, a, -2)]) /
             (12 * h_ * h_);
    const int w[4] = {-2, -1, 1, 2};
    const double c[4] = {1, -8, 8, -1};
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) s += c[i] * c[j] * u[shift(shift(q, a, w[i]), b, w[j])];
    return s / (144 * h_ * h_);
  }
  Eigen::VectorXd gradient(const std::vector<double>& u, std::size_t q) const {
    Eigen::VectorXd g(d_);
    for (int a = 0; a < d_; ++a) g(a) = d1(u, q, a);
    return g;
  }
  Eigen::MatrixXd hessian(const std::vector<double>& u, std::size_t q) const {
    Eigen::MatrixXd H(d_, d_);
    for (int a = 0; a < d_; ++a)
      for (int b = a; b < d_; ++b) H(a, b) = H(b, a) = d2(u, q, a, b);
    return H;
  }

  // sum over points inside the ball times h^d
  template <class Fn>
  double integrate(Fn&& fn) const {
    double s = 0.0;
    for (std::size_t q : points_) s += fn(q);
    return s * std::pow(h_, d_);
  }

 private:
  int d_;
  double r_, h_;
  int K_ = 0, side_ = 0;
  std::size_t total_ = 0;
  std::vector<std::size_t> points_, band_;
};

struct ContactSet {
  std::vector<char> member;  // per entry of BallGrid::points()
  double cap = 0.0;
  double M = 0.0;
  double slack = 0.0;
  std::size_t count() const { return std::size_t(std::count(member.begin(), member.end(), char(1))); }
};

// sup over the open ball minus sup over the boundary shell
inline double oscillation_M(const BallGrid& g, const std::vector<double>& u) {
  double in = -std::numeric_limits<double>::infinity(), bd = in;
  for (std::size_t q : g.points()) in = std::max(in, u[q]);
  for (std::size_t q : g.boundary_band()) bd = std::max(bd, u[q]);
  return in - bd;
}

inline double hessian_sup(const BallGrid& g, const std::vector<double>& u) {
  double s = 0.0;
  for (std::size_t q : g.points()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.hessian(u, q), Eigen::EigenvaluesOnly);
    s = std::max({s, std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(g.d() - 1))});
  }
  return s;
}

// Points x with |grad u(x)| <= cap and u(y) <= u(x) + grad u(x).(y - x) + slack for every
// grid point y of the ball; slack = c h^2 ||D^2 u||_inf.
inline ContactSet contact_set(const BallGrid& g, const std::vector<double>& u, double cap, double c = 1.0) {
  const auto& pts = g.points();
  ContactSet cs;
  cs.cap = cap;
  cs.member.assign(pts.size(), 0);
  cs.slack = c * g.h() * g.h() * hessian_sup(g, u);
  std::vector<std::vector<double>> xs(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) xs[k] = g.x(pts[k]);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const std::size_t q = pts[k];
    Eigen::VectorXd grad = g.gradient(u, q);
    if (grad.norm() > cap) continue;
    bool ok = true;
    for (std::size_t j = 0; j < pts.size() && ok; ++j) {
      double plane = u[q];
      for (int a = 0; a < g.d(); ++a) plane += grad(a) * (xs[j][a] - xs[k][a]);
      ok = u[pts[j]] <= plane + cs.slack;
    }
    cs.member[k] = ok;
  }
  return cs;
}

// Default cap M/(3 diam).
inline ContactSet contact_set(const BallGrid& g, const std::vector<double>& u) {
  const double M = oscillation_M(g, u);
  ContactSet cs = contact_set(g, u, std::max(M, 0.0) / (3 * g.diam()));
  cs.M = M;
  return cs;
}

// det(-D^2 u) with negative eigenvalues of -D^2 u clamped to 0
inline double det_minus_hessian(const BallGrid& g, const std::vector<double>& u, std::size_t q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-g.hessian(u, q), Eigen::EigenvaluesOnly);
  double p = 1.0;
  for (int a = 0; a < g.d(); ++a) p *= std::max(0.0, es.eigenvalues()(a));
  return p;
}

// ratio M / (int over the contact set of det(-D^2 u))^{1/d}; bound is the family constant to test against.
inline CheckResult abp_check(const BallGrid& g, const std::vector<double>& u,
                             double bound = std::numeric_limits<double>::infinity()) {
  ContactSet cs = contact_set(g, u);
  CheckResult r;
  r.name = "abp";
  r.anchor = anchor_for("abp");
  if (!(cs.M > 0)) {
    r.pass = true;
    r.bound = bound;
    r.margin = bound;
    r.extras = {{"M", cs.M}, {"degenerate", 1.0}};
    return r;
  }
  double integral = 0.0;
  const auto& pts = g.points();
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (cs.member[k]) integral += det_minus_hessian(g, u, pts[k]);
  integral *= std::pow(g.h(), g.d());
  const double ratio = integral > 0 ? cs.M / std::pow(integral, 1.0 / g.d()) : std::numeric_limits<double>::infinity();
  r = detail::make_check("abp", ratio, bound, 0.0);
  r.extras = {{"M", cs.M},         {"integral", integral},           {"cap", cs.cap},
              {"slack", cs.slack}, {"contact_points", double(cs.count())}, {"h", g.h()}};
  return r;
}

struct MoserInputs {
  std::vector<double> u;
  std::vector<Eigen::MatrixXd> a;  // symmetric positive definite, per box point
  std::vector<double> f, g;
};

// Checks d_i(a^{ij} d_j u) >= f u + g and u >= 0 inside the ball (slack c h^2 scale), then
// reports sup_{B_{r/2}} u / (||u||_{L^1} + 1) with ||lambda||_p, ||f||_{p/2}, ||g||_{p/2}, p = 3d/2 + 1.
inline CheckResult moser_supbound_check(const BallGrid& G, const MoserInputs& in,
                                        double bound = std::numeric_limits<double>::infinity(), double c = 1.0) {
  const int d = G.d();
  const double h = G.h();
  if (in.u.size() != G.box_size() || in.a.size() != G.box_size() || in.f.size() != G.box_size() ||
      in.g.size() != G.box_size())
    throw std::invalid_argument("Moser inputs must cover the grid box");
  // flux on every point with a full gradient stencil, then its divergence inside the ball
  std::vector<std::vector<double>> flux(d, std::vector<double>(G.box_size(), 0.0));
  std::vector<char> need(G.box_size(), 0);
  for (std::size_t q : G.points())
    for (int a = 0; a < d; ++a)
      for (int s = -2; s <= 2; ++s) need[G.shift(q, a, s)] = 1;
  for (std::size_t q = 0; q < G.box_size(); ++q) {
    if (!need[q]) continue;
    Eigen::VectorXd grad = G.gradient(in.u, q);
    Eigen::VectorXd fl = in.a[q] * grad;
    for (int a = 0; a < d; ++a) flux[a][q] = fl(a);
  }
  double worst = 0.0, scale = 0.0;
  for (std::size_t q : G.points()) {
    double div = 0.0;
    for (int a = 0; a < d; ++a) div += G.d1(flux[a], q, a);
    const double rhs = in.f[q] * in.u[q] + in.g[q];
    worst = std::min(worst, div - rhs);
    scale = std::max({scale, std::abs(div), std::abs(rhs)});
  }
  const double slack = c * h * h * std::max(1.0, scale);
  double umin = 0.0;
  for (std::size_t q : G.points()) umin = std::min(umin, in.u[q]);
  if (worst < -slack || umin < -slack)
    throw HypothesisViolated("divergence inequality or u >= 0 fails beyond slack (worst " + std::to_string(worst) +
                             ", min u " + std::to_string(umin) + ")");
  const double p = 1.5 * d + 1.0;
  double sup_half = -std::numeric_limits<double>::infinity();
  for (std::size_t q : G.points())
    if (G.norm(q) <= 0.5 * G.radius()) sup_half = std::max(sup_half, in.u[q]);
  const double l1 = G.integrate([&](std::size_t q) { return std::abs(in.u[q]); });
  const double lam = std::pow(G.integrate([&](std::size_t q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(in.a[q], Eigen::EigenvaluesOnly);
    const double l = std::max(es.eigenvalues()(d - 1), 1.0 / es.eigenvalues()(0));
    return std::pow(l, p);
  }), 1.0 / p);
  auto norm_half = [&](const std::vector<double>& v) {
    return std::pow(G.integrate([&](std::size_t q) { return std::pow(std::abs(v[q]), p / 2); }), 2.0 / p);
  };
  const double ratio = sup_half / (l1 + 1.0);
  CheckResult r = detail::make_check("moser", ratio, bound, 0.0);
  r.extras = {{"p", p},
              {"sup_half", sup_half},
              {"l1", l1},
              {"lambda_Lp", lam},
              {"f_Lp2", norm_half(in.f)},
              {"g_Lp2", norm_half(in.g)},
              {"hypothesis_worst", worst},
              {"hypothesis_slack", slack}};
  return r;
}

inline double paraboloid(const std::vector<double>& x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return 1.0 - s;
}

// 1 - (x - c)^T A (x - c) + eps sum b_k cos(w_k . x + t_k) in d = 2, strictly concave
struct ConcaveBump {
  Eigen::Matrix2d A;
  Eigen::Vector2d c;
  std::array<Eigen::Vector2d, 3> w;
  std::array<double, 3> b, t;
  double eps = 0.005;

  explicit ConcaveBump(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double th = 2 * std::numbers::pi * U(rng);
    Eigen::Matrix2d R;
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    A = R * Eigen::Vector2d(0.5 + 1.5 * U(rng), 0.5 + 1.5 * U(rng)).asDiagonal() * R.transpose();
    c = Eigen::Vector2d(0.4 * U(rng) - 0.2, 0.4 * U(rng) - 0.2);
    for (int k = 0; k < 3; ++k) {
      w[k] = Eigen::Vector2d(std::round(4 * U(rng) - 2), std::round(4 * U(rng) - 2)) * std::numbers::pi;
      b[k] = 2 * U(rng) - 1;
      t[k] = 2 * std::numbers::pi * U(rng);
    }
  }
  double operator()(const std::vector<double>& x) const {
    Eigen::Vector2d y(x[0], x[1]);
    double v = 1.0 - (y - c).dot(A * (y - c));
    for (int k = 0; k < 3; ++k) v += eps * b[k] * std::cos(w[k].dot(y) + t[k]);
    return v;
  }
};

// Same `n,N,domain` header as the torus dump; n is d, N is points per unit length.
inline void write_ball_csv(std::ostream& os, const BallGrid& g,
                           const std::vector<std::pair<std::string, const std::vector<double>*>>& fields) {
  os << "n,N,domain\n" << g.d() << ',' << std::lround(1.0 / g.h()) << ",ball\n";
  for (int a = 0; a < g.d(); ++a) os << (a ? "," : "") << 'x' << a + 1;
  for (const auto& f : fields) os << ',' << f.first;
  os << '\n';
  char buf[40];
  for (std::size_t q : g.points()) {
    auto x = g.x(q);
    for (int a = 0; a < g.d(); ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", x[a]);
      os << (a ? "," : "") << buf;
    }
    for (const auto& f : fields) {
      std::snprintf(buf, sizeof buf, "%.17g", (*f.second)[q]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace csck

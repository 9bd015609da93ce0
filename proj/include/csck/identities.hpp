#pragma once

// Pointwise identities checked as two independently computed sides. The
// left side differentiates an assembled product field spectrally; the right
// side is built from derivative tensors rotated into a per-point frame.
//
// Frames: for a matrix P with P^* G P = I and P^* H P = diag(lambda), frame
// components of a lower holomorphic index transform with conj(P), of a lower
// antiholomorphic index with P.

#include <optional>
#include <random>
#include <string>

#include "csck/kahler.hpp"
#include "csck/probe.hpp"

namespace csck {

struct IdentityCheck {
  std::string name;
  std::vector<std::size_t> sites;
  // side values per site; vector-valued identities store re, im per component
  std::vector<double> lhs;
  std::vector<double> rhs;
  double max_residual = 0.0;
  double scale = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Ten times the worst residual/scale * N^4 seen on flat-background states at N = 32.
inline constexpr double tol_id_c = 2.0e3;

inline double tol_id(int N, double scale) {
  const double eps = std::numeric_limits<double>::epsilon();
  return scale * tol_id_c * std::pow(double(N), -4.0) + 1e3 * eps * std::max(1.0, scale);
}

struct IdentityOptions {
  int probe_grid = 0;  // 0: every lattice site; M: the M^{2n} coarse sub-lattice
  double B_prime = 0.5;
  std::optional<double> lambda;  // square220 / cancel222; default thm22_lambda
};

namespace detail {

inline IdentityCheck named(const std::string& name, std::vector<std::size_t> sites) {
  IdentityCheck c;
  c.name = name;
  c.sites = std::move(sites);
  return c;
}

inline void finish(IdentityCheck& c, double tol) {
  c.max_residual = 0.0;
  c.scale = 0.0;
  for (std::size_t k = 0; k < c.lhs.size(); ++k) {
    c.max_residual = std::max(c.max_residual, std::abs(c.lhs[k] - c.rhs[k]));
    c.scale = std::max({c.scale, std::abs(c.lhs[k]), std::abs(c.rhs[k])});
  }
  c.tolerance = tol;
  c.pass = c.max_residual <= c.tolerance;
}

inline void finish_differential(IdentityCheck& c, int N) {
  finish(c, 0.0);
  c.tolerance = tol_id(N, c.scale);
  c.pass = c.max_residual <= c.tolerance;
}

inline void finish_algebraic(IdentityCheck& c) {
  finish(c, 0.0);
  c.tolerance = 1e-10 * std::max(1.0, c.scale);
  c.pass = c.max_residual <= c.tolerance;
}

template <int Dim>
Probes<Dim> probes_for(const Lattice<Dim>& lat, int grid) {
  return grid > 0 && grid < lat.N() ? Probes<Dim>::coarse(lat, grid) : Probes<Dim>::all(lat);
}

template <int Dim>
using Third = std::array<cplx, Dim * Dim * Dim>;

template <int Dim>
cplx t3(const Third<Dim>& t, int a, int b, int c) {
  return t[(a * Dim + b) * Dim + c];
}

// Third derivatives of the total potential rho0 + phi, i.e. d_a H_{b cbar}.
template <int Dim>
std::vector<Third<Dim>> metric_derivative_at(const MetricState<Dim>& st, const Probes<Dim>& pr) {
  ScalarField<Dim> u = st.phi;
  if (!st.bg().flat) u = zip(st.phi, st.bg().rho0, [](double a, double b) { return a + b; });
  return third_at(Spectrum<Dim>(u), pr);
}

// d_a G_{b cbar} of the background; zeros when flat.
template <int Dim>
std::vector<Third<Dim>> background_derivative_at(const MetricState<Dim>& st, const Probes<Dim>& pr) {
  if (st.bg().flat) return std::vector<Third<Dim>>(pr.size(), Third<Dim>{});
  return third_at(Spectrum<Dim>(st.bg().rho0), pr);
}

template <int Dim>
Mat<Dim> slice(const Third<Dim>& t, int a) {
  Mat<Dim> m;
  for (int b = 0; b < Dim; ++b)
    for (int c = 0; c < Dim; ++c) m(b, c) = t3<Dim>(t, a, b, c);
  return m;
}

// tr(H^{-1} A) with A = ddbar f, at the sites.
template <int Dim>
std::vector<double> laplace_at(const MetricState<Dim>& st, const ScalarField<Dim>& f, const Probes<Dim>& pr) {
  auto A = complex_hessian_at(Spectrum<Dim>(f), pr);
  std::vector<double> out(pr.size());
  for (std::size_t q = 0; q < pr.size(); ++q)
    out[q] = (st.g_phi_inv(pr.sites[q]) * A[q]).trace().real();
  return out;
}

template <int Dim>
Vec<Dim> vec_at(const std::array<std::vector<cplx>, Dim>& v, std::size_t q) {
  Vec<Dim> r;
  for (int i = 0; i < Dim; ++i) r(i) = v[i][q];
  return r;
}

template <int Dim>
Mat<Dim> sym_at(const std::array<std::array<std::vector<cplx>, Dim>, Dim>& m, std::size_t q) {
  Mat<Dim> r;
  for (int i = 0; i < Dim; ++i)
    for (int j = 0; j < Dim; ++j) r(i, j) = m[i][j][q];
  return r;
}

// components of a symmetric holomorphic 2-tensor in the frame
template <int Dim>
Mat<Dim> frame_sym(const Mat<Dim>& S, const Mat<Dim>& P) {
  return P.adjoint() * S * P.conjugate();
}

// components of a (1,1) tensor in the frame
template <int Dim>
Mat<Dim> frame_herm(const Mat<Dim>& A, const Mat<Dim>& P) {
  return P.adjoint() * A * P;
}

template <int Dim>
Vec<Dim> frame_vec(const Vec<Dim>& v, const Mat<Dim>& P) {
  return P.adjoint() * v;
}

template <int Dim>
Third<Dim> frame_third(const Third<Dim>& t, const Mat<Dim>& P) {
  Third<Dim> r{};
  for (int a = 0; a < Dim; ++a)
    for (int b = 0; b < Dim; ++b)
      for (int c = 0; c < Dim; ++c) {
        cplx s = 0.0;
        for (int i = 0; i < Dim; ++i)
          for (int j = 0; j < Dim; ++j)
            for (int k = 0; k < Dim; ++k) s += std::conj(P(i, a)) * std::conj(P(j, b)) * P(k, c) * t3<Dim>(t, i, j, k);
        r[(a * Dim + b) * Dim + c] = s;
      }
  return r;
}

}  // namespace detail

// lambda = 10(sup|Ric eigenvalues| + ||phi||_0 + C_221 + 1), C_221 = max(0, -bisectional lower bound)
template <int Dim>
double thm22_lambda(const MetricState<Dim>& st) {
  const double c221 = std::max(0.0, -st.bg().bisec_lower);
  return 10.0 * (st.bg().ric_sup + st.phi.sup_abs() + c221 + 1.0);
}

// ---- gradF --------------------------------------------------------------

template <int Dim>
IdentityCheck check_gradF(const MetricState<Dim>& st, const IdentityOptions& opt = {}) {
  auto pr = detail::probes_for(st.lattice(), opt.probe_grid);
  auto dH = detail::metric_derivative_at(st, pr);
  auto dG = detail::background_derivative_at(st, pr);
  auto dF = gradient_at(Spectrum<Dim>(st.F), pr);
  IdentityCheck c = detail::named("gradF", pr.sites);
  for (std::size_t q = 0; q < pr.size(); ++q) {
    const std::size_t p = pr.sites[q];
    Mat<Dim> Hi = st.g_phi_inv(p);
    Mat<Dim> Gi = st.bg().g(p).inverse();
    for (int a = 0; a < Dim; ++a) {
      cplx l = (Hi * detail::slice<Dim>(dH[q], a)).trace() - (Gi * detail::slice<Dim>(dG[q], a)).trace();
      c.lhs.push_back(l.real());
      c.lhs.push_back(l.imag());
      c.rhs.push_back(dF[a][q].real());
      c.rhs.push_back(dF[a][q].imag());
    }
  }
  detail::finish_differential(c, st.lattice().N());
  return c;
}

// ---- square220 / cancel222 -----------------------------------------------

// One point in the frame: eig = 1 + phi_{i ibar}, a_{i alpha} = phi_{i alpha},
// v_i = F_i + lambda phi_i - phi phi_i, d_alpha = phi_alpha.
template <int Dim>
struct SquarePoint {
  RVec<Dim> eig;
  Mat<Dim> a;
  Vec<Dim> v;
  Vec<Dim> d;
};

template <int Dim>
std::pair<double, double> square220_sides(const SquarePoint<Dim>& s) {
  double lhs = 0.0, rhs = 0.0;
  const double grad2 = s.d.squaredNorm();
  for (int i = 0; i < Dim; ++i) {
    double l = 0.0, r = 0.0;
    for (int al = 0; al < Dim; ++al) {
      l += std::norm(s.a(i, al) - s.v(i) * s.d(al));
      r += std::norm(s.a(i, al));
      r += 2.0 * (-s.v(i) * s.d(al) * std::conj(s.a(i, al))).real();
    }
    r += std::norm(s.v(i)) * grad2;
    lhs += l / s.eig(i);
    rhs += r / s.eig(i);
  }
  return {lhs, rhs};
}

// One point in the frame: F_i, phi_i, phi, lambda.
template <int Dim>
struct CancelPoint {
  RVec<Dim> eig;
  Vec<Dim> F1;
  Vec<Dim> phi1;
  double phi = 0.0;
  double lambda = 0.0;
};

template <int Dim>
std::pair<cplx, cplx> cancel222_sides(const CancelPoint<Dim>& s) {
  Vec<Dim> v = s.F1 + s.lambda * s.phi1 - s.phi * s.phi1;
  cplx lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < Dim; ++i) {
    lhs += v(i) * std::conj(s.phi1(i));
    lhs += -v(i) * std::conj(s.phi1(i)) * (s.eig(i) - 1.0) / s.eig(i);
    rhs += v(i) * std::conj(s.phi1(i)) / s.eig(i);
  }
  return {lhs, rhs};
}

namespace detail {

// Frame data shared by square220 and cancel222.
template <int Dim>
struct NormalPointData {
  std::vector<Third<Dim>> dG;
  std::array<std::vector<cplx>, Dim> phi1, F1;
  std::array<std::array<std::vector<cplx>, Dim>, Dim> phi2;
};

template <int Dim>
NormalPointData<Dim> normal_point_data(const MetricState<Dim>& st, const Probes<Dim>& pr) {
  Spectrum<Dim> sp(st.phi);
  return {background_derivative_at(st, pr), gradient_at(sp, pr), gradient_at(Spectrum<Dim>(st.F), pr),
          holomorphic_hessian_at(sp, pr)};
}

}  // namespace detail

template <int Dim>
IdentityCheck check_complete_square(const MetricState<Dim>& st, const IdentityOptions& opt = {}) {
  auto pr = detail::probes_for(st.lattice(), opt.probe_grid);
  const double lam = opt.lambda.value_or(thm22_lambda(st));
  auto D = detail::normal_point_data(st, pr);
  IdentityCheck c = detail::named("square220", pr.sites);
  for (std::size_t q = 0; q < pr.size(); ++q) {
    const std::size_t p = pr.sites[q];
    Frame<Dim> fr = st.frame(p);
    Mat<Dim> Gi = st.bg().g(p).inverse();
    Vec<Dim> d1 = detail::vec_at<Dim>(D.phi1, q);
    Vec<Dim> F1 = detail::vec_at<Dim>(D.F1, q);
    // covariant Hessian of phi w.r.t. g: phi_{ij} - Gamma^k_{ij} phi_k, Gamma^k_{ij} = (d_i G G^{-1})[j][k]
    Mat<Dim> a = detail::sym_at<Dim>(D.phi2, q);
    for (int i = 0; i < Dim; ++i) {
      Vec<Dim> gam = detail::slice<Dim>(D.dG[q], i) * Gi * d1;
      for (int j = 0; j < Dim; ++j) a(i, j) -= gam(j);
    }
    const double ph = st.phi[p];
    SquarePoint<Dim> s{fr.values, detail::frame_sym(a, fr.P), detail::frame_vec<Dim>(F1 + lam * d1 - ph * d1, fr.P),
                       detail::frame_vec(d1, fr.P)};
    auto [l, r] = square220_sides(s);
    c.lhs.push_back(l);
    c.rhs.push_back(r);
  }
  detail::finish_algebraic(c);
  return c;
}

template <int Dim>
IdentityCheck check_cancellation(const MetricState<Dim>& st, const IdentityOptions& opt = {}) {
  auto pr = detail::probes_for(st.lattice(), opt.probe_grid);
  const double lam = opt.lambda.value_or(thm22_lambda(st));
  Spectrum<Dim> sp(st.phi);
  auto phi1 = gradient_at(sp, pr);
  auto F1 = gradient_at(Spectrum<Dim>(st.F), pr);
  IdentityCheck c = detail::named("cancel222", pr.sites);
  for (std::size_t q = 0; q < pr.size(); ++q) {
    const std::size_t p = pr.sites[q];
    Frame<Dim> fr = st.frame(p);
    CancelPoint<Dim> s{fr.values, detail::frame_vec(detail::vec_at<Dim>(F1, q), fr.P),
                       detail::frame_vec(detail::vec_at<Dim>(phi1, q), fr.P), st.phi[p], lam};
    auto [l, r] = cancel222_sides(s);
    c.lhs.push_back(l.real());
    c.lhs.push_back(l.imag());
    c.rhs.push_back(r.real());
    c.rhs.push_back(r.imag());
  }
  detail::finish_algebraic(c);
  return c;
}

// Random per-point instances (eigenvalues in [0.2, 5], entries standard normal),
// evaluated with square220_sides or cancel222_sides.
template <int Dim>
IdentityCheck algebraic_suite(const std::string& name, std::uint64_t seed, int count) {
  if (name != "square220" && name != "cancel222") throw std::invalid_argument("not an algebraic identity: " + name);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ev(0.2, 5.0);
  std::normal_distribution<double> nd;
  auto z = [&] { return cplx(nd(rng), nd(rng)); };
  IdentityCheck c = detail::named(name, {});
  for (int k = 0; k < count; ++k) {
    RVec<Dim> eig;
    for (int i = 0; i < Dim; ++i) eig(i) = ev(rng);
    Vec<Dim> x, y;
    for (int i = 0; i < Dim; ++i) {
      x(i) = z();
      y(i) = z();
    }
    if (name == "square220") {
      Mat<Dim> a;
      for (int i = 0; i < Dim; ++i)
        for (int j = i; j < Dim; ++j) a(i, j) = a(j, i) = z();
      auto [l, r] = square220_sides(SquarePoint<Dim>{eig, a, x, y});
      c.lhs.push_back(l);
      c.rhs.push_back(r);
    } else {
      auto [l, r] = cancel222_sides(CancelPoint<Dim>{eig, x, y, nd(rng), 10.0 * ev(rng)});
      c.lhs.insert(c.lhs.end(), {l.real(), l.imag()});
      c.rhs.insert(c.rhs.end(), {r.real(), r.imag()});
    }
  }
  detail::finish_algebraic(c);
  return c;
}

// ---- yau2nd -----------------------------------------------------------------

// Delta_phi(n + Delta phi) = sum R_{i ibar k kbar} lambda_i / lambda_k
//   + sum_{i,p,q} |nabla_i h_{p qbar}|^2 / (lambda_p lambda_q) + Delta F - R
// in a g-unitary frame diagonalizing g_phi; nabla is the Chern connection of g.
template <int Dim>
IdentityCheck check_yau_second_order(const MetricState<Dim>& st, const IdentityOptions& opt = {}) {
  using RS = RiemannSampler<Dim>;
  const Lattice<Dim>& lat = st.lattice();
  auto pr = detail::probes_for(lat, opt.probe_grid);
  IdentityCheck c = detail::named("yau2nd", pr.sites);
  {
    ScalarField<Dim> trace = curvature_contractions(st).n_plus_lap;
    c.lhs = detail::laplace_at(st, trace, pr);
  }
  auto dH = detail::metric_derivative_at(st, pr);
  auto dG = detail::background_derivative_at(st, pr);
  auto ddF = complex_hessian_at(Spectrum<Dim>(st.F), pr);
  std::optional<RS> rs;
  if (!st.bg().flat) rs.emplace(Spectrum<Dim>(st.bg().rho0), pr);
  c.rhs.resize(pr.size());
  for (std::size_t q = 0; q < pr.size(); ++q) {
    const std::size_t p = pr.sites[q];
    const Mat<Dim> G = st.bg().g(p);
    const Mat<Dim> H = st.g_phi(p);
    const Mat<Dim> Gi = G.inverse();
    Frame<Dim> fr = generalized_frame<Dim>(G, H);
    const RVec<Dim>& lam = fr.values;
    double third = 0.0;
    std::array<Mat<Dim>, Dim> Np;
    for (int i = 0; i < Dim; ++i) {
      Mat<Dim> Ni = detail::slice<Dim>(dH[q], i) - detail::slice<Dim>(dG[q], i) * Gi * H;
      Np[i] = detail::frame_herm(Ni, fr.P);
    }
    for (int cc = 0; cc < Dim; ++cc) {
      Mat<Dim> M = Mat<Dim>::Zero();
      for (int i = 0; i < Dim; ++i) M += std::conj(fr.P(i, cc)) * Np[i];
      for (int a = 0; a < Dim; ++a)
        for (int b = 0; b < Dim; ++b) third += std::norm(M(a, b)) / (lam(a) * lam(b));
    }
    double curv = 0.0;
    if (rs) {
      auto R = RS::rotate((*rs)(q, G), fr.P);
      for (int k = 0; k < Dim; ++k)
        for (int i = 0; i < Dim; ++i) curv += R[RS::at(i, i, k, k)].real() * lam(i) / lam(k);
    }
    const double lapF = (Gi * ddF[q]).trace().real();
    c.rhs[q] = curv + third + lapF - st.bg().scalar_curv[p];
  }
  detail::finish_differential(c, lat.N());
  return c;
}

// ---- bochner ----------------------------------------------------------------

// e^{-B'f} Delta_phi(e^{B'f} |grad f|^2) expanded in an h-unitary frame:
//   2 Re <grad Delta f, grad f> + Ric_phi(grad f, grad f) + |f_{,ij}|^2 + |f_{ij bar}|^2
//   + 2B'(Re f_i f_j conj(f_{,ij}) + f_{i jbar} conj(f_i) f_j) + (B'^2 |grad f|^2 + B' Delta f)|grad f|^2
// with f_{,ij} the covariant Hessian of g_phi and Ric_phi = Ric - ddbar F.
template <int Dim>
IdentityCheck check_bochner(const MetricState<Dim>& st, const ScalarField<Dim>& f, double Bp,
                            const IdentityOptions& opt = {}) {
  const Lattice<Dim>& lat = st.lattice();
  auto pr = detail::probes_for(lat, opt.probe_grid);
  IdentityCheck c = detail::named("bochner", pr.sites);
  {
    ScalarField<Dim> w = grad_norms(st, f).second;
    for (std::size_t p = 0; p < w.size(); ++p) w[p] *= std::exp(Bp * f[p]);
    c.lhs = detail::laplace_at(st, w, pr);
    for (std::size_t q = 0; q < pr.size(); ++q) c.lhs[q] *= std::exp(-Bp * f[pr.sites[q]]);
  }
  std::array<std::vector<cplx>, Dim> f1, Y1;
  std::array<std::array<std::vector<cplx>, Dim>, Dim> f2;
  std::vector<Mat<Dim>> A, ddF;
  {
    Spectrum<Dim> sf(f);
    f1 = gradient_at(sf, pr);
    f2 = holomorphic_hessian_at(sf, pr);
    A = complex_hessian_at(sf, pr);
    Y1 = gradient_at(Spectrum<Dim>(laplace_phi(st, f)), pr);
  }
  ddF = complex_hessian_at(Spectrum<Dim>(st.F), pr);
  auto dH = detail::metric_derivative_at(st, pr);
  c.rhs.resize(pr.size());
  for (std::size_t q = 0; q < pr.size(); ++q) {
    const std::size_t p = pr.sites[q];
    const Mat<Dim> H = st.g_phi(p);
    const Mat<Dim> Hi = H.inverse();
    Frame<Dim> fr = generalized_frame<Dim>(st.bg().g(p), H);
    Mat<Dim> Q = fr.P;
    for (int a = 0; a < Dim; ++a) Q.col(a) /= std::sqrt(fr.values(a));
    Vec<Dim> d1 = detail::vec_at<Dim>(f1, q);
    Mat<Dim> S = detail::sym_at<Dim>(f2, q);
    for (int i = 0; i < Dim; ++i) {
      // Gamma^k_{ij} f_k with Gamma^k_{ij} = (d_i H H^{-1})[j][k]
      Vec<Dim> gam = detail::slice<Dim>(dH[q], i) * Hi * d1;
      for (int j = 0; j < Dim; ++j) S(i, j) -= gam(j);
    }
    Vec<Dim> fv = detail::frame_vec(d1, Q);
    Vec<Dim> Yv = detail::frame_vec(detail::vec_at<Dim>(Y1, q), Q);
    Mat<Dim> Sf = detail::frame_sym(S, Q);
    Mat<Dim> Af = detail::frame_herm(A[q], Q);
    Mat<Dim> Rf = detail::frame_herm(Mat<Dim>(st.bg().ricci(p) - ddF[q]), Q);
    const double w = fv.squaredNorm();
    double r = 2.0 * Yv.dot(fv).real();  // dot conjugates its first argument
    r += (fv.adjoint() * Rf * fv)(0, 0).real();
    r += Sf.squaredNorm() + Af.squaredNorm();
    r += 2.0 * Bp * ((fv.transpose() * Sf.conjugate() * fv)(0, 0).real() + (fv.adjoint() * Af * fv)(0, 0).real());
    r += (Bp * Bp * w + Bp * Af.trace().real()) * w;
    c.rhs[q] = r;
  }
  detail::finish_differential(c, lat.N());
  return c;
}

// ---- localG -----------------------------------------------------------------

// With G = log det g_phi and a Euclidean-unitary frame diagonalizing g_phi:
//   Delta_phi |grad G|^2_phi = sum |G_{i a} - sum_p Phi_{i a pbar} G_p / lambda_p|^2 / (lambda_i lambda_a)
//     + sum |G_{p ibar}|^2 / (lambda_i lambda_p) - sum G_{q pbar} G_p G_qbar / (lambda_p lambda_q)
//     + 2 Re sum (Delta_phi G)_i G_ibar / lambda_i
// where Phi_{i a pbar} = d_a g_phi_{i pbar}.
template <int Dim>
IdentityCheck check_local_G_identity(const MetricState<Dim>& st, const IdentityOptions& opt = {}) {
  const Lattice<Dim>& lat = st.lattice();
  auto pr = detail::probes_for(lat, opt.probe_grid);
  IdentityCheck c = detail::named("localG", pr.sites);
  ScalarField<Dim> Gf = st.F;
  if (!st.bg().flat)
    for (std::size_t p = 0; p < Gf.size(); ++p) Gf[p] += std::log(st.bg().det_g[p]);
  c.lhs = detail::laplace_at(st, grad_norms(st, Gf).second, pr);
  std::array<std::vector<cplx>, Dim> G1, Y1;
  std::array<std::array<std::vector<cplx>, Dim>, Dim> G2;
  std::vector<Mat<Dim>> Gm;
  {
    Spectrum<Dim> sG(Gf);
    G1 = gradient_at(sG, pr);
    G2 = holomorphic_hessian_at(sG, pr);
    Gm = complex_hessian_at(sG, pr);
    Y1 = gradient_at(Spectrum<Dim>(laplace_phi(st, Gf)), pr);
  }
  auto dH = detail::metric_derivative_at(st, pr);
  c.rhs.resize(pr.size());
  for (std::size_t q = 0; q < pr.size(); ++q) {
    const std::size_t p = pr.sites[q];
    Frame<Dim> fr = generalized_frame<Dim>(Mat<Dim>::Identity(), st.g_phi(p));
    const RVec<Dim>& lam = fr.values;
    Vec<Dim> g1 = detail::frame_vec(detail::vec_at<Dim>(G1, q), fr.P);
    Vec<Dim> y1 = detail::frame_vec(detail::vec_at<Dim>(Y1, q), fr.P);
    Mat<Dim> g2 = detail::frame_sym(detail::sym_at<Dim>(G2, q), fr.P);
    Mat<Dim> gm = detail::frame_herm(Gm[q], fr.P);
    // Phi_{i a pbar} = d_a H_{i pbar} = u_{i a pbar}
    auto Phi = detail::frame_third<Dim>(dH[q], fr.P);
    double r = 0.0;
    for (int i = 0; i < Dim; ++i)
      for (int a = 0; a < Dim; ++a) {
        cplx s = g2(i, a);
        for (int pp = 0; pp < Dim; ++pp) s -= detail::t3<Dim>(Phi, i, a, pp) * g1(pp) / lam(pp);
        r += std::norm(s) / (lam(i) * lam(a));
      }
    for (int i = 0; i < Dim; ++i)
      for (int pp = 0; pp < Dim; ++pp) r += std::norm(gm(pp, i)) / (lam(i) * lam(pp));
    for (int pp = 0; pp < Dim; ++pp)
      for (int qq = 0; qq < Dim; ++qq) r -= (gm(qq, pp) * g1(pp) * std::conj(g1(qq))).real() / (lam(pp) * lam(qq));
    for (int i = 0; i < Dim; ++i) r += 2.0 * (y1(i) * std::conj(g1(i))).real() / lam(i);
    c.rhs[q] = r;
  }
  detail::finish_differential(c, lat.N());
  return c;
}

// ---- registry -----------------------------------------------------------------

inline const std::vector<std::string>& identity_names() {
  static const std::vector<std::string> names{"gradF", "square220", "cancel222", "bochner", "yau2nd", "localG"};
  return names;
}

template <int Dim>
IdentityCheck run_identity(const std::string& name, const MetricState<Dim>& st, const IdentityOptions& opt = {}) {
  if (name == "gradF") return check_gradF(st, opt);
  if (name == "square220") return check_complete_square(st, opt);
  if (name == "cancel222") return check_cancellation(st, opt);
  if (name == "bochner") return check_bochner(st, st.F, opt.B_prime, opt);
  if (name == "yau2nd") return check_yau_second_order(st, opt);
  if (name == "localG") return check_local_G_identity(st, opt);
  throw std::invalid_argument("unknown identity: " + name);
}

// Least-squares slope of -log(residual) against log(N).
inline double measured_order(const std::vector<int>& Ns, const std::vector<double>& res) {
  const std::size_t m = Ns.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    double x = std::log(double(Ns[k]));
    double y = -std::log(std::max(res[k], std::numeric_limits<double>::min()));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace csck

#pragma once

// Kaehler metrics g = I + ddbar(rho0) on the torus, deformed metrics
// g_phi = g + ddbar(phi), the volume ratio F and the operator Delta_phi.
//
// Conventions: Ric_{i jbar} = -d_i d_jbar log det g, and
//   R_{i jbar k lbar} = -d_k d_lbar g_{i jbar} + g^{p qbar} d_k g_{i qbar} d_lbar g_{p jbar},
// so that Ric_{i jbar} = g^{k lbar} R_{i jbar k lbar}. Traces of a (1,1)-tensor A
// against a metric H are tr(H^{-1} A) with matrices indexed (i, jbar).

#include <limits>
#include <memory>

#include "csck/errors.hpp"
#include "csck/hermitian.hpp"
#include "csck/probe.hpp"

namespace csck {

inline constexpr double delta_pos = 1e-8;

namespace detail {

// out += scale * Re tr(W(p) A(p)), A the complex Hessian carried by `s`.
// Components are synthesized one at a time to keep memory flat.
template <int Dim, class WFn>
void accumulate_hessian_trace(const Spectrum<Dim>& s, WFn&& W, ScalarField<Dim>& out, double scale = 1.0) {
  for (int i = 0; i < Dim; ++i) {
    ScalarField<Dim> d = s.real_part(DiffOp{{1.0, {dz(i), dzb(i)}}});
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += scale * W(p)(i, i).real() * d[p];
  }
  if constexpr (Dim == 2) {
    DiffOp op{{1.0, {dz(0), dzb(1)}}};
    ScalarField<Dim> re = s.real_part(op);
    ScalarField<Dim> im = s.imag_part(op);
    for (std::size_t p = 0; p < out.size(); ++p) {
      Mat<Dim> w = W(p);
      cplx a01(re[p], im[p]);
      out[p] += scale * (w(1, 0) * a01 + w(0, 1) * std::conj(a01)).real();
    }
  }
}

template <int Dim>
double min_eigenvalue(const Mat<Dim>& H) {
  return eigh<Dim>(H).values(0);
}

// min eigenvalue > delta, without the square root in the common case
template <int Dim>
bool positive_beyond(const Mat<Dim>& H, double delta) {
  const double a = H(0, 0).real() - delta;
  if constexpr (Dim == 1) {
    return a > 0.0;
  } else {
    const double d = H(1, 1).real() - delta;
    return a > 0.0 && d > 0.0 && a * d - std::norm(H(0, 1)) > 0.0;
  }
}

}  // namespace detail

template <int Dim>
std::array<ComplexField<Dim>, Dim> holomorphic_gradient(const Spectrum<Dim>& s) {
  if constexpr (Dim == 1) {
    return {s.apply(DiffOp{{1.0, {dz(0)}}})};
  } else {
    return {s.apply(DiffOp{{1.0, {dz(0)}}}), s.apply(DiffOp{{1.0, {dz(1)}}})};
  }
}

// Per-point curvature tensor of g = I + ddbar(rho0), from third and fourth derivatives.
template <int Dim>
class RiemannSampler {
 public:
  static constexpr int D4 = Dim * Dim * Dim * Dim;
  using Tensor = std::array<cplx, D4>;

  explicit RiemannSampler(const Spectrum<Dim>& rho) : RiemannSampler(rho, Probes<Dim>::all(rho.lattice())) {}

  // Values are kept at the probe sites only; p below is a probe index.
  RiemannSampler(const Spectrum<Dim>& rho, const Probes<Dim>& pr) {
    for (int a = 0; a < Dim; ++a)
      for (int b = a; b < Dim; ++b)
        for (int c = 0; c < Dim; ++c) third_.push_back(complex_at(rho, DiffOp{{1.0, {dz(a), dz(b), dzb(c)}}}, pr));
    for (int a = 0; a < Dim; ++a)
      for (int b = a; b < Dim; ++b)
        for (int c = 0; c < Dim; ++c)
          for (int d = c; d < Dim; ++d)
            fourth_.push_back(complex_at(rho, DiffOp{{1.0, {dz(a), dz(b), dzb(c), dzb(d)}}}, pr));
  }

  static int at(int i, int j, int k, int l) { return ((i * Dim + j) * Dim + k) * Dim + l; }

  // d_a d_b d_cbar rho0
  cplx T(std::size_t p, int a, int b, int c) const { return third_[pair(a, b) * Dim + c][p]; }
  // d_a d_b d_cbar d_dbar rho0
  cplx Q(std::size_t p, int a, int b, int c, int d) const { return fourth_[pair(a, b) * npair + pair(c, d)][p]; }

  // R_{i jbar k lbar} at point p given g(p).
  Tensor operator()(std::size_t p, const Mat<Dim>& G) const {
    Mat<Dim> gi = G.inverse();
    Tensor R;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        for (int k = 0; k < Dim; ++k)
          for (int l = 0; l < Dim; ++l) {
            cplx s = -Q(p, i, k, j, l);
            for (int q = 0; q < Dim; ++q)
              for (int r = 0; r < Dim; ++r) s += T(p, k, i, q) * gi(q, r) * std::conj(T(p, j, l, r));
            R[at(i, j, k, l)] = s;
          }
    return R;
  }

  // Components in a frame whose vectors are conj(P) columns (see Frame).
  static Tensor rotate(const Tensor& R, const Mat<Dim>& P) {
    // one index at a time: l, k, j, i
    Tensor a{}, b{};
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        for (int k = 0; k < Dim; ++k)
          for (int d = 0; d < Dim; ++d) {
            cplx s = 0.0;
            for (int l = 0; l < Dim; ++l) s += P(l, d) * R[at(i, j, k, l)];
            a[at(i, j, k, d)] = s;
          }
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        for (int c = 0; c < Dim; ++c)
          for (int d = 0; d < Dim; ++d) {
            cplx s = 0.0;
            for (int k = 0; k < Dim; ++k) s += std::conj(P(k, c)) * a[at(i, j, k, d)];
            b[at(i, j, c, d)] = s;
          }
    for (int i = 0; i < Dim; ++i)
      for (int bb = 0; bb < Dim; ++bb)
        for (int c = 0; c < Dim; ++c)
          for (int d = 0; d < Dim; ++d) {
            cplx s = 0.0;
            for (int j = 0; j < Dim; ++j) s += P(j, bb) * b[at(i, j, c, d)];
            a[at(i, bb, c, d)] = s;
          }
    for (int aa = 0; aa < Dim; ++aa)
      for (int bb = 0; bb < Dim; ++bb)
        for (int c = 0; c < Dim; ++c)
          for (int d = 0; d < Dim; ++d) {
            cplx s = 0.0;
            for (int i = 0; i < Dim; ++i) s += std::conj(P(i, aa)) * a[at(i, bb, c, d)];
            b[at(aa, bb, c, d)] = s;
          }
    return b;
  }

 private:
  static constexpr int npair = Dim * (Dim + 1) / 2;
  static int pair(int a, int b) {
    if (a > b) std::swap(a, b);
    return a == 0 ? b : (Dim == 2 ? 2 : 0);
  }
  std::vector<std::vector<cplx>> third_;
  std::vector<std::vector<cplx>> fourth_;
};

// Minimum of R(v, vbar, w, wbar) over g-unit v, w at one point: v runs over a fixed
// sample set, the minimum over w is the smallest eigenvalue of the contracted form.
template <int Dim>
double bisectional_min(const typename RiemannSampler<Dim>::Tensor& Rf) {
  using RS = RiemannSampler<Dim>;
  if constexpr (Dim == 1) {
    return Rf[0].real();
  } else {
    static const std::vector<Vec<2>> samples = [] {
      std::vector<Vec<2>> s;
      s.push_back(Vec<2>(1.0, 0.0));
      s.push_back(Vec<2>(0.0, 1.0));
      for (int t = 1; t < 4; ++t)
        for (int k = 0; k < 8; ++k) {
          double th = t * std::numbers::pi / 8.0;
          double ps = k * std::numbers::pi / 4.0;
          s.push_back(Vec<2>(std::cos(th), std::polar(std::sin(th), ps)));
        }
      return s;
    }();
    double best = std::numeric_limits<double>::infinity();
    for (const Vec<2>& u : samples) {
      Mat<2> M = Mat<2>::Zero();
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d) M(c, d) += Rf[RS::at(a, b, c, d)] * u(a) * std::conj(u(b));
      best = std::min(best, eigh<2>(M).values(0));
    }
    return best;
  }
}

template <int Dim>
struct BackgroundGeometry {
  ScalarField<Dim> rho0;
  HermitianMatrixField<Dim> g;
  HermitianMatrixField<Dim> ricci;
  ScalarField<Dim> scalar_curv;
  ScalarField<Dim> det_g;
  double R_bar = 0.0;
  double bisec_lower = 0.0;  // sampled lower bound of bisectional curvature
  double ric_sup = 0.0;      // max |eigenvalue| of g^{-1} Ric
  double ric_max = 0.0;      // max eigenvalue of g^{-1} Ric, bounds every R_{i ibar} in a unit frame
  double ric_min = 0.0;
  bool flat = true;
  bool has_bounds = true;

  const Lattice<Dim>& lattice() const { return rho0.lattice; }
};

template <int Dim>
using Background = std::shared_ptr<const BackgroundGeometry<Dim>>;

template <int Dim>
Background<Dim> flat_background(const Lattice<Dim>& lat) {
  auto bg = std::make_shared<BackgroundGeometry<Dim>>(BackgroundGeometry<Dim>{
      ScalarField<Dim>(lat), HermitianMatrixField<Dim>::uniform(lat, Mat<Dim>::Identity()),
      HermitianMatrixField<Dim>::uniform(lat, Mat<Dim>::Zero()), ScalarField<Dim>(lat), ScalarField<Dim>(lat, 1.0)});
  return bg;
}

// Background from a band-limited potential. With `bounds` false the curvature
// bounds (which need the full curvature tensor) are skipped.
template <int Dim>
Background<Dim> make_background(const ScalarField<Dim>& rho0, bool bounds = true) {
  const Lattice<Dim>& lat = rho0.lattice;
  if (rho0.sup_abs() == 0.0) return flat_background(lat);
  Spectrum<Dim> s(rho0);
  HermitianMatrixField<Dim> g = complex_hessian(s);
  ScalarField<Dim> det_g(lat);
  ScalarField<Dim> logdet(lat);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    Mat<Dim> G = g(p) + Mat<Dim>::Identity();
    g.set(p, G);
    if (!detail::positive_beyond<Dim>(G, delta_pos)) throw NotKahler(p, detail::min_eigenvalue<Dim>(G));
    det_g[p] = G.determinant().real();
    logdet[p] = std::log(det_g[p]);
  }
  HermitianMatrixField<Dim> ric = complex_hessian(logdet);
  ScalarField<Dim> R(lat);
  double rmax = -std::numeric_limits<double>::infinity();
  double rmin = std::numeric_limits<double>::infinity();
  double rsup = 0.0;
  for (std::size_t p = 0; p < lat.size(); ++p) {
    Mat<Dim> Ric = -ric(p);
    ric.set(p, Ric);
    Mat<Dim> G = g(p);
    R[p] = (G.inverse() * Ric).trace().real();
    RVec<Dim> ev = generalized_frame<Dim>(G, Ric).values;
    rmin = std::min(rmin, ev(0));
    rmax = std::max(rmax, ev(Dim - 1));
    rsup = std::max({rsup, std::abs(ev(0)), std::abs(ev(Dim - 1))});
  }
  double bis = 0.0;
  if (bounds) {
    RiemannSampler<Dim> rs(s);
    bis = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < lat.size(); ++p) {
      Mat<Dim> G = g(p);
      Frame<Dim> fr = generalized_frame<Dim>(G, G);
      bis = std::min(bis, bisectional_min<Dim>(RiemannSampler<Dim>::rotate(rs(p, G), fr.P)));
    }
  }
  auto bg = std::make_shared<BackgroundGeometry<Dim>>(
      BackgroundGeometry<Dim>{rho0, std::move(g), std::move(ric), std::move(R), std::move(det_g)});
  bg->R_bar = 0.0;
  bg->bisec_lower = bis;
  bg->ric_sup = rsup;
  bg->ric_max = rmax;
  bg->ric_min = rmin;
  bg->flat = false;
  bg->has_bounds = bounds;
  return bg;
}

template <int Dim>
struct MetricState {
  Background<Dim> background;
  ScalarField<Dim> phi;
  HermitianMatrixField<Dim> g_phi;
  ScalarField<Dim> F;
  ScalarField<Dim> twist;

  const Lattice<Dim>& lattice() const { return phi.lattice; }
  const BackgroundGeometry<Dim>& bg() const { return *background; }

  // Inverse and eigen-data are closed-form in g_phi and evaluated on demand.
  Mat<Dim> g_phi_inv(std::size_t p) const { return g_phi(p).inverse(); }
  RVec<Dim> eig(std::size_t p) const { return relative_eigenvalues<Dim>(background->g(p), g_phi(p)); }
  Frame<Dim> frame(std::size_t p) const { return generalized_frame<Dim>(background->g(p), g_phi(p)); }
};

template <int Dim>
ScalarField<Dim> laplace_phi(const HermitianMatrixField<Dim>& H, const Spectrum<Dim>& s) {
  ScalarField<Dim> out(s.lattice());
  detail::accumulate_hessian_trace(s, [&](std::size_t p) { return Mat<Dim>(H(p).inverse()); }, out);
  return out;
}

template <int Dim>
ScalarField<Dim> laplace_phi(const MetricState<Dim>& st, const ScalarField<Dim>& f) {
  return laplace_phi(st.g_phi, Spectrum<Dim>(f));
}

template <int Dim>
MetricState<Dim> assemble(Background<Dim> bg, const ScalarField<Dim>& phi) {
  if (!phi.finite()) throw std::invalid_argument("potential has non-finite values");
  const Lattice<Dim>& lat = phi.lattice;
  HermitianMatrixField<Dim> H = complex_hessian(phi);
  ScalarField<Dim> F(lat);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    Mat<Dim> h = H(p) + bg->g(p);
    H.set(p, h);
    if (!detail::positive_beyond<Dim>(h, delta_pos)) throw NotKahler(p, detail::min_eigenvalue<Dim>(h));
    F[p] = std::log(h.determinant().real() / bg->det_g[p]);
  }
  ScalarField<Dim> twist = laplace_phi(H, Spectrum<Dim>(F));
  for (std::size_t p = 0; p < lat.size(); ++p)
    twist[p] += bg->R_bar - (H(p).inverse() * bg->ricci(p)).trace().real();
  return MetricState<Dim>{std::move(bg), phi, std::move(H), std::move(F), std::move(twist)};
}

// (g^{i jbar} f_i f_jbar, g_phi^{i jbar} f_i f_jbar)
template <int Dim>
std::pair<ScalarField<Dim>, ScalarField<Dim>> grad_norms(const MetricState<Dim>& st, const ScalarField<Dim>& f) {
  auto b = holomorphic_gradient(Spectrum<Dim>(f));
  ScalarField<Dim> ng(st.lattice()), nphi(st.lattice());
  for (std::size_t p = 0; p < ng.size(); ++p) {
    Vec<Dim> v;
    for (int i = 0; i < Dim; ++i) v(i) = b[i][p];
    ng[p] = std::max(0.0, (v.adjoint() * st.bg().g(p).inverse() * v)(0, 0).real());
    nphi[p] = std::max(0.0, (v.adjoint() * st.g_phi_inv(p) * v)(0, 0).real());
  }
  return {std::move(ng), std::move(nphi)};
}

template <int Dim>
struct CurvatureContractions {
  ScalarField<Dim> tr_phi_ric;
  ScalarField<Dim> tr_phi_g;
  ScalarField<Dim> n_plus_lap;
};

template <int Dim>
CurvatureContractions<Dim> curvature_contractions(const MetricState<Dim>& st) {
  const Lattice<Dim>& lat = st.lattice();
  CurvatureContractions<Dim> c{ScalarField<Dim>(lat), ScalarField<Dim>(lat), ScalarField<Dim>(lat)};
  for (std::size_t p = 0; p < lat.size(); ++p) {
    Mat<Dim> Hi = st.g_phi_inv(p);
    Mat<Dim> G = st.bg().g(p);
    c.tr_phi_ric[p] = (Hi * st.bg().ricci(p)).trace().real();
    c.tr_phi_g[p] = (Hi * G).trace().real();
    c.n_plus_lap[p] = (G.inverse() * st.g_phi(p)).trace().real();
  }
  return c;
}

// dvol_g weight (det g) and dvol_phi weight (det g_phi) as fields.
template <int Dim>
ScalarField<Dim> volume_phi(const MetricState<Dim>& st) {
  ScalarField<Dim> w(st.lattice());
  for (std::size_t p = 0; p < w.size(); ++p) w[p] = st.g_phi(p).determinant().real();
  return w;
}

}  // namespace csck

#pragma once

// Damped Newton for the complex Monge-Ampere equation and a two-level
// iteration for the coupled system on the torus.
//
// The Newton operator is written in divergence form,
//   L f = Re sum_i d_i (sum_j W_{ji} d_jbar f),   W = adj(g + ddbar psi),
// which equals det(g_psi) Delta_psi f because cofactor matrices of complex
// Hessians are divergence free, and is exactly symmetric on the lattice.

#include <functional>

#include "csck/kahler.hpp"

namespace csck {

struct SolverConfig {
  int max_iters = 40;
  double damping = 1.0;
  double tol_residual = 1e-10;
  int continuation_steps = 1;
  double linear_tol = 1e-12;
  int linear_max_iters = 300;
  std::uint64_t seed = 0;
  double init_amplitude = 0.0;  // random band-limited start for solve_csck when > 0

  void validate() const {
    if (!(tol_residual > 0)) throw std::invalid_argument("tol_residual must be positive");
    if (continuation_steps < 1) throw std::invalid_argument("continuation_steps must be >= 1");
    if (!(damping > 0 && damping <= 1)) throw std::invalid_argument("damping must lie in (0, 1]");
    if (max_iters < 1 || linear_max_iters < 1) throw std::invalid_argument("iteration limits must be >= 1");
  }
};

template <int Dim>
struct SolveResult {
  ScalarField<Dim> phi;
  ScalarField<Dim> F;
  double residual_ma = 0.0;
  double residual_scal = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;                   // max of the two, per outer iteration
  std::vector<std::pair<double, double>> history;         // (ma, scal) per outer iteration
  int linear_iterations = 0;
};

template <int Dim>
struct MAResult {
  ScalarField<Dim> psi;
  std::vector<double> residual_history;  // sup residual before each step and at exit
  int iterations = 0;
  int linear_iterations = 0;
};

namespace detail {

template <int Dim>
Mat<Dim> adjugate(const Mat<Dim>& H) {
  if constexpr (Dim == 1) {
    return Mat<Dim>::Identity();
  } else {
    Mat<Dim> a;
    a << H(1, 1), -H(0, 1), -H(1, 0), H(0, 0);
    return a;
  }
}

template <int Dim, class Sym>
ScalarField<Dim> spectral_multiply(const ScalarField<Dim>& f, Sym&& sym) {
  const Lattice<Dim>& lat = f.lattice;
  Spectrum<Dim> s(f);
  CplxVec tmp(s.coefficients().begin(), s.coefficients().end());
  s.for_each([&](std::size_t q, const std::array<int, 2 * Dim>& m, bool nyquist) {
    tmp[q] *= nyquist ? 0.0 : sym(m);
  });
  ScalarField<Dim> out(lat);
  fftw_execute_dft_c2r(lat.plans().c2r, reinterpret_cast<fftw_complex*>(tmp.data()), out.values.data());
  return out;
}

// drops the mean and the Nyquist modes, the kernel of L
template <int Dim>
ScalarField<Dim> project_range(const ScalarField<Dim>& f) {
  return spectral_multiply(f, [](const auto& m) {
    for (int v : m)
      if (v != 0) return 1.0;
    return 0.0;
  });
}

template <int Dim>
class NewtonOperator {
 public:
  explicit NewtonOperator(const HermitianMatrixField<Dim>& H) : H_(H), Wbar_(Mat<Dim>::Zero()) {
    for (std::size_t p = 0; p < H.size(); ++p) Wbar_ += adjugate<Dim>(H(p));
    Wbar_ /= double(H.size());
  }

  // -L f
  ScalarField<Dim> apply(const ScalarField<Dim>& f) const {
    const Lattice<Dim>& lat = f.lattice;
    std::vector<ScalarField<Dim>> re, im;
    {
      Spectrum<Dim> s(f);
      for (int j = 0; j < Dim; ++j) {
        re.push_back(s.real_part(DiffOp{{1.0, {dzb(j)}}}));
        im.push_back(s.imag_part(DiffOp{{1.0, {dzb(j)}}}));
      }
    }
    for (std::size_t p = 0; p < lat.size(); ++p) {
      Mat<Dim> W = adjugate<Dim>(H_(p));
      Vec<Dim> v;
      for (int j = 0; j < Dim; ++j) v(j) = cplx(re[j][p], im[j][p]);
      Vec<Dim> w = W.transpose() * v;  // w_i = sum_j W_{ji} v_j
      for (int i = 0; i < Dim; ++i) {
        re[i][p] = w(i).real();
        im[i][p] = w(i).imag();
      }
    }
    SpectralSum<Dim> sum(lat);
    for (int i = 0; i < Dim; ++i) {
      sum.add(Spectrum<Dim>(re[i]), DiffOp{{1.0, {dz(i)}}}, false, -1.0);
      re[i].values = RealVec();
      sum.add(Spectrum<Dim>(im[i]), DiffOp{{1.0, {dz(i)}}}, true, 1.0);
      im[i].values = RealVec();
    }
    return sum.synthesize();
  }

  // inverse of the constant-coefficient operator with the mean of W
  ScalarField<Dim> precondition(const ScalarField<Dim>& r) const {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    return spectral_multiply(r, [&](const std::array<int, 2 * Dim>& m) {
      Vec<Dim> z;
      bool zero = true;
      for (int i = 0; i < Dim; ++i) {
        z(i) = cplx(m[2 * i], -m[2 * i + 1]);
        zero = zero && m[2 * i] == 0 && m[2 * i + 1] == 0;
      }
      if (zero) return 0.0;
      return 1.0 / (pi2 * (z.adjoint() * Wbar_ * z)(0, 0).real());
    });
  }

 private:
  const HermitianMatrixField<Dim>& H_;
  Mat<Dim> Wbar_;
};

template <int Dim>
double dot(const ScalarField<Dim>& a, const ScalarField<Dim>& b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) s += a[p] * b[p];
  return s / double(a.size());
}

struct PcgStats {
  int iterations = 0;
  double relative = 0.0;
};

// Solves -L x = b for b in the range of L; x has mean zero.
template <int Dim>
ScalarField<Dim> pcg(const NewtonOperator<Dim>& op, const ScalarField<Dim>& b, double rtol, int max_iters,
                     PcgStats& stats) {
  const Lattice<Dim>& lat = b.lattice;
  ScalarField<Dim> x(lat);
  ScalarField<Dim> r = b;
  const double bnorm = std::sqrt(dot(b, b));
  stats = {};
  if (bnorm == 0.0) return x;
  ScalarField<Dim> z = op.precondition(r);
  ScalarField<Dim> d = z;
  double rz = dot(r, z);
  for (int k = 0; k < max_iters; ++k) {
    ScalarField<Dim> Ad = op.apply(d);
    const double dAd = dot(d, Ad);
    if (!(dAd > 0)) break;
    const double a = rz / dAd;
    for (std::size_t p = 0; p < lat.size(); ++p) {
      x[p] += a * d[p];
      r[p] -= a * Ad[p];
    }
    stats.iterations = k + 1;
    stats.relative = std::sqrt(dot(r, r)) / bnorm;
    if (stats.relative <= rtol) break;
    z = op.precondition(r);
    const double rz1 = dot(r, z);
    const double beta = rz1 / rz;
    rz = rz1;
    for (std::size_t p = 0; p < lat.size(); ++p) d[p] = z[p] + beta * d[p];
  }
  return x;
}

template <int Dim>
void subtract_mean(ScalarField<Dim>& f) {
  const double m = f.mean();
  for (double& v : f.values) v -= m;
}

// g + ddbar psi, or nullopt if it leaves the cone
template <int Dim>
std::optional<HermitianMatrixField<Dim>> metric_of(const BackgroundGeometry<Dim>& bg, const ScalarField<Dim>& psi) {
  HermitianMatrixField<Dim> H = complex_hessian(psi);
  for (std::size_t p = 0; p < H.size(); ++p) {
    Mat<Dim> h = H(p) + bg.g(p);
    if (!positive_beyond<Dim>(h, delta_pos)) return std::nullopt;
    H.set(p, h);
  }
  return H;
}

// log det H - log det g - target
template <int Dim>
ScalarField<Dim> ma_residual(const BackgroundGeometry<Dim>& bg, const HermitianMatrixField<Dim>& H,
                             const ScalarField<Dim>& target) {
  ScalarField<Dim> r(target.lattice);
  for (std::size_t p = 0; p < r.size(); ++p)
    r[p] = std::log(H(p).determinant().real() / bg.det_g[p]) - target[p];
  return r;
}

template <int Dim>
double forcing(double r, const SolverConfig& cfg) {
  return std::clamp(0.1 * r, cfg.linear_tol, 0.1);
}

// Newton on log det(g + ddbar psi) - log det g = target from psi0; mean-zero iterates.
template <int Dim>
MAResult<Dim> newton_ma(const BackgroundGeometry<Dim>& bg, const ScalarField<Dim>& target, ScalarField<Dim> psi,
                        const SolverConfig& cfg) {
  subtract_mean(psi);
  auto H = metric_of(bg, psi);
  if (!H) throw LostPositivity("initial potential is outside the Kaehler cone");
  ScalarField<Dim> R = ma_residual(bg, *H, target);
  double r = R.sup_abs();
  MAResult<Dim> out{ScalarField<Dim>(psi.lattice), {r}, 0, 0};
  double step = cfg.damping;
  int accepts = 0;
  const double floor = 1.0 / 64.0;
  while (r > cfg.tol_residual) {
    if (out.iterations >= cfg.max_iters)
      throw NotConverged("Monge-Ampere Newton did not converge in " + std::to_string(cfg.max_iters) + " steps",
                         out.residual_history);
    ScalarField<Dim> b(R.lattice);
    for (std::size_t p = 0; p < b.size(); ++p) b[p] = (*H)(p).determinant().real() * R[p];
    R.values = RealVec();
    b = project_range(b);
    // -L delta = b
    PcgStats st;
    ScalarField<Dim> delta(b.lattice);
    {
      NewtonOperator<Dim> op(*H);
      delta = pcg(op, b, forcing<Dim>(r, cfg), cfg.linear_max_iters, st);
    }
    b.values = RealVec();
    H.reset();
    out.linear_iterations += st.iterations;
    subtract_mean(delta);
    bool lost = false;
    for (;;) {
      ScalarField<Dim> trial = psi;
      for (std::size_t p = 0; p < trial.size(); ++p) trial[p] += step * delta[p];
      auto Ht = metric_of(bg, trial);
      if (Ht) {
        ScalarField<Dim> Rt = ma_residual(bg, *Ht, target);
        const double rt = Rt.sup_abs();
        if (rt < r) {
          psi = std::move(trial);
          H = std::move(Ht);
          R = std::move(Rt);
          r = rt;
          break;
        }
        lost = false;
      } else {
        lost = true;
      }
      step *= 0.5;
      accepts = 0;
      if (step < floor) {
        if (lost) throw LostPositivity("Newton trial left the Kaehler cone at the minimum step");
        throw NotConverged("Monge-Ampere Newton stalled at the minimum step", out.residual_history);
      }
    }
    ++out.iterations;
    out.residual_history.push_back(r);
    if (step < cfg.damping && ++accepts >= 3) {
      step = cfg.damping;
      accepts = 0;
    }
  }
  out.psi = std::move(psi);
  return out;
}

}  // namespace detail

// det(g + ddbar psi) = density' det g with density' the rescaling of density to total volume;
// returns psi with sup psi = 0.
template <int Dim>
MAResult<Dim> solve_ma_full(const Background<Dim>& bg, const ScalarField<Dim>& density, const SolverConfig& cfg,
                            const ScalarField<Dim>* init = nullptr) {
  cfg.validate();
  const Lattice<Dim>& lat = density.lattice;
  if (density.min() <= 0.0 || !density.finite()) throw std::invalid_argument("density must be positive and finite");
  const double c = integrate(bg->det_g) / integrate(density, bg->det_g);
  ScalarField<Dim> target = map(density, [&](double d) { return std::log(c * d); });
  auto res = detail::newton_ma(*bg, target, init ? *init : ScalarField<Dim>(lat), cfg);
  const double top = res.psi.max();
  for (double& v : res.psi.values) v -= top;
  return res;
}

template <int Dim>
ScalarField<Dim> solve_ma(const Background<Dim>& bg, const ScalarField<Dim>& density, const SolverConfig& cfg) {
  return solve_ma_full(bg, density, cfg).psi;
}

// (sup |log det g_phi - log det g - F|, sup |Delta_phi F + Rbar - tr_phi Ric|)
template <int Dim>
std::pair<double, double> residuals(const Background<Dim>& bg, const ScalarField<Dim>& phi, const ScalarField<Dim>& F) {
  auto H = detail::metric_of(*bg, phi);
  if (!H) throw NotKahler(0, 0.0);
  double rma = detail::ma_residual(*bg, *H, F).sup_abs();
  ScalarField<Dim> s = laplace_phi(*H, Spectrum<Dim>(F));
  double rs = 0.0;
  for (std::size_t p = 0; p < s.size(); ++p)
    rs = std::max(rs, std::abs(s[p] + bg->R_bar - ((*H)(p).inverse() * bg->ricci(p)).trace().real()));
  return {rma, rs};
}

template <int Dim>
std::pair<double, double> residuals(const MetricState<Dim>& st) {
  return residuals(st.background, st.phi, st.F);
}

namespace detail {

// Delta_phi F = -Rbar + tr_phi Ric with the constant fixed by int e^F dvol_g = vol.
template <int Dim>
ScalarField<Dim> solve_F(const BackgroundGeometry<Dim>& bg, const HermitianMatrixField<Dim>& H,
                         const SolverConfig& cfg, int& lin_iters) {
  const Lattice<Dim>& lat = bg.lattice();
  ScalarField<Dim> b(lat);
  for (std::size_t p = 0; p < lat.size(); ++p)
    b[p] = (adjugate<Dim>(H(p)) * bg.ricci(p)).trace().real() - bg.R_bar * H(p).determinant().real();
  b = project_range(b);
  for (double& v : b.values) v = -v;
  NewtonOperator<Dim> op(H);
  PcgStats st;
  ScalarField<Dim> F = pcg(op, b, cfg.linear_tol, cfg.linear_max_iters, st);
  lin_iters += st.iterations;
  const double c = std::log(integrate(bg.det_g) / integrate(map(F, [](double v) { return std::exp(v); }), bg.det_g));
  for (double& v : F.values) v += c;
  return F;
}

}  // namespace detail

// Alternates the linear equation for F and the Monge-Ampere equation for phi along
// backgrounds t rho0, t = 1/steps, ..., 1. phi is returned with mean zero.
template <int Dim>
SolveResult<Dim> solve_csck(const Background<Dim>& bg, const SolverConfig& cfg) {
  cfg.validate();
  if (bg->R_bar != 0.0) throw std::invalid_argument("torus classes have zero average scalar curvature");
  const Lattice<Dim>& lat = bg->lattice();
  SolveResult<Dim> out{ScalarField<Dim>(lat), ScalarField<Dim>(lat), 0.0, 0.0, 0, false, {}, {}, 0};
  ScalarField<Dim> phi(lat);
  if (cfg.init_amplitude > 0) {
    phi = FourierSeries<Dim>::random(cfg.seed, 2, 2.0, cfg.init_amplitude).sample(lat);
    detail::subtract_mean(phi);
  }
  ScalarField<Dim> F(lat);
  for (int k = 1; k <= cfg.continuation_steps; ++k) {
    const double t = double(k) / cfg.continuation_steps;
    Background<Dim> bt = k == cfg.continuation_steps ? bg : make_background(map(bg->rho0, [&](double v) {
                                                                              return t * v;
                                                                            }), false);
    const bool last = k == cfg.continuation_steps;
    const double tol = last ? cfg.tol_residual : std::max(cfg.tol_residual, 1e-6);
    {
      auto H = detail::metric_of(*bt, phi);
      if (!H) throw LostPositivity("continuation step left the Kaehler cone at t = " + std::to_string(t));
      F = detail::ma_residual(*bt, *H, ScalarField<Dim>(lat));
    }
    for (int it = 0;; ++it) {
      auto [rma, rs] = residuals(bt, phi, F);
      if (last) {
        out.history.push_back({rma, rs});
        out.residual_history.push_back(std::max(rma, rs));
        out.residual_ma = rma;
        out.residual_scal = rs;
      }
      if (std::max(rma, rs) <= tol) break;
      if (it >= cfg.max_iters) {
        throw NotConverged("coupled iteration did not converge in " + std::to_string(cfg.max_iters) + " steps",
                           out.residual_history);
      }
      {
        auto H = detail::metric_of(*bt, phi);
        F = detail::solve_F(*bt, *H, cfg, out.linear_iterations);
      }
      SolverConfig inner = cfg;
      inner.tol_residual = 0.5 * tol;
      auto ma = detail::newton_ma(*bt, F, phi, inner);
      out.linear_iterations += ma.linear_iterations;
      phi = std::move(ma.psi);
      if (last) ++out.iterations;
    }
  }
  out.phi = std::move(phi);
  out.F = std::move(F);
  out.converged = true;
  return out;
}

}  // namespace csck

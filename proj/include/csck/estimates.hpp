#pragma once

// Quantities and max-principle checks from the a priori estimates. Every
// check derived under the coupled equations takes the twist of a non-solution
// state into account, or refuses such states when twist correction is off.

#include <map>
#include <string>

#include "csck/identities.hpp"

namespace csck {

struct CheckResult {
  std::string name;
  std::string anchor;
  std::vector<int> site;
  double value = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  double margin = 0.0;  // bound + slack - value
  bool pass = false;
  std::map<std::string, double> extras;
};

inline const std::map<std::string, std::string>& anchors() {
  static const std::map<std::string, std::string> a{
      {"prop21", "Prop2.1"},      {"thm21", "Thm2.1"},        {"thm22", "Thm2.2"},
      {"l1_gradF", "Sec4.L1"},    {"amgm", "Prop2.1.AMGM"},   {"eq125", "Eq1.25"},
      {"lap_lower", "Thm2.1.nF"}, {"chain", "Sec3.chain"},    {"volume", "Eq1.1"},
      {"entropy", "Thm1.1"},      {"kenergy", "Eq5.30"},      {"thm52", "Thm5.2"},
      {"gradF", "Eq.gradF"},      {"square220", "Eq2.20"},    {"cancel222", "Eq2.22"},
      {"bochner", "Sec4.Bochner"}, {"yau2nd", "Eq3.6"},       {"localG", "Eq6.6"},
      {"abp", "Lemma.abp"},       {"moser", "Lemma4.2"},      {"residuals", "Eq1.1-1.2"},
      {"w2p", "Thm3.1"},          {"alpha", "Prop5.2"},       {"flat_recovery", "Eq1.1-1.2"}};
  return a;
}

inline std::string anchor_for(const std::string& name) {
  auto it = anchors().find(name);
  return it == anchors().end() ? std::string() : it->second;
}

struct EstimateOptions {
  bool twist_correction = true;
  double twist_tol = 1e-8;  // largest |twist| accepted as a solution when correction is off
  double slack_c = 1.0;     // slack(N) = slack_c N^-2 scale
  double vol_tol = 1e-8;
  double l1_tol = 1e-7;
  double pointwise_slack = 1e-12;
};

inline double slack_N(int N, double scale, double c = 1.0) { return c * scale / (double(N) * double(N)); }

namespace detail {

inline CheckResult make_check(const std::string& name, double value, double bound, double slack) {
  CheckResult r;
  r.name = name;
  r.anchor = anchor_for(name);
  r.value = value;
  r.bound = bound;
  r.slack = slack;
  r.margin = bound + slack - value;
  r.pass = std::isfinite(value) && value <= bound + slack;
  return r;
}

template <int Dim>
std::vector<int> site_of(const Lattice<Dim>& lat, std::size_t p) {
  auto c = lat.coords(p);
  return std::vector<int>(c.begin(), c.end());
}

// first index attaining the extremum
template <int Dim, class Fn>
std::size_t argmax(const Lattice<Dim>& lat, Fn&& f) {
  std::size_t best = 0;
  double bv = f(0);
  for (std::size_t p = 1; p < lat.size(); ++p) {
    double v = f(p);
    if (v > bv) {
      bv = v;
      best = p;
    }
  }
  return best;
}

template <int Dim>
double twist_at(const MetricState<Dim>& st, std::size_t p, const EstimateOptions& opt) {
  if (opt.twist_correction) return st.twist[p];
  if (st.twist.sup_abs() > opt.twist_tol)
    throw NotSolved("state is not a solution: sup |twist| = " + std::to_string(st.twist.sup_abs()));
  return 0.0;
}

template <int Dim>
void require_bounds(const BackgroundGeometry<Dim>& bg) {
  if (!bg.flat && !bg.has_bounds) throw std::invalid_argument("background curvature bounds were not computed");
}

template <int Dim>
double mean_of(const Lattice<Dim>& lat, auto&& f) {
  double s = 0.0;
  for (std::size_t p = 0; p < lat.size(); ++p) s += f(p);
  return s / double(lat.size());
}

}  // namespace detail

// ---- integrals ------------------------------------------------------------------

template <int Dim>
double entropy(const MetricState<Dim>& st) {
  return detail::mean_of(st.lattice(), [&](std::size_t p) { return st.F[p] * std::exp(st.F[p]) * st.bg().det_g[p]; });
}

// int e^{-alpha F} (n + Delta phi)^p dvol_g
template <int Dim>
double w2p_integral(const MetricState<Dim>& st, double p, double alpha) {
  if (!(p > 0) || alpha < 0) throw std::invalid_argument("w2p_integral needs p > 0 and alpha >= 0");
  auto c = curvature_contractions(st);
  return detail::mean_of(st.lattice(), [&](std::size_t q) {
    return std::exp(-alpha * st.F[q]) * std::pow(c.n_plus_lap[q], p) * st.bg().det_g[q];
  });
}

inline double gamma_p(double p, int n) { return std::max((p + 1) * (p + 2), n * p); }

inline int p_n_bound(int n) { return (3 * n - 3) * (4 * n + 1); }

// ---- max-principle checks ----------------------------------------------------------

// At the minimizer p0 of F + C phi: 0 <= 2Cn - (nC/2) e^{-F/n}(p0) + twist(p0),
// with C = 2 max R_{i ibar} + 2|Rbar|/n + 1. Also verifies the implied global bound
// F >= -n log(4 + 2 twist+/(nC)) - C osc(phi).
template <int Dim>
CheckResult prop21_check(const MetricState<Dim>& st, const EstimateOptions& opt = {}) {
  const Lattice<Dim>& lat = st.lattice();
  const auto& bg = st.bg();
  const double n = Dim;
  const double C = 2.0 * bg.ric_max + 2.0 * std::abs(bg.R_bar) / n + 1.0;
  std::size_t p0 = detail::argmax(lat, [&](std::size_t p) { return -(st.F[p] + C * st.phi[p]); });
  const double t = detail::twist_at(st, p0, opt);
  const double term = 0.5 * n * C * std::exp(-st.F[p0] / n);
  const double value = term - t;
  const double bound = 2.0 * C * n;
  const double scale = std::max({bound, term, std::abs(t)});
  CheckResult r = detail::make_check("prop21", value, bound, slack_N(lat.N(), scale, opt.slack_c));
  r.site = detail::site_of(lat, p0);
  const double implied = -n * std::log(4.0 + 2.0 * std::max(t, 0.0) / (n * C)) - C * (st.phi.max() - st.phi.min());
  const bool global = st.F.min() >= implied - r.slack;
  r.pass = r.pass && global;
  r.extras = {{"C21", C}, {"implied_lower_bound", implied}, {"inf_F", st.F.min()}, {"global_bound_holds", global}};
  return r;
}

// At the maximizer of v = e^{F - lambda phi}(K + |grad phi|^2):
// -C223 + e^{F/n}/C224 + twist <= 0, with lambda = 2 + max(0, -min Ric eigenvalue),
// K = max(C221, 12) max|grad phi|^2 + 1, C222 = 3n/2,
// C223 = ((|Rbar| + lambda n)(K + max|grad phi|^2) + C222)/K, C224 = 4(K + max|grad phi|^2).
template <int Dim>
CheckResult thm21_check(const MetricState<Dim>& st, const EstimateOptions& opt = {}) {
  const Lattice<Dim>& lat = st.lattice();
  const auto& bg = st.bg();
  detail::require_bounds(bg);
  const double n = Dim;
  ScalarField<Dim> g2 = grad_norms(st, st.phi).first;
  const double M = g2.max();
  if (M == 0.0) {
    CheckResult r = detail::make_check("thm21", 0.0, 0.0, 0.0);
    r.extras = {{"degenerate", 1.0}};
    return r;
  }
  const double lambda = 2.0 + std::max(0.0, -bg.ric_min);
  const double c221 = std::max(0.0, -bg.bisec_lower);
  const double K = std::max(c221, 12.0) * M + 1.0;
  const double c222 = 1.5 * n;
  const double c223 = ((std::abs(bg.R_bar) + lambda * n) * (K + M) + c222) / K;
  const double c224 = 4.0 * (K + M);
  std::size_t p = detail::argmax(lat, [&](std::size_t q) { return st.F[q] - lambda * st.phi[q] + std::log(K + g2[q]); });
  const double t = detail::twist_at(st, p, opt);
  const double growth = std::exp(st.F[p] / n) / c224;
  const double value = -c223 + growth + t;
  const double scale = std::max({c223, growth, std::abs(t)});
  CheckResult r = detail::make_check("thm21", value, 0.0, slack_N(lat.N(), scale, opt.slack_c));
  r.site = detail::site_of(lat, p);
  double supe = 0.0;
  for (std::size_t q = 0; q < lat.size(); ++q) supe = std::max(supe, std::exp(st.F[q] / n));
  r.extras = {{"lambda", lambda}, {"K", K}, {"C223", c223}, {"C224", c224}, {"ratio", supe / M}};
  return r;
}

// At the maximizer of e^A(|grad phi|^2 + K), A = -(F + lambda phi) + phi^2/2, K = 10:
// (e^{-F}|grad phi|^2)^{1+1/n} - C233 e^{-F}(|grad phi|^2 + 1) - twist e^{-F}(|grad phi|^2 + K) <= 0,
// C233 = 10(|Rbar| + lambda n + n ||phi||_0) + 2 lambda + 2 ||phi||_0.
template <int Dim>
CheckResult thm22_check(const MetricState<Dim>& st, const EstimateOptions& opt = {}) {
  const Lattice<Dim>& lat = st.lattice();
  const auto& bg = st.bg();
  detail::require_bounds(bg);
  const double n = Dim;
  const double K = 10.0;
  const double lambda = thm22_lambda(st);
  const double phi0 = st.phi.sup_abs();
  const double c233 = 10.0 * (std::abs(bg.R_bar) + lambda * n + n * phi0) + 2.0 * lambda + 2.0 * phi0;
  ScalarField<Dim> g2 = grad_norms(st, st.phi).first;
  std::size_t p = detail::argmax(lat, [&](std::size_t q) {
    const double A = -(st.F[q] + lambda * st.phi[q]) + 0.5 * st.phi[q] * st.phi[q];
    return A + std::log(g2[q] + K);
  });
  const double t = detail::twist_at(st, p, opt);
  const double em = std::exp(-st.F[p]);
  const double x = em * g2[p];
  const double lead = std::pow(x, 1.0 + 1.0 / n);
  const double lower = c233 * em * (g2[p] + 1.0);
  const double tw = t * em * (g2[p] + K);
  const double value = lead - lower - tw;
  const double scale = std::max({lead, lower, std::abs(tw)});
  CheckResult r = detail::make_check("thm22", value, 0.0, slack_N(lat.N(), scale, opt.slack_c));
  r.site = detail::site_of(lat, p);
  double ratio = 0.0;
  for (std::size_t q = 0; q < lat.size(); ++q) ratio = std::max(ratio, g2[q] * std::exp(-st.F[q]));
  r.extras = {{"lambda", lambda}, {"K", K}, {"C233", c233}, {"sup_ratio", ratio}};
  return r;
}

// int e^F |grad F|_phi^2 dvol_g = int e^F F (Rbar - tr_phi Ric) dvol_g - int e^F F twist dvol_g
template <int Dim>
CheckResult l1_gradF_check(const MetricState<Dim>& st, const EstimateOptions& opt = {}) {
  const Lattice<Dim>& lat = st.lattice();
  detail::twist_at(st, 0, opt);
  ScalarField<Dim> gF = grad_norms(st, st.F).second;
  auto c = curvature_contractions(st);
  const auto& bg = st.bg();
  const double lhs = detail::mean_of(lat, [&](std::size_t p) { return std::exp(st.F[p]) * gF[p] * bg.det_g[p]; });
  const double rhs = detail::mean_of(lat, [&](std::size_t p) {
    double t = opt.twist_correction ? st.twist[p] : 0.0;
    return std::exp(st.F[p]) * st.F[p] * (bg.R_bar - c.tr_phi_ric[p] - t) * bg.det_g[p];
  });
  CheckResult r = detail::make_check("l1_gradF", std::abs(lhs - rhs), opt.l1_tol, 0.0);
  r.extras = {{"lhs", lhs}, {"rhs", rhs}};
  return r;
}

// ---- pointwise inequalities ------------------------------------------------------

// value = worst violation over the lattice (positive means violated), site = where.
template <int Dim>
std::vector<CheckResult> pointwise_checks(const MetricState<Dim>& st, const EstimateOptions& opt = {}) {
  const Lattice<Dim>& lat = st.lattice();
  const double n = Dim;
  struct Worst {
    double v = -std::numeric_limits<double>::infinity();
    std::size_t p = 0;
    void see(double x, std::size_t q) {
      if (x > v) {
        v = x;
        p = q;
      }
    }
  } amgm, e125, lapl, chain;
  for (std::size_t p = 0; p < lat.size(); ++p) {
    RVec<Dim> e = st.eig(p);
    const double F = st.F[p];
    double inv = 0.0, tr = 0.0;
    for (int i = 0; i < Dim; ++i) {
      inv += 1.0 / e(i);
      tr += e(i);
    }
    // each violation is relative to the larger side
    auto rel = [&](double small, double big) { return (small - big) / std::max({1.0, std::abs(small), std::abs(big)}); };
    amgm.see(rel(std::exp(-F / n), inv / n), p);
    for (int i = 0; i < Dim; ++i) e125.see(rel(1.0 / e(i), std::exp(-F) * std::pow(tr, n - 1)), p);
    lapl.see(rel(n * std::exp(F / n), tr), p);
    if constexpr (Dim >= 2) chain.see(rel(std::exp(-F / (n - 1)) * std::pow(tr, 1.0 + 1.0 / (n - 1)), tr * inv), p);
  }
  std::vector<CheckResult> out;
  auto add = [&](const char* name, const Worst& w) {
    CheckResult r = detail::make_check(name, w.v, 0.0, opt.pointwise_slack);
    r.site = detail::site_of(lat, w.p);
    out.push_back(std::move(r));
  };
  add("amgm", amgm);
  add("eq125", e125);
  add("lap_lower", lapl);
  if constexpr (Dim >= 2) add("chain", chain);
  return out;
}

template <int Dim>
CheckResult volume_check(const MetricState<Dim>& st, const EstimateOptions& opt = {}) {
  const auto& bg = st.bg();
  const double lhs = detail::mean_of(st.lattice(), [&](std::size_t p) { return std::exp(st.F[p]) * bg.det_g[p]; });
  const double vol = integrate(bg.det_g);
  CheckResult r = detail::make_check("volume", std::abs(lhs - vol), opt.vol_tol, 0.0);
  r.extras = {{"int_eF", lhs}, {"vol", vol}};
  return r;
}

template <int Dim>
CheckResult entropy_check(const MetricState<Dim>& st, const EstimateOptions& opt = {}) {
  const double e = entropy(st);
  CheckResult r = detail::make_check("entropy", -e, opt.vol_tol, 0.0);
  r.extras = {{"entropy", e}};
  return r;
}

// ---- K-energy, alpha integral, thm52 quantity ----------------------------------------

struct KEnergy {
  double value = 0.0;  // entropy + Richardson-extrapolated J
  double entropy = 0.0;
  double J = 0.0;
  double J_coarse = 0.0;
  double J_fine = 0.0;
  double error = 0.0;  // |J_fine - J_coarse| / 3
};

// K(phi) = int F e^F dvol_g + int_0^1 int phi (Rbar - tr_{t phi} Ric) dvol_{t phi} dt along t phi,
// trapezoid with `steps` and 2 `steps` intervals.
template <int Dim>
KEnergy kenergy(const Background<Dim>& bg, const ScalarField<Dim>& phi, int steps = 16) {
  if (steps < 1) throw std::invalid_argument("kenergy needs steps >= 1");
  const Lattice<Dim>& lat = phi.lattice;
  HermitianMatrixField<Dim> A = complex_hessian(phi);
  auto integrand = [&](double t) {
    double s = 0.0;
    for (std::size_t p = 0; p < lat.size(); ++p) {
      Mat<Dim> H = bg->g(p) + t * A(p);
      if (!detail::positive_beyond<Dim>(H, delta_pos))
        throw PathNotKahler("path t*phi leaves the Kaehler cone at t = " + std::to_string(t));
      double trRic = bg->flat ? 0.0 : (H.inverse() * bg->ricci(p)).trace().real();
      s += phi[p] * (bg->R_bar - trRic) * H.determinant().real();
    }
    return s / double(lat.size());
  };
  const int fine = 2 * steps;
  std::vector<double> vals(fine + 1);
  for (int k = 0; k <= fine; ++k) vals[k] = integrand(double(k) / fine);
  auto trap = [&](int stride) {
    const int m = fine / stride;
    double s = 0.5 * (vals[0] + vals[fine]);
    for (int k = 1; k < m; ++k) s += vals[k * stride];
    return s / m;
  };
  KEnergy k;
  k.J_coarse = trap(2);
  k.J_fine = trap(1);
  k.J = (4.0 * k.J_fine - k.J_coarse) / 3.0;
  k.error = std::abs(k.J_fine - k.J_coarse) / 3.0;
  double ent = 0.0;
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const double dh = (bg->g(p) + A(p)).determinant().real();
    const double F = std::log(dh / bg->det_g[p]);
    ent += F * dh;
  }
  k.entropy = ent / double(lat.size());
  k.value = k.entropy + k.J;
  return k;
}

// int e^{-alpha phi} dvol_g after normalizing sup phi = 0.
template <int Dim>
double alpha_integral(const Background<Dim>& bg, const ScalarField<Dim>& phi, double alpha) {
  const Lattice<Dim>& lat = phi.lattice;
  HermitianMatrixField<Dim> A = complex_hessian(phi);
  for (std::size_t p = 0; p < lat.size(); ++p)
    if (!detail::positive_beyond<Dim>(Mat<Dim>(bg->g(p) + A(p)), delta_pos))
      throw NotPsh("potential is not plurisubharmonic at point " + std::to_string(p));
  const double top = phi.max();
  return detail::mean_of(lat, [&](std::size_t p) { return std::exp(-alpha * (phi[p] - top)) * bg->det_g[p]; });
}

// Right-hand side e^F Phi(F) / int e^F Phi(F) dvol_g with Phi(t) = sqrt(t^2 + 1), and A_Phi.
template <int Dim>
std::pair<ScalarField<Dim>, double> thm52_density(const MetricState<Dim>& st) {
  ScalarField<Dim> d = map(st.F, [](double F) { return std::exp(F) * std::sqrt(F * F + 1.0); });
  const double a = integrate(d, st.bg().det_g);
  for (double& v : d.values) v /= a;
  return {std::move(d), a};
}

// sup (F + eps psi - 2(1 + max|Ric|) phi); reported with A_Phi. d0 is carried as a parameter only.
template <int Dim>
CheckResult thm52_quantity(const MetricState<Dim>& st, const ScalarField<Dim>& psi, double eps, double d0 = 0.25) {
  const Lattice<Dim>& lat = st.lattice();
  const double c = 2.0 * (1.0 + st.bg().ric_sup);
  auto q = [&](std::size_t p) { return st.F[p] + eps * psi[p] - c * st.phi[p]; };
  std::size_t p = detail::argmax(lat, q);
  const double v = q(p);
  CheckResult r = detail::make_check("thm52", v, v, 0.0);
  r.site = detail::site_of(lat, p);
  r.extras = {{"A_Phi", thm52_density(st).second}, {"eps", eps}, {"d0", d0}, {"sup_psi", psi.max()},
              {"report_only", 1.0}};
  return r;
}

// ---- report ---------------------------------------------------------------------------

struct EstimateReport {
  double entropy = 0.0;
  double sup_phi = 0.0, osc_phi = 0.0;
  double sup_grad_phi = 0.0;
  double inf_F = 0.0, sup_F = 0.0;
  double sup_ratio = 0.0;
  double sup_lap = 0.0;
  std::map<std::pair<double, double>, double> w2p;
  std::vector<CheckResult> checks;
};

// Summary plus every applicable check, sorted by name.
template <int Dim>
EstimateReport estimate_report(const MetricState<Dim>& st, const EstimateOptions& opt = {},
                               const std::vector<double>& ps = {1.0, 2.0}) {
  EstimateReport rep;
  const Lattice<Dim>& lat = st.lattice();
  rep.entropy = entropy(st);
  rep.sup_phi = st.phi.max();
  rep.osc_phi = st.phi.max() - st.phi.min();
  ScalarField<Dim> g2 = grad_norms(st, st.phi).first;
  rep.sup_grad_phi = std::sqrt(g2.max());
  rep.inf_F = st.F.min();
  rep.sup_F = st.F.max();
  for (std::size_t p = 0; p < lat.size(); ++p) rep.sup_ratio = std::max(rep.sup_ratio, g2[p] * std::exp(-st.F[p]));
  rep.sup_lap = curvature_contractions(st).n_plus_lap.max();
  for (double p : ps) {
    rep.w2p[{p, 0.0}] = w2p_integral(st, p, 0.0);
    const double g = gamma_p(p, Dim);
    rep.w2p[{p, g}] = w2p_integral(st, p, g);
  }
  rep.checks.push_back(prop21_check(st, opt));
  if (st.bg().flat || st.bg().has_bounds) {
    rep.checks.push_back(thm21_check(st, opt));
    rep.checks.push_back(thm22_check(st, opt));
  }
  rep.checks.push_back(l1_gradF_check(st, opt));
  for (auto& c : pointwise_checks(st, opt)) rep.checks.push_back(std::move(c));
  rep.checks.push_back(volume_check(st, opt));
  rep.checks.push_back(entropy_check(st, opt));
  std::stable_sort(rep.checks.begin(), rep.checks.end(),
                   [](const CheckResult& a, const CheckResult& b) { return a.name < b.name; });
  return rep;
}

}  // namespace csck

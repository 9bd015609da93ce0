#pragma once

// Periodic lattice on the torus T^{2n} = (C/(Z+iZ))^n with spectral calculus.
//
// Axes are ordered (x1, y1, ..., xn, yn) with z_k = x_k + i y_k and the
// linear point index runs with x1 fastest. Complex derivatives follow
//   d/dz = (d/dx - i d/dy) / 2,   d/dzbar = (d/dx + i d/dy) / 2,
// so dz dzbar = Laplacian / 4 on each complex line.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace csck {

using cplx = std::complex<double>;

template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const { return true; }
};

using RealVec = std::vector<double, FftwAllocator<double>>;
using CplxVec = std::vector<cplx, FftwAllocator<cplx>>;

struct Axis {
  enum class Kind { x, y, z, zbar };
  Kind kind;
  int k;  // zero-based complex coordinate index
};

inline constexpr Axis dx(int k) { return {Axis::Kind::x, k}; }
inline constexpr Axis dy(int k) { return {Axis::Kind::y, k}; }
inline constexpr Axis dz(int k) { return {Axis::Kind::z, k}; }
inline constexpr Axis dzb(int k) { return {Axis::Kind::zbar, k}; }

struct DiffTerm {
  cplx coeff;
  std::vector<Axis> axes;
};
using DiffOp = std::vector<DiffTerm>;

namespace detail {

struct Plans {
  std::vector<int> dims;
  std::size_t real_size = 1;
  std::size_t spec_size = 1;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  Plans(int axes, int N) : dims(axes, N) {
    for (int a = 0; a < axes; ++a) real_size *= std::size_t(N);
    spec_size = real_size / std::size_t(N) * std::size_t(N / 2 + 1);
    double* r = fftw_alloc_real(real_size);
    fftw_complex* c = fftw_alloc_complex(spec_size);
    // ESTIMATE keeps plans (and hence round-off) identical across runs.
    r2c = fftw_plan_dft_r2c(axes, dims.data(), r, c, FFTW_ESTIMATE);
    c2r = fftw_plan_dft_c2r(axes, dims.data(), c, r, FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
    fftw_free(r);
    fftw_free(c);
  }
  ~Plans() {
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
};

inline std::shared_ptr<const Plans> plans_for(int axes, int N) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const Plans>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{axes, N}];
  if (!slot) slot = std::make_shared<const Plans>(axes, N);
  return slot;
}

}  // namespace detail

template <int Dim>
class Lattice {
  static_assert(Dim == 1 || Dim == 2, "complex dimension must be 1 or 2");

 public:
  static constexpr int n = Dim;
  static constexpr int axes = 2 * Dim;
  using Index = std::array<int, axes>;
  using Point = std::array<double, axes>;

  explicit Lattice(int N) : N_(N) {
    if (N < 8 || (N & (N - 1)) != 0)
      throw std::invalid_argument("lattice size must be a power of two >= 8, got " + std::to_string(N));
    plans_ = detail::plans_for(axes, N);
  }

  int N() const { return N_; }
  double h() const { return 1.0 / N_; }
  std::size_t size() const { return plans_->real_size; }
  std::size_t spectral_size() const { return plans_->spec_size; }
  const detail::Plans& plans() const { return *plans_; }

  Index coords(std::size_t p) const {
    Index c{};
    for (int a = 0; a < axes; ++a) {
      c[a] = int(p % std::size_t(N_));
      p /= std::size_t(N_);
    }
    return c;
  }

  std::size_t index(const Index& c) const {
    std::size_t p = 0;
    for (int a = axes - 1; a >= 0; --a) {
      int k = ((c[a] % N_) + N_) % N_;
      p = p * std::size_t(N_) + std::size_t(k);
    }
    return p;
  }

  Point point(std::size_t p) const {
    Index c = coords(p);
    Point x{};
    for (int a = 0; a < axes; ++a) x[a] = c[a] * h();
    return x;
  }

  bool operator==(const Lattice& o) const { return N_ == o.N_; }

 private:
  int N_;
  std::shared_ptr<const detail::Plans> plans_;
};

template <int Dim>
struct ScalarField {
  Lattice<Dim> lattice;
  RealVec values;
  std::optional<int> band_limit;

  explicit ScalarField(const Lattice<Dim>& lat, double c = 0.0) : lattice(lat), values(lat.size(), c) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t p) { return values[p]; }
  double operator[](std::size_t p) const { return values[p]; }

  double max() const { return *std::max_element(values.begin(), values.end()); }
  double min() const { return *std::min_element(values.begin(), values.end()); }
  double sup_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / double(values.size());
  }
  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

template <int Dim>
struct ComplexField {
  Lattice<Dim> lattice;
  CplxVec values;

  explicit ComplexField(const Lattice<Dim>& lat) : lattice(lat), values(lat.size()) {}

  std::size_t size() const { return values.size(); }
  cplx& operator[](std::size_t p) { return values[p]; }
  cplx operator[](std::size_t p) const { return values[p]; }
};

template <int Dim, class Fn>
ScalarField<Dim> sample(const Lattice<Dim>& lat, Fn&& fn) {
  ScalarField<Dim> f(lat);
  for (std::size_t p = 0; p < lat.size(); ++p) f[p] = fn(lat.point(p));
  return f;
}

template <int Dim, class Fn>
ScalarField<Dim> map(const ScalarField<Dim>& a, Fn&& fn) {
  ScalarField<Dim> out(a.lattice);
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = fn(a[p]);
  return out;
}

template <int Dim, class Fn>
ScalarField<Dim> zip(const ScalarField<Dim>& a, const ScalarField<Dim>& b, Fn&& fn) {
  ScalarField<Dim> out(a.lattice);
  for (std::size_t p = 0; p < a.size(); ++p) out[p] = fn(a[p], b[p]);
  return out;
}

namespace detail {

inline void check_axes(std::span<const Axis> axes, int dim) {
  for (const Axis& a : axes)
    if (a.k < 0 || a.k >= dim)
      throw std::out_of_range("derivative axis index " + std::to_string(a.k) + " outside complex dimension " +
                              std::to_string(dim));
}

// Symbol of a single axis derivative for wave vector m (integers per real axis).
inline cplx axis_symbol(const Axis& a, const int* m) {
  constexpr double tau = 2.0 * std::numbers::pi;
  const cplx i(0.0, 1.0);
  cplx sx = i * tau * double(m[2 * a.k]);
  cplx sy = i * tau * double(m[2 * a.k + 1]);
  switch (a.kind) {
    case Axis::Kind::x: return sx;
    case Axis::Kind::y: return sy;
    case Axis::Kind::z: return 0.5 * (sx - i * sy);
    case Axis::Kind::zbar: return 0.5 * (sx + i * sy);
  }
  return 0.0;
}

inline cplx op_symbol(const DiffOp& op, const int* m) {
  cplx s = 0.0;
  for (const DiffTerm& t : op) {
    cplx prod = t.coeff;
    for (const Axis& a : t.axes) prod *= axis_symbol(a, m);
    s += prod;
  }
  return s;
}

inline bool has_derivative(const DiffOp& op) {
  for (const DiffTerm& t : op)
    if (!t.axes.empty()) return true;
  return false;
}

}  // namespace detail

// Fourier coefficients c_m of f = sum_m c_m exp(2 pi i m.x), half-stored along x1.
template <int Dim>
class Spectrum {
 public:
  static constexpr int axes = 2 * Dim;

  explicit Spectrum(const ScalarField<Dim>& f) : lat_(f.lattice), c_(f.lattice.spectral_size()) {
    fftw_execute_dft_r2c(lat_.plans().r2c, const_cast<double*>(f.values.data()),
                         reinterpret_cast<fftw_complex*>(c_.data()));
    const double s = 1.0 / double(lat_.size());
    for (cplx& v : c_) v *= s;
  }

  const Lattice<Dim>& lattice() const { return lat_; }
  const CplxVec& coefficients() const { return c_; }

  // Visits every stored coefficient with its signed wave vector.
  template <class Fn>
  void for_each(Fn&& fn) const {
    const int N = lat_.N();
    const int half = N / 2 + 1;
    std::array<int, axes> k{};
    std::array<int, axes> m{};
    for (std::size_t q = 0; q < c_.size(); ++q) {
      bool nyquist = false;
      m[0] = k[0];
      if (k[0] == N / 2) nyquist = true;
      for (int a = 1; a < axes; ++a) {
        m[a] = k[a] <= N / 2 ? k[a] : k[a] - N;
        if (k[a] == N / 2) nyquist = true;
      }
      fn(q, m, nyquist);
      for (int a = 0; a < axes; ++a) {
        if (++k[a] < (a == 0 ? half : N)) break;
        k[a] = 0;
      }
    }
  }

  ScalarField<Dim> real_part(const DiffOp& op) const { return inverse_part(op, false); }
  ScalarField<Dim> imag_part(const DiffOp& op) const { return inverse_part(op, true); }

  ComplexField<Dim> apply(const DiffOp& op) const {
    ComplexField<Dim> out(lat_);
    {
      ScalarField<Dim> re = real_part(op);
      for (std::size_t p = 0; p < out.size(); ++p) out[p] = re[p];
    }
    ScalarField<Dim> im = imag_part(op);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += cplx(0.0, im[p]);
    return out;
  }

  ScalarField<Dim> synthesize() const { return real_part(DiffOp{{1.0, {}}}); }

  double parseval() const {
    double s = 0.0;
    for_each([&](std::size_t q, const std::array<int, axes>& m, bool) {
      // modes with m_x1 > 0 stand for their conjugate partner as well
      double w = (m[0] == 0 || 2 * m[0] == lat_.N()) ? 1.0 : 2.0;
      s += w * std::norm(c_[q]);
    });
    return s;
  }

 private:
  ScalarField<Dim> inverse_part(const DiffOp& op, bool imag) const {
    CplxVec tmp(c_.size(), cplx(0.0));
    accumulate_part(op, imag, tmp);
    ScalarField<Dim> out(lat_);
    fftw_execute_dft_c2r(lat_.plans().c2r, reinterpret_cast<fftw_complex*>(tmp.data()), out.values.data());
    return out;
  }

  // tmp += spectrum of the real (or imaginary) part of op applied to this field
  void accumulate_part(const DiffOp& op, bool imag, CplxVec& tmp, double scale = 1.0) const {
    for (const DiffTerm& t : op) {
      detail::check_axes(t.axes, Dim);
      if (t.axes.size() > 4) throw std::invalid_argument("derivative order above 4");
    }
    const bool deriv = detail::has_derivative(op);
    // per term and complex coordinate: table of the axis-symbol product over (m_x, m_y)
    const int N = lat_.N();
    const int w = N + 1;
    const std::size_t nt = op.size();
    std::vector<cplx> tab(nt * Dim * w * w, cplx(1.0));
    std::vector<double> sign(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      sign[t] = op[t].axes.size() % 2 == 0 ? 1.0 : -1.0;
      for (int k = 0; k < Dim; ++k)
        for (int mx = -N / 2; mx <= N / 2; ++mx)
          for (int my = -N / 2; my <= N / 2; ++my) {
            std::array<int, axes> m{};
            m[2 * k] = mx;
            m[2 * k + 1] = my;
            cplx v = 1.0;
            for (const Axis& a : op[t].axes)
              if (a.k == k) v *= detail::axis_symbol(a, m.data());
            tab[((t * Dim + k) * w + (mx + N / 2)) * w + (my + N / 2)] = v;
          }
    }
    for_each([&](std::size_t q, const std::array<int, axes>& m, bool nyquist) {
      if (deriv && nyquist) return;
      // each term is homogeneous, so its symbol at -m is (-1)^order times that at m
      cplx dp = 0.0, dm = 0.0;
      for (std::size_t t = 0; t < nt; ++t) {
        cplx v = 1.0;
        for (int k = 0; k < Dim; ++k) v *= tab[((t * Dim + k) * w + (m[2 * k] + N / 2)) * w + (m[2 * k + 1] + N / 2)];
        dp += op[t].coeff * v;
        dm += sign[t] * std::conj(op[t].coeff * v);
      }
      cplx s = imag ? (dp - dm) / cplx(0.0, 2.0) : 0.5 * (dp + dm);
      tmp[q] += scale * c_[q] * s;
    });
  }

  template <int D>
  friend class SpectralSum;

  Lattice<Dim> lat_;
  CplxVec c_;
};

// Sum of real or imaginary parts of derivatives of several fields, synthesized once.
// Terms are folded in as they are added, so their spectra need not coexist.
template <int Dim>
class SpectralSum {
 public:
  explicit SpectralSum(const Lattice<Dim>& lat) : lat_(lat), tmp_(lat.spectral_size(), cplx(0.0)) {}

  void add(const Spectrum<Dim>& s, const DiffOp& op, bool imag, double sign = 1.0) {
    s.accumulate_part(op, imag, tmp_, sign);
  }

  ScalarField<Dim> synthesize() {
    ScalarField<Dim> out(lat_);
    fftw_execute_dft_c2r(lat_.plans().c2r, reinterpret_cast<fftw_complex*>(tmp_.data()), out.values.data());
    return out;
  }

 private:
  Lattice<Dim> lat_;
  CplxVec tmp_;
};

// General (possibly complex) derivative along a multi-index of axis symbols.
template <int Dim>
ComplexField<Dim> derive(const ScalarField<Dim>& f, std::span<const Axis> idx) {
  if (idx.size() > 4) throw std::invalid_argument("multi-index longer than 4");
  detail::check_axes(idx, Dim);
  return Spectrum<Dim>(f).apply(DiffOp{{1.0, std::vector<Axis>(idx.begin(), idx.end())}});
}

template <int Dim>
ComplexField<Dim> derive(const ScalarField<Dim>& f, std::initializer_list<Axis> idx) {
  return derive(f, std::span<const Axis>(idx.begin(), idx.size()));
}

// Real derivative; for real axes (x, y) this is the full derivative.
template <int Dim>
ScalarField<Dim> derive_real(const ScalarField<Dim>& f, std::initializer_list<Axis> idx) {
  if (idx.size() > 4) throw std::invalid_argument("multi-index longer than 4");
  std::span<const Axis> s(idx.begin(), idx.size());
  detail::check_axes(s, Dim);
  return Spectrum<Dim>(f).real_part(DiffOp{{1.0, std::vector<Axis>(idx.begin(), idx.end())}});
}

template <int Dim>
double integrate(const ScalarField<Dim>& f, const ScalarField<Dim>& w) {
  double s = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) s += f[p] * w[p];
  return s / double(f.size());
}

template <int Dim>
double integrate(const ScalarField<Dim>& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s / double(f.size());
}

template <int Dim>
struct FourierMode {
  std::array<int, 2 * Dim> m{};
  double a_cos = 0.0;
  double a_sin = 0.0;
};

// Band-limited real trigonometric polynomial; sampled exactly on any lattice
// whose Nyquist index exceeds the largest mode.
template <int Dim>
struct FourierSeries {
  static constexpr int axes = 2 * Dim;
  std::vector<FourierMode<Dim>> modes;

  int max_mode() const {
    int k = 0;
    for (const auto& md : modes)
      for (int v : md.m) k = std::max(k, std::abs(v));
    return k;
  }

  bool empty() const { return modes.empty(); }

  double operator()(const std::array<double, axes>& x) const {
    double s = 0.0;
    for (const auto& md : modes) {
      double t = 0.0;
      for (int a = 0; a < axes; ++a) t += md.m[a] * x[a];
      t *= 2.0 * std::numbers::pi;
      s += md.a_cos * std::cos(t) + md.a_sin * std::sin(t);
    }
    return s;
  }

  FourierSeries scaled(double s) const {
    FourierSeries out = *this;
    for (auto& md : out.modes) {
      md.a_cos *= s;
      md.a_sin *= s;
    }
    return out;
  }

  FourierSeries operator+(const FourierSeries& o) const {
    FourierSeries out = *this;
    out.modes.insert(out.modes.end(), o.modes.begin(), o.modes.end());
    return out;
  }

  ScalarField<Dim> sample(const Lattice<Dim>& lat) const {
    const int N = lat.N();
    if (2 * max_mode() >= N)
      throw std::invalid_argument("Fourier mode " + std::to_string(max_mode()) + " not resolved on N=" +
                                  std::to_string(N));
    CplxVec c(lat.spectral_size(), cplx(0.0));
    const int half = N / 2 + 1;
    auto slot = [&](std::array<int, axes> m) {
      std::size_t q = 0;
      for (int a = axes - 1; a >= 1; --a) q = q * std::size_t(N) + std::size_t((m[a] % N + N) % N);
      return q * std::size_t(half) + std::size_t(m[0]);
    };
    for (const auto& md : modes) {
      bool zero = std::all_of(md.m.begin(), md.m.end(), [](int v) { return v == 0; });
      if (zero) {
        c[0] += md.a_cos;
        continue;
      }
      cplx cp(0.5 * md.a_cos, -0.5 * md.a_sin);  // coefficient of exp(+i m.x)
      std::array<int, axes> m = md.m;
      std::array<int, axes> mm;
      for (int a = 0; a < axes; ++a) mm[a] = -m[a];
      if (m[0] > 0) {
        c[slot(m)] += cp;
      } else if (m[0] < 0) {
        c[slot(mm)] += std::conj(cp);
      } else {
        c[slot(m)] += cp;
        c[slot(mm)] += std::conj(cp);
      }
    }
    ScalarField<Dim> out(lat);
    fftw_execute_dft_c2r(lat.plans().c2r, reinterpret_cast<fftw_complex*>(c.data()), out.values.data());
    out.band_limit = max_mode();
    return out;
  }

  // Random modes with 0 < max|m_a| <= kmax, amplitudes decaying like (1+|m|^2)^(-s/2),
  // rescaled so the sum of |amplitudes| equals `amplitude`.
  static FourierSeries random(std::uint64_t seed, int kmax, double decay, double amplitude) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    FourierSeries out;
    std::array<int, axes> m{};
    for (int a = 0; a < axes; ++a) m[a] = -kmax;
    while (true) {
      // keep one representative of each +-m pair: first nonzero entry positive
      int first = 0;
      for (int a = axes - 1; a >= 0; --a)
        if (m[a] != 0) first = m[a];
      if (first > 0) {
        double r2 = 0.0;
        for (int v : m) r2 += double(v) * v;
        double w = std::pow(1.0 + r2, -0.5 * decay);
        out.modes.push_back({m, w * normal(rng), w * normal(rng)});
      }
      int a = 0;
      for (; a < axes; ++a) {
        if (++m[a] <= kmax) break;
        m[a] = -kmax;
      }
      if (a == axes) break;
    }
    double total = 0.0;
    for (const auto& md : out.modes) total += std::abs(md.a_cos) + std::abs(md.a_sin);
    return total > 0.0 ? out.scaled(amplitude / total) : out;
  }
};

// CSV dump: a `n,N,domain` header with its values, then column names, then one row per point.
template <int Dim>
void write_csv(std::ostream& os, const std::vector<std::pair<std::string, const ScalarField<Dim>*>>& fields) {
  if (fields.empty()) throw std::invalid_argument("no fields to write");
  const Lattice<Dim>& lat = fields.front().second->lattice;
  os << "n,N,domain\n" << Dim << ',' << lat.N() << ",torus\n";
  for (std::size_t j = 0; j < fields.size(); ++j) os << (j ? "," : "") << fields[j].first;
  os << '\n';
  char buf[40];
  for (std::size_t p = 0; p < lat.size(); ++p) {
    for (std::size_t j = 0; j < fields.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", (*fields[j].second)[p]);
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

}  // namespace csck

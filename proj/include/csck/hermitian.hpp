#pragma once

// Hermitian n x n matrix fields and closed-form pointwise diagonalization.
//
// Entry (i, j) of a field stores the (i, jbar) component, e.g. g_{i jbar}.

#include <Eigen/Dense>

#include "csck/lattice.hpp"

namespace csck {

template <int Dim>
using Mat = Eigen::Matrix<cplx, Dim, Dim>;
template <int Dim>
using Vec = Eigen::Matrix<cplx, Dim, 1>;
template <int Dim>
using RVec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
class HermitianMatrixField {
 public:
  static constexpr int stride = Dim * Dim;

  explicit HermitianMatrixField(const Lattice<Dim>& lat) : lat_(lat), uniform_(false), data_(lat.size() * stride, 0.0) {}

  // Constant field stored once; used for flat backgrounds.
  static HermitianMatrixField uniform(const Lattice<Dim>& lat, const Mat<Dim>& m) {
    HermitianMatrixField f(lat, true);
    f.pack(0, m);
    return f;
  }

  const Lattice<Dim>& lattice() const { return lat_; }
  bool is_uniform() const { return uniform_; }
  std::size_t size() const { return lat_.size(); }

  Mat<Dim> operator()(std::size_t p) const {
    const double* d = data_.data() + (uniform_ ? 0 : p * stride);
    Mat<Dim> m;
    for (int i = 0; i < Dim; ++i) m(i, i) = d[i];
    if constexpr (Dim == 2) {
      m(0, 1) = cplx(d[2], d[3]);
      m(1, 0) = std::conj(m(0, 1));
    }
    return m;
  }

  void set(std::size_t p, const Mat<Dim>& m) {
    if (uniform_) throw std::logic_error("uniform matrix field is immutable");
    pack(p * stride, m);
  }

  double diag(std::size_t p, int i) const { return data_[(uniform_ ? 0 : p * stride) + i]; }

  // Component (i, jbar) as a field; i <= j.
  void set_component(int i, int j, const ScalarField<Dim>& re, const ScalarField<Dim>* im) {
    if (uniform_) throw std::logic_error("uniform matrix field is immutable");
    for (std::size_t p = 0; p < size(); ++p) {
      double* d = data_.data() + p * stride;
      if (i == j) {
        d[i] = re[p];
      } else {
        d[2] = re[p];
        d[3] = im ? (*im)[p] : 0.0;
      }
    }
  }

 private:
  HermitianMatrixField(const Lattice<Dim>& lat, bool) : lat_(lat), uniform_(true), data_(stride, 0.0) {}

  void pack(std::size_t off, const Mat<Dim>& m) {
    double* d = data_.data() + off;
    for (int i = 0; i < Dim; ++i) d[i] = m(i, i).real();
    if constexpr (Dim == 2) {
      cplx b = 0.5 * (m(0, 1) + std::conj(m(1, 0)));
      d[2] = b.real();
      d[3] = b.imag();
    }
  }

  Lattice<Dim> lat_;
  bool uniform_;
  RealVec data_;
};

template <int Dim>
struct Eigh {
  RVec<Dim> values;   // ascending
  Mat<Dim> vectors;   // unitary, columns are eigenvectors
};

// Closed-form eigen-decomposition of a Hermitian 1x1 or 2x2 matrix.
template <int Dim>
Eigh<Dim> eigh(const Mat<Dim>& M) {
  Eigh<Dim> e;
  if constexpr (Dim == 1) {
    e.values(0) = M(0, 0).real();
    e.vectors(0, 0) = 1.0;
  } else {
    const double a = M(0, 0).real();
    const double d = M(1, 1).real();
    const cplx b = 0.5 * (M(0, 1) + std::conj(M(1, 0)));
    const double mean = 0.5 * (a + d);
    const double r = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(b));
    const double det = a * d - std::norm(b);
    double lo, hi;
    if (mean >= 0.0) {
      hi = mean + r;
      lo = hi != 0.0 ? det / hi : 0.0;
    } else {
      lo = mean - r;
      hi = det / lo;
    }
    e.values << lo, hi;
    if (std::abs(b) == 0.0) {
      if (a <= d) {
        e.vectors << 1.0, 0.0, 0.0, 1.0;
      } else {
        e.vectors << 0.0, 1.0, 1.0, 0.0;
      }
      return e;
    }
    Vec<2> v1(b, cplx(lo - a));
    Vec<2> v2(cplx(lo - d), std::conj(b));
    Vec<2> v = v1.norm() >= v2.norm() ? v1 : v2;
    v /= v.norm();
    e.vectors(0, 0) = v(0);
    e.vectors(1, 0) = v(1);
    e.vectors(0, 1) = -std::conj(v(1));
    e.vectors(1, 1) = std::conj(v(0));
  }
  return e;
}

// Generalized frame for the pencil (G, H): P^* G P = I, P^* H P = diag(values).
// Columns of P give the normal-coordinate frame of G in which H is diagonal.
template <int Dim>
struct Frame {
  RVec<Dim> values;
  Mat<Dim> P;
};

template <int Dim>
Frame<Dim> generalized_frame(const Mat<Dim>& G, const Mat<Dim>& H) {
  Mat<Dim> L = Mat<Dim>::Zero();
  if constexpr (Dim == 1) {
    L(0, 0) = std::sqrt(G(0, 0).real());
  } else {
    const double l00 = std::sqrt(G(0, 0).real());
    const cplx l10 = G(1, 0) / l00;
    L(0, 0) = l00;
    L(1, 0) = l10;
    L(1, 1) = std::sqrt(G(1, 1).real() - std::norm(l10));
  }
  Mat<Dim> Li = L.inverse();
  Mat<Dim> M = Li * H * Li.adjoint();
  Eigh<Dim> e = eigh<Dim>(M);
  return {e.values, Li.adjoint() * e.vectors};
}

// Per-point eigenvalues of G^{-1} H (ascending).
template <int Dim>
RVec<Dim> relative_eigenvalues(const Mat<Dim>& G, const Mat<Dim>& H) {
  if constexpr (Dim == 1) {
    RVec<1> v;
    v(0) = H(0, 0).real() / G(0, 0).real();
    return v;
  } else {
    return generalized_frame<Dim>(G, H).values;
  }
}

// phi_{i jbar} as a Hermitian matrix field.
template <int Dim>
HermitianMatrixField<Dim> complex_hessian(const Spectrum<Dim>& s) {
  HermitianMatrixField<Dim> out(s.lattice());
  for (int i = 0; i < Dim; ++i) {
    ScalarField<Dim> d = s.real_part(DiffOp{{1.0, {dz(i), dzb(i)}}});
    out.set_component(i, i, d, nullptr);
  }
  if constexpr (Dim == 2) {
    DiffOp op{{1.0, {dz(0), dzb(1)}}};
    ScalarField<Dim> re = s.real_part(op);
    ScalarField<Dim> im = s.imag_part(op);
    out.set_component(0, 1, re, &im);
  }
  return out;
}

template <int Dim>
HermitianMatrixField<Dim> complex_hessian(const ScalarField<Dim>& f) {
  return complex_hessian(Spectrum<Dim>(f));
}

}  // namespace csck

#pragma once

// Evaluation of spectral derivatives at a chosen set of lattice sites. Each
// derivative field is synthesized once and only its values at the sites kept,
// so many derivative components can be held at once on large lattices.

#include "csck/hermitian.hpp"

namespace csck {

template <int Dim>
struct Probes {
  std::vector<std::size_t> sites;

  std::size_t size() const { return sites.size(); }

  static Probes all(const Lattice<Dim>& lat) {
    Probes pr;
    pr.sites.resize(lat.size());
    for (std::size_t p = 0; p < lat.size(); ++p) pr.sites[p] = p;
    return pr;
  }

  // Sites of the sub-lattice with M points per axis; the same physical points for every N >= M.
  static Probes coarse(const Lattice<Dim>& lat, int M) {
    const int N = lat.N();
    if (M > N || N % M != 0) throw std::invalid_argument("coarse probe grid must divide the lattice");
    const int stride = N / M;
    Lattice<Dim> small(M);
    Probes pr;
    pr.sites.reserve(small.size());
    for (std::size_t q = 0; q < small.size(); ++q) {
      auto c = small.coords(q);
      for (int& k : c) k *= stride;
      pr.sites.push_back(lat.index(c));
    }
    return pr;
  }
};

template <int Dim>
std::vector<double> at(const ScalarField<Dim>& f, const Probes<Dim>& pr) {
  std::vector<double> v(pr.size());
  for (std::size_t q = 0; q < pr.size(); ++q) v[q] = f[pr.sites[q]];
  return v;
}

template <int Dim>
std::vector<double> real_at(const Spectrum<Dim>& s, const DiffOp& op, const Probes<Dim>& pr) {
  return at(s.real_part(op), pr);
}

template <int Dim>
std::vector<cplx> complex_at(const Spectrum<Dim>& s, const DiffOp& op, const Probes<Dim>& pr) {
  std::vector<cplx> v(pr.size());
  {
    ScalarField<Dim> re = s.real_part(op);
    for (std::size_t q = 0; q < pr.size(); ++q) v[q] = re[pr.sites[q]];
  }
  ScalarField<Dim> im = s.imag_part(op);
  for (std::size_t q = 0; q < pr.size(); ++q) v[q] += cplx(0.0, im[pr.sites[q]]);
  return v;
}

// d_i f at the sites, one vector per i.
template <int Dim>
std::array<std::vector<cplx>, Dim> gradient_at(const Spectrum<Dim>& s, const Probes<Dim>& pr) {
  std::array<std::vector<cplx>, Dim> g;
  for (int i = 0; i < Dim; ++i) g[i] = complex_at(s, DiffOp{{1.0, {dz(i)}}}, pr);
  return g;
}

// d_i d_j f (symmetric), indexed [i][j].
template <int Dim>
std::array<std::array<std::vector<cplx>, Dim>, Dim> holomorphic_hessian_at(const Spectrum<Dim>& s,
                                                                             const Probes<Dim>& pr) {
  std::array<std::array<std::vector<cplx>, Dim>, Dim> h;
  for (int i = 0; i < Dim; ++i)
    for (int j = i; j < Dim; ++j) {
      h[i][j] = complex_at(s, DiffOp{{1.0, {dz(i), dz(j)}}}, pr);
      if (j != i) h[j][i] = h[i][j];
    }
  return h;
}

// d_i d_jbar f as one matrix per site.
template <int Dim>
std::vector<Mat<Dim>> complex_hessian_at(const Spectrum<Dim>& s, const Probes<Dim>& pr) {
  std::vector<Mat<Dim>> m(pr.size(), Mat<Dim>::Zero());
  for (int i = 0; i < Dim; ++i) {
    auto d = real_at(s, DiffOp{{1.0, {dz(i), dzb(i)}}}, pr);
    for (std::size_t q = 0; q < pr.size(); ++q) m[q](i, i) = d[q];
  }
  if constexpr (Dim == 2) {
    auto c = complex_at(s, DiffOp{{1.0, {dz(0), dzb(1)}}}, pr);
    for (std::size_t q = 0; q < pr.size(); ++q) {
      m[q](0, 1) = c[q];
      m[q](1, 0) = std::conj(c[q]);
    }
  }
  return m;
}

// d_a d_b d_cbar f, symmetric in (a, b); stored per site as a flat Dim^3 array [a][b][c].
template <int Dim>
std::vector<std::array<cplx, Dim * Dim * Dim>> third_at(const Spectrum<Dim>& s, const Probes<Dim>& pr) {
  std::vector<std::array<cplx, Dim * Dim * Dim>> t(pr.size());
  for (int a = 0; a < Dim; ++a)
    for (int b = a; b < Dim; ++b)
      for (int c = 0; c < Dim; ++c) {
        auto v = complex_at(s, DiffOp{{1.0, {dz(a), dz(b), dzb(c)}}}, pr);
        for (std::size_t q = 0; q < pr.size(); ++q) {
          t[q][(a * Dim + b) * Dim + c] = v[q];
          t[q][(b * Dim + a) * Dim + c] = v[q];
        }
      }
  return t;
}

}  // namespace csck

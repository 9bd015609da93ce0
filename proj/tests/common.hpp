#pragma once

#include <cstdint>

#include "csck/kahler.hpp"

namespace testutil {

using namespace csck;

// Random band-limited potential; amplitude is the l1 norm of its coefficients.
template <int Dim>
FourierSeries<Dim> series(std::uint64_t seed, double amp, int kmax = 2, double decay = 2.0) {
  return FourierSeries<Dim>::random(seed, kmax, decay, amp);
}

template <int Dim>
Background<Dim> curved(const Lattice<Dim>& lat, std::uint64_t seed, double amp, bool bounds = true) {
  return make_background(series<Dim>(seed, amp, 1).sample(lat), bounds);
}

template <int Dim>
MetricState<Dim> random_state(const Lattice<Dim>& lat, std::uint64_t seed, double amp_phi, double amp_rho) {
  Background<Dim> bg = amp_rho > 0 ? curved(lat, seed + 1000, amp_rho) : flat_background(lat);
  return assemble(bg, series<Dim>(seed, amp_phi).sample(lat));
}

// Fourth-order central differences on lattice samples.
template <int Dim>
double fd1(const ScalarField<Dim>& f, std::size_t p, int axis) {
  const Lattice<Dim>& L = f.lattice;
  auto c = L.coords(p);
  auto at = [&](int s) {
    auto d = c;
    d[axis] += s;
    return f[L.index(d)];
  };
  return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * L.h());
}

template <int Dim>
double fd2(const ScalarField<Dim>& f, std::size_t p, int a, int b) {
  const Lattice<Dim>& L = f.lattice;
  auto c = L.coords(p);
  auto at = [&](int sa, int sb) {
    auto d = c;
    d[a] += sa;
    d[b] += sb;
    return f[L.index(d)];
  };
  const double h = L.h();
  if (a == b) return (-at(2, 0) + 16 * at(1, 0) - 30 * at(0, 0) + 16 * at(-1, 0) - at(-2, 0)) / (12 * h * h);
  const int w[4] = {-2, -1, 1, 2};
  const double cw[4] = {1, -8, 8, -1};
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s += cw[i] * cw[j] * at(w[i], w[j]);
  return s / (144 * h * h);
}

}  // namespace testutil

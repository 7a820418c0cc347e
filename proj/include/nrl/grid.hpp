#pragma once

// Periodic tensor grids, complex grid fields and their discrete Fourier
// transform. Nodes are z_k = -L/2 + k L / n on each axis; the flat index is
// row-major (last axis fastest). The transform is
//   uhat(zeta_m) = sum_k u(z_k) e^{-i zeta_m . z_k},  zeta_m = 2 pi m / L,
// with m in [-n/2, n/2) stored in FFT order.

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nrl {

using cplx = std::complex<double>;

struct Grid {
  std::vector<int> n;
  std::vector<double> L;
  bool time_axis = false;  // axis 0 is t (natural scaling h^2 instead of h)

  int dims() const { return static_cast<int>(n.size()); }
  std::size_t size() const;
  double spacing(int a) const { return L[a] / n[a]; }
  double coord(int a, int k) const { return -0.5 * L[a] + k * spacing(a); }
  // Signed mode number of FFT slot k.
  int mode(int a, int k) const { return k < n[a] / 2 ? k : k - n[a]; }
  double frequency(int a, int k) const;
  std::vector<int> unflatten(std::size_t flat) const;
  std::size_t flatten(const std::vector<int>& idx) const;
  std::vector<double> point(std::size_t flat) const;

  // Throws ConfigInvalid unless every n is a power of two and every L > 0.
  void validate() const;
  bool operator==(const Grid& o) const { return n == o.n && L == o.L && time_axis == o.time_axis; }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

Grid uniform_grid(int dims, int n, double L, bool time_axis = false);

// Calls f(flat, idx) for every node in flat order without per-node allocation.
template <class F>
void for_each_node(const Grid& g, F&& f) {
  std::vector<int> idx(g.n.size(), 0);
  const std::size_t total = g.size();
  for (std::size_t i = 0; i < total; ++i) {
    f(i, static_cast<const std::vector<int>&>(idx));
    for (int a = g.dims() - 1; a >= 0; --a) {
      if (++idx[a] < g.n[a]) break;
      idx[a] = 0;
    }
  }
}

struct GridField {
  Grid grid;
  std::vector<cplx> v;

  GridField() = default;
  explicit GridField(const Grid& g) : grid(g), v(g.size(), cplx(0.0, 0.0)) {}

  double l2_norm() const;  // flat sum |v|^2 times the cell volume, square-rooted
  double max_abs() const;
};

GridField sample_field(const Grid& g, const std::function<cplx(const std::vector<double>&)>& f);

std::vector<cplx> fft_forward(const Grid& g, const std::vector<cplx>& u);
std::vector<cplx> fft_inverse(const Grid& g, const std::vector<cplx>& uhat);

// In-place transform of every line along one axis of a row-major array.
void fft_axis(std::vector<cplx>& data, const std::vector<int>& shape, int axis, bool inverse);

// Fourier multiplier m(zeta) applied to u.
GridField apply_multiplier(const GridField& u, const std::function<cplx(const std::vector<double>&)>& m);
// D_a^k u = (-i d/dz_a)^k u, spectral. Odd orders drop the Nyquist mode.
GridField spectral_derivative(const GridField& u, int axis, int order);

// Fraction of the energy carried by modes with |m| > n/3 on some axis.
double top_third_energy(const Grid& g, const std::vector<cplx>& u);
bool band_limited(const GridField& u, double threshold = 1e-10);

// Binary row-major little-endian float64 pairs (re, im) plus a JSON sidecar.
void write_binary(const std::string& path, const std::vector<cplx>& data);
std::vector<cplx> read_binary(const std::string& path, std::size_t count);
nlohmann::json grid_to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);
// Writes base + ".bin" and base + ".json".
void save_field(const std::string& base, const GridField& u);
GridField load_field(const std::string& base);

}  // namespace nrl

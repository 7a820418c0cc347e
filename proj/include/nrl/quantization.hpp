#pragma once

// Left quantization on periodic grids:
//   Op(a)u(z) = (1/N) sum_zeta e^{i zeta.z} a(z, zeta) uhat(zeta).
// A natural symbol is sampled in (tau_nat, xi_nat) = (h^2 tau, h xi) and
// quantized at a given h.

#include <functional>
#include <string>
#include <vector>

#include "nrl/grid.hpp"

namespace nrl {

struct SymbolOrders {
  double m = 0.0;
  double s = 0.0;
  double l = 0.0;
  double q = 0.0;
};

// Samples a(z_i, zeta_j) on z-grid x zeta-grid. The zeta-grid is a box with
// nodes zeta_j = (j - n/2) L / n (not FFT ordered), one axis per z axis.
struct GridSymbol {
  Grid z;
  Grid zeta;
  bool natural = false;
  SymbolOrders orders;
  std::vector<cplx> a;  // index = z_flat * zeta.size() + zeta_flat

  double zeta_coord(int axis, int j) const { return (j - zeta.n[axis] / 2) * zeta.spacing(axis); }
  std::vector<double> zeta_point(std::size_t flat) const;
  cplx& at(std::size_t zi, std::size_t wi) { return a[zi * zeta.size() + wi]; }
  const cplx& at(std::size_t zi, std::size_t wi) const { return a[zi * zeta.size() + wi]; }
  std::vector<int> shape() const;  // z axes then zeta axes
};

constexpr std::size_t kMaxSymbolEntries = std::size_t(1) << 23;

// The zeta-grid whose nodes are exactly the DFT frequencies of z, in
// natural variables when natural is set.
Grid frequency_grid(const Grid& z, double h = 1.0, bool natural = false);

using SymbolFn = std::function<cplx(const std::vector<double>& z, const std::vector<double>& zeta)>;
GridSymbol sample_symbol(const Grid& z, const Grid& zeta, bool natural, const SymbolFn& f,
                         const SymbolOrders& orders = {});

// Throws GridMismatch when a DFT frequency of u is not a zeta node and
// SpectrumOverflow when u carries energy outside the zeta-grid.
GridField op_apply(const GridSymbol& a, const GridField& u, double h = 1.0);

// Derivative of a symbol in one of its variables: spectral when the symbol
// passes the periodic decay preflight along that axis, high-order finite
// differences otherwise (exact on polynomials). Throws SpectrumOverflow when
// neither is reliable.
enum class SymbolVar { Z, Zeta };
GridSymbol symbol_derivative(const GridSymbol& a, SymbolVar var, int axis, int order);

// sum_{|alpha| <= N} (1/alpha!) d_zeta^alpha a  D_z^alpha b, with the
// natural chain-rule factors h^{|alpha_x| + 2 alpha_t} for natural symbols.
GridSymbol star_truncated(const GridSymbol& a, const GridSymbol& b, int N, double h = 1.0);

// {a,b} = sum_i d_{zeta_i} a d_{z_i} b - d_{z_i} a d_{zeta_i} b in standard
// frequencies (so h-scaled for natural symbols).
GridSymbol poisson(const GridSymbol& a, const GridSymbol& b, double h = 1.0);

// b(z, tau_nat, xi_nat) = a(z, tau_nat - shift, xi_nat).
GridSymbol conjugate_translate(const GridSymbol& a, double shift, double h);

// Richardson limit h -> 0 of a family sampled at decreasing h; `order` is
// the polynomial degree in h removed. Throws ExtrapolationUnstable when the
// order and order-1 limits disagree by more than tol.
GridSymbol normal_symbol(const std::vector<GridSymbol>& family, const std::vector<double>& hs, int order = 2,
                         double tol = 1e-6);

GridSymbol symbol_linear(const GridSymbol& a, cplx ca, const GridSymbol& b, cplx cb);
double symbol_max_abs(const GridSymbol& a);

// log-log slope of |a| along the ray t * dir in zeta at z-node zi, over the
// outer half of the grid.
double fit_frequency_order(const GridSymbol& a, std::size_t zi, const std::vector<double>& dir);

struct CompositionStudy {
  std::vector<double> residual;  // ||Op(a)Op(b)u - Op(a *_N b)u|| / ||u|| for N = 0..Nmax
  double gain = 0.0;             // fitted orders of h gained per term
};
CompositionStudy composition_residuals(const GridSymbol& a, const GridSymbol& b, const GridField& u, double h,
                                       int Nmax = 3);

void save_symbol(const std::string& base, const GridSymbol& a);
GridSymbol load_symbol(const std::string& base);

}  // namespace nrl

#include "nrl/quantization.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "nrl/error.hpp"

namespace nrl {

namespace {

constexpr double kPreflight = 1e-8;

double natural_scale(const Grid& z, int axis, double h, bool natural) {
  if (!natural) return 1.0;
  return (z.time_axis && axis == 0) ? h * h : h;
}

void require_same(const GridSymbol& a, const GridSymbol& b) {
  if (a.z != b.z || a.zeta != b.zeta || a.natural != b.natural)
    throw Error(ErrorCode::GridMismatch, "symbols live on different grids");
}

GridSymbol like(const GridSymbol& a) {
  GridSymbol r;
  r.z = a.z;
  r.zeta = a.zeta;
  r.natural = a.natural;
  r.orders = a.orders;
  r.a.assign(a.a.size(), cplx(0.0, 0.0));
  return r;
}

// Fornberg's recursion: weights for the k-th derivative at x0 on nodes x.
std::vector<double> fd_weights(const std::vector<double>& x, double x0, int k) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(k + 1, 0.0));
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, k);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int m = mn; m >= 1; --m) c[i][m] = c1 * (m * c[i - 1][m - 1] - c5 * c[i - 1][m]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int m = mn; m >= 1; --m) c[j][m] = (c4 * c[j][m] - m * c[j][m - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][k];
  return w;
}

struct Lines {
  std::size_t inner = 1, outer = 1;
  int n = 0;
};

Lines lines_of(const std::vector<int>& shape, int axis) {
  Lines l;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) l.inner *= shape[a];
  for (int a = 0; a < axis; ++a) l.outer *= shape[a];
  l.n = shape[axis];
  return l;
}

double axis_top_third(const std::vector<cplx>& data, const std::vector<int>& shape, int axis) {
  std::vector<cplx> t = data;
  fft_axis(t, shape, axis, false);
  const Lines l = lines_of(shape, axis);
  double total = 0.0, top = 0.0;
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (int k = 0; k < l.n; ++k) {
      const int m = k < l.n / 2 ? k : k - l.n;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const double e = std::norm(t[(o * l.n + k) * l.inner + i]);
        total += e;
        if (3 * std::abs(m) > l.n) top += e;
      }
    }
  }
  return total > 0.0 ? top / total : 0.0;
}

std::vector<cplx> spectral_axis(const std::vector<cplx>& data, const std::vector<int>& shape, int axis, double L,
                                int order) {
  std::vector<cplx> t = data;
  fft_axis(t, shape, axis, false);
  const Lines l = lines_of(shape, axis);
  for (int k = 0; k < l.n; ++k) {
    const int m = k < l.n / 2 ? k : k - l.n;
    cplx f = std::pow(cplx(0.0, 2.0 * std::numbers::pi * m / L), order) / static_cast<double>(l.n);
    if (order % 2 == 1 && k == l.n / 2) f = 0.0;
    for (std::size_t o = 0; o < l.outer; ++o)
      for (std::size_t i = 0; i < l.inner; ++i) t[(o * l.n + k) * l.inner + i] *= f;
  }
  fft_axis(t, shape, axis, true);
  return t;
}

std::vector<cplx> fd_axis(const std::vector<cplx>& data, const std::vector<int>& shape, int axis, double dx,
                          int order, int width) {
  const Lines l = lines_of(shape, axis);
  width = std::min(width, l.n);
  std::vector<std::vector<double>> weights(l.n);
  std::vector<int> start(l.n);
  std::vector<double> nodes(width);
  for (int k = 0; k < l.n; ++k) {
    start[k] = std::clamp(k - width / 2, 0, l.n - width);
    for (int j = 0; j < width; ++j) nodes[j] = (start[k] + j - k) * 1.0;
    weights[k] = fd_weights(nodes, 0.0, order);
  }
  const double scale = std::pow(dx, -order);
  std::vector<cplx> out(data.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (int k = 0; k < l.n; ++k) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        cplx s = 0.0;
        for (int j = 0; j < width; ++j) s += weights[k][j] * data[(o * l.n + start[k] + j) * l.inner + i];
        out[(o * l.n + k) * l.inner + i] = s * scale;
      }
    }
  }
  return out;
}

// Multi-indices of total order at most N over dims axes.
void multi_indices(int dims, int N, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == dims) {
    out.push_back(cur);
    return;
  }
  int used = 0;
  for (int v : cur) used += v;
  for (int k = 0; k + used <= N; ++k) {
    cur.push_back(k);
    multi_indices(dims, N, cur, out);
    cur.pop_back();
  }
}

GridSymbol derivative_multi(const GridSymbol& a, SymbolVar var, const std::vector<int>& alpha) {
  GridSymbol r = a;
  for (std::size_t ax = 0; ax < alpha.size(); ++ax)
    if (alpha[ax] > 0) r = symbol_derivative(r, var, static_cast<int>(ax), alpha[ax]);
  return r;
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

std::vector<double> GridSymbol::zeta_point(std::size_t flat) const {
  const auto idx = zeta.unflatten(flat);
  std::vector<double> w(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) w[a] = zeta_coord(static_cast<int>(a), idx[a]);
  return w;
}

std::vector<int> GridSymbol::shape() const {
  std::vector<int> s = z.n;
  s.insert(s.end(), zeta.n.begin(), zeta.n.end());
  return s;
}

Grid frequency_grid(const Grid& z, double h, bool natural) {
  Grid g = z;
  for (int a = 0; a < z.dims(); ++a) {
    const double dz = 2.0 * std::numbers::pi / z.L[a] * natural_scale(z, a, h, natural);
    g.L[a] = dz * z.n[a];
  }
  return g;
}

GridSymbol sample_symbol(const Grid& z, const Grid& zeta, bool natural, const SymbolFn& f,
                         const SymbolOrders& orders) {
  z.validate();
  zeta.validate();
  if (z.dims() != zeta.dims()) throw Error(ErrorCode::GridMismatch, "z and zeta grids differ in dimension");
  if (z.size() * zeta.size() > kMaxSymbolEntries) throw Error(ErrorCode::ConfigInvalid, "symbol grid too large");
  GridSymbol s;
  s.z = z;
  s.zeta = zeta;
  s.natural = natural;
  s.orders = orders;
  s.a.resize(z.size() * zeta.size());
  std::vector<std::vector<double>> wpts(zeta.size());
  for (std::size_t w = 0; w < zeta.size(); ++w) wpts[w] = s.zeta_point(w);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto zp = z.point(i);
    for (std::size_t w = 0; w < zeta.size(); ++w) s.at(i, w) = f(zp, wpts[w]);
  }
  return s;
}

GridField op_apply(const GridSymbol& a, const GridField& u, double h) {
  if (a.z != u.grid) throw Error(ErrorCode::GridMismatch, "symbol and field grids differ");
  const Grid& g = u.grid;
  const int D = g.dims();
  const auto uh = fft_forward(g, u.v);
  double total = 0.0;
  for (const auto& x : uh) total += std::norm(x);

  struct Mode {
    std::size_t fft;
    std::size_t node;
    std::vector<int> slot;
  };
  std::vector<Mode> modes;
  double lost = 0.0;
  for (std::size_t i = 0; i < uh.size(); ++i) {
    const auto idx = g.unflatten(i);
    std::vector<int> node(D);
    bool inside = true;
    for (int ax = 0; ax < D; ++ax) {
      const double zeta = g.frequency(ax, idx[ax]) * natural_scale(g, ax, h, a.natural);
      const double r = zeta / a.zeta.spacing(ax) + a.zeta.n[ax] / 2;
      const double j = std::round(r);
      if (std::abs(r - j) > 1e-8) throw Error(ErrorCode::GridMismatch, "DFT frequency is not a zeta-grid node");
      if (j < 0 || j >= a.zeta.n[ax]) inside = false;
      node[ax] = static_cast<int>(j);
    }
    if (!inside) {
      lost += std::norm(uh[i]);
      continue;
    }
    if (uh[i] == cplx(0.0, 0.0)) continue;
    modes.push_back({i, a.zeta.flatten(node), idx});
  }
  if (total > 0.0 && lost > 1e-20 * total)
    throw Error(ErrorCode::SpectrumOverflow, "field spectrum exceeds the zeta-grid");

  // per-axis phase tables e^{i zeta z}
  std::vector<std::vector<cplx>> E(D);
  for (int ax = 0; ax < D; ++ax) {
    const int n = g.n[ax];
    E[ax].resize(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k)
      for (int s = 0; s < n; ++s) E[ax][k * n + s] = std::polar(1.0, g.frequency(ax, s) * g.coord(ax, k));
  }
  GridField out(g);
  const double inv = 1.0 / static_cast<double>(g.size());
  for (std::size_t zi = 0; zi < g.size(); ++zi) {
    const auto idx = g.unflatten(zi);
    cplx s = 0.0;
    for (const auto& m : modes) {
      cplx ph = 1.0;
      for (int ax = 0; ax < D; ++ax) ph *= E[ax][idx[ax] * g.n[ax] + m.slot[ax]];
      s += ph * a.at(zi, m.node) * uh[m.fft];
    }
    out.v[zi] = s * inv;
  }
  return out;
}

GridSymbol symbol_derivative(const GridSymbol& a, SymbolVar var, int axis, int order) {
  if (order == 0) return a;
  const auto shape = a.shape();
  const int arr_axis = var == SymbolVar::Z ? axis : a.z.dims() + axis;
  const Grid& g = var == SymbolVar::Z ? a.z : a.zeta;
  GridSymbol r = like(a);
  if (axis_top_third(a.a, shape, arr_axis) < kPreflight) {
    r.a = spectral_axis(a.a, shape, arr_axis, g.L[axis], order);
    return r;
  }
  const auto d8 = fd_axis(a.a, shape, arr_axis, g.spacing(axis), order, order + 8);
  const auto d6 = fd_axis(a.a, shape, arr_axis, g.spacing(axis), order, order + 6);
  double diff = 0.0, mag = 0.0;
  for (std::size_t i = 0; i < d8.size(); ++i) {
    diff = std::max(diff, std::abs(d8[i] - d6[i]));
    mag = std::max(mag, std::abs(d8[i]));
  }
  // a kink or jump shows up as an O(1) disagreement between the two stencils
  if (diff > 1e-4 * std::max(mag, 1e-300))
    throw Error(ErrorCode::SpectrumOverflow, "symbol is not smooth on the grid");
  r.a = d8;
  return r;
}

GridSymbol star_truncated(const GridSymbol& a, const GridSymbol& b, int N, double h) {
  require_same(a, b);
  if (N < 0) throw Error(ErrorCode::ConfigInvalid, "truncation order must be non-negative");
  const int D = a.z.dims();
  std::vector<std::vector<int>> alphas;
  std::vector<int> cur;
  multi_indices(D, N, cur, alphas);
  GridSymbol r = like(a);
  r.orders = {a.orders.m + b.orders.m, a.orders.s + b.orders.s, a.orders.l + b.orders.l, a.orders.q + b.orders.q};
  for (const auto& al : alphas) {
    int total = 0;
    double coef = 1.0;
    for (int ax = 0; ax < D; ++ax) {
      total += al[ax];
      coef *= std::pow(natural_scale(a.z, ax, h, a.natural), al[ax]) / factorial(al[ax]);
    }
    const cplx c = coef * std::pow(cplx(0.0, -1.0), total);
    const GridSymbol da = derivative_multi(a, SymbolVar::Zeta, al);
    const GridSymbol db = derivative_multi(b, SymbolVar::Z, al);
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += c * da.a[i] * db.a[i];
  }
  return r;
}

GridSymbol poisson(const GridSymbol& a, const GridSymbol& b, double h) {
  require_same(a, b);
  GridSymbol r = like(a);
  r.orders = {a.orders.m + b.orders.m - 1, a.orders.s + b.orders.s - 1, a.orders.l + b.orders.l,
              a.orders.q + b.orders.q};
  for (int ax = 0; ax < a.z.dims(); ++ax) {
    const double sc = natural_scale(a.z, ax, h, a.natural);
    const auto aw = symbol_derivative(a, SymbolVar::Zeta, ax, 1);
    const auto bz = symbol_derivative(b, SymbolVar::Z, ax, 1);
    const auto az = symbol_derivative(a, SymbolVar::Z, ax, 1);
    const auto bw = symbol_derivative(b, SymbolVar::Zeta, ax, 1);
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += sc * (aw.a[i] * bz.a[i] - az.a[i] * bw.a[i]);
  }
  return r;
}

GridSymbol conjugate_translate(const GridSymbol& a, double shift, double h) {
  (void)h;  // the shift is in natural units; h only fixes the operator-level identity
  if (!a.natural || !a.z.time_axis)
    throw Error(ErrorCode::ConfigInvalid, "translation needs a natural symbol with a time axis");
  if (shift == 0.0) return a;
  const auto shape = a.shape();
  const int ax = a.z.dims();  // tau_nat axis of the array
  const Lines l = lines_of(shape, ax);
  const double r = shift / a.zeta.spacing(0);
  const int k = static_cast<int>(std::ceil(std::abs(r) - 1e-9));
  if (k >= l.n) throw Error(ErrorCode::SpectrumOverflow, "shift exceeds the zeta-grid");

  // the nodes that leave the box, and those filled from outside it, must carry nothing
  const double amax = symbol_max_abs(a);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (int j = 0; j < l.n; ++j) {
      if (j >= k && j < l.n - k) continue;
      for (std::size_t i = 0; i < l.inner; ++i) {
        if (std::abs(a.a[(o * l.n + j) * l.inner + i]) > 1e-10 * amax)
          throw Error(ErrorCode::SpectrumOverflow, "shift pushes the symbol support off the grid");
      }
    }
  }
  GridSymbol b = like(a);
  const double rr = std::round(r);
  if (std::abs(r - rr) < 1e-9) {
    const int s = static_cast<int>(rr);
    for (std::size_t o = 0; o < l.outer; ++o)
      for (int j = 0; j < l.n; ++j) {
        const int src = j - s;
        if (src < 0 || src >= l.n) continue;
        for (std::size_t i = 0; i < l.inner; ++i)
          b.a[(o * l.n + j) * l.inner + i] = a.a[(o * l.n + src) * l.inner + i];
      }
    return b;
  }
  // spectral interpolation along tau_nat
  std::vector<cplx> t = a.a;
  fft_axis(t, shape, ax, false);
  const double Lz = a.zeta.L[0];
  for (int j = 0; j < l.n; ++j) {
    const int m = j < l.n / 2 ? j : j - l.n;
    cplx f = std::polar(1.0 / l.n, -2.0 * std::numbers::pi * m / Lz * shift);
    if (j == l.n / 2) f = std::cos(2.0 * std::numbers::pi * m / Lz * shift) / static_cast<double>(l.n);
    for (std::size_t o = 0; o < l.outer; ++o)
      for (std::size_t i = 0; i < l.inner; ++i) t[(o * l.n + j) * l.inner + i] *= f;
  }
  fft_axis(t, shape, ax, true);
  b.a = t;
  return b;
}

GridSymbol normal_symbol(const std::vector<GridSymbol>& family, const std::vector<double>& hs, int order,
                         double tol) {
  if (family.size() != hs.size() || family.empty())
    throw Error(ErrorCode::ConfigInvalid, "family and h list must match");
  if (order < 1 || static_cast<int>(family.size()) < order + 1)
    throw Error(ErrorCode::ExtrapolationUnstable, "need order + 1 samples for the requested order");
  for (const auto& f : family) require_same(f, family[0]);
  std::vector<std::size_t> perm(hs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) { return hs[x] < hs[y]; });

  auto limit = [&](int p) {
    // Lagrange extrapolation to h = 0 through the p + 1 smallest h
    GridSymbol r = like(family[0]);
    for (int i = 0; i <= p; ++i) {
      double w = 1.0;
      for (int j = 0; j <= p; ++j)
        if (j != i) w *= -hs[perm[j]] / (hs[perm[i]] - hs[perm[j]]);
      const auto& s = family[perm[i]];
      for (std::size_t k = 0; k < r.a.size(); ++k) r.a[k] += w * s.a[k];
    }
    return r;
  };
  GridSymbol hi = limit(order);
  const GridSymbol lo = limit(order - 1);
  double diff = 0.0;
  for (std::size_t k = 0; k < hi.a.size(); ++k) diff = std::max(diff, std::abs(hi.a[k] - lo.a[k]));
  if (diff > tol * std::max(1.0, symbol_max_abs(hi)))
    throw Error(ErrorCode::ExtrapolationUnstable, "extrapolation orders disagree by " + std::to_string(diff));
  return hi;
}

GridSymbol symbol_linear(const GridSymbol& a, cplx ca, const GridSymbol& b, cplx cb) {
  require_same(a, b);
  GridSymbol r = like(a);
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] = ca * a.a[i] + cb * b.a[i];
  return r;
}

double symbol_max_abs(const GridSymbol& a) {
  double m = 0.0;
  for (const auto& x : a.a) m = std::max(m, std::abs(x));
  return m;
}

double fit_frequency_order(const GridSymbol& a, std::size_t zi, const std::vector<double>& dir) {
  const int D = a.zeta.dims();
  double nrm = 0.0;
  for (double v : dir) nrm += v * v;
  nrm = std::sqrt(nrm);
  if (nrm == 0.0 || static_cast<int>(dir.size()) != D) throw Error(ErrorCode::FitFailure, "bad ray direction");
  // largest t keeping t*dir inside the box, one node from the edge
  double tmax = 1e300;
  for (int ax = 0; ax < D; ++ax) {
    const double u = std::abs(dir[ax] / nrm);
    if (u > 0) tmax = std::min(tmax, (a.zeta.n[ax] / 2 - 1) * a.zeta.spacing(ax) / u);
  }
  auto interp = [&](const std::vector<double>& w) {
    // multilinear interpolation of |a| between zeta nodes
    std::vector<int> base(D);
    std::vector<double> frac(D);
    for (int ax = 0; ax < D; ++ax) {
      const double r = w[ax] / a.zeta.spacing(ax) + a.zeta.n[ax] / 2;
      base[ax] = std::clamp(static_cast<int>(std::floor(r)), 0, a.zeta.n[ax] - 2);
      frac[ax] = r - base[ax];
    }
    double s = 0.0;
    for (int corner = 0; corner < (1 << D); ++corner) {
      double wgt = 1.0;
      std::vector<int> idx(D);
      for (int ax = 0; ax < D; ++ax) {
        const int bit = (corner >> ax) & 1;
        idx[ax] = base[ax] + bit;
        wgt *= bit ? frac[ax] : 1.0 - frac[ax];
      }
      s += wgt * std::abs(a.at(zi, a.zeta.flatten(idx)));
    }
    return s;
  };
  const int K = 16;
  Eigen::MatrixXd X(K, 2);
  Eigen::VectorXd Y(K);
  for (int k = 0; k < K; ++k) {
    const double t = tmax * std::pow(0.25, 1.0 - static_cast<double>(k) / (K - 1));
    std::vector<double> w(D);
    for (int ax = 0; ax < D; ++ax) w[ax] = t * dir[ax] / nrm;
    const double v = interp(w);
    if (!(v > 0.0)) throw Error(ErrorCode::FitFailure, "symbol vanishes along the ray");
    X(k, 0) = 1.0;
    X(k, 1) = std::log(t);
    Y(k) = std::log(v);
  }
  return X.colPivHouseholderQr().solve(Y)(1);
}

CompositionStudy composition_residuals(const GridSymbol& a, const GridSymbol& b, const GridField& u, double h,
                                       int Nmax) {
  if (!(h > 0.0 && h < 1.0)) throw Error(ErrorCode::ConfigInvalid, "composition study needs 0 < h < 1");
  const GridField ab = op_apply(a, op_apply(b, u, h), h);
  const double un = u.l2_norm();
  if (un == 0.0) throw Error(ErrorCode::DegenerateFamily, "zero test field");
  CompositionStudy st;
  for (int N = 0; N <= Nmax; ++N) {
    const GridField s = op_apply(star_truncated(a, b, N, h), u, h);
    GridField d(u.grid);
    for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] = ab.v[i] - s.v[i];
    st.residual.push_back(d.l2_norm() / un);
  }
  // least-squares slope of log r_N against N
  const int K = Nmax + 1;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int N = 0; N < K; ++N) {
    const double y = std::log(st.residual[N]);
    sx += N;
    sy += y;
    sxx += N * N;
    sxy += N * y;
  }
  const double slope = (K * sxy - sx * sy) / (K * sxx - sx * sx);
  st.gain = -slope / std::log(1.0 / h);
  return st;
}

void save_symbol(const std::string& base, const GridSymbol& a) {
  write_binary(base + ".bin", a.a);
  nlohmann::json side = {{"kind", "GridSymbol"},
                         {"z", grid_to_json(a.z)},
                         {"zeta", grid_to_json(a.zeta)},
                         {"natural", a.natural},
                         {"orders", {{"m", a.orders.m}, {"s", a.orders.s}, {"l", a.orders.l}, {"q", a.orders.q}}},
                         {"dtype", "complex128"},
                         {"byte_order", "little"},
                         {"layout", "row-major, z axes then zeta axes"}};
  std::ofstream os(base + ".json");
  os << side.dump(2) << "\n";
}

GridSymbol load_symbol(const std::string& base) {
  std::ifstream is(base + ".json");
  if (!is) throw Error(ErrorCode::ConfigInvalid, "cannot read " + base + ".json");
  nlohmann::json side;
  try {
    is >> side;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("symbol sidecar: ") + e.what());
  }
  if (side.value("kind", "") != "GridSymbol") throw Error(ErrorCode::ConfigInvalid, "sidecar is not a GridSymbol");
  GridSymbol s;
  s.z = grid_from_json(side.at("z"));
  s.zeta = grid_from_json(side.at("zeta"));
  s.natural = side.value("natural", false);
  const auto& o = side.at("orders");
  s.orders = {o.at("m").get<double>(), o.at("s").get<double>(), o.at("l").get<double>(), o.at("q").get<double>()};
  s.a = read_binary(base + ".bin", s.z.size() * s.zeta.size());
  return s;
}

}  // namespace nrl

#include "nrl/model_pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "nrl/error.hpp"

namespace nrl {

namespace {

constexpr cplx I(0.0, 1.0);

void require_spatial(const GridField& u, const char* who) {
  if (u.grid.time_axis) throw Error(ErrorCode::GridMismatch, std::string(who) + ": expected a spatial grid");
}

double xi2_at(const Grid& g, std::size_t flat) {
  const auto idx = g.unflatten(flat);
  double s = 0.0;
  for (int a = 0; a < g.dims(); ++a) {
    const double f = g.frequency(a, idx[a]);
    s += f * f;
  }
  return s;
}

double max_frequency(const Grid& g) {
  double m = 0.0;
  for (int a = 0; a < g.dims(); ++a) m = std::max(m, std::numbers::pi / g.spacing(a));
  return m;
}

void axpy(std::vector<cplx>& y, cplx a, const std::vector<cplx>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

std::vector<double> spacetime_point(double t, const std::vector<double>& x) {
  std::vector<double> z{t};
  z.insert(z.end(), x.begin(), x.end());
  return z;
}

GridField laplacian(const GridField& u) {
  return apply_multiplier(u, [](const std::vector<double>& zeta) {
    double s = 0.0;
    for (double z : zeta) s += z * z;
    return cplx(-s, 0.0);
  });
}

// d/dx_a with the Nyquist mode dropped, so that it is exactly skew-adjoint.
GridField partial(const GridField& u, int axis) {
  GridField d = spectral_derivative(u, axis, 1);
  for (auto& v : d.v) v *= I;
  return d;
}

std::vector<double> sorted_check(const std::vector<double>& times) {
  for (double t : times)
    if (!std::isfinite(t)) throw Error(ErrorCode::ConfigInvalid, "non-finite output time");
  return times;
}

}  // namespace

double kg_dispersion(double c, double xi2) { return c * std::sqrt(c * c + xi2); }

double kg_energy(const KGState& s) {
  require_spatial(s.u, "kg_energy");
  const Grid& g = s.u.grid;
  double vol = 1.0;
  for (int a = 0; a < g.dims(); ++a) vol *= g.spacing(a);
  const auto uh = fft_forward(g, s.u.v);
  // Parseval: sum |u|^2 = (1/N) sum |uhat|^2
  double grad = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < uh.size(); ++i) {
    grad += xi2_at(g, i) * std::norm(uh[i]);
    mass += std::norm(uh[i]);
  }
  const double N = static_cast<double>(g.size());
  double kin = 0.0;
  for (const auto& v : s.ut.v) kin += std::norm(v);
  return vol * (kin / (s.c * s.c) + grad / N + s.c * s.c * mass / N);
}

std::vector<KGState> kg_free_solve(const KGState& data, const std::vector<double>& times) {
  require_spatial(data.u, "kg_free_solve");
  if (data.u.grid != data.ut.grid) throw Error(ErrorCode::GridMismatch, "kg_free_solve: u and u_t grids differ");
  if (!band_limited(data.u) || !band_limited(data.ut))
    throw Error(ErrorCode::SpectrumOverflow, "kg_free_solve: data not band-limited");
  const Grid& g = data.u.grid;
  const auto u0 = fft_forward(g, data.u.v);
  const auto v0 = fft_forward(g, data.ut.v);
  std::vector<KGState> out;
  for (double t : sorted_check(times)) {
    const double dt = t - data.t;
    std::vector<cplx> uh(u0.size()), vh(u0.size());
    for (std::size_t i = 0; i < u0.size(); ++i) {
      const double w = kg_dispersion(data.c, xi2_at(g, i));
      const double cs = std::cos(w * dt), sn = std::sin(w * dt);
      uh[i] = cs * u0[i] + (sn / w) * v0[i];
      vh[i] = -w * sn * u0[i] + cs * v0[i];
    }
    KGState s{GridField(g), GridField(g), t, data.c};
    s.u.v = fft_inverse(g, uh);
    s.ut.v = fft_inverse(g, vh);
    out.push_back(std::move(s));
  }
  return out;
}

KGState kg_branch_data(const GridField& v0, double c, SignBranch b, double t0) {
  require_spatial(v0, "kg_branch_data");
  const double sg = branch_sign(b);
  // envelope v = e^{-sg i c^2 t} u, so u(t0) = e^{sg i c^2 t0} v0
  const cplx ph = std::exp(I * (sg * c * c * t0));
  KGState s{GridField(v0.grid), GridField(v0.grid), t0, c};
  for (std::size_t i = 0; i < v0.v.size(); ++i) s.u.v[i] = ph * v0.v[i];
  s.ut = apply_multiplier(s.u, [&](const std::vector<double>& zeta) {
    double x2 = 0.0;
    for (double z : zeta) x2 += z * z;
    return I * (sg * kg_dispersion(c, x2));
  });
  return s;
}

std::vector<GridField> kg_envelopes(const std::vector<KGState>& run, SignBranch b) {
  std::vector<GridField> out;
  const double sg = branch_sign(b);
  for (const auto& s : run) {
    GridField v(s.u.grid);
    const cplx ph = std::exp(-I * (sg * s.c * s.c * s.t));
    for (std::size_t i = 0; i < v.v.size(); ++i) v.v[i] = ph * s.u.v[i];
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<GridField> kg_alpha_envelope(const GridField& v0, const ClassicalSymbolProfile& alpha, double c,
                                         SignBranch b, const std::vector<double>& times, double dt_scale) {
  require_spatial(v0, "kg_alpha_envelope");
  if (!band_limited(v0)) throw Error(ErrorCode::SpectrumOverflow, "kg_alpha_envelope: data not band-limited");
  const Grid& g = v0.grid;
  const std::size_t n = g.size();
  const double sg = branch_sign(b);
  const double c2 = c * c;
  std::vector<std::vector<double>> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = g.point(i);
  auto alpha_at = [&](double t) {
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = alpha.value(spacetime_point(t, xs[i]));
    return a;
  };

  // u = e^{sg i c^2 t} v:  v_t = w,  w_t = -2 sg i c^2 w + (c^2 - alpha) Lap v + alpha c^2 v
  auto rhs = [&](double t, const GridField& v, const GridField& w, GridField& dv, GridField& dw) {
    const auto a = alpha_at(t);
    const GridField lv = laplacian(v);
    dv = w;
    dw = GridField(g);
    for (std::size_t i = 0; i < n; ++i)
      dw.v[i] = -2.0 * sg * I * c2 * w.v[i] + (c2 - a[i]) * lv.v[i] + a[i] * c2 * v.v[i];
  };

  GridField v = v0;
  // slow-manifold start: w = -sg i (omega - c^2) v + sg (i/2) alpha v
  GridField w = apply_multiplier(v0, [&](const std::vector<double>& zeta) {
    double x2 = 0.0;
    for (double z : zeta) x2 += z * z;
    return -sg * I * (kg_dispersion(c, x2) - c2);
  });
  {
    const auto a = alpha_at(0.0);
    for (std::size_t i = 0; i < n; ++i) w.v[i] += sg * 0.5 * I * a[i] * v0.v[i];
  }

  const double h_max = dt_scale / c2;
  double t = 0.0;
  std::vector<GridField> out;
  for (double target : sorted_check(times)) {
    const double span = target - t;
    const int steps = static_cast<int>(std::ceil(std::abs(span) / h_max - 1e-12));
    const double h = steps > 0 ? span / steps : 0.0;
    for (int s = 0; s < steps; ++s) {
      GridField k1v, k1w, k2v, k2w, k3v, k3w, k4v, k4w, tv(g), tw(g);
      rhs(t, v, w, k1v, k1w);
      for (std::size_t i = 0; i < n; ++i) {
        tv.v[i] = v.v[i] + 0.5 * h * k1v.v[i];
        tw.v[i] = w.v[i] + 0.5 * h * k1w.v[i];
      }
      rhs(t + 0.5 * h, tv, tw, k2v, k2w);
      for (std::size_t i = 0; i < n; ++i) {
        tv.v[i] = v.v[i] + 0.5 * h * k2v.v[i];
        tw.v[i] = w.v[i] + 0.5 * h * k2w.v[i];
      }
      rhs(t + 0.5 * h, tv, tw, k3v, k3w);
      for (std::size_t i = 0; i < n; ++i) {
        tv.v[i] = v.v[i] + h * k3v.v[i];
        tw.v[i] = w.v[i] + h * k3w.v[i];
      }
      rhs(t + h, tv, tw, k4v, k4w);
      for (std::size_t i = 0; i < n; ++i) {
        v.v[i] += h / 6.0 * (k1v.v[i] + 2.0 * k2v.v[i] + 2.0 * k3v.v[i] + k4v.v[i]);
        w.v[i] += h / 6.0 * (k1w.v[i] + 2.0 * k2w.v[i] + 2.0 * k3w.v[i] + k4w.v[i]);
      }
      t += h;
    }
    t = target;
    out.push_back(v);
  }
  return out;
}

SchrCoefficients normal_coefficients(const MetricParams& M, SignBranch b, bool include_aleph) {
  M.validate();
  SchrCoefficients cf;
  const double sg = branch_sign(b);
  const bool free_metric = M.metric_is_free();
  auto is_zero = [](const ComplexProfile& p) { return p.re.is_zero() && p.im.is_zero(); };
  const bool has_v = !is_zero(M.W) || !is_zero(M.beta) || (include_aleph && !free_metric);
  if (has_v) {
    cf.V = [M, sg, include_aleph, free_metric](const std::vector<double>& z) {
      cplx v = M.W.value(z) - sg * M.beta.value(z);
      if (include_aleph && !free_metric) v -= aleph(M, z);
      return v;
    };
  }
  bool any_b = false;
  for (const auto& p : M.B) any_b = any_b || !is_zero(p);
  if (any_b) {
    for (const auto& p : M.B) cf.B.push_back([p](const std::vector<double>& z) { return p.value(z); });
  }
  return cf;
}

std::vector<SchrState> schrodinger_solve(const SchrState& data, const SchrCoefficients& coef, SignBranch b,
                                         const std::vector<double>& times, const SchrOptions& opt) {
  require_spatial(data.v, "schrodinger_solve");
  if (!band_limited(data.v)) throw Error(ErrorCode::SpectrumOverflow, "schrodinger_solve: data not band-limited");
  const Grid& g = data.v.grid;
  const int d = g.dims();
  if (!coef.B.empty() && static_cast<int>(coef.B.size()) != d)
    throw Error(ErrorCode::GridMismatch, "schrodinger_solve: B has the wrong number of components");
  if (!(opt.dt > 0.0)) throw Error(ErrorCode::ConfigInvalid, "schrodinger_solve: dt must be positive");
  const std::size_t n = g.size();
  const double s = branch_sign(b) > 0 ? -1.0 : 1.0;  // +1 on Minus
  std::vector<double> xi2(n);
  for (std::size_t i = 0; i < n; ++i) xi2[i] = xi2_at(g, i);
  std::vector<std::vector<double>> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = g.point(i);

  auto kinetic = [&](std::vector<cplx>& v, double tau) {
    auto vh = fft_forward(g, v);
    for (std::size_t i = 0; i < n; ++i) vh[i] *= std::exp(-s * I * (0.5 * xi2[i] * tau));
    v = fft_inverse(g, vh);
  };
  auto potential = [&](std::vector<cplx>& v, double t, double tau) {
    for (std::size_t i = 0; i < n; ++i) v[i] *= std::exp(s * I * (0.5 * tau) * coef.V(spacetime_point(t, xs[i])));
  };
  const double xi_max = max_frequency(g);
  auto drift = [&](std::vector<cplx>& v, double t, double tau) {
    // v_t = -(s/2) B.grad v with B frozen at t, one RK4 step
    std::vector<std::vector<cplx>> B(d, std::vector<cplx>(n));
    double bmax = 0.0;
    for (int a = 0; a < d; ++a)
      for (std::size_t i = 0; i < n; ++i) {
        B[a][i] = coef.B[a](spacetime_point(t, xs[i]));
        bmax = std::max(bmax, std::abs(B[a][i]));
      }
    if (std::abs(tau) * bmax * xi_max * 0.5 * std::sqrt(static_cast<double>(d)) > 2.8)
      throw Error(ErrorCode::StepFailure, "drift step exceeds the RK4 stability bound; reduce dt");
    auto f = [&](const std::vector<cplx>& u) {
      GridField uf(g);
      uf.v = u;
      std::vector<cplx> r(n, 0.0);
      for (int a = 0; a < d; ++a) {
        const GridField du = partial(uf, a);
        for (std::size_t i = 0; i < n; ++i) r[i] -= 0.5 * s * B[a][i] * du.v[i];
      }
      return r;
    };
    const auto k1 = f(v);
    std::vector<cplx> tmp = v;
    axpy(tmp, 0.5 * tau, k1);
    const auto k2 = f(tmp);
    tmp = v;
    axpy(tmp, 0.5 * tau, k2);
    const auto k3 = f(tmp);
    tmp = v;
    axpy(tmp, tau, k3);
    const auto k4 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) v[i] += tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  };

  std::vector<SchrState> out;
  std::vector<cplx> v = data.v.v;
  double t = data.t;
  for (double target : sorted_check(times)) {
    const double span = target - t;
    if (coef.is_free()) {
      if (span != 0.0) kinetic(v, span);
    } else {
      const int steps = static_cast<int>(std::ceil(std::abs(span) / opt.dt - 1e-12));
      const double h = steps > 0 ? span / steps : 0.0;
      for (int k = 0; k < steps; ++k) {
        const double tm = t + 0.5 * h;
        kinetic(v, 0.5 * h);
        if (coef.V) potential(v, tm, 0.5 * h);
        if (!coef.B.empty()) drift(v, tm, h);
        if (coef.V) potential(v, tm, 0.5 * h);
        kinetic(v, 0.5 * h);
        t += h;
      }
    }
    t = target;
    SchrState st{GridField(g), t};
    st.v.v = v;
    out.push_back(std::move(st));
  }
  return out;
}

CompareResult conjugate_compare(const std::vector<GridField>& envelopes, const std::vector<SchrState>& schr,
                                const std::vector<double>& times) {
  if (envelopes.size() != schr.size() || schr.size() != times.size())
    throw Error(ErrorCode::GridMismatch, "conjugate_compare: run lengths differ");
  CompareResult r;
  if (times.empty()) return r;
  const double n0 = schr.front().v.l2_norm();
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (envelopes[k].grid != schr[k].v.grid) throw Error(ErrorCode::GridMismatch, "conjugate_compare: grids differ");
    if (std::abs(schr[k].t - times[k]) > 1e-12 * std::max(1.0, std::abs(times[k])))
      throw Error(ErrorCode::GridMismatch, "conjugate_compare: time lists differ");
    GridField diff(envelopes[k].grid);
    for (std::size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = envelopes[k].v[i] - schr[k].v.v[i];
    const double e = n0 > 0.0 ? diff.l2_norm() / n0 : diff.l2_norm();
    r.times.push_back(times[k]);
    r.error.push_back(e);
    r.sup_error = std::max(r.sup_error, e);
  }
  return r;
}

std::vector<ConvergenceRow> nonrelativistic_convergence(const GridField& v0, const MetricParams& M,
                                                        const std::vector<double>& cs,
                                                        const ConvergenceOptions& opt) {
  M.validate();
  for (int j = 0; j < M.d; ++j) {
    bool extra = !M.w[j].is_zero();
    for (int k = 0; k < M.d; ++k) extra = extra || !M.hjk[j][k].is_zero();
    if (extra) throw Error(ErrorCode::ConfigInvalid, "convergence study supports the alpha coefficient only");
  }
  if (v0.grid.dims() != M.d) throw Error(ErrorCode::GridMismatch, "data grid dimension differs from the metric");
  std::vector<double> times;
  const int ns = std::max(opt.samples, 2);
  for (int k = 0; k < ns; ++k) times.push_back(opt.T * k / (ns - 1));

  const auto coef = normal_coefficients(M, opt.schr_branch, opt.include_aleph);
  SchrOptions so;
  so.dt = opt.schr_dt;
  const auto schr = schrodinger_solve(SchrState{v0, 0.0}, coef, opt.schr_branch, times, so);

  std::vector<ConvergenceRow> rows(cs.size());
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const double c = cs[k];
    std::vector<GridField> env;
    if (M.alpha.is_zero()) {
      env = kg_envelopes(kg_free_solve(kg_branch_data(v0, c, opt.kg_branch), times), opt.kg_branch);
    } else {
      env = kg_alpha_envelope(v0, M.alpha, c, opt.kg_branch, times);
    }
    rows[k].c = c;
    rows[k].error = conjugate_compare(env, schr, times).sup_error;
  }
  for (std::size_t k = 1; k < rows.size(); ++k)
    rows[k].ratio = rows[k].error > 0.0 ? rows[k - 1].error / rows[k].error : 0.0;
  return rows;
}

GridField band_limited_data(const Grid& g, double K, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<cplx> uh(g.size(), 0.0);
  for (std::size_t i = 0; i < uh.size(); ++i) {
    const double x2 = xi2_at(g, i);
    const double re = nd(rng), im = nd(rng);
    if (x2 > K * K) continue;
    const double taper = (1.0 - x2 / (K * K));
    uh[i] = cplx(re, im) * taper * taper;
  }
  GridField u(g);
  u.v = fft_inverse(g, uh);
  const double nrm = u.l2_norm();
  if (nrm > 0.0)
    for (auto& x : u.v) x /= nrm;
  return u;
}

// ---------------------------------------------------------------------------
// conjugated operator on spacetime grids

namespace {

struct OperatorCoefficients {
  int n = 0;                              // 1 + d
  std::vector<std::vector<cplx>> G;      // n*n second-order fields
  std::vector<std::vector<cplx>> F;      // n first-order fields
  std::vector<cplx> Z;                    // zeroth order
};

OperatorCoefficients assemble(const MetricParams& M, double c, const Grid& g) {
  if (g.dims() != M.d + 1) throw Error(ErrorCode::GridMismatch, "spacetime grid must have 1 + d axes");
  const int n = M.d + 1;
  const std::size_t N = g.size();
  OperatorCoefficients oc;
  oc.n = n;
  oc.G.assign(n * n, std::vector<cplx>(N));
  oc.F.assign(n, std::vector<cplx>(N));
  oc.Z.assign(N, 0.0);
  const bool flat = M.metric_is_free();
  auto logdet = [&](const std::vector<double>& z) { return 0.5 * std::log(std::abs(metric_matrix(M, z, c).determinant())); };
  const double e = 1e-3;
  const Eigen::MatrixXd G0 = inverse_metric(M, std::vector<double>(n, 0.0), c);
  std::vector<double> z(n);
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    for (int a = 0; a < n; ++a) z[a] = g.coord(a, idx[a]);
    const Eigen::MatrixXd Gi = flat ? G0 : inverse_metric(M, z, c);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) oc.G[a * n + b][i] = Gi(a, b);
    std::vector<cplx> first(n, 0.0);
    if (!flat) {
      // box_g = g^{ab} d_a d_b + (d_a g^{ab} + g^{ab} d_a log sqrt|g|) d_b
      for (int a = 0; a < n; ++a) {
        auto zp = z, zm = z, zp2 = z, zm2 = z;
        zp[a] += e;
        zm[a] -= e;
        zp2[a] += 2 * e;
        zm2[a] -= 2 * e;
        const Eigen::MatrixXd dG = (8.0 * (inverse_metric(M, zp, c) - inverse_metric(M, zm, c)) -
                                    (inverse_metric(M, zp2, c) - inverse_metric(M, zm2, c))) /
                                   (12.0 * e);
        const double dl = (8.0 * (logdet(zp) - logdet(zm)) - (logdet(zp2) - logdet(zm2))) / (12.0 * e);
        for (int b = 0; b < n; ++b) first[b] += dG(a, b) + Gi(a, b) * dl;
      }
    }
    first[0] += I * M.beta.value(z) / (c * c);
    for (int j = 1; j < n; ++j) first[j] += I * M.B[j - 1].value(z);
    for (int b = 0; b < n; ++b) oc.F[b][i] = first[b];
    oc.Z[i] = M.W.value(z) - c * c;
  });
  auto zero = [](const std::vector<cplx>& f) {
    return std::all_of(f.begin(), f.end(), [](cplx x) { return x == cplx(0.0); });
  };
  for (auto& f : oc.G)
    if (zero(f)) f.clear();
  for (auto& f : oc.F)
    if (zero(f)) f.clear();
  return oc;
}

// D_0 = d_t + i sg c^2, D_j = d_j: the conjugated derivatives. Each is skew-adjoint.
GridField Dop(const GridField& u, int axis, double shift) {
  GridField d = partial(u, axis);
  if (axis == 0 && shift != 0.0)
    for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] += I * shift * u.v[i];
  return d;
}

GridField mul(const std::vector<cplx>& a, const GridField& u, bool conj) {
  GridField r(u.grid);
  for (std::size_t i = 0; i < u.v.size(); ++i) r.v[i] = (conj ? std::conj(a[i]) : a[i]) * u.v[i];
  return r;
}

GridField apply_assembled(const OperatorCoefficients& oc, double shift, const GridField& v, bool adjoint) {
  const int n = oc.n;
  GridField out = mul(oc.Z, v, adjoint);
  if (!adjoint) {
    std::vector<GridField> Dv(n);
    for (int b = 0; b < n; ++b) Dv[b] = Dop(v, b, shift);
    for (int b = 0; b < n; ++b) {
      if (!oc.F[b].empty()) axpy(out.v, 1.0, mul(oc.F[b], Dv[b], false).v);
      for (int a = 0; a < n; ++a)
        if (!oc.G[a * n + b].empty()) axpy(out.v, 1.0, mul(oc.G[a * n + b], Dop(Dv[b], a, shift), false).v);
    }
  } else {
    // (g D_a D_b)^* = D_b D_a g-bar,  (f D_b)^* = -D_b f-bar
    for (int b = 0; b < n; ++b) {
      if (!oc.F[b].empty()) axpy(out.v, -1.0, Dop(mul(oc.F[b], v, true), b, shift).v);
      for (int a = 0; a < n; ++a)
        if (!oc.G[a * n + b].empty())
          axpy(out.v, 1.0, Dop(Dop(mul(oc.G[a * n + b], v, true), a, shift), b, shift).v);
    }
  }
  return out;
}

}  // namespace

GridField apply_conjugated(const MetricParams& M, double c, SignBranch b, const GridField& v) {
  return apply_assembled(assemble(M, c, v.grid), branch_sign(b) * c * c, v, false);
}

GridField apply_kg_operator(const MetricParams& M, double c, const GridField& v) {
  return apply_assembled(assemble(M, c, v.grid), 0.0, v, false);
}

GridField apply_conjugated_adjoint(const MetricParams& M, double c, SignBranch b, const GridField& v) {
  return apply_assembled(assemble(M, c, v.grid), branch_sign(b) * c * c, v, true);
}

DefectReport symmetry_defect(const MetricParams& M, double c, SignBranch b, const Grid& st) {
  M.validate();
  const auto oc = assemble(M, c, st);
  const double shift = branch_sign(b) * c * c;
  const int n = st.dims();
  const std::size_t N = st.size();

  // multi-indices of order <= 2 in the plain derivatives d^alpha
  std::vector<std::vector<int>> alphas{{}};
  for (int a = 0; a < n; ++a) alphas.push_back({a});
  for (int a = 0; a < n; ++a)
    for (int bb = a; bb < n; ++bb) alphas.push_back({a, bb});
  const int K = static_cast<int>(alphas.size());

  // flat-top bump; probes are the degree <= 2 monomials in z / ell times the bump
  double half = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) half = std::min(half, 0.5 * st.L[a]);
  const double R = 0.62 * half, ell = half;
  auto bump = [&](const std::vector<double>& z) {
    double s = 0.0;
    for (double v : z) s += std::pow(v / R, 8);
    return std::exp(-s);
  };
  std::vector<GridField> probes;
  for (const auto& al : alphas) {
    probes.push_back(sample_field(st, [&](const std::vector<double>& z) {
      double p = 1.0;
      for (int a : al) p *= z[a] / ell;
      return cplx(p * bump(z), 0.0);
    }));
  }
  auto dalpha = [&](const GridField& u, const std::vector<int>& al) {
    GridField r = u;
    for (int a : al) r = partial(r, a);
    return r;
  };
  std::vector<std::vector<GridField>> Dphi(K);
  std::vector<GridField> rhs(K);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < K; ++j) Dphi[k].push_back(dalpha(probes[k], alphas[j]));
    const GridField Pp = apply_assembled(oc, shift, probes[k], false);
    const GridField Pa = apply_assembled(oc, shift, probes[k], true);
    rhs[k] = GridField(st);
    for (std::size_t i = 0; i < N; ++i) rhs[k].v[i] = (Pp.v[i] - Pa.v[i]) / (2.0 * I);
  }

  DefectReport rep;
  auto label = [&](const std::vector<int>& al) {
    if (al.empty()) return std::string("1");
    std::string s;
    for (int a : al) s += (s.empty() ? "" : " ") + (a == 0 ? std::string("d_t") : "d_x" + std::to_string(a));
    return s;
  };
  for (const auto& al : alphas) {
    rep.labels.push_back(label(al));
    rep.coefficients.emplace_back(st);
  }
  std::vector<char> usable(N, 0);
  Eigen::MatrixXcd A(K, K);
  Eigen::VectorXcd r(K);
  for (std::size_t i = 0; i < N; ++i) {
    const auto z = st.point(i);
    if (bump(z) < 0.5) continue;
    usable[i] = 1;
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < K; ++j) A(k, j) = Dphi[k][j].v[i] * std::pow(ell, alphas[j].size());
      r(k) = rhs[k].v[i];
    }
    const Eigen::VectorXcd sol = A.partialPivLu().solve(r);
    for (int j = 0; j < K; ++j) rep.coefficients[j].v[i] = sol(j) * std::pow(ell, alphas[j].size());
  }

  // decay fit over shells of <z> inside the usable region
  double rmax = R * std::pow(std::log(2.0), 1.0 / 8.0);
  const double rmin = 3.0;
  if (rmax < 4.0 * rmin) throw Error(ErrorCode::FitFailure, "spacetime box too small for a decay fit");
  rep.fit_radius_min = rmin;
  rep.fit_radius_max = rmax;
  const int shells = 8;
  const double q = std::pow(rmax / rmin, 1.0 / shells);
  for (int j = 0; j < K; ++j) {
    std::vector<double> smax(shells, 0.0);
    double m = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (!usable[i]) continue;
      const double a = std::abs(rep.coefficients[j].v[i]);
      m = std::max(m, a);
      const auto z = st.point(i);
      double n2 = 1.0;
      for (double v : z) n2 += v * v;
      const double br = std::sqrt(n2);
      if (br < rmin || br >= rmax) continue;
      const int s = std::min(shells - 1, static_cast<int>(std::log(br / rmin) / std::log(q)));
      smax[s] = std::max(smax[s], a);
    }
    rep.max_abs.push_back(m);
    if (m <= 1e-10) {
      rep.fitted_order.push_back(-std::numeric_limits<double>::infinity());
      continue;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int s = 0; s < shells; ++s) {
      if (smax[s] <= 0.0) continue;
      const double x = std::log(rmin * std::pow(q, s + 0.5)), y = std::log(smax[s]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++cnt;
    }
    if (cnt < 3) throw Error(ErrorCode::FitFailure, "too few shells for the decay fit");
    rep.fitted_order.push_back((cnt * sxy - sx * sy) / (cnt * sxx - sx * sx));
  }
  return rep;
}

// ---------------------------------------------------------------------------

double mass(const GridField& v) {
  const double n = v.l2_norm();
  return n * n;
}

MassTrace mass_trace(const std::vector<SchrState>& run, double C_claim) {
  MassTrace tr;
  const std::size_t n = run.size();
  for (const auto& s : run) {
    tr.times.push_back(s.t);
    tr.M.push_back(mass(s.v));
  }
  tr.dM.assign(n, 0.0);
  if (n >= 3) {
    for (std::size_t k = 1; k + 1 < n; ++k)
      tr.dM[k] = (tr.M[k + 1] - tr.M[k - 1]) / (tr.times[k + 1] - tr.times[k - 1]);
    // second-order one-sided ends (uniform spacing assumed there)
    const double h0 = tr.times[1] - tr.times[0], h1 = tr.times[n - 1] - tr.times[n - 2];
    tr.dM[0] = (-3.0 * tr.M[0] + 4.0 * tr.M[1] - tr.M[2]) / (2.0 * h0);
    tr.dM[n - 1] = (3.0 * tr.M[n - 1] - 4.0 * tr.M[n - 2] + tr.M[n - 3]) / (2.0 * h1);
  } else if (n == 2) {
    tr.dM[0] = tr.dM[1] = (tr.M[1] - tr.M[0]) / (tr.times[1] - tr.times[0]);
  }
  for (std::size_t k = 0; k < n; ++k)
    tr.bound_rhs.push_back(C_claim * tr.M[k] / (1.0 + tr.times[k] * tr.times[k]));

  // 1e-8 M is the noise floor of the centered differences on a conserved trace
  for (std::size_t k = 0; k < n && tr.passed; ++k) {
    if (!(tr.M[k] > 0.0)) {
      tr.passed = false;
      tr.first_violation = tr.times[k];
      tr.violation = "mass is not positive";
    } else if (std::abs(tr.dM[k]) > tr.bound_rhs[k] + 1e-8 * tr.M[k]) {
      tr.passed = false;
      tr.first_violation = tr.times[k];
      tr.violation = "|dM/dt| exceeds C <t>^-2 M";
    }
  }
  const double env = std::exp(C_claim * std::numbers::pi) * (1.0 + 1e-8);
  double run_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n && tr.passed; ++k) {
    run_min = std::min(run_min, tr.M[k]);
    if (tr.M[k] > env * run_min) {
      tr.passed = false;
      tr.first_violation = tr.times[k];
      tr.violation = "Gronwall envelope exceeded";
    }
  }
  return tr;
}

MassTrace mass_bound_check(const std::vector<SchrState>& run, double C_claim) {
  MassTrace tr = mass_trace(run, C_claim);
  if (!tr.passed)
    throw Error(ErrorCode::BoundViolated, tr.violation + " at t = " + std::to_string(tr.first_violation));
  return tr;
}

GridField scattering_profile(const SchrState& s, SignBranch b, const Grid& Xg) {
  const Grid& g = s.v.grid;
  require_spatial(s.v, "scattering_profile");
  if (Xg.dims() != g.dims()) throw Error(ErrorCode::GridMismatch, "X-grid dimension differs from the solution grid");
  if (std::abs(s.t) < 1.0) throw Error(ErrorCode::ConfigInvalid, "scattering_profile needs |t| >= 1");
  const int d = g.dims();
  for (int a = 0; a < d; ++a) {
    if (std::abs(s.t) * 0.5 * Xg.L[a] > 0.5 * g.L[a])
      throw Error(ErrorCode::ResampleOverflow, "t X leaves the spatial box; enlarge the box");
  }
  // trigonometric interpolation v(x) = (1/n) sum vhat_m e^{i zeta_m x}, axis by axis,
  // with the Nyquist mode split evenly between +-n/2
  std::vector<cplx> data = fft_forward(g, s.v.v);
  std::vector<int> shape = g.n;
  for (int a = 0; a < d; ++a) {
    const int n = g.n[a], m = Xg.n[a];
    std::vector<cplx> E(static_cast<std::size_t>(m) * n);
    for (int j = 0; j < m; ++j) {
      const double x = s.t * Xg.coord(a, j);
      for (int k = 0; k < n; ++k) {
        const double f = g.frequency(a, k);
        cplx e = std::exp(I * (f * x));
        if (k == n / 2) e = std::cos(f * x);
        E[static_cast<std::size_t>(j) * n + k] = e / static_cast<double>(n);
      }
    }
    std::size_t inner = 1, outer = 1;
    for (int b2 = a + 1; b2 < d; ++b2) inner *= shape[b2];
    for (int b2 = 0; b2 < a; ++b2) outer *= shape[b2];
    std::vector<cplx> next(outer * m * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < n; ++k) {
          const cplx e = E[static_cast<std::size_t>(j) * n + k];
          const cplx* src = &data[(o * n + k) * inner];
          cplx* dst = &next[(o * m + j) * inner];
          for (std::size_t q = 0; q < inner; ++q) dst[q] += e * src[q];
        }
    data = std::move(next);
    shape[a] = m;
  }
  GridField out(Xg);
  const cplx pre = std::pow(std::sqrt(2.0 * std::numbers::pi * I * s.t), d);
  const bool plus = b == SignBranch::Plus;
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    const auto X = Xg.point(i);
    double X2 = 0.0;
    for (double x : X) X2 += x * x;
    const cplx f = pre * std::exp(-I * (0.5 * s.t * X2));
    out.v[i] = (plus ? std::conj(f) : f) * data[i];
  }
  return out;
}

}  // namespace nrl

#include "nrl/ham_flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "nrl/error.hpp"

namespace nrl {

namespace {

constexpr double kBfRho = 1e-14;  // below this the base point is treated as on bf

int sgn(double v) { return v < 0.0 ? -1 : 1; }

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return s;
}

// Symbol data at a base point: K(z, h) and the z-gradients of P.
struct MetricAt {
  Eigen::MatrixXd K;
  bool has_grad = false;
  std::vector<double> galpha;
  std::vector<std::vector<double>> gw;
  std::vector<std::vector<std::vector<double>>> gh;

  // w^T (d_i P) w
  double G(int i, const Eigen::VectorXd& w) const {
    if (!has_grad) return 0.0;
    const int d = static_cast<int>(gw.size());
    double v = w(0) * w(0) * galpha[i];
    for (int j = 0; j < d; ++j) {
      v += w(0) * w(j + 1) * gw[j][i];
      for (int k = 0; k < d; ++k) v += w(j + 1) * w(k + 1) * gh[j][k][i];
    }
    return v;
  }
};

MetricAt metric_at(const MetricParams& M, const std::vector<double>& z, double h) {
  MetricAt m;
  if (z.empty() || h == 0.0 || M.metric_is_free()) {
    m.K = scaled_inverse_metric_at_infinity(M.d);
    return m;
  }
  m.K = scaled_inverse_metric(M, z, h);
  m.has_grad = true;
  m.galpha = M.alpha.gradient(z);
  m.gw.resize(static_cast<std::size_t>(M.d));
  m.gh.assign(static_cast<std::size_t>(M.d), std::vector<std::vector<double>>(static_cast<std::size_t>(M.d)));
  for (int j = 0; j < M.d; ++j) {
    m.gw[j] = M.w[j].gradient(z);
    for (int k = 0; k < M.d; ++k) m.gh[j][k] = M.hjk[j][k].gradient(z);
  }
  return m;
}

// Unshifted projective data of a base chart: z = D / rho with D_axis = sign.
struct Homog {
  std::vector<double> D;
  double rho = 1.0;
};

Homog homogeneous(const ChartCoords& cc) {
  Homog hg;
  const int n = cc.d + 1;
  hg.D.assign(static_cast<std::size_t>(n), 0.0);
  if (cc.base.kind == BaseKind::Interior) {
    for (int i = 0; i < n; ++i) hg.D[i] = cc.coords[i];
    hg.rho = 1.0;
    return hg;
  }
  hg.rho = cc.coords[0];
  const int a = cc.base.axis;
  const double s = cc.base.sign;
  hg.D[a] = s;
  int m = 0;
  for (int j = 0; j < n; ++j) {
    if (j == a) continue;
    double y = cc.coords[1 + m];
    if (cc.base.kind == BaseKind::Radial) y += cc.base.shift[m];
    hg.D[j] = s * y;
    ++m;
  }
  return hg;
}

std::vector<double> base_point_of(const ChartCoords& cc) {
  if (cc.base.kind == BaseKind::Interior)
    return std::vector<double>(cc.coords.begin(), cc.coords.begin() + cc.d + 1);
  const Homog hg = homogeneous(cc);
  if (hg.rho < kBfRho) return {};
  std::vector<double> z(hg.D);
  for (double& v : z) v /= hg.rho;
  return z;
}

std::vector<double> fiber_of(const ChartCoords& cc) {
  return std::vector<double>(cc.coords.begin() + cc.base_size(), cc.coords.end());
}

// Field normalized only in the fiber: zdot is the base velocity, fdot the
// fiber-coordinate rates.
void fiber_field(const ChartCoords& cc, const std::vector<double>& z, const MetricParams& M, SignBranch b,
                 std::vector<double>& zdot, std::vector<double>& fdot) {
  const int d = cc.d;
  const int n = d + 1;
  const double pm = branch_sign(b);
  const int sg = cc.chart.sign;
  const double h = chart_h(cc);
  const MetricAt m = metric_at(M, z, h);
  zdot.assign(static_cast<std::size_t>(n), 0.0);
  fdot.assign(static_cast<std::size_t>(d + 2), 0.0);
  Eigen::VectorXd v(n);
  switch (cc.chart.tag) {
    case ChartTag::NatInterior: {
      for (int i = 0; i < n; ++i) v(i) = cc.fiber(i);
      const Eigen::VectorXd u = m.K * v;
      zdot[0] = h * (pm - u(0));
      for (int j = 0; j < d; ++j) zdot[j + 1] = -u(j + 1);
      if (m.has_grad) {
        fdot[0] = -0.5 * h * h * h * m.G(0, u);
        for (int j = 0; j < d; ++j) fdot[1 + j] = -0.5 * h * h * m.G(j + 1, u);
      }
      break;
    }
    case ChartTag::DfProjective: {
      const double rho = cc.fiber(0);
      v(0) = sg;
      for (int j = 0; j < d; ++j) v(j + 1) = cc.fiber(1 + j);
      const Eigen::VectorXd u = m.K * v;
      zdot[0] = h * (pm * rho - u(0));
      for (int j = 0; j < d; ++j) zdot[j + 1] = -u(j + 1);
      if (m.has_grad) {
        const double g0 = 0.5 * sg * h * h * h * m.G(0, u);
        fdot[0] = g0 * rho;
        for (int j = 0; j < d; ++j) fdot[1 + j] = g0 * cc.fiber(1 + j) - 0.5 * h * h * m.G(j + 1, u);
      }
      break;
    }
    case ChartTag::PfStandard: {
      v(0) = h * cc.fiber(0);
      for (int j = 0; j < d; ++j) v(j + 1) = cc.fiber(1 + j);
      const Eigen::VectorXd w = m.K * v;
      zdot[0] = pm - h * w(0);
      for (int j = 0; j < d; ++j) zdot[j + 1] = -w(j + 1);
      if (m.has_grad) {
        fdot[0] = -0.5 * h * h * m.G(0, w);
        for (int j = 0; j < d; ++j) fdot[1 + j] = -0.5 * h * h * m.G(j + 1, w);
      }
      break;
    }
    case ChartTag::PfNatParabolic: {
      const double rnf = cc.fiber(0);
      const double rpf = cc.fiber(d + 1);
      v(0) = sg * rpf;
      for (int j = 0; j < d; ++j) v(j + 1) = cc.fiber(1 + j);
      const Eigen::VectorXd w = m.K * v;
      zdot[0] = rnf * (pm - rpf * w(0));
      for (int j = 0; j < d; ++j) zdot[j + 1] = -w(j + 1);
      if (m.has_grad) {
        const double B0 = -0.5 * rpf * rpf * m.G(0, w);
        fdot[0] = -0.5 * sg * std::pow(rnf, 4) * B0;
        for (int j = 0; j < d; ++j) {
          const double Bj = -0.5 * rpf * rpf * m.G(j + 1, w);
          fdot[1 + j] = rnf * rnf * Bj - 0.5 * sg * std::pow(rnf, 3) * cc.fiber(1 + j) * B0;
        }
        fdot[d + 1] = 0.5 * sg * rpf * std::pow(rnf, 3) * B0;
      }
      break;
    }
    default: throw Error(ErrorCode::OutOfChart, "frequency-only chart has no Hamiltonian field");
  }
}

std::vector<double> field_components(const ChartCoords& cc, const MetricParams& M, SignBranch b) {
  if (cc.base.kind == BaseKind::None) throw Error(ErrorCode::OutOfChart, "chart has no base coordinates");
  const std::vector<double> z = base_point_of(cc);
  std::vector<double> zdot, fdot;
  fiber_field(cc, z, M, b, zdot, fdot);
  const int n = cc.d + 1;
  std::vector<double> F(cc.coords.size(), 0.0);
  if (cc.base.kind == BaseKind::Interior) {
    for (int i = 0; i < n; ++i) F[i] = zdot[i];
    for (int i = 0; i < cc.d + 2; ++i) F[n + i] = fdot[i];
    return F;
  }
  const Homog hg = homogeneous(cc);
  const int a = cc.base.axis;
  const double s = cc.base.sign;
  const double za = zdot[a];
  F[0] = -s * hg.rho * za;
  int m = 0;
  for (int j = 0; j < n; ++j) {
    if (j == a) continue;
    F[1 + m] = s * (zdot[j] - hg.D[j] * s * za);
    ++m;
  }
  if (!z.empty())
    for (int i = 0; i < cc.d + 2; ++i) F[n + i] = fdot[i] / hg.rho;
  return F;
}

double fiber_rate_factor(const ChartCoords& cc) {
  const int d = cc.d;
  switch (cc.chart.tag) {
    case ChartTag::NatInterior: {
      std::vector<double> xi(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) xi[j] = cc.fiber(1 + j);
      const double tn = cc.fiber(0);
      const double r = natural_ratio(tn, xi, cc.fiber(d + 1));
      if (std::isinf(r)) throw Error(ErrorCode::OutOfChart, "NatInterior does not cover the pf point");
      return r / std::sqrt(1.0 + tn * tn + norm2(xi));
    }
    case ChartTag::DfProjective: {
      const double rho = cc.fiber(0);
      std::vector<double> xh(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) xh[j] = cc.fiber(1 + j);
      double r = 1.0;
      if (rho > 0.0) {
        std::vector<double> xi(xh);
        for (double& v : xi) v /= rho;
        r = natural_ratio(cc.chart.sign / rho, xi, cc.fiber(d + 1));
      }
      return r / std::sqrt(rho * rho + 1.0 + norm2(xh));
    }
    case ChartTag::PfStandard: {
      const double h = cc.fiber(d + 1), tau = cc.fiber(0);
      double xi2 = 0.0;
      for (int j = 0; j < d; ++j) xi2 += cc.fiber(1 + j) * cc.fiber(1 + j);
      const double zn2 = h * h * (h * h * tau * tau + xi2);
      const double rnf = h + cutoff_chi(std::sqrt(zn2)) * std::pow(1.0 + tau * tau + xi2 * xi2, -0.25);
      return rnf / std::sqrt(1.0 + zn2);
    }
    case ChartTag::PfNatParabolic: {
      const double rnf = cc.fiber(0), rpf = cc.fiber(d + 1);
      double xh2 = 0.0;
      for (int j = 0; j < d; ++j) xh2 += cc.fiber(1 + j) * cc.fiber(1 + j);
      const double zn2 = std::pow(rpf, 4) + rpf * rpf * xh2;
      const double r = rpf + cutoff_chi(std::sqrt(zn2)) * std::pow(std::pow(rnf, 4) + 1.0 + xh2 * xh2, -0.25);
      return r / std::sqrt(1.0 + zn2);
    }
    default: throw Error(ErrorCode::OutOfChart, "frequency-only chart");
  }
}

// Velocity direction of the free flow used to locate R over the fiber of cc.
std::vector<double> flow_direction(const ChartCoords& cc, SignBranch b, int varsigma) {
  std::vector<double> w = future_direction(cc, b);
  for (double& v : w) v *= varsigma;
  return w;
}

// y_R over the fiber of cc in the projective chart on `axis`
std::vector<double> radial_shift(const ChartCoords& cc, SignBranch b, int axis) {
  const std::vector<double> v = free_velocity(cc, b);
  const double va = v[static_cast<std::size_t>(axis)];
  std::vector<double> y;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (static_cast<int>(j) != axis) y.push_back(v[j] / va);
  return y;
}

bool state_valid(const ChartCoords& cc) {
  for (double v : cc.coords)
    if (!std::isfinite(v)) return false;
  if (cc.base.kind != BaseKind::Interior && cc.coords[0] < 0.0) return false;
  const int d = cc.d;
  switch (cc.chart.tag) {
    case ChartTag::NatInterior: {
      if (cc.fiber(d + 1) < 0.0) return false;
      if (cc.fiber(d + 1) == 0.0) {
        double s = std::abs(cc.fiber(0));
        for (int j = 0; j < d; ++j) s += std::abs(cc.fiber(1 + j));
        if (s == 0.0) return false;
      }
      return true;
    }
    case ChartTag::DfProjective: return cc.fiber(0) >= 0.0 && cc.fiber(d + 1) >= 0.0;
    case ChartTag::PfStandard: return cc.fiber(d + 1) >= 0.0;
    case ChartTag::PfNatParabolic: return cc.fiber(0) >= 0.0 && cc.fiber(d + 1) >= 0.0;
    default: return false;
  }
}

void set_base(ChartCoords& cc, BaseKind kind, int axis, const Homog& hg) {
  const int n = cc.d + 1;
  const std::vector<double> fib = fiber_of(cc);
  std::vector<double> bc;
  if (kind == BaseKind::Interior) {
    for (int i = 0; i < n; ++i) bc.push_back(hg.D[i] / hg.rho);
    cc.base = BaseChart{};
  } else {
    const double da = hg.D[axis];
    cc.base = BaseChart{};
    cc.base.kind = BaseKind::Projective;
    cc.base.axis = axis;
    cc.base.sign = sgn(da);
    bc.push_back(hg.rho / std::abs(da));
    for (int j = 0; j < n; ++j)
      if (j != axis) bc.push_back(hg.D[j] / da);
  }
  cc.coords = bc;
  cc.coords.insert(cc.coords.end(), fib.begin(), fib.end());
}

int dominant_axis(const std::vector<double>& D) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(D.size()); ++j)
    if (std::abs(D[j]) > std::abs(D[best])) best = j;
  return best;
}

// Base chart switching with hysteresis; returns true on a switch.
bool maybe_switch_base(ChartCoords& cc) {
  const Homog hg = homogeneous(cc);
  if (cc.base.kind == BaseKind::Interior) {
    double zmax = 0.0;
    for (double v : hg.D) zmax = std::max(zmax, std::abs(v));
    if (zmax <= 16.0) return false;
    set_base(cc, BaseKind::Projective, dominant_axis(hg.D), hg);
    return true;
  }
  if (cc.base.kind == BaseKind::Radial) {
    set_base(cc, BaseKind::Projective, cc.base.axis, hg);
    return true;
  }
  if (hg.rho > 0.125) {
    set_base(cc, BaseKind::Interior, 0, hg);
    return true;
  }
  double ymax = 0.0;
  for (int j = 0; j < cc.d; ++j) ymax = std::max(ymax, std::abs(cc.coords[1 + j]));
  if (ymax <= 1.5) return false;
  set_base(cc, BaseKind::Projective, dominant_axis(hg.D), hg);
  return true;
}

bool maybe_switch_fiber(ChartCoords& cc) {
  const int d = cc.d;
  const int nb = cc.base_size();
  std::vector<double> f = fiber_of(cc);
  ChartId next = cc.chart;
  std::vector<double> g;
  switch (cc.chart.tag) {
    case ChartTag::NatInterior: {
      double zn = f[0] * f[0];
      for (int j = 0; j < d; ++j) zn += f[1 + j] * f[1 + j];
      zn = std::sqrt(zn);
      if (zn <= 8.0 || std::abs(f[0]) < 0.5 * zn) return false;
      const double a = std::abs(f[0]);
      next = {ChartTag::DfProjective, 0, sgn(f[0])};
      g.push_back(1.0 / a);
      for (int j = 0; j < d; ++j) g.push_back(f[1 + j] / a);
      g.push_back(f[d + 1]);
      break;
    }
    case ChartTag::DfProjective: {
      if (f[0] <= 0.25) return false;
      next = {ChartTag::NatInterior, 0, 1};
      g.push_back(cc.chart.sign / f[0]);
      for (int j = 0; j < d; ++j) g.push_back(f[1 + j] / f[0]);
      g.push_back(f[d + 1]);
      break;
    }
    case ChartTag::PfStandard: {
      const double h = f[d + 1];
      double zs = f[0] * f[0];
      for (int j = 0; j < d; ++j) zs += f[1 + j] * f[1 + j];
      if (!(h > 0.0) || zs <= 1e6) return false;
      next = {ChartTag::NatInterior, 0, 1};
      g.push_back(h * h * f[0]);
      for (int j = 0; j < d; ++j) g.push_back(h * f[1 + j]);
      g.push_back(h);
      break;
    }
    case ChartTag::PfNatParabolic: {
      const double rnf = f[0], rpf = f[d + 1];
      if (!(rpf > 0.0)) return false;
      next = {ChartTag::NatInterior, 0, 1};
      g.push_back(cc.chart.sign * rpf * rpf);
      for (int j = 0; j < d; ++j) g.push_back(rpf * f[1 + j]);
      g.push_back(rnf * rpf);
      break;
    }
    default: return false;
  }
  cc.chart = next;
  cc.coords.resize(static_cast<std::size_t>(nb));
  cc.coords.insert(cc.coords.end(), g.begin(), g.end());
  return true;
}

double field_sup(const std::vector<double>& F) {
  double m = 0.0;
  for (double v : F) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::ReachedFuture: return "ReachedFuture";
    case Termination::ReachedPast: return "ReachedPast";
    case Termination::TimeBudget: return "TimeBudget";
    case Termination::LeftDomain: return "LeftDomain";
  }
  return "?";
}

TangentVector ham_field(const ChartCoords& p, const MetricParams& M, SignBranch b) {
  if (!state_valid(p)) throw Error(ErrorCode::OutOfChart, "point outside the chart's validity region");
  TangentVector tv;
  tv.chart = p.chart;
  tv.base = p.base;
  tv.components = field_components(p, M, b);
  return tv;
}

double global_rate(const ChartCoords& p) {
  const Homog hg = homogeneous(p);
  double bf = 0.0;
  if (p.base.kind == BaseKind::Interior)
    bf = std::sqrt(1.0 + norm2(hg.D));
  else
    bf = std::sqrt(hg.rho * hg.rho + norm2(hg.D));  // D_axis^2 = 1
  return bf * fiber_rate_factor(p);
}

std::string chart_label(const ChartCoords& cc) {
  std::string s = chart_name(cc.chart);
  s += "/";
  s += base_name(cc.base.kind);
  if (cc.base.kind == BaseKind::Projective || cc.base.kind == BaseKind::Radial) {
    s += cc.base.axis == 0 ? "t" : "x" + std::to_string(cc.base.axis);
    s += cc.base.sign > 0 ? "+" : "-";
  }
  return s;
}

double radial_distance(const ChartCoords& cc, SignBranch b, int varsigma) {
  const std::vector<double> w = flow_direction(cc, b, varsigma);
  const int a = dominant_axis(w);
  const Homog hg = homogeneous(cc);
  const double Da = hg.D[a];
  if (Da == 0.0 || sgn(Da) != sgn(w[a])) return std::numeric_limits<double>::infinity();
  double dist = hg.rho / std::abs(Da);
  for (int j = 0; j < static_cast<int>(w.size()); ++j) {
    if (j == a) continue;
    dist = std::max(dist, std::abs(hg.D[j] / Da - w[j] / w[a]));
  }
  return dist;
}

ChartCoords sigma_start(const MetricParams& M, const std::vector<double>& z, const std::vector<double>& xi_nat,
                        double h, SignBranch b) {
  const double tn = solve_tau_nat(M, z, xi_nat, h, b);
  return to_chart(make_point(z[0], std::vector<double>(z.begin() + 1, z.end()), tn, xi_nat, h),
                  {ChartTag::NatInterior, 0, 1});
}

Trajectory integrate_flow(const ChartCoords& start, FlowDirection dir, const MetricParams& M, SignBranch b,
                          const FlowOptions& opt) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  Trajectory tr;
  ChartCoords cur = start;
  if (!state_valid(cur)) {
    tr.termination = Termination::LeftDomain;
    return tr;
  }
  const double sense = dir == FlowDirection::Forward ? 1.0 : -1.0;

  auto record = [&](double t) {
    TrajectorySample s;
    s.time = t;
    s.point = cur;
    s.p_residual = eval_p(cur, M, b);
    tr.max_p_residual = std::max(tr.max_p_residual, std::abs(s.p_residual));
    tr.samples.push_back(std::move(s));
  };
  auto dist = [&](int vs) {
    try {
      return radial_distance(cur, b, vs);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  // only the radial set attracting in this time direction ends the flow
  const int sink = static_cast<int>(sense * branch_sign(b));
  auto reached = [&]() -> bool {
    if (dist(sink) > opt.delta) return false;
    tr.termination = sink > 0 ? Termination::ReachedFuture : Termination::ReachedPast;
    return true;
  };
  auto normalize = [&](double t) {
    for (int guard = 0; guard < 8; ++guard) {
      const std::string before = chart_label(cur);
      const bool sw = maybe_switch_base(cur) | maybe_switch_fiber(cur);
      if (!sw) break;
      tr.switches.push_back({t, before, chart_label(cur)});
    }
  };

  double t = 0.0;
  normalize(t);
  record(t);
  if (reached()) return tr;

  ChartCoords work = cur;
  auto system = [&](const State& x, State& dxdt, double) {
    work.coords = x;
    dxdt.assign(x.size(), std::numeric_limits<double>::quiet_NaN());
    try {
      if (!state_valid(work)) return;
      const std::vector<double> F = field_components(work, M, b);
      const double g = sense * global_rate(work);
      for (std::size_t i = 0; i < x.size(); ++i) dxdt[i] = g * F[i];
    } catch (const Error&) {
    }
  };

  auto stepper = odeint::make_controlled(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<State>());
  double dt = opt.h0;
  int still = 0;
  State x = cur.coords;
  while (t < opt.budget) {
    if (tr.steps >= opt.max_steps) break;
    work = cur;
    const State saved = x;
    const double t_saved = t;
    double trial = std::min(dt, opt.budget - t);
    const auto res = stepper.try_step(system, x, t, trial);
    if (res == odeint::fail) {
      dt = trial;
      if (dt < 1e-14) throw Error(ErrorCode::StepFailure, "adaptive step underflow");
      continue;
    }
    ChartCoords next = cur;
    next.coords = x;
    if (!state_valid(next)) {
      dt = 0.5 * (t - t_saved);
      x = saved;
      t = t_saved;
      stepper.reset();
      if (dt < 1e-14) {
        tr.termination = Termination::LeftDomain;
        return tr;
      }
      continue;
    }
    dt = trial;
    ++tr.steps;
    cur = next;
    const std::size_t nsw = tr.switches.size();
    normalize(t);
    if (tr.switches.size() != nsw) stepper.reset();
    x = cur.coords;
    record(t);
    if (reached()) return tr;
    double fs = 0.0;
    try {
      fs = field_sup(field_components(cur, M, b)) * global_rate(cur);
    } catch (const Error&) {
      tr.termination = Termination::LeftDomain;
      return tr;
    }
    still = fs <= opt.fixed_point ? still + 1 : 0;
    if (still >= 3) break;  // stalled at a fixed point outside both delta-balls
  }
  tr.termination = Termination::TimeBudget;
  return tr;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  std::size_t width = 0;
  for (const auto& s : tr.samples) width = std::max(width, s.point.coords.size());
  os << "param_time,chart_tag";
  for (std::size_t k = 0; k < width; ++k) os << ",coord_" << k;
  os << ",p_residual\n";
  char buf[64];
  for (const auto& s : tr.samples) {
    std::snprintf(buf, sizeof buf, "%.17g", s.time);
    os << buf << ',' << chart_label(s.point);
    for (std::size_t k = 0; k < width; ++k) {
      os << ',';
      if (k < s.point.coords.size()) {
        std::snprintf(buf, sizeof buf, "%.17g", s.point.coords[k]);
        os << buf;
      }
    }
    std::snprintf(buf, sizeof buf, "%.17g", s.p_residual);
    os << ',' << buf << '\n';
  }
}

QdfReport qdf_probe(const RadialPoint& center, double radius, int nsamples, const MetricParams& M, SignBranch b,
                    const QdfOptions& opt) {
  const ChartCoords& c0 = center.chart;
  if (c0.base.kind != BaseKind::Radial) throw Error(ErrorCode::ChartUnavailable, "qdf needs a radial chart");
  if (c0.chart.tag != ChartTag::NatInterior && c0.chart.tag != ChartTag::PfStandard)
    throw Error(ErrorCode::ChartUnavailable, "qdf needs a natural or pf fiber chart");
  QdfReport rep;
  if (radius <= 0.0) return rep;
  const int d = c0.d;
  const int nu = d + 1;
  const int axis = c0.base.axis;
  const int nmono = nu * (nu + 1) / 2;
  if (nsamples < 2 * nmono) throw Error(ErrorCode::FitFailure, "too few samples for the quadratic fit");
  const double kappa = -branch_sign(b) * center.varsigma;

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.1, 1.0);

  std::vector<std::vector<double>> us;
  std::vector<double> Ys, rhos;
  for (int i = 0; i < nsamples; ++i) {
    std::vector<double> u(static_cast<std::size_t>(nu));
    double nn = 0.0;
    for (double& v : u) {
      v = gauss(rng);
      nn += v * v;
    }
    const double r = radius * unif(rng) / std::sqrt(nn);
    for (double& v : u) v *= r;
    u[0] = std::abs(u[0]);

    // sample: same xi, tau re-solved on Sigma at the new base point
    ChartCoords cc = c0;
    cc.coords[0] = u[0];
    std::vector<double> yR = radial_shift(cc, b, axis);
    for (int m = 0; m < d; ++m) cc.coords[1 + m] = yR[m] + u[1 + m] - c0.base.shift[m];
    for (int it = 0; it < 3; ++it) {
      const std::vector<double> z = base_point_of(cc);
      std::vector<double> xi(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) xi[j] = cc.fiber(1 + j);
      const double h = cc.fiber(d + 1);
      if (cc.chart.tag == ChartTag::NatInterior)
        cc.fiber(0) = solve_tau_nat(M, z, xi, h, b);
      else
        cc.fiber(0) = solve_tau_std(M, z, xi, h, b);
      // keep s, w measured from y_R of the re-solved fiber
      yR = radial_shift(cc, b, axis);
      for (int m = 0; m < d; ++m) cc.coords[1 + m] = yR[m] + u[1 + m] - c0.base.shift[m];
    }

    const std::vector<double> F = field_components(cc, M, b);
    std::vector<double> fdot(F.begin() + nu, F.end());
    std::vector<double> dyR(static_cast<std::size_t>(d), 0.0);
    const double fs = field_sup(fdot);
    if (fs > 0.0) {
      const double eps = 1e-6 / std::max(1.0, fs);
      ChartCoords cp = cc, cm = cc;
      for (int i2 = 0; i2 < d + 2; ++i2) {
        cp.fiber(i2) += eps * fdot[i2];
        cm.fiber(i2) -= eps * fdot[i2];
      }
      const auto yp = radial_shift(cp, b, axis), ym = radial_shift(cm, b, axis);
      for (int m = 0; m < d; ++m) dyR[m] = (yp[m] - ym[m]) / (2 * eps);
    }
    double Hr = 2.0 * opt.upsilon * u[0] * F[0];
    for (int m = 0; m < d; ++m) Hr += 2.0 * u[1 + m] * (F[1 + m] - dyR[m]);
    us.push_back(u);
    Ys.push_back(kappa * Hr);
    double vr = opt.upsilon * u[0] * u[0];
    for (int m = 0; m < d; ++m) vr += u[1 + m] * u[1 + m];
    rhos.push_back(vr);
  }

  Eigen::MatrixXd A(nsamples, nmono);
  Eigen::VectorXd y(nsamples);
  for (int i = 0; i < nsamples; ++i) {
    int c = 0;
    for (int p = 0; p < nu; ++p)
      for (int q = p; q < nu; ++q) A(i, c++) = us[i][p] * us[i][q];
    y(i) = Ys[i];
  }
  const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(y);
  Eigen::MatrixXd Q(nu, nu);
  int c = 0;
  for (int p = 0; p < nu; ++p)
    for (int q = p; q < nu; ++q) {
      if (p == q)
        Q(p, p) = coef(c);
      else
        Q(p, q) = Q(q, p) = 0.5 * coef(c);
      ++c;
    }
  Eigen::VectorXd dinv(nu);
  dinv(0) = 1.0 / std::sqrt(opt.upsilon);
  for (int p = 1; p < nu; ++p) dinv(p) = 1.0;
  const Eigen::MatrixXd S = dinv.asDiagonal() * Q * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  rep.iota_est = es.eigenvalues().minCoeff();

  rep.F_est = std::numeric_limits<double>::infinity();
  double ymax = 0.0;
  for (int i = 0; i < nsamples; ++i) {
    Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(us[i].data(), nu);
    const double q = u.dot(Q * u);
    rep.F_est = std::min(rep.F_est, q - rep.iota_est * rhos[i]);
    const double e = std::abs(Ys[i] - q);
    rep.E_est = std::max(rep.E_est, e);
    rep.C_fit = std::max(rep.C_fit, e / std::pow(rhos[i], 1.5));
    rep.varrho = std::max(rep.varrho, rhos[i]);
    ymax = std::max(ymax, std::abs(Ys[i]));
  }
  rep.decomposition_residual = rep.E_est / std::max(ymax, std::numeric_limits<double>::min());
  rep.samples = nsamples;
  return rep;
}

double alpha_value(const RadialPoint& p, const OrderTuple& orders, const MetricParams& M, SignBranch b) {
  const ChartCoords& c0 = p.chart;
  if (c0.base.kind != BaseKind::Radial && c0.base.kind != BaseKind::Projective)
    throw Error(ErrorCode::ChartUnavailable, "alpha needs a projective or radial base chart");
  const int d = c0.d;
  const int nb = c0.base_size();
  const double eps = 1e-5;

  // b-derivative X rho / rho of the coordinate at index idx
  auto bderiv = [&](int idx) {
    const double v = c0.coords[idx];
    if (v > 0.0) return field_components(c0, M, b)[idx] / v;
    ChartCoords c1 = c0, c2 = c0;
    c1.coords[idx] = eps;
    c2.coords[idx] = 2 * eps;
    const double f1 = field_components(c1, M, b)[idx];
    const double f2 = field_components(c2, M, b)[idx];
    return (4.0 * f1 - f2) / (2.0 * eps);
  };

  double alpha = 0.0;
  if (orders.s != 0.0) alpha += orders.s * bderiv(0);
  const int last = nb + d + 1;
  switch (c0.chart.tag) {
    case ChartTag::NatInterior:
      if (orders.l != 0.0) alpha += orders.l * bderiv(last);
      break;
    case ChartTag::DfProjective:
      if (orders.m != 0.0) alpha += orders.m * bderiv(nb);
      if (orders.l != 0.0) alpha += orders.l * bderiv(last);
      break;
    case ChartTag::PfStandard:
      if (orders.q != 0.0) alpha += orders.q * bderiv(last);
      break;
    case ChartTag::PfNatParabolic:
      if (orders.l != 0.0) alpha += orders.l * bderiv(nb);
      if (orders.q != 0.0) alpha += orders.q * bderiv(last);
      break;
    default: throw Error(ErrorCode::ChartUnavailable, "frequency-only chart");
  }
  if (orders.s != 0.0) {
    const double signed_alpha = -branch_sign(b) * p.varsigma * alpha;
    if (!(signed_alpha * orders.s > 0.0))
      throw Error(ErrorCode::BoundViolated, "threshold sign does not match sign(s)");
  }
  return alpha;
}

double natural_degeneracy(const PhasePoint& p, SignBranch b) {
  double n = std::pow(2.0 * p.h * (p.tau_nat + branch_sign(b)), 2);
  for (double v : p.xi_nat) n += 4.0 * v * v;
  return std::sqrt(n);
}

Linearization radial_linearization(const RadialPoint& p, const MetricParams& M, SignBranch b) {
  const ChartCoords& c0 = p.chart;
  if (c0.base.kind != BaseKind::Radial) throw Error(ErrorCode::ChartUnavailable, "needs a radial chart");
  const int n = c0.d + 1;
  const double eps = 1e-6;
  Eigen::MatrixXd J(n, n);
  const std::vector<double> F0 = field_components(c0, M, b);
  for (int j = 0; j < n; ++j) {
    ChartCoords a = c0, bb = c0;
    std::vector<double> Fa, Fb;
    if (j == 0) {
      a.coords[0] = eps;
      bb.coords[0] = 2 * eps;
      Fa = field_components(a, M, b);
      Fb = field_components(bb, M, b);
      for (int i = 0; i < n; ++i) J(i, j) = (-3.0 * F0[i] + 4.0 * Fa[i] - Fb[i]) / (2 * eps);
    } else {
      a.coords[j] += eps;
      bb.coords[j] -= eps;
      Fa = field_components(a, M, b);
      Fb = field_components(bb, M, b);
      for (int i = 0; i < n; ++i) J(i, j) = (Fa[i] - Fb[i]) / (2 * eps);
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(J);
  Linearization lin;
  for (int i = 0; i < n; ++i) {
    lin.re.push_back(es.eigenvalues()(i).real());
    lin.im.push_back(es.eigenvalues()(i).imag());
  }
  return lin;
}

}  // namespace nrl

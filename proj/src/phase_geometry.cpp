#include "nrl/phase_geometry.hpp"

#include <algorithm>
#include <cmath>

#include "nrl/error.hpp"

namespace nrl {

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return s;
}

double sigma_exp(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }

int sgn(double v) { return v < 0.0 ? -1 : 1; }

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfChart: return "OutOfChart";
    case ErrorCode::OnBoundary: return "OnBoundary";
    case ErrorCode::FitFailure: return "FitFailure";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::ExtrapolationUnstable: return "ExtrapolationUnstable";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::LeftDomain: return "LeftDomain";
    case ErrorCode::ChartUnavailable: return "ChartUnavailable";
    case ErrorCode::SpectrumOverflow: return "SpectrumOverflow";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::ResampleOverflow: return "ResampleOverflow";
    case ErrorCode::DegenerateFamily: return "DegenerateFamily";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

std::vector<double> PhasePoint::xi() const {
  std::vector<double> out(xi_nat.size());
  for (std::size_t j = 0; j < xi_nat.size(); ++j) out[j] = xi_nat[j] / h;
  return out;
}

PhasePoint make_point(double t, std::vector<double> x, double tau_nat, std::vector<double> xi_nat,
                      double h) {
  PhasePoint p;
  p.t = t;
  p.x = std::move(x);
  p.tau_nat = tau_nat;
  p.xi_nat = std::move(xi_nat);
  p.h = h;
  if (p.x.size() != p.xi_nat.size() || p.x.empty() || p.x.size() > 3 || h < 0.0)
    throw Error(ErrorCode::OutOfChart, "invalid phase point");
  return p;
}

const char* chart_name(ChartId c) {
  switch (c.tag) {
    case ChartTag::NatInterior: return "NatInterior";
    case ChartTag::DfProjective: return "DfProjective";
    case ChartTag::PfStandard: return "PfStandard";
    case ChartTag::PfNatParabolic: return "PfNatParabolic";
    case ChartTag::ParFreqTau: return "ParFreqTau";
    case ChartTag::ParFreqXi: return "ParFreqXi";
  }
  return "?";
}

const char* base_name(BaseKind k) {
  switch (k) {
    case BaseKind::Interior: return "interior";
    case BaseKind::Projective: return "projective";
    case BaseKind::Radial: return "radial";
    case BaseKind::None: return "none";
  }
  return "?";
}

double cutoff_chi(double r) {
  const double a = sigma_exp(2.0 - r);
  const double b = sigma_exp(r - 1.0);
  return a / (a + b);
}

double rho_bf_global(double t, const std::vector<double>& x) {
  return 1.0 / std::sqrt(1.0 + t * t + norm2(x));
}

double natural_ratio(double tau_nat, const std::vector<double>& xi_nat, double h) {
  const double xi2 = norm2(xi_nat);
  const double chi = cutoff_chi(std::sqrt(tau_nat * tau_nat + xi2));
  if (chi == 0.0) return 1.0;
  const double q = std::pow(h, 4) + tau_nat * tau_nat + xi2 * xi2;
  if (q == 0.0) return INFINITY;
  return 1.0 + chi * std::pow(q, -0.25);
}

BdfValues bdf_values(const PhasePoint& p) {
  BdfValues b;
  b.rho_bf = rho_bf_global(p.t, p.x);
  b.rho_df = 1.0 / std::sqrt(1.0 + p.tau_nat * p.tau_nat + norm2(p.xi_nat));
  const double r = natural_ratio(p.tau_nat, p.xi_nat, p.h);
  if (std::isinf(r)) {
    // h = 0 and zeta_nat = 0: the point tau = xi = 0 of pf
    b.rho_nf = 1.0;
    b.rho_pf = 0.0;
  } else {
    b.rho_nf = p.h * r;
    b.rho_pf = 1.0 / r;
  }
  return b;
}

BaseChart dominant_base_chart(const std::vector<double>& z) {
  BaseChart b;
  b.kind = BaseKind::Projective;
  std::size_t best = 0;
  for (std::size_t j = 1; j < z.size(); ++j)
    if (std::abs(z[j]) > std::abs(z[best])) best = j;
  b.axis = static_cast<int>(best);
  b.sign = sgn(z[best]);
  return b;
}

BaseChart radial_base_chart(const std::vector<double>& dir, int axis) {
  BaseChart b = dominant_base_chart(dir);
  b.kind = BaseKind::Radial;
  if (axis >= 0) {
    if (axis >= static_cast<int>(dir.size())) throw Error(ErrorCode::ChartUnavailable, "axis out of range");
    b.axis = axis;
    b.sign = sgn(dir[static_cast<std::size_t>(axis)]);
  }
  const double da = dir[static_cast<std::size_t>(b.axis)];
  if (da == 0.0) throw Error(ErrorCode::ChartUnavailable, "radial direction has no component on the axis");
  for (std::size_t j = 0; j < dir.size(); ++j)
    if (static_cast<int>(j) != b.axis) b.shift.push_back(dir[j] / da);
  return b;
}

std::vector<double> base_to_chart(const std::vector<double>& z, const BaseChart& b) {
  if (b.kind == BaseKind::Interior) return z;
  if (b.kind == BaseKind::None) return {};
  const double za = z[static_cast<std::size_t>(b.axis)];
  if (za * b.sign <= 0.0) throw Error(ErrorCode::OutOfChart, "base point on the wrong side");
  std::vector<double> out;
  out.reserve(z.size());
  out.push_back(1.0 / (b.sign * za));
  std::size_t m = 0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (static_cast<int>(j) == b.axis) continue;
    double y = z[j] / za;
    if (b.kind == BaseKind::Radial) y -= b.shift[m];
    out.push_back(y);
    ++m;
  }
  return out;
}

std::vector<double> base_from_chart(const std::vector<double>& bc, const BaseChart& b) {
  if (b.kind == BaseKind::Interior) return bc;
  if (b.kind == BaseKind::None) return {};
  const double rho = bc[0];
  if (rho <= 0.0) throw Error(ErrorCode::OnBoundary, "rho_bf = 0 has no interior preimage");
  const double za = b.sign / rho;
  std::vector<double> z(bc.size());
  std::size_t m = 0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (static_cast<int>(j) == b.axis) {
      z[j] = za;
      continue;
    }
    double y = bc[m + 1];
    if (b.kind == BaseKind::Radial) y += b.shift[m];
    z[j] = y * za;
    ++m;
  }
  return z;
}

ChartCoords to_chart(const PhasePoint& p, ChartId c) {
  const int d = p.dim();
  ChartCoords cc;
  cc.d = d;
  cc.base.kind = BaseKind::Interior;
  cc.coords.push_back(p.t);
  for (double v : p.x) cc.coords.push_back(v);
  const BdfValues global = bdf_values(p);
  cc.bdf.rho_bf = global.rho_bf;
  const double zeta_norm = std::sqrt(p.tau_nat * p.tau_nat + norm2(p.xi_nat));

  switch (c.tag) {
    case ChartTag::NatInterior: {
      cc.chart = {ChartTag::NatInterior, 0, 1};
      cc.coords.push_back(p.tau_nat);
      for (double v : p.xi_nat) cc.coords.push_back(v);
      cc.coords.push_back(p.h);
      cc.bdf = global;
      break;
    }
    case ChartTag::DfProjective: {
      if (p.tau_nat == 0.0 || std::abs(p.tau_nat) < 0.1 * zeta_norm)
        throw Error(ErrorCode::OutOfChart, "DfProjective needs |tau_nat| >= 0.1 |zeta_nat|");
      const double a = std::abs(p.tau_nat);
      cc.chart = {ChartTag::DfProjective, 0, sgn(p.tau_nat)};
      cc.coords.push_back(1.0 / a);
      for (double v : p.xi_nat) cc.coords.push_back(v / a);
      cc.coords.push_back(p.h);
      cc.bdf.rho_df = 1.0 / a;
      cc.bdf.rho_nf = p.h;
      cc.bdf.rho_pf = 1.0;
      break;
    }
    case ChartTag::PfStandard: {
      if (!(p.h > 0.0)) throw Error(ErrorCode::OutOfChart, "PfStandard needs h > 0");
      cc.chart = {ChartTag::PfStandard, 0, 1};
      cc.coords.push_back(p.tau());
      for (double v : p.xi()) cc.coords.push_back(v);
      cc.coords.push_back(p.h);
      cc.bdf.rho_df = 1.0;
      cc.bdf.rho_nf = 1.0;
      cc.bdf.rho_pf = p.h;
      break;
    }
    case ChartTag::PfNatParabolic: {
      if (!(p.h > 0.0)) throw Error(ErrorCode::OutOfChart, "PfNatParabolic needs h > 0");
      const double tau = p.tau();
      if (std::abs(tau) < 1.0) throw Error(ErrorCode::OutOfChart, "PfNatParabolic needs |tau| >= 1");
      const double st = std::sqrt(std::abs(tau));
      cc.chart = {ChartTag::PfNatParabolic, 0, sgn(tau)};
      cc.coords.push_back(1.0 / st);
      for (double v : p.xi()) cc.coords.push_back(v / st);
      cc.coords.push_back(p.h * st);
      cc.bdf.rho_df = 1.0;
      cc.bdf.rho_nf = 1.0 / st;
      cc.bdf.rho_pf = p.h * st;
      break;
    }
    default:
      throw Error(ErrorCode::OutOfChart, "frequency-only chart; use parabolic_chart");
  }
  return cc;
}

PhasePoint from_chart(const ChartCoords& cc) {
  if (cc.base.kind == BaseKind::None) throw Error(ErrorCode::OutOfChart, "no base coordinates");
  const int d = cc.d;
  const std::vector<double> bc(cc.coords.begin(), cc.coords.begin() + d + 1);
  const std::vector<double> z = base_from_chart(bc, cc.base);
  PhasePoint p;
  p.t = z[0];
  p.x.assign(z.begin() + 1, z.end());
  p.xi_nat.assign(static_cast<std::size_t>(d), 0.0);
  const double f0 = cc.fiber(0);
  const double flast = cc.fiber(d + 1);
  switch (cc.chart.tag) {
    case ChartTag::NatInterior:
      p.tau_nat = f0;
      for (int j = 0; j < d; ++j) p.xi_nat[j] = cc.fiber(1 + j);
      p.h = flast;
      break;
    case ChartTag::DfProjective:
      if (f0 <= 0.0) throw Error(ErrorCode::OnBoundary, "rho_df = 0");
      p.tau_nat = cc.chart.sign / f0;
      for (int j = 0; j < d; ++j) p.xi_nat[j] = cc.fiber(1 + j) / f0;
      p.h = flast;
      break;
    case ChartTag::PfStandard:
      if (flast <= 0.0) throw Error(ErrorCode::OnBoundary, "h = 0 on pf");
      p.h = flast;
      p.tau_nat = p.h * p.h * f0;
      for (int j = 0; j < d; ++j) p.xi_nat[j] = p.h * cc.fiber(1 + j);
      break;
    case ChartTag::PfNatParabolic:
      if (flast <= 0.0) throw Error(ErrorCode::OnBoundary, "rho_pf = 0");
      p.h = f0 * flast;
      p.tau_nat = cc.chart.sign * flast * flast;
      for (int j = 0; j < d; ++j) p.xi_nat[j] = flast * cc.fiber(1 + j);
      break;
    default:
      throw Error(ErrorCode::OutOfChart, "frequency-only chart");
  }
  return p;
}

ChartCoords parabolic_chart(double tau, const std::vector<double>& xi, ChartId c) {
  ChartCoords cc;
  cc.d = static_cast<int>(xi.size());
  cc.base.kind = BaseKind::None;
  cc.chart = c;
  if (c.tag == ChartTag::ParFreqTau) {
    if (tau == 0.0) throw Error(ErrorCode::OutOfChart, "ParFreqTau needs tau != 0");
    cc.chart.sign = sgn(tau);
    const double rho = 1.0 / std::sqrt(std::abs(tau));
    cc.coords.push_back(rho);
    for (double v : xi) cc.coords.push_back(v * rho);
    cc.bdf.rho_pf = rho;
  } else if (c.tag == ChartTag::ParFreqXi) {
    if (c.k < 1 || c.k > cc.d) throw Error(ErrorCode::OutOfChart, "ParFreqXi axis out of range");
    const double xk = xi[static_cast<std::size_t>(c.k - 1)];
    if (xk == 0.0) throw Error(ErrorCode::OutOfChart, "ParFreqXi needs xi_k != 0");
    cc.chart.sign = sgn(xk);
    cc.coords.push_back(1.0 / std::abs(xk));
    cc.coords.push_back(tau / (xk * xk));
    for (int j = 0; j < cc.d; ++j)
      if (j != c.k - 1) cc.coords.push_back(xi[static_cast<std::size_t>(j)] / xk);
    cc.bdf.rho_pf = 1.0 / std::abs(xk);
  } else {
    throw Error(ErrorCode::OutOfChart, "not a parabolic chart");
  }
  return cc;
}

ChartCoords parabolic_chart(double tau, const std::vector<double>& xi) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < xi.size(); ++j)
    if (std::abs(xi[j]) > std::abs(xi[best])) best = j;
  if (std::sqrt(std::abs(tau)) >= std::abs(xi[best]))
    return parabolic_chart(tau, xi, ChartId{ChartTag::ParFreqTau, 0, 1});
  return parabolic_chart(tau, xi, ChartId{ChartTag::ParFreqXi, static_cast<int>(best) + 1, 1});
}

void parabolic_inverse(const ChartCoords& cc, double& tau, std::vector<double>& xi) {
  const double rho = cc.coords.at(0);
  if (rho <= 0.0) throw Error(ErrorCode::OnBoundary, "rho = 0 at parabolic infinity");
  xi.assign(static_cast<std::size_t>(cc.d), 0.0);
  if (cc.chart.tag == ChartTag::ParFreqTau) {
    tau = cc.chart.sign / (rho * rho);
    for (int j = 0; j < cc.d; ++j) xi[j] = cc.coords[1 + j] / rho;
  } else if (cc.chart.tag == ChartTag::ParFreqXi) {
    const double xk = cc.chart.sign / rho;
    tau = cc.coords[1] * xk * xk;
    std::size_t m = 2;
    for (int j = 0; j < cc.d; ++j) xi[j] = (j == cc.chart.k - 1) ? xk : cc.coords[m++] * xk;
  } else {
    throw Error(ErrorCode::OutOfChart, "not a parabolic chart");
  }
}

BOrderFit b_order_fit(BDirection dir, int xi_axis, ChartId chart, const ParabolicRay& ray) {
  if (ray.samples < 3 || !(ray.s_max > ray.s_min) || ray.s_min <= 0.0)
    throw Error(ErrorCode::FitFailure, "ray needs at least 3 samples over a positive range");
  const int d = static_cast<int>(ray.xi0.size());
  if (dir == BDirection::dXi && (xi_axis < 1 || xi_axis > d))
    throw Error(ErrorCode::FitFailure, "xi axis out of range");

  std::vector<double> lr, lc;
  for (int i = 0; i < ray.samples; ++i) {
    const double s =
        ray.s_min * std::pow(ray.s_max / ray.s_min, static_cast<double>(i) / (ray.samples - 1));
    const double tau0 = ray.tau0 * s * s;
    std::vector<double> xi0(ray.xi0);
    for (double& v : xi0) v *= s;
    const ChartCoords base = parabolic_chart(tau0, xi0, chart);
    const double scale = dir == BDirection::dTau ? std::max(1.0, std::abs(tau0)) : std::max(1.0, s);
    const double step = 1e-4 * scale;
    const std::size_t n = base.coords.size();
    std::vector<double> push(n);
    for (std::size_t c = 0; c < n; ++c) {
      auto coord = [&](double e) {
        double tau = tau0;
        std::vector<double> xi(xi0);
        if (dir == BDirection::dTau)
          tau += e;
        else
          xi[static_cast<std::size_t>(xi_axis - 1)] += e;
        return parabolic_chart(tau, xi, base.chart).coords[c];
      };
      push[c] = central_diff4(coord, 0.0, step);
    }
    const double rho = base.coords[0];
    // frame rho d_rho, d_others
    double mag2 = (push[0] / rho) * (push[0] / rho);
    for (std::size_t c = 1; c < n; ++c) mag2 += push[c] * push[c];
    if (!(mag2 > 0.0)) throw Error(ErrorCode::FitFailure, "vanishing coefficient on the ray");
    lr.push_back(std::log(rho));
    lc.push_back(0.5 * std::log(mag2));
  }
  const double range = *std::max_element(lr.begin(), lr.end()) - *std::min_element(lr.begin(), lr.end());
  if (range < std::log(10.0)) throw Error(ErrorCode::FitFailure, "insufficient dynamic range");

  const double n = static_cast<double>(lr.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lr.size(); ++i) {
    mx += lr[i];
    my += lc[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lr.size(); ++i) {
    sxx += (lr[i] - mx) * (lr[i] - mx);
    sxy += (lr[i] - mx) * (lc[i] - my);
  }
  BOrderFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  for (std::size_t i = 0; i < lr.size(); ++i)
    fit.max_residual = std::max(fit.max_residual, std::abs(lc[i] - fit.intercept - fit.exponent * lr[i]));
  return fit;
}

}  // namespace nrl

#include "nrl/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nrl/error.hpp"
#include "nrl/model_pde.hpp"

namespace nrl {

namespace {

constexpr cplx I(0.0, 1.0);

double bracket(const std::vector<double>& z) {
  double s = 1.0;
  for (double v : z) s += v * v;
  return std::sqrt(s);
}

void require_spacetime(const GridField& u, const char* who) {
  if (!u.grid.time_axis) throw Error(ErrorCode::GridMismatch, std::string(who) + ": expected a spacetime grid");
  if (!band_limited(u)) throw Error(ErrorCode::SpectrumOverflow, std::string(who) + ": field not band-limited");
}

std::vector<double> weight_field(const Grid& g, const WeightFn& s) {
  std::vector<double> w(g.size());
  std::vector<double> z(g.n.size());
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    for (int a = 0; a < g.dims(); ++a) z[a] = g.coord(a, idx[a]);
    w[i] = std::pow(bracket(z), s(z));
  });
  return w;
}

std::vector<cplx> weighted(const GridField& u, const std::vector<double>& w) {
  std::vector<cplx> r(u.v.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = w[i] * u.v[i];
  return r;
}

std::vector<cplx> weighted(const GridField& u, const WeightFn& s) { return weighted(u, weight_field(u.grid, s)); }

// Parseval: ||f||^2 = vol sum |f|^2 = (vol / N) sum |fhat|^2
double multiplier_norm(const Grid& g, const std::vector<cplx>& f,
                       const std::function<double(double tau, double xi2)>& m) {
  const auto fh = fft_forward(g, f);
  double vol = 1.0;
  for (int a = 0; a < g.dims(); ++a) vol *= g.spacing(a);
  double s = 0.0;
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    if (fh[i] == cplx(0.0)) return;
    const double tau = g.frequency(0, idx[0]);
    double xi2 = 0.0;
    for (int a = 1; a < g.dims(); ++a) {
      const double f1 = g.frequency(a, idx[a]);
      xi2 += f1 * f1;
    }
    const double w = m(tau, xi2);
    s += w * w * std::norm(fh[i]);
  });
  return std::sqrt(s * vol / static_cast<double>(g.size()));
}

GridField carrier(const GridField& u, double omega) {
  GridField r(u.grid);
  std::size_t inner = 1;
  for (int a = 1; a < u.grid.dims(); ++a) inner *= u.grid.n[a];
  for (int k = 0; k < u.grid.n[0]; ++k) {
    const cplx e = std::exp(I * (omega * u.grid.coord(0, k)));
    for (std::size_t q = 0; q < inner; ++q) r.v[k * inner + q] = e * u.v[k * inner + q];
  }
  return r;
}

double calc_weight_norm(const GridField& u, double m, const std::vector<double>& w, double ell, double h) {
  const double h2 = h * h, h4 = h2 * h2;
  return multiplier_norm(u.grid, weighted(u, w), [=](double tau, double xi2) {
    const double lam = std::sqrt((1.0 + xi2) * (1.0 + xi2) + tau * tau);
    return std::pow(1.0 + h2 * xi2 + h4 * tau * tau, 0.5 * m) * std::pow(lam / (1.0 + h2 * lam), 0.5 * ell);
  });
}

}  // namespace

double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

void ChiProfile::validate() const {
  if (!(lo >= -0.5 && hi <= 0.5 && lo < hi)) throw Error(ErrorCode::ConfigInvalid, "chi transition must lie in [-1/2, 1/2]");
}

double OrderProfile::s_bar(double sigma) const {
  const auto& k = s_knots;
  if (k.empty()) return 0.0;
  if (sigma <= k.front().first) return k.front().second;
  if (sigma >= k.back().first) return k.back().second;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    if (sigma <= k[i + 1].first) {
      const double u = (sigma - k[i].first) / (k[i + 1].first - k[i].first);
      return k[i].second + (k[i + 1].second - k[i].second) * smooth_step(u);
    }
  }
  return k.back().second;
}

double OrderProfile::s_at(const std::vector<double>& z) const { return s_bar(z[0] / bracket(z)); }

bool OrderProfile::forward() const { return s_knots.front().second >= s_knots.back().second; }

void OrderProfile::validate() const {
  if (s_knots.size() < 2) throw Error(ErrorCode::ConfigInvalid, "order profile needs at least two knots");
  if (s_knots.front().first < -0.9 || s_knots.back().first > 0.9)
    throw Error(ErrorCode::ConfigInvalid, "s_bar must be constant on [-1, -0.9] and [0.9, 1]");
  int dir = 0;
  for (std::size_t i = 0; i + 1 < s_knots.size(); ++i) {
    if (!(s_knots[i + 1].first > s_knots[i].first)) throw Error(ErrorCode::ConfigInvalid, "knots must be increasing in sigma");
    const double dv = s_knots[i + 1].second - s_knots[i].second;
    const int sd = dv > 0 ? 1 : (dv < 0 ? -1 : 0);
    if (sd != 0 && dir != 0 && sd != dir) throw Error(ErrorCode::ConfigInvalid, "s_bar must be monotone");
    if (sd != 0) dir = sd;
  }
  const double a = s_knots.front().second, b = s_knots.back().second;
  if (!((a > -0.5 && b < -0.5) || (a < -0.5 && b > -0.5)))
    throw Error(ErrorCode::ConfigInvalid, "s_bar must cross the threshold -1/2 between the radial sets");
}

OrderProfile forward_profile(double s_past, double s_future, double m, double ell) {
  OrderProfile o;
  o.m = m;
  o.ell = ell;
  o.s_knots = {{-0.9, s_past}, {0.9, s_future}};
  return o;
}

OrderProfile shifted(const OrderProfile& o, double dm, double ds, double dl) {
  OrderProfile r = o;
  r.m += dm;
  r.ell += dl;
  for (auto& k : r.s_knots) k.second += ds;
  return r;
}

nlohmann::json to_json(const OrderProfile& o) {
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& [s, v] : o.s_knots) knots.push_back({s, v});
  return {{"m", o.m}, {"ell", o.ell}, {"q_minus", o.q_minus}, {"q_plus", o.q_plus}, {"s_knots", knots}};
}

OrderProfile order_profile_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> keys{"m", "ell", "q_minus", "q_plus", "s_knots"};
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw Error(ErrorCode::ConfigInvalid, "order profile: unknown key " + k);
  OrderProfile o;
  try {
    o.m = j.value("m", 0.0);
    o.ell = j.value("ell", 0.0);
    o.q_minus = j.value("q_minus", 0.0);
    o.q_plus = j.value("q_plus", 0.0);
    o.s_knots.clear();
    for (const auto& k : j.at("s_knots")) o.s_knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("order profile: ") + e.what());
  }
  o.validate();
  return o;
}

WeightFn constant_weight(double s) {
  return [s](const std::vector<double>&) { return s; };
}

WeightFn profile_weight(const OrderProfile& o) {
  return [o](const std::vector<double>& z) { return o.s_at(z); };
}

double sc_norm(const GridField& u, double m, const WeightFn& s) {
  require_spacetime(u, "sc_norm");
  return multiplier_norm(u.grid, weighted(u, s),
                         [m](double tau, double xi2) { return std::pow(1.0 + tau * tau + xi2, 0.5 * m); });
}

double natural_norm(const GridField& u, double m, const WeightFn& s, double ell, double h) {
  require_spacetime(u, "natural_norm");
  const double h2 = h * h, h4 = h2 * h2;
  return std::pow(h, -ell) * multiplier_norm(u.grid, weighted(u, s), [=](double tau, double xi2) {
           return std::pow(1.0 + h2 * xi2 + h4 * tau * tau, 0.5 * m);
         });
}

double calc_norm(const GridField& u, double m, const WeightFn& s, double ell, double h) {
  require_spacetime(u, "calc_norm");
  return calc_weight_norm(u, m, weight_field(u.grid, s), ell, h);
}

GridField SplitPair::reconstruct() const {
  const double w = 1.0 / (h * h);
  GridField a = carrier(u_minus, -w), b = carrier(u_plus, w);
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
  return a;
}

SplitPair split_energy(const GridField& u, double h, const ChiProfile& chi) {
  require_spacetime(u, "split_energy");
  if (!(h > 0.0)) throw Error(ErrorCode::ConfigInvalid, "split_energy: h must be positive");
  chi.validate();
  const Grid& g = u.grid;
  auto uh = fft_forward(g, u.v);
  std::vector<cplx> ph(uh.size()), mh(uh.size());
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    const double tn = h * h * g.frequency(0, idx[0]);
    double xn2 = 0.0;
    for (int a = 1; a < g.dims(); ++a) {
      const double f = h * g.frequency(a, idx[a]);
      xn2 += f * f;
    }
    const double q = chi(tn / std::sqrt(1.0 + xn2));
    ph[i] = q * uh[i];
    mh[i] = uh[i] - ph[i];
  });
  GridField qp(g), qm(g);
  qp.v = fft_inverse(g, ph);
  qm.v = fft_inverse(g, mh);
  const double w = 1.0 / (h * h);
  return SplitPair{carrier(qm, w), carrier(qp, -w), h};
}

double calctwo_norm(const GridField& u, double h, const OrderProfile& o, const ChiProfile& chi) {
  const SplitPair sp = split_energy(u, h, chi);
  const std::vector<double> s = weight_field(u.grid, profile_weight(o));
  // an envelope may be pure roundoff, so its unresolved energy is measured
  // against the input rather than against itself
  double total = 0.0;
  for (const auto& x : u.v) total += std::norm(x);
  for (const GridField* e : {&sp.u_plus, &sp.u_minus}) {
    double own = 0.0;
    for (const auto& x : e->v) own += std::norm(x);
    if (top_third_energy(e->grid, e->v) * own > 1e-10 * total)
      throw Error(ErrorCode::SpectrumOverflow, "calctwo_norm: envelope not resolved on the grid");
  }
  return std::pow(h, -o.q_plus) * calc_weight_norm(sp.u_plus, o.m, s, o.ell, h) +
         std::pow(h, -o.q_minus) * calc_weight_norm(sp.u_minus, o.m, s, o.ell, h);
}

nlohmann::json to_json(const FieldSpec& f) {
  return {{"carrier", f.carrier}, {"amplitude", f.amplitude}, {"center", f.center}, {"width", f.width}, {"velocity", f.velocity}};
}

FieldSpec field_spec_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> keys{"carrier", "amplitude", "center", "width", "velocity"};
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw Error(ErrorCode::ConfigInvalid, "field spec: unknown key " + k);
  FieldSpec f;
  try {
    f.carrier = j.value("carrier", 0);
    f.amplitude = j.value("amplitude", 1.0);
    f.center = j.at("center").get<std::vector<double>>();
    f.width = j.at("width").get<std::vector<double>>();
    f.velocity = j.value("velocity", std::vector<double>(f.center.size() - 1, 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("field spec: ") + e.what());
  }
  if (f.carrier < -1 || f.carrier > 1) throw Error(ErrorCode::ConfigInvalid, "field spec: carrier must be -1, 0 or 1");
  if (f.center.size() != f.width.size() || f.velocity.size() + 1 != f.center.size())
    throw Error(ErrorCode::ConfigInvalid, "field spec: inconsistent dimensions");
  for (double w : f.width)
    if (!(w > 0.0)) throw Error(ErrorCode::ConfigInvalid, "field spec: widths must be positive");
  return f;
}

Grid ratio_grid(int d, double c, const RatioGrid& rg) {
  // carrier mode c^2 Lt / 2 pi plus the envelope bandwidth must stay below n/3
  const double modes = c * c * rg.Lt / (2.0 * std::numbers::pi) + 64.0;
  int nt = 16;
  while (nt <= 3.0 * modes) nt *= 2;
  Grid g;
  g.n = {nt};
  g.L = {rg.Lt};
  for (int j = 0; j < d; ++j) {
    g.n.push_back(rg.nx);
    g.L.push_back(rg.Lx);
  }
  g.time_axis = true;
  g.validate();
  return g;
}

GridField manufacture(const FieldSpec& f, const Grid& st, double c) {
  if (static_cast<int>(f.center.size()) != st.dims()) throw Error(ErrorCode::GridMismatch, "field spec dimension");
  return sample_field(st, [&](const std::vector<double>& z) {
    double e = 0.0, ph = f.carrier * c * c * z[0];
    for (int a = 0; a < st.dims(); ++a) {
      const double u = (z[a] - f.center[a]) / f.width[a];
      e += 0.5 * u * u;
    }
    for (std::size_t j = 0; j < f.velocity.size(); ++j) ph += f.velocity[j] * (z[j + 1] - f.center[j + 1]);
    return f.amplitude * std::exp(-e) * std::exp(I * ph);
  });
}

RatioTable uniform_ratio_experiment(const MetricParams& M, const std::vector<FieldSpec>& family,
                                    const std::vector<double>& cs, const OrderProfile& orders,
                                    const RatioGrid& rg, const ChiProfile& chi) {
  M.validate();
  orders.validate();
  if (!orders.forward()) throw Error(ErrorCode::ConfigInvalid, "uniform ratio: expected a forward order profile");
  if (family.empty() || cs.empty()) throw Error(ErrorCode::ConfigInvalid, "uniform ratio: empty family or ladder");
  const OrderProfile lower = shifted(orders, -1.0, 1.0, -1.0);
  RatioTable tab;
  tab.cs = cs;
  std::vector<std::vector<double>> per(family.size());
  for (double c : cs) {
    const Grid st = ratio_grid(M.d, c, rg);
    const double h = 1.0 / c;
    double mx = 0.0;
    for (std::size_t k = 0; k < family.size(); ++k) {
      const GridField u = manufacture(family[k], st, c);
      const GridField Pu = apply_kg_operator(M, c, u);
      if (Pu.l2_norm() < 1e-12) throw Error(ErrorCode::DegenerateFamily, "Pu vanishes for member " + std::to_string(k));
      RatioRow r;
      r.c = c;
      r.member = static_cast<int>(k);
      r.num = calctwo_norm(u, h, orders, chi);
      r.den = calctwo_norm(Pu, h, lower, chi);
      r.ratio = r.num / r.den;
      per[k].push_back(r.ratio);
      mx = std::max(mx, r.ratio);
      tab.rows.push_back(r);
    }
    tab.max_per_c.push_back(mx);
  }
  const auto [lo, hi] = std::minmax_element(tab.max_per_c.begin(), tab.max_per_c.end());
  tab.spread = *hi / *lo;
  for (const auto& p : per) tab.worst_growth = std::max(tab.worst_growth, p.back() / p.front());
  return tab;
}

std::vector<FieldSpec> default_family(int d) {
  std::vector<FieldSpec> fam;
  const double centers[4][2] = {{0.0, 0.0}, {-1.0, 2.0}, {1.0, -3.0}, {0.5, 4.0}};
  const double vel[4] = {0.0, 1.0, -0.5, 2.0};
  for (int carrier : {-1, 0, 1}) {
    for (int j = 0; j < 4; ++j) {
      FieldSpec f;
      f.carrier = carrier;
      f.center = {centers[j][0]};
      f.width = {0.7};
      for (int a = 0; a < d; ++a) {
        f.center.push_back(a == 0 ? centers[j][1] : 0.0);
        f.width.push_back(1.5);
        f.velocity.push_back(a == 0 ? vel[j] : 0.0);
      }
      fam.push_back(f);
    }
  }
  return fam;
}

}  // namespace nrl

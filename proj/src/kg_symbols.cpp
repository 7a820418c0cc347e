#include "nrl/kg_symbols.hpp"

#include <cmath>
#include <random>
#include <set>

#include "nrl/error.hpp"

namespace nrl {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, std::string(what) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw Error(ErrorCode::ConfigInvalid, std::string("unknown key '") + it.key() + "' in " + what);
}

nlohmann::json profile_json(const ClassicalSymbolProfile& p) {
  nlohmann::json j;
  j["A"] = p.A;
  j["r"] = p.r;
  j["g0"] = p.g0;
  j["terms"] = nlohmann::json::array();
  for (const auto& t : p.terms) j["terms"].push_back({{"k", t.k}, {"a", t.a}, {"b", t.b}});
  return j;
}

ClassicalSymbolProfile profile_from(const nlohmann::json& j) {
  check_keys(j, {"A", "r", "g0", "terms"}, "profile");
  ClassicalSymbolProfile p;
  try {
    p.A = j.value("A", 0.0);
    p.r = j.value("r", -1);
    p.g0 = j.value("g0", 1.0);
    if (j.contains("terms")) {
      for (const auto& t : j.at("terms")) {
        check_keys(t, {"k", "a", "b"}, "trig term");
        TrigTerm term;
        term.k = t.at("k").get<std::vector<int>>();
        term.a = t.value("a", 0.0);
        term.b = t.value("b", 0.0);
        p.terms.push_back(term);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("profile: ") + e.what());
  }
  return p;
}

nlohmann::json complex_json(const ComplexProfile& p) {
  return {{"re", profile_json(p.re)}, {"im", profile_json(p.im)}};
}

ComplexProfile complex_from(const nlohmann::json& j) {
  check_keys(j, {"re", "im"}, "complex profile");
  ComplexProfile p;
  if (j.contains("re")) p.re = profile_from(j.at("re"));
  if (j.contains("im")) p.im = profile_from(j.at("im"));
  return p;
}

bool same_profile(const ClassicalSymbolProfile& a, const ClassicalSymbolProfile& b) {
  return profile_json(a) == profile_json(b);
}

void check_profile(const ClassicalSymbolProfile& p, int n, int max_order, const std::string& name) {
  if (p.is_zero()) return;
  if (p.r > max_order)
    throw Error(ErrorCode::ConfigInvalid, name + ": decay order must be <= " + std::to_string(max_order));
  for (const auto& t : p.terms)
    if (static_cast<int>(t.k.size()) != n)
      throw Error(ErrorCode::ConfigInvalid, name + ": wave vector length must be 1 + d");
}

ClassicalSymbolProfile random_profile(int n, double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> ki(-1, 1);
  ClassicalSymbolProfile p;
  p.r = -1;
  p.g0 = 1.0;
  TrigTerm t;
  t.k.resize(static_cast<std::size_t>(n));
  for (int& v : t.k) v = ki(rng);
  t.a = 0.3 * u(rng);
  t.b = 0.3 * u(rng);
  p.terms.push_back(t);
  p.A = amplitude * u(rng) / p.coefficient_norm();
  return p;
}

int sgn(double v) { return v < 0.0 ? -1 : 1; }

}  // namespace

const char* branch_name(SignBranch b) { return b == SignBranch::Plus ? "plus" : "minus"; }

SignBranch parse_branch(const std::string& s) {
  if (s == "plus" || s == "+") return SignBranch::Plus;
  if (s == "minus" || s == "-") return SignBranch::Minus;
  throw Error(ErrorCode::ConfigInvalid, "branch must be plus or minus");
}

double ClassicalSymbolProfile::angular(const std::vector<double>& Z) const {
  double g = g0;
  for (const auto& t : terms) {
    double phase = 0.0;
    for (std::size_t i = 0; i < Z.size(); ++i) phase += t.k[i] * Z[i];
    g += t.a * std::cos(phase) + t.b * std::sin(phase);
  }
  return g;
}

double ClassicalSymbolProfile::value(const std::vector<double>& z) const {
  if (A == 0.0) return 0.0;
  double n2 = 0.0;
  for (double v : z) n2 += v * v;
  const double br = std::sqrt(1.0 + n2);
  std::vector<double> Z(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) Z[i] = z[i] / br;
  return A * std::pow(br, r) * angular(Z);
}

std::vector<double> ClassicalSymbolProfile::gradient(const std::vector<double>& z) const {
  const std::size_t n = z.size();
  std::vector<double> g(n, 0.0);
  if (A == 0.0) return g;
  double n2 = 0.0;
  for (double v : z) n2 += v * v;
  const double br = std::sqrt(1.0 + n2);
  std::vector<double> Z(n), dg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) Z[i] = z[i] / br;
  for (const auto& t : terms) {
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) phase += t.k[i] * Z[i];
    const double amp = -t.a * std::sin(phase) + t.b * std::cos(phase);
    for (std::size_t i = 0; i < n; ++i) dg[i] += amp * t.k[i];
  }
  const double pw = std::pow(br, r);
  const double ang = angular(Z);
  double zdg = 0.0;
  for (std::size_t k = 0; k < n; ++k) zdg += Z[k] * dg[k];
  // d Z_k / d z_i = (delta_ki - Z_k Z_i) / <z>
  for (std::size_t i = 0; i < n; ++i)
    g[i] = A * pw / br * (r * Z[i] * ang + dg[i] - Z[i] * zdg);
  return g;
}

double ClassicalSymbolProfile::coefficient_norm() const {
  double s = std::abs(g0);
  for (const auto& t : terms) s += std::abs(t.a) + std::abs(t.b);
  return s;
}

ClassicalSymbolProfile bracket_profile(double A, int r) {
  ClassicalSymbolProfile p;
  p.A = A;
  p.r = r;
  return p;
}

void MetricParams::validate() const {
  if (d < 1 || d > 3) throw Error(ErrorCode::ConfigInvalid, "d must be 1, 2 or 3");
  const int n = d + 1;
  if (static_cast<int>(w.size()) != d || static_cast<int>(hjk.size()) != d ||
      static_cast<int>(B.size()) != d)
    throw Error(ErrorCode::ConfigInvalid, "profile arrays must have d entries");
  check_profile(alpha, n, -1, "alpha");
  for (int j = 0; j < d; ++j) {
    check_profile(w[j], n, -1, "w");
    if (static_cast<int>(hjk[j].size()) != d) throw Error(ErrorCode::ConfigInvalid, "h must be d x d");
    for (int k = 0; k < d; ++k) {
      check_profile(hjk[j][k], n, -1, "h");
      if (!same_profile(hjk[j][k], hjk[k][j])) throw Error(ErrorCode::ConfigInvalid, "h must be symmetric");
    }
    check_profile(B[j].re, n, -1, "B.re");
    if (!B[j].im.is_zero()) throw Error(ErrorCode::ConfigInvalid, "Im B must vanish");
  }
  check_profile(beta.re, n, -1, "beta.re");
  check_profile(beta.im, n, -2, "beta.im");
  check_profile(W.re, n, -1, "W.re");
  check_profile(W.im, n, -2, "W.im");
}

bool MetricParams::metric_is_free() const {
  if (!alpha.is_zero()) return false;
  for (int j = 0; j < d; ++j) {
    if (!w[j].is_zero()) return false;
    for (int k = 0; k < d; ++k)
      if (!hjk[j][k].is_zero()) return false;
  }
  return true;
}

MetricParams free_metric(int d) {
  MetricParams m;
  m.d = d;
  m.w.assign(static_cast<std::size_t>(d), {});
  m.hjk.assign(static_cast<std::size_t>(d), std::vector<ClassicalSymbolProfile>(static_cast<std::size_t>(d)));
  m.B.assign(static_cast<std::size_t>(d), {});
  return m;
}

MetricParams random_metric(int d, double amplitude, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  MetricParams m = free_metric(d);
  const int n = d + 1;
  m.alpha = random_profile(n, amplitude, rng);
  for (int j = 0; j < d; ++j) m.w[j] = random_profile(n, amplitude, rng);
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      m.hjk[j][k] = random_profile(n, amplitude, rng);
      m.hjk[k][j] = m.hjk[j][k];
    }
  return m;
}

nlohmann::json to_json(const MetricParams& m) {
  nlohmann::json j;
  j["d"] = m.d;
  j["alpha"] = profile_json(m.alpha);
  j["w"] = nlohmann::json::array();
  for (const auto& p : m.w) j["w"].push_back(profile_json(p));
  j["h"] = nlohmann::json::array();
  for (const auto& row : m.hjk) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& p : row) r.push_back(profile_json(p));
    j["h"].push_back(r);
  }
  j["beta"] = complex_json(m.beta);
  j["B"] = nlohmann::json::array();
  for (const auto& p : m.B) j["B"].push_back(complex_json(p));
  j["W"] = complex_json(m.W);
  return j;
}

MetricParams metric_from_json(const nlohmann::json& j) {
  check_keys(j, {"d", "alpha", "w", "h", "beta", "B", "W"}, "metric");
  if (!j.contains("d") || !j.at("d").is_number_integer())
    throw Error(ErrorCode::ConfigInvalid, "metric.d must be an integer");
  const int d = j.at("d").get<int>();
  if (d < 1 || d > 3) throw Error(ErrorCode::ConfigInvalid, "d must be 1, 2 or 3");
  MetricParams m = free_metric(d);
  if (j.contains("alpha")) m.alpha = profile_from(j.at("alpha"));
  auto list = [&](const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || static_cast<int>(a.size()) != d)
      throw Error(ErrorCode::ConfigInvalid, std::string("metric.") + key + " must have d entries");
    return a;
  };
  if (j.contains("w")) {
    const auto a = list("w");
    for (int k = 0; k < d; ++k) m.w[k] = profile_from(a[k]);
  }
  if (j.contains("h")) {
    const auto a = list("h");
    for (int r = 0; r < d; ++r) {
      if (!a[r].is_array() || static_cast<int>(a[r].size()) != d)
        throw Error(ErrorCode::ConfigInvalid, "metric.h must be d x d");
      for (int k = 0; k < d; ++k) m.hjk[r][k] = profile_from(a[r][k]);
    }
  }
  if (j.contains("beta")) m.beta = complex_from(j.at("beta"));
  if (j.contains("B")) {
    const auto a = list("B");
    for (int k = 0; k < d; ++k) m.B[k] = complex_from(a[k]);
  }
  if (j.contains("W")) m.W = complex_from(j.at("W"));
  m.validate();
  return m;
}

Eigen::MatrixXd perturbation_matrix(const MetricParams& M, const std::vector<double>& z) {
  const int n = M.d + 1;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  P(0, 0) = M.alpha.value(z);
  for (int j = 0; j < M.d; ++j) {
    P(0, j + 1) = P(j + 1, 0) = 0.5 * M.w[j].value(z);
    for (int k = 0; k < M.d; ++k) P(j + 1, k + 1) = M.hjk[j][k].value(z);
  }
  return P;
}

Eigen::MatrixXd metric_matrix(const MetricParams& M, const std::vector<double>& z, double c) {
  const int n = M.d + 1;
  const Eigen::MatrixXd P = perturbation_matrix(M, z);
  Eigen::MatrixXd g(n, n);
  g(0, 0) = -c * c + P(0, 0);
  for (int j = 1; j < n; ++j) {
    g(0, j) = g(j, 0) = P(0, j) / c;
    for (int k = 1; k < n; ++k) g(j, k) = (j == k ? 1.0 : 0.0) + P(j, k) / (c * c);
  }
  return g;
}

Eigen::MatrixXd scaled_inverse_metric_at_infinity(int d) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(d + 1, d + 1);
  K(0, 0) = -1.0;
  return K;
}

Eigen::MatrixXd scaled_inverse_metric(const MetricParams& M, const std::vector<double>& z, double h) {
  Eigen::MatrixXd gh = scaled_inverse_metric_at_infinity(M.d) + h * h * perturbation_matrix(M, z);
  const double det = gh.determinant();
  if (std::abs(det) < 1e-12) throw Error(ErrorCode::DegenerateMetric, "metric determinant vanishes");
  return gh.inverse();
}

Eigen::MatrixXd inverse_metric(const MetricParams& M, const std::vector<double>& z, double c) {
  const Eigen::MatrixXd K = scaled_inverse_metric(M, z, 1.0 / c);
  Eigen::MatrixXd G = K;
  const int n = M.d + 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) *= (i == 0 ? 1.0 / c : 1.0) * (j == 0 ? 1.0 / c : 1.0);
  return G;
}

AlephResult aleph_detail(const MetricParams& M, const std::vector<double>& z) {
  AlephResult res;
  const Eigen::MatrixXd P = perturbation_matrix(M, z);
  Eigen::MatrixXd eta = scaled_inverse_metric_at_infinity(M.d);
  for (double c : {1.0e3, 2.0e3, 4.0e3}) {
    // (K_00 + 1) / h^2 through the resolvent identity, free of cancellation
    const Eigen::MatrixXd K = scaled_inverse_metric(M, z, 1.0 / c);
    res.estimates.push_back(-(K * P * eta)(0, 0));
  }
  const auto& e = res.estimates;
  const double r1 = (4.0 * e[1] - e[0]) / 3.0;
  const double r1b = (4.0 * e[2] - e[1]) / 3.0;
  res.value = (16.0 * r1b - r1) / 15.0;
  res.consistency = std::abs(r1b - r1) / std::max(1.0, std::abs(res.value));
  if (res.consistency > 1e-6) throw Error(ErrorCode::ExtrapolationUnstable, "aleph estimates disagree");
  return res;
}

double aleph(const MetricParams& M, const std::vector<double>& z) { return aleph_detail(M, z).value; }

double natural_symbol(const Eigen::MatrixXd& K, double tau_nat, const std::vector<double>& xi_nat,
                      SignBranch b) {
  const int n = static_cast<int>(K.rows());
  Eigen::VectorXd zeta(n);
  zeta(0) = tau_nat;
  for (int j = 1; j < n; ++j) zeta(j) = xi_nat[static_cast<std::size_t>(j - 1)];
  return -zeta.dot(K * zeta) + 2.0 * branch_sign(b) * tau_nat;
}

double eval_p(const PhasePoint& p, const MetricParams& M, SignBranch b) {
  std::vector<double> z{p.t};
  z.insert(z.end(), p.x.begin(), p.x.end());
  const double q = natural_symbol(scaled_inverse_metric(M, z, p.h), p.tau_nat, p.xi_nat, b);
  return p.h > 0.0 ? q / (p.h * p.h) : q;
}

std::vector<double> chart_base_point(const ChartCoords& cc) {
  if (cc.base.kind == BaseKind::None) throw Error(ErrorCode::OutOfChart, "chart has no base coordinates");
  const std::vector<double> bc(cc.coords.begin(), cc.coords.begin() + cc.d + 1);
  if (cc.base.kind != BaseKind::Interior && bc[0] <= 0.0) return {};
  return base_from_chart(bc, cc.base);
}

double chart_h(const ChartCoords& cc) {
  switch (cc.chart.tag) {
    case ChartTag::NatInterior:
    case ChartTag::DfProjective:
    case ChartTag::PfStandard: return cc.fiber(cc.d + 1);
    case ChartTag::PfNatParabolic: return cc.fiber(0) * cc.fiber(cc.d + 1);
    default: throw Error(ErrorCode::OutOfChart, "frequency-only chart");
  }
}

double chart_tau_nat(const ChartCoords& cc) {
  const int s = cc.chart.sign;
  switch (cc.chart.tag) {
    case ChartTag::NatInterior: return cc.fiber(0);
    case ChartTag::DfProjective: return cc.fiber(0) > 0.0 ? s / cc.fiber(0) : s * INFINITY;
    case ChartTag::PfStandard: {
      const double h = cc.fiber(cc.d + 1);
      return h * h * cc.fiber(0);
    }
    case ChartTag::PfNatParabolic: return s * cc.fiber(cc.d + 1) * cc.fiber(cc.d + 1);
    default: throw Error(ErrorCode::OutOfChart, "frequency-only chart");
  }
}

namespace {

double chart_symbol(const ChartCoords& cc, const Eigen::MatrixXd& K, SignBranch b) {
  const int d = cc.d;
  const double pm = branch_sign(b);
  const int s = cc.chart.sign;
  auto quad = [&](double a0, double scale0) {
    // -(a0^2 K00 scale0^2 + 2 a0 scale0 K0j v_j + v K v) with v the fiber xi slots
    double v = K(0, 0) * a0 * a0 * scale0 * scale0;
    for (int j = 0; j < d; ++j) {
      const double xj = cc.fiber(1 + j);
      v += 2.0 * K(0, j + 1) * a0 * scale0 * xj;
      for (int k = 0; k < d; ++k) v += K(j + 1, k + 1) * xj * cc.fiber(1 + k);
    }
    return -v;
  };
  switch (cc.chart.tag) {
    case ChartTag::NatInterior: return quad(cc.fiber(0), 1.0) + 2.0 * pm * cc.fiber(0);
    case ChartTag::DfProjective: return quad(s, 1.0) + 2.0 * pm * s * cc.fiber(0);
    case ChartTag::PfStandard: {
      const double h = cc.fiber(d + 1);
      return quad(cc.fiber(0), h) + 2.0 * pm * cc.fiber(0);
    }
    case ChartTag::PfNatParabolic: return quad(s, cc.fiber(d + 1)) + 2.0 * pm * s;
    default: throw Error(ErrorCode::OutOfChart, "frequency-only chart");
  }
}

}  // namespace

double eval_p(const ChartCoords& cc, const MetricParams& M, SignBranch b) {
  const std::vector<double> z = chart_base_point(cc);
  const double h = chart_h(cc);
  const Eigen::MatrixXd K = z.empty() ? scaled_inverse_metric_at_infinity(cc.d) : scaled_inverse_metric(M, z, h);
  return chart_symbol(cc, K, b);
}

double eval_p0(const ChartCoords& cc, SignBranch b) {
  return chart_symbol(cc, scaled_inverse_metric_at_infinity(cc.d), b);
}

double rescaled_p0(const ChartCoords& cc, SignBranch b) {
  double xi2 = 0.0;
  for (int j = 1; j <= cc.d; ++j) xi2 += cc.fiber(j) * cc.fiber(j);
  const double tau = cc.fiber(0);
  double w = 1.0;
  if (cc.chart.tag == ChartTag::NatInterior) {
    w = 1.0 + tau * tau + xi2;
  } else if (cc.chart.tag == ChartTag::PfStandard) {
    const double h = cc.fiber(cc.d + 1);
    w = 1.0 + std::abs(tau) + xi2 + h * h * tau * tau;
  }
  return eval_p0(cc, b) / w;
}

const char* char_class_name(CharClass c) {
  switch (c) {
    case CharClass::Sigma: return "Sigma";
    case CharClass::SigmaBad: return "SigmaBad";
    case CharClass::Off: return "Off";
  }
  return "?";
}

CharClass char_membership(const ChartCoords& cc, const MetricParams& M, SignBranch b, double tol) {
  if (std::abs(eval_p(cc, M, b)) > tol) return CharClass::Off;
  return branch_sign(b) * chart_tau_nat(cc) > -1.0 ? CharClass::Sigma : CharClass::SigmaBad;
}

CharClass char_membership(const PhasePoint& p, const MetricParams& M, SignBranch b, double tol) {
  return char_membership(to_chart(p, ChartId{ChartTag::NatInterior, 0, 1}), M, b, tol);
}

namespace {

double good_root(double a, double bq, double c) {
  // root of a x^2 + bq x + c that tends to -c/bq as a -> 0
  const double disc = bq * bq - 4.0 * a * c;
  if (disc < 0.0) throw Error(ErrorCode::OutOfChart, "no real point on the characteristic set");
  const double den = bq + sgn(bq) * std::sqrt(disc);
  if (den == 0.0) throw Error(ErrorCode::OutOfChart, "degenerate characteristic equation");
  return -2.0 * c / den;
}

}  // namespace

double solve_tau_nat(const MetricParams& M, const std::vector<double>& z, const std::vector<double>& xi_nat,
                     double h, SignBranch b) {
  const Eigen::MatrixXd K = z.empty() ? scaled_inverse_metric_at_infinity(M.d) : scaled_inverse_metric(M, z, h);
  double k0 = 0.0, kk = 0.0;
  for (int j = 0; j < M.d; ++j) {
    k0 += K(0, j + 1) * xi_nat[j];
    for (int k = 0; k < M.d; ++k) kk += K(j + 1, k + 1) * xi_nat[j] * xi_nat[k];
  }
  return good_root(-K(0, 0), -2.0 * k0 + 2.0 * branch_sign(b), -kk);
}

double solve_tau_std(const MetricParams& M, const std::vector<double>& z, const std::vector<double>& xi,
                     double h, SignBranch b) {
  const Eigen::MatrixXd K = z.empty() ? scaled_inverse_metric_at_infinity(M.d) : scaled_inverse_metric(M, z, h);
  double k0 = 0.0, kk = 0.0;
  for (int j = 0; j < M.d; ++j) {
    k0 += K(0, j + 1) * xi[j];
    for (int k = 0; k < M.d; ++k) kk += K(j + 1, k + 1) * xi[j] * xi[k];
  }
  return good_root(-K(0, 0) * h * h, -2.0 * h * k0 + 2.0 * branch_sign(b), -kk);
}

std::vector<double> free_velocity(const ChartCoords& cc, SignBranch b) {
  const int d = cc.d;
  const double pm = branch_sign(b);
  std::vector<double> v(static_cast<std::size_t>(d + 1));
  switch (cc.chart.tag) {
    case ChartTag::NatInterior: {
      const double h = cc.fiber(d + 1);
      v[0] = h * (cc.fiber(0) + pm);
      for (int j = 0; j < d; ++j) v[j + 1] = -cc.fiber(1 + j);
      break;
    }
    case ChartTag::DfProjective: {
      const double h = cc.fiber(d + 1);
      v[0] = h * (cc.chart.sign + pm * cc.fiber(0));
      for (int j = 0; j < d; ++j) v[j + 1] = -cc.fiber(1 + j);
      break;
    }
    case ChartTag::PfStandard: {
      const double h = cc.fiber(d + 1);
      v[0] = h * h * cc.fiber(0) + pm;
      for (int j = 0; j < d; ++j) v[j + 1] = -cc.fiber(1 + j);
      break;
    }
    case ChartTag::PfNatParabolic: {
      const double rpf = cc.fiber(d + 1);
      v[0] = cc.fiber(0) * (cc.chart.sign * rpf * rpf + pm);
      for (int j = 0; j < d; ++j) v[j + 1] = -cc.fiber(1 + j);
      break;
    }
    default: throw Error(ErrorCode::OutOfChart, "frequency-only chart");
  }
  return v;
}

std::vector<double> future_direction(const ChartCoords& cc, SignBranch b) {
  std::vector<double> v = free_velocity(cc, b);
  double n = 0.0;
  for (double a : v) n += a * a;
  n = std::sqrt(n);
  if (n == 0.0) throw Error(ErrorCode::ChartUnavailable, "flow direction vanishes");
  for (double& a : v) a *= branch_sign(b) / n;
  return v;
}

RadialPoint radial_point(const std::vector<double>& xi_nat, double h, RadialSide side, SignBranch b,
                         int axis) {
  const int d = static_cast<int>(xi_nat.size());
  const double pm = branch_sign(b);
  RadialPoint rp;
  rp.varsigma = side == RadialSide::Future ? 1 : -1;
  double xi2 = 0.0;
  for (double v : xi_nat) xi2 += v * v;
  const double root = std::sqrt(1.0 + xi2);
  rp.point = make_point(0.0, std::vector<double>(static_cast<std::size_t>(d), 0.0),
                        pm * (xi2 / (root + 1.0)), xi_nat, h);

  ChartCoords fib;
  fib.d = d;
  fib.base.kind = BaseKind::None;
  std::vector<double> omega(static_cast<std::size_t>(d + 1));
  if (h == 0.0 && xi2 == 0.0) {
    // pf corner: tau = xi = 0 at h = 0
    fib.chart = {ChartTag::PfStandard, 0, 1};
    fib.coords.assign(static_cast<std::size_t>(d + 2), 0.0);
    omega[0] = rp.varsigma;
  } else {
    fib.chart = {ChartTag::NatInterior, 0, 1};
    fib.coords.push_back(rp.point.tau_nat);
    for (double v : xi_nat) fib.coords.push_back(v);
    fib.coords.push_back(h);
    omega[0] = rp.varsigma * h * root;
    for (int j = 0; j < d; ++j) omega[j + 1] = -rp.varsigma * pm * xi_nat[j];
  }
  double n = 0.0;
  for (double a : omega) n += a * a;
  n = std::sqrt(n);
  for (double& a : omega) a /= n;
  rp.omega = omega;

  rp.chart.chart = fib.chart;
  rp.chart.d = d;
  rp.chart.base = radial_base_chart(omega, axis);
  rp.chart.coords.assign(static_cast<std::size_t>(d + 1), 0.0);
  rp.chart.coords.insert(rp.chart.coords.end(), fib.coords.begin(), fib.coords.end());
  rp.chart.bdf = bdf_values(rp.point);
  rp.chart.bdf.rho_bf = 0.0;
  return rp;
}

}  // namespace nrl

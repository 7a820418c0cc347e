#pragma once

// Metric family g(c) = eta + alpha dt^2 + sum (w_j/c) dt dx_j + c^-2 sum h_jk dx_j dx_k
// with eta = -c^2 dt^2 + dx^2, and the lower-order coefficients beta, B, W.
//
// In the rescaled time t' = c t the metric reads eta' + h^2 P(z) with
// P_00 = alpha, P_0j = w_j / 2, P_jk = h_jk. Its inverse K(z, h) is what the
// symbol code works with: h^2 g^{-1}(zeta, zeta) = K(zeta_nat, zeta_nat).

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrl/phase_geometry.hpp"

namespace nrl {

enum class SignBranch { Plus, Minus };

inline double branch_sign(SignBranch b) { return b == SignBranch::Plus ? 1.0 : -1.0; }
const char* branch_name(SignBranch b);
SignBranch parse_branch(const std::string& s);

struct TrigTerm {
  std::vector<int> k;  // wave vector over (t, x), acting on z / <z>
  double a = 0.0;      // cosine coefficient
  double b = 0.0;      // sine coefficient
};

// f(z) = A (1 + |z|^2)^{r/2} g(z / <z>), g = g0 + sum a cos(k.Z) + b sin(k.Z).
struct ClassicalSymbolProfile {
  double A = 0.0;
  int r = -1;
  double g0 = 1.0;
  std::vector<TrigTerm> terms;

  bool is_zero() const { return A == 0.0; }
  double value(const std::vector<double>& z) const;
  double angular(const std::vector<double>& Z) const;
  std::vector<double> gradient(const std::vector<double>& z) const;
  double coefficient_norm() const;
};

ClassicalSymbolProfile bracket_profile(double A, int r = -1);

struct ComplexProfile {
  ClassicalSymbolProfile re;
  ClassicalSymbolProfile im;

  std::complex<double> value(const std::vector<double>& z) const {
    return {re.value(z), im.value(z)};
  }
};

struct MetricParams {
  int d = 1;
  ClassicalSymbolProfile alpha;
  std::vector<ClassicalSymbolProfile> w;                 // d entries
  std::vector<std::vector<ClassicalSymbolProfile>> hjk;  // d x d, symmetric
  ComplexProfile beta;
  std::vector<ComplexProfile> B;  // d entries
  ComplexProfile W;

  // Throws ConfigInvalid on a broken invariant.
  void validate() const;
  bool metric_is_free() const;
};

MetricParams free_metric(int d);
// Random order -1 profiles with amplitudes at most `amplitude` on the metric terms.
MetricParams random_metric(int d, double amplitude, unsigned long long seed);

nlohmann::json to_json(const MetricParams& m);
MetricParams metric_from_json(const nlohmann::json& j);

// P(z) in the rescaled frame; (1+d) x (1+d) symmetric.
Eigen::MatrixXd perturbation_matrix(const MetricParams& M, const std::vector<double>& z);
Eigen::MatrixXd metric_matrix(const MetricParams& M, const std::vector<double>& z, double c);
Eigen::MatrixXd scaled_inverse_metric(const MetricParams& M, const std::vector<double>& z, double h);
// Value at spacetime infinity: the Minkowski limit.
Eigen::MatrixXd scaled_inverse_metric_at_infinity(int d);
Eigen::MatrixXd inverse_metric(const MetricParams& M, const std::vector<double>& z, double c);

struct AlephResult {
  double value = 0.0;
  double consistency = 0.0;
  std::vector<double> estimates;  // c^4 (g^00 + c^-2) at each c
};

AlephResult aleph_detail(const MetricParams& M, const std::vector<double>& z);
double aleph(const MetricParams& M, const std::vector<double>& z);

// -K(zeta_nat, zeta_nat) +- 2 tau_nat
double natural_symbol(const Eigen::MatrixXd& K, double tau_nat, const std::vector<double>& xi_nat,
                      SignBranch b);

// Unrescaled symbol p at an interior point with h > 0; for h = 0 the natural
// rescaling h^2 p is returned instead.
double eval_p(const PhasePoint& p, const MetricParams& M, SignBranch b);
// Rescaled symbol in chart coordinates using the chart's local bdfs.
double eval_p(const ChartCoords& cc, const MetricParams& M, SignBranch b);
double eval_p0(const ChartCoords& cc, SignBranch b);
// eval_p0 divided by the chart's fiber weight: 1 + tau^2 + |xi|^2 in NatInterior,
// 1 + |tau| + |xi|^2 + h^2 tau^2 in PfStandard, 1 in the compact charts. Bounded
// on the chart, so its size measures the residual rather than the coordinates.
double rescaled_p0(const ChartCoords& cc, SignBranch b);

// Base point of a chart point; empty when it lies on bf.
std::vector<double> chart_base_point(const ChartCoords& cc);
double chart_h(const ChartCoords& cc);
// tau_nat of a chart point, +-infinity at df.
double chart_tau_nat(const ChartCoords& cc);

enum class CharClass { Sigma, SigmaBad, Off };
const char* char_class_name(CharClass c);

constexpr double kCharTol = 1e-9;

CharClass char_membership(const ChartCoords& cc, const MetricParams& M, SignBranch b,
                          double tol = kCharTol);
CharClass char_membership(const PhasePoint& p, const MetricParams& M, SignBranch b,
                          double tol = kCharTol);

// Good-sheet root tau_nat of the natural symbol at base point z.
double solve_tau_nat(const MetricParams& M, const std::vector<double>& z,
                     const std::vector<double>& xi_nat, double h, SignBranch b);
// Good-sheet root tau of the standard symbol (pf chart) at base point z.
double solve_tau_std(const MetricParams& M, const std::vector<double>& z, const std::vector<double>& xi,
                     double h, SignBranch b);

enum class RadialSide { Past, Future };

struct RadialPoint {
  PhasePoint point;            // fiber data; t, x are zero
  std::vector<double> omega;   // unit spacetime direction
  ChartCoords chart;           // radial base chart at rho_bf = 0
  int varsigma = 1;
};

// Free base velocity (h(tau_nat +- 1), -xi_nat) of the natural chart, or
// (h^2 tau +- 1, -xi) of the pf chart.
std::vector<double> free_velocity(const ChartCoords& cc, SignBranch b);
// Base direction of R_+ over the fiber of cc.
std::vector<double> future_direction(const ChartCoords& cc, SignBranch b);

// axis < 0 picks the dominant component of omega for the radial chart.
RadialPoint radial_point(const std::vector<double>& xi_nat, double h, RadialSide side, SignBranch b,
                         int axis = -1);

}  // namespace nrl

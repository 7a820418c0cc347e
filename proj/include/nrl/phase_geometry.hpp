#pragma once

// Charts and boundary-defining functions of the resolved phase space.
//
// A ChartCoords stores base coordinates first and fiber coordinates after
// them. Fiber layouts, with d the spatial dimension:
//   NatInterior     (tau_nat, xi_nat[d], h)
//   DfProjective    (rho_df, xihat[d], h)          rho_df = 1/|tau_nat|
//   PfStandard      (tau, xi[d], h)
//   PfNatParabolic  (rho_nf, xihat[d], rho_pf)     rho_nf = |tau|^{-1/2}
//   ParFreqTau      (rho, xihat[d])                frequency space only
//   ParFreqXi(k)    (rho, tauhat, xihat[j != k])   frequency space only
// Base layouts:
//   Interior        (t, x[d])
//   Projective      (rho, y[j != axis])            rho = 1/|z_axis|, y = z/z_axis
//   Radial          (rho, y[j != axis] - y_R)      y_R fixed by the fiber
//   None            no base coordinates

#include <array>
#include <cstddef>
#include <vector>

namespace nrl {

struct PhasePoint {
  double t = 0.0;
  std::vector<double> x;
  double tau_nat = 0.0;
  std::vector<double> xi_nat;
  double h = 0.0;

  int dim() const { return static_cast<int>(x.size()); }
  // standard frequencies, only for h > 0
  double tau() const { return tau_nat / (h * h); }
  std::vector<double> xi() const;
};

PhasePoint make_point(double t, std::vector<double> x, double tau_nat, std::vector<double> xi_nat,
                      double h);

enum class ChartTag { NatInterior, DfProjective, PfStandard, PfNatParabolic, ParFreqTau, ParFreqXi };

struct ChartId {
  ChartTag tag = ChartTag::NatInterior;
  int k = 0;     // 1-based distinguished axis for ParFreqXi
  int sign = 1;  // sign of tau (or xi_k) on the chart component
};

enum class BaseKind { Interior, Projective, Radial, None };

struct BaseChart {
  BaseKind kind = BaseKind::Interior;
  int axis = 0;  // 0 is t, j >= 1 is x_j
  int sign = 1;
  std::vector<double> shift;  // y_R for Radial, one entry per j != axis
};

struct BdfValues {
  double rho_df = 1.0;
  double rho_bf = 1.0;
  double rho_nf = 1.0;
  double rho_pf = 1.0;
};

struct ChartCoords {
  ChartId chart;
  BaseChart base;
  int d = 1;
  std::vector<double> coords;
  BdfValues bdf;

  int base_size() const { return base.kind == BaseKind::None ? 0 : d + 1; }
  double fiber(int i) const { return coords[static_cast<std::size_t>(base_size() + i)]; }
  double& fiber(int i) { return coords[static_cast<std::size_t>(base_size() + i)]; }
};

const char* chart_name(ChartId c);
const char* base_name(BaseKind k);

// Smooth cutoff: 1 for r <= 1, 0 for r >= 2.
double cutoff_chi(double r);

double rho_bf_global(double t, const std::vector<double>& x);
// rho_nf / h, finite at h = 0 away from zeta_nat = 0
double natural_ratio(double tau_nat, const std::vector<double>& xi_nat, double h);

BdfValues bdf_values(const PhasePoint& p);

ChartCoords to_chart(const PhasePoint& p, ChartId c);
PhasePoint from_chart(const ChartCoords& cc);

std::vector<double> base_to_chart(const std::vector<double>& z, const BaseChart& b);
// Throws OnBoundary when rho = 0 in a Projective or Radial chart.
std::vector<double> base_from_chart(const std::vector<double>& bc, const BaseChart& b);
// Projective chart on the axis where |z_j| is largest.
BaseChart dominant_base_chart(const std::vector<double>& z);
// Radial chart centred on the bf point in direction `dir`, projective on
// `axis` (the dominant one when axis < 0).
BaseChart radial_base_chart(const std::vector<double>& dir, int axis = -1);

// Parabolic compactification of (tau, xi) space.
ChartCoords parabolic_chart(double tau, const std::vector<double>& xi, ChartId c);
ChartCoords parabolic_chart(double tau, const std::vector<double>& xi);  // chart by dominance
void parabolic_inverse(const ChartCoords& cc, double& tau, std::vector<double>& xi);

enum class BDirection { dTau, dXi };

struct ParabolicRay {
  double tau0 = 1.0;
  std::vector<double> xi0{0.0};
  double s_min = 10.0;
  double s_max = 1.0e3;
  int samples = 16;
};

struct BOrderFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
};

// `xi_axis` is 1-based and used for dXi.
BOrderFit b_order_fit(BDirection dir, int xi_axis, ChartId chart, const ParabolicRay& ray);

// Fourth-order central difference.
template <class F>
double central_diff4(F&& f, double x, double step) {
  return (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step) + f(x - 2 * step)) / (12 * step);
}

}  // namespace nrl

#pragma once

// Rescaled Hamiltonian vector field on the resolved phase space.
//
// ham_field returns the field in the normalization local to the chart:
// rho_bf is 1 over an interior base and 1/|z_axis| over a projective or
// radial base; rho_df, rho_nf, rho_pf are the chart's own coordinates
// (or h, or 1). integrate_flow multiplies this by a smooth positive factor
// so that the parameter time is the same in every chart: the field there is
// rho_df <z> (rho_nf / h) (h/2) H_p with the global bdfs.

#include <iosfwd>
#include <string>
#include <vector>

#include "nrl/kg_symbols.hpp"
#include "nrl/phase_geometry.hpp"

namespace nrl {

struct TangentVector {
  ChartId chart;
  BaseChart base;
  std::vector<double> components;
};

TangentVector ham_field(const ChartCoords& p, const MetricParams& M, SignBranch b);
// Ratio between the integration normalization and the local one.
double global_rate(const ChartCoords& p);

enum class FlowDirection { Forward, Backward };
enum class Termination { ReachedFuture, ReachedPast, TimeBudget, LeftDomain };
const char* termination_name(Termination t);

struct FlowOptions {
  double budget = 50.0;
  double rtol = 1e-9;
  double atol = 1e-12;
  double delta = 1e-3;        // termination radius around R_+-
  double fixed_point = 1e-10;
  double h0 = 1e-2;           // first trial step
  int max_steps = 200000;
};

struct TrajectorySample {
  double time = 0.0;
  ChartCoords point;
  double p_residual = 0.0;
};

struct ChartSwitch {
  double time = 0.0;
  std::string from;
  std::string to;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<ChartSwitch> switches;
  Termination termination = Termination::TimeBudget;
  double max_p_residual = 0.0;
  int steps = 0;
};

// Throws StepFailure on step underflow. Leaving every chart ends the
// trajectory with Termination::LeftDomain.
Trajectory integrate_flow(const ChartCoords& start, FlowDirection dir, const MetricParams& M, SignBranch b,
                          const FlowOptions& opt = {});

std::string chart_label(const ChartCoords& cc);
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

// Distance to R_varsigma in its radial chart, max(rho, |y - y_R|); infinity
// when the base point is on the wrong side.
double radial_distance(const ChartCoords& cc, SignBranch b, int varsigma);

// On-Sigma start with interior base point z and natural frequencies xi_nat.
ChartCoords sigma_start(const MetricParams& M, const std::vector<double>& z, const std::vector<double>& xi_nat,
                        double h, SignBranch b);

struct QdfOptions {
  double upsilon = 1.0e3;
  unsigned long long seed = 1;
};

struct QdfReport {
  double varrho = 0.0;   // largest sampled value
  double iota_est = 0.0;
  double F_est = 0.0;    // min of Q - iota varrho over the samples
  double E_est = 0.0;    // max |E|
  double C_fit = 0.0;    // max |E| / varrho^{3/2}
  double decomposition_residual = 0.0;
  int samples = 0;
};

// The center's chart must be a radial chart; its base axis fixes (rho, s, w).
QdfReport qdf_probe(const RadialPoint& center, double radius, int nsamples, const MetricParams& M, SignBranch b,
                    const QdfOptions& opt = {});

struct OrderTuple {
  double m = 0.0;  // rho_df
  double s = 0.0;  // rho_bf
  double l = 0.0;  // rho_nf
  double q = 0.0;  // rho_pf
};

// a^{-1} H_p a for a = rho_df^m rho_bf^s rho_nf^l rho_pf^q at a radial point.
// Throws BoundViolated when s != 0 and sign(-+varsigma alpha) != sign(s).
double alpha_value(const RadialPoint& p, const OrderTuple& orders, const MetricParams& M, SignBranch b);

// Norm of the unresolved rescaled field (2 h (tau_nat +- 1), -2 xi_nat) at a
// point of the unconjugated natural phase space.
double natural_degeneracy(const PhasePoint& p, SignBranch b);

// Eigenvalues of the field linearized in the base directions (rho, y) at a
// radial point, real and imaginary parts.
struct Linearization {
  std::vector<double> re;
  std::vector<double> im;
};
Linearization radial_linearization(const RadialPoint& p, const MetricParams& M, SignBranch b);

}  // namespace nrl

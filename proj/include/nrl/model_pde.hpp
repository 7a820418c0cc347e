#pragma once

// Spectral solvers on spatial grids (axes x_1..x_d, no time axis).
//
// Mode convention: KG modes e^{i(-omega t + xi.x)}, omega = c (c^2 + |xi|^2)^{1/2},
// pair with the Minus envelope v = e^{+i c^2 t} u and N(P_-) = 2i d_t + Lap + ...;
// the Plus branch is the complex-conjugate bookkeeping. In general
//   N(P_+-) = -+ 2i d_t + Lap + i B.d_x + V,   V = W -+ beta - aleph,
// so v_t = s (i/2)(Lap + i B.d_x + V) v with s = +1 (Minus), -1 (Plus).

#include <functional>
#include <string>
#include <vector>

#include "nrl/grid.hpp"
#include "nrl/kg_symbols.hpp"

namespace nrl {

struct KGState {
  GridField u;
  GridField ut;
  double t = 0.0;
  double c = 1.0;
};

double kg_dispersion(double c, double xi2);
double kg_energy(const KGState& s);

// Exact Fourier-mode evolution of the free equation c^-2 u_tt = Lap u - c^2 u.
std::vector<KGState> kg_free_solve(const KGState& data, const std::vector<double>& times);

// Data on one frequency branch: u_t = -+ i omega(D) u for Minus / Plus.
KGState kg_branch_data(const GridField& v0, double c, SignBranch b, double t0 = 0.0);

// alpha-only KG: u_tt = (c^2 - alpha(t, x)) (Lap u - c^2 u), integrated by RK4 in the
// envelope frame. Returns the envelope v = e^{+- i c^2 t} u at the requested times.
std::vector<GridField> kg_alpha_envelope(const GridField& v0, const ClassicalSymbolProfile& alpha, double c,
                                         SignBranch b, const std::vector<double>& times, double dt_scale = 0.25);

using SpacetimeFn = std::function<cplx(const std::vector<double>& z)>;  // z = (t, x)

struct SchrCoefficients {
  SpacetimeFn V;               // empty: V = 0
  std::vector<SpacetimeFn> B;  // empty: no drift

  bool is_free() const { return !V && B.empty(); }
};

// Coefficients of N(P_+-) at c = infinity from the metric data.
SchrCoefficients normal_coefficients(const MetricParams& M, SignBranch b, bool include_aleph = true);

struct SchrState {
  GridField v;
  double t = 0.0;
};

struct SchrOptions {
  double dt = 1e-3;
};

// Strang split: kinetic half-steps exact in Fourier, potential and drift at the
// midpoint time; the drift step is an RK4 substep with spectral d_x. Throws
// StepFailure when dt |B| max|xi| / 2 exceeds the RK4 stability bound.
std::vector<SchrState> schrodinger_solve(const SchrState& data, const SchrCoefficients& coef, SignBranch b,
                                         const std::vector<double>& times, const SchrOptions& opt = {});

struct CompareResult {
  std::vector<double> times;
  std::vector<double> error;  // ||envelope - v|| / ||v(0)||
  double sup_error = 0.0;
};

// Throws GridMismatch on differing grids or time lists.
CompareResult conjugate_compare(const std::vector<GridField>& envelopes, const std::vector<SchrState>& schr,
                                const std::vector<double>& times);
// Envelope of a free KG run on the branch b: e^{+- i c^2 t} u.
std::vector<GridField> kg_envelopes(const std::vector<KGState>& run, SignBranch b);

struct ConvergenceRow {
  double c = 0.0;
  double error = 0.0;
  double ratio = 0.0;  // error(previous c) / error(c); 0 on the first row
};

struct ConvergenceOptions {
  double T = 1.0;
  int samples = 21;  // comparison times in [0, T]
  bool include_aleph = true;
  SignBranch kg_branch = SignBranch::Minus;
  SignBranch schr_branch = SignBranch::Minus;
  double schr_dt = 1e-3;
};

// Free metric: exact KG; alpha != 0: kg_alpha_envelope. Only the alpha
// coefficient of the metric is used on the KG side.
std::vector<ConvergenceRow> nonrelativistic_convergence(const GridField& v0, const MetricParams& M,
                                                        const std::vector<double>& cs,
                                                        const ConvergenceOptions& opt = {});

// Band-limited data: sum over modes with |xi| <= K of a smooth amplitude.
GridField band_limited_data(const Grid& g, double K, unsigned long long seed);

// Conjugated operator P_+- = e^{-+ i c^2 t} P e^{+- i c^2 t} on a spacetime (t, x) grid,
// P = box_g - c^2 + i beta c^-2 d_t + i B.d_x + W. Its flat adjoint is assembled
// from the adjoints of the multiplication and spectral derivative factors.
GridField apply_conjugated(const MetricParams& M, double c, SignBranch b, const GridField& v);
// P itself, unconjugated.
GridField apply_kg_operator(const MetricParams& M, double c, const GridField& v);
GridField apply_conjugated_adjoint(const MetricParams& M, double c, SignBranch b, const GridField& v);

struct DefectReport {
  // coefficient fields of P_1 = (P - P^*)/2i in the basis 1, D_0, D_j, D_0^2, ...
  std::vector<std::string> labels;
  std::vector<GridField> coefficients;
  std::vector<double> max_abs;
  std::vector<double> fitted_order;  // decay exponent in <z>; -inf when identically ~0
  double fit_radius_min = 0.0, fit_radius_max = 0.0;
};

DefectReport symmetry_defect(const MetricParams& M, double c, SignBranch b, const Grid& spacetime);

struct MassTrace {
  std::vector<double> times;
  std::vector<double> M;
  std::vector<double> dM;
  std::vector<double> bound_rhs;
  bool passed = true;
  double first_violation = 0.0;
  std::string violation;
};

double mass(const GridField& v);  // ||v||_2^2
MassTrace mass_trace(const std::vector<SchrState>& run, double C_claim);
// Throws BoundViolated with the first violating time.
MassTrace mass_bound_check(const std::vector<SchrState>& run, double C_claim);

// (2 pi i t)^{d/2} e^{-i t |X|^2/2} v(t, tX) on the X-grid (conjugated for the Plus
// branch). Throws ResampleOverflow when tX leaves the spatial box.
GridField scattering_profile(const SchrState& s, SignBranch b, const Grid& Xgrid);

}  // namespace nrl

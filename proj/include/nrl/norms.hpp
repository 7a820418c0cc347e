#pragma once

// Weighted Sobolev norms of fields on spacetime grids (axis 0 is t). All norms
// apply the weight <z>^{s(z)} first and the Fourier multiplier second.

#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrl/grid.hpp"
#include "nrl/kg_symbols.hpp"

namespace nrl {

// C-infinity monotone step: 0 for u <= 0, 1 for u >= 1.
double smooth_step(double u);

// chi = 0 below lo, 1 above hi; admissible when -1/2 <= lo < hi <= 1/2.
struct ChiProfile {
  double lo = -0.5;
  double hi = 0.5;
  double operator()(double s) const { return smooth_step((s - lo) / (hi - lo)); }
  void validate() const;
};

struct OrderProfile {
  double m = 0.0;
  double ell = 0.0;
  double q_minus = 0.0;
  double q_plus = 0.0;
  // (sigma, value) knots, sigma = t/<z>; s_bar is constant outside the first
  // and last knot and joins neighbours by smooth steps
  std::vector<std::pair<double, double>> s_knots{{-0.9, 0.0}, {0.9, 0.0}};

  double s_bar(double sigma) const;
  double s_at(const std::vector<double>& z) const;
  // Throws ConfigInvalid unless the knots are sorted, monotone, flat on
  // [-1, -0.9] and [0.9, 1] and cross -1/2.
  void validate() const;
  bool forward() const;  // non-increasing in sigma
};

OrderProfile forward_profile(double s_past, double s_future, double m = 0.0, double ell = 0.0);
// Same profile with m, s_bar, ell shifted by constants (no threshold check).
OrderProfile shifted(const OrderProfile& o, double dm, double ds, double dl);

nlohmann::json to_json(const OrderProfile& o);
OrderProfile order_profile_from_json(const nlohmann::json& j);

using WeightFn = std::function<double(const std::vector<double>& z)>;
WeightFn constant_weight(double s);
WeightFn profile_weight(const OrderProfile& o);

// ||<D>^m (<z>^s u)||, <D> = (1 + tau^2 + |xi|^2)^{1/2}.
double sc_norm(const GridField& u, double m, const WeightFn& s);
// h^-ell ||(1 + h^2 |xi|^2 + h^4 tau^2)^{m/2} (<z>^s u)||.
double natural_norm(const GridField& u, double m, const WeightFn& s, double ell, double h);
// Order m at the fiber infinity, ell at the natural face and 0 at the parabolic
// face: the natural multiplier times (Lambda / (1 + h^2 Lambda))^{ell/2} with
// Lambda = ((1 + |xi|^2)^2 + tau^2)^{1/2}. Tends to h^-ell times the natural
// weight away from the parabolic face.
double calc_norm(const GridField& u, double m, const WeightFn& s, double ell, double h);

struct SplitPair {
  GridField u_minus;
  GridField u_plus;
  double h = 1.0;

  // e^{-i t/h^2} u_minus + e^{+i t/h^2} u_plus
  GridField reconstruct() const;
};

// Q_+ = chi(tau_nat / <xi_nat>), Q_- = 1 - Q_+;
// u_minus = e^{+i t/h^2} Q_- u, u_plus = e^{-i t/h^2} Q_+ u.
SplitPair split_energy(const GridField& u, double h, const ChiProfile& chi = {});

// h^-q_+ calc_norm(u_plus) + h^-q_- calc_norm(u_minus), both envelopes weighted by s_bar.
double calctwo_norm(const GridField& u, double h, const OrderProfile& orders, const ChiProfile& chi = {});

// amplitude * Gaussian in (t, x) * e^{carrier i c^2 t} e^{i velocity.x}.
struct FieldSpec {
  int carrier = 0;  // -1, 0, +1
  double amplitude = 1.0;
  std::vector<double> center;    // (t, x_1..x_d)
  std::vector<double> width;     // same layout
  std::vector<double> velocity;  // d entries
};

nlohmann::json to_json(const FieldSpec& f);
FieldSpec field_spec_from_json(const nlohmann::json& j);

struct RatioGrid {
  double Lt = 4.0 * std::numbers::pi;  // a multiple of 2 pi keeps every carrier periodic
  double Lx = 8.0 * std::numbers::pi;
  int nx = 64;
};

// Spacetime grid resolving the carriers e^{+- i c^2 t}.
Grid ratio_grid(int d, double c, const RatioGrid& rg);
GridField manufacture(const FieldSpec& f, const Grid& st, double c);

struct RatioRow {
  double c = 0.0;
  int member = 0;
  double num = 0.0;
  double den = 0.0;
  double ratio = 0.0;
};

struct RatioTable {
  std::vector<RatioRow> rows;
  std::vector<double> cs;
  std::vector<double> max_per_c;
  double spread = 0.0;      // max / min of max_per_c
  double worst_growth = 0.0;  // max over members of ratio(c_max) / ratio(c_min)
};

// num = calctwo_norm(u; m, s, ell), den = calctwo_norm(Pu; m-1, s+1, ell-1), with P
// applied on the grid. Throws DegenerateFamily when some ||Pu|| < 1e-12.
RatioTable uniform_ratio_experiment(const MetricParams& M, const std::vector<FieldSpec>& family,
                                    const std::vector<double>& cs, const OrderProfile& orders,
                                    const RatioGrid& rg = {}, const ChiProfile& chi = {});

// Twelve members: four Gaussians, each bare and on both carriers.
std::vector<FieldSpec> default_family(int d);

}  // namespace nrl

#include <doctest.h>

#include <cmath>
#include <random>

#include "nrl/error.hpp"
#include "nrl/phase_geometry.hpp"

using namespace nrl;

namespace {

PhasePoint pt(double tau_nat, std::vector<double> xi_nat, double h) {
  std::vector<double> x(xi_nat.size(), 0.0);
  return make_point(0.0, x, tau_nat, xi_nat, h);
}

PhasePoint from_std(double tau, std::vector<double> xi, double h) {
  for (double& v : xi) v *= h;
  return pt(h * h * tau, xi, h);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void check_same(const PhasePoint& a, const PhasePoint& b, double tol) {
  CHECK(rel(a.t, b.t) <= tol);
  CHECK(rel(a.tau_nat, b.tau_nat) <= tol);
  CHECK(rel(a.h, b.h) <= tol);
  for (std::size_t j = 0; j < a.x.size(); ++j) {
    CHECK(rel(a.x[j], b.x[j]) <= tol);
    CHECK(rel(a.xi_nat[j], b.xi_nat[j]) <= tol);
  }
}

}  // namespace

TEST_CASE("bdf values at simple points") {
  auto b = bdf_values(pt(0.0, {0.0}, 1.0));
  CHECK(b.rho_df == doctest::Approx(1.0));
  CHECK(b.rho_bf == doctest::Approx(1.0));
  // rho_nf = h + chi(0) * 1
  CHECK(b.rho_nf == doctest::Approx(2.0));
  CHECK(b.rho_pf == doctest::Approx(0.5));

  b = bdf_values(pt(2.0, {0.0}, 1.0));
  CHECK(b.rho_df == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-14));
}

TEST_CASE("cutoff") {
  CHECK(cutoff_chi(0.0) == 1.0);
  CHECK(cutoff_chi(1.0) == 1.0);
  CHECK(cutoff_chi(2.0) == 0.0);
  CHECK(cutoff_chi(3.0) == 0.0);
  CHECK(cutoff_chi(1.5) == doctest::Approx(0.5).epsilon(1e-14));
  double prev = 1.0;
  for (double r = 1.0; r <= 2.0; r += 0.01) {
    CHECK(cutoff_chi(r) <= prev + 1e-15);
    prev = cutoff_chi(r);
  }
}

TEST_CASE("to_chart examples") {
  auto cc = to_chart(pt(2.0, {0.0}, 0.5), {ChartTag::DfProjective});
  CHECK(cc.fiber(0) == doctest::Approx(0.5));
  CHECK(cc.fiber(1) == doctest::Approx(0.0));
  CHECK(cc.fiber(2) == doctest::Approx(0.5));
  CHECK(cc.bdf.rho_df == doctest::Approx(0.5));

  cc = to_chart(from_std(4.0, {2.0}, 0.1), {ChartTag::PfNatParabolic});
  CHECK(cc.fiber(0) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(cc.fiber(1) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(cc.fiber(2) == doctest::Approx(0.2).epsilon(1e-13));

  CHECK_THROWS_AS(to_chart(pt(0.0, {1.0}, 0.5), {ChartTag::DfProjective}), Error);
  CHECK_THROWS_AS(to_chart(pt(1.0, {0.0}, 0.0), {ChartTag::PfStandard}), Error);
  CHECK_THROWS_AS(to_chart(from_std(0.5, {0.0}, 0.1), {ChartTag::PfNatParabolic}), Error);
}

TEST_CASE("from_chart round trips and boundary") {
  const auto p = pt(2.0, {0.0}, 0.5);
  check_same(from_chart(to_chart(p, {ChartTag::DfProjective})), p, 1e-15);
  const auto q = from_std(4.0, {2.0}, 0.1);
  check_same(from_chart(to_chart(q, {ChartTag::PfNatParabolic})), q, 1e-14);

  auto cc = to_chart(p, {ChartTag::DfProjective});
  cc.fiber(0) = 0.0;
  try {
    from_chart(cc);
    FAIL("expected OnBoundary");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OnBoundary);
  }
}

TEST_CASE("round trip over random points in every chart") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> uh(0.01, 1.0);
  const ChartTag tags[] = {ChartTag::NatInterior, ChartTag::DfProjective, ChartTag::PfStandard,
                           ChartTag::PfNatParabolic};
  int tested = 0;
  for (int i = 0; i < 10000; ++i) {
    const int d = 1 + i % 3;
    std::vector<double> x(d), xi(d);
    for (auto& v : x) v = u(rng);
    for (auto& v : xi) v = u(rng);
    const auto p = make_point(u(rng), x, u(rng), xi, uh(rng));
    for (ChartTag tag : tags) {
      ChartCoords cc;
      try {
        cc = to_chart(p, {tag});
      } catch (const Error&) {
        continue;
      }
      check_same(from_chart(cc), p, 1e-12);
      ++tested;
    }
  }
  CHECK(tested > 25000);
}

TEST_CASE("chart transitions on overlaps") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> uh(0.05, 1.0);
  int n = 0;
  while (n < 10000) {
    const auto p = make_point(u(rng), {u(rng)}, u(rng), {u(rng)}, uh(rng));
    ChartCoords a, b;
    try {
      a = to_chart(p, {ChartTag::DfProjective});
      b = to_chart(p, {ChartTag::PfNatParabolic});
    } catch (const Error&) {
      continue;
    }
    const auto b2 = to_chart(from_chart(a), {ChartTag::PfNatParabolic});
    for (std::size_t k = 0; k < b.coords.size(); ++k) CHECK(rel(b2.coords[k], b.coords[k]) <= 1e-10);
    ++n;
  }
}

TEST_CASE("bdf vanishing along rays") {
  for (double s : {1e2, 1e4, 1e6}) {
    const auto b = bdf_values(pt(s, {0.0}, 0.3));
    CHECK(std::abs(b.rho_df * s - 1.0) <= 1.0 / s);
  }
  double prev = 1.0;
  for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const auto b = bdf_values(pt(0.5, {0.3}, h));
    CHECK(b.rho_pf < prev);
    prev = b.rho_pf;
    CHECK(b.rho_nf * b.rho_pf == doctest::Approx(h).epsilon(1e-14));
  }
  // at h = 0 away from zeta_nat = 0 the natural face is reached
  const auto b0 = bdf_values(pt(0.5, {0.3}, 0.0));
  CHECK(b0.rho_nf == 0.0);
  CHECK(b0.rho_pf > 0.0);
}

TEST_CASE("bdf comparison with <zeta>: measured constants") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lu(-3.0, 6.0);
  std::uniform_real_distribution<double> uh(0.0, 1.0);
  std::uniform_int_distribution<int> sg(0, 1);
  double upper = 0.0, lower = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double h = std::max(1e-6, uh(rng));
    const double tau = (sg(rng) ? 1 : -1) * std::pow(10.0, lu(rng));
    const double xi = (sg(rng) ? 1 : -1) * std::pow(10.0, lu(rng));
    const auto b = bdf_values(from_std(tau, {xi}, h));
    const double inv = 1.0 / std::sqrt(1.0 + tau * tau + xi * xi);
    upper = std::max(upper, inv / (b.rho_df * b.rho_nf));
    lower = std::max(lower, b.rho_df * b.rho_nf * b.rho_nf / inv);
  }
  CHECK(upper <= 2.0);
  // rho_df rho_nf^2 <ζ> reaches rho_nf^2 = (1 + h)^2 at zeta = 0, i.e. 4 at h = 1
  const auto b1 = bdf_values(from_std(0.0, {0.0}, 1.0));
  CHECK(b1.rho_df * b1.rho_nf * b1.rho_nf == doctest::Approx(4.0));
  CHECK(lower > 1.0);
  CHECK(lower <= 4.0);
}

TEST_CASE("parabolic charts") {
  auto cc = parabolic_chart(4.0, {2.0}, {ChartTag::ParFreqTau});
  CHECK(cc.coords[0] == doctest::Approx(0.5));
  CHECK(cc.coords[1] == doctest::Approx(1.0));
  cc = parabolic_chart(8.0, {2.0}, {ChartTag::ParFreqXi, 1});
  REQUIRE(cc.coords.size() == 2);
  CHECK(cc.coords[0] == doctest::Approx(0.5));
  CHECK(cc.coords[1] == doctest::Approx(2.0));
  CHECK_THROWS_AS(parabolic_chart(1.0, {0.0}, {ChartTag::ParFreqXi, 1}), Error);

  double tau;
  std::vector<double> xi;
  cc = parabolic_chart(-3.0, {1.0, -7.0}, {ChartTag::ParFreqXi, 2});
  parabolic_inverse(cc, tau, xi);
  CHECK(tau == doctest::Approx(-3.0));
  CHECK(xi[0] == doctest::Approx(1.0));
  CHECK(xi[1] == doctest::Approx(-7.0));
  CHECK(parabolic_chart(4.0, {1.0}).chart.tag == ChartTag::ParFreqTau);
  CHECK(parabolic_chart(1.0, {4.0}).chart.tag == ChartTag::ParFreqXi);
}

TEST_CASE("b-order fits") {
  ParabolicRay ray;
  auto f = b_order_fit(BDirection::dTau, 1, {ChartTag::ParFreqTau}, ray);
  CHECK(f.exponent == doctest::Approx(2.0).epsilon(0.025));
  f = b_order_fit(BDirection::dXi, 1, {ChartTag::ParFreqTau}, ray);
  CHECK(f.exponent == doctest::Approx(1.0).epsilon(0.05));

  ParabolicRay xray;
  xray.tau0 = 0.5;
  xray.xi0 = {1.0, 0.3};
  f = b_order_fit(BDirection::dXi, 1, {ChartTag::ParFreqXi, 1}, xray);
  CHECK(f.exponent == doctest::Approx(1.0).epsilon(0.05));
  f = b_order_fit(BDirection::dTau, 1, {ChartTag::ParFreqXi, 1}, xray);
  CHECK(f.exponent == doctest::Approx(2.0).epsilon(0.025));

  ParabolicRay bad;
  bad.samples = 2;
  CHECK_THROWS_AS(b_order_fit(BDirection::dTau, 1, {ChartTag::ParFreqTau}, bad), Error);
}

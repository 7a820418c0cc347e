#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nrl/error.hpp"
#include "nrl/model_pde.hpp"
#include "nrl/norms.hpp"

using namespace nrl;

namespace {

constexpr cplx I(0.0, 1.0);

Grid spacetime(int nt, double Lt, int nx, double Lx) {
  Grid g;
  g.n = {nt, nx};
  g.L = {Lt, Lx};
  g.time_axis = true;
  g.validate();
  return g;
}

// Gaussian in (t, x) times e^{i (omega t + xi x)}.
GridField packet(const Grid& g, double st, double sx, double omega, double xi, double t0 = 0.0, double x0 = 0.0) {
  return sample_field(g, [=](const std::vector<double>& z) {
    const double a = (z[0] - t0) / st, b = (z[1] - x0) / sx;
    return std::exp(-0.5 * (a * a + b * b)) * std::exp(I * (omega * z[0] + xi * z[1]));
  });
}

OrderProfile flat_orders(double m = 0.0, double ell = 0.0) {
  OrderProfile o;
  o.m = m;
  o.ell = ell;
  return o;
}

double rel_diff(const GridField& a, const GridField& b) {
  GridField d(a.grid);
  for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] = a.v[i] - b.v[i];
  return d.l2_norm() / b.l2_norm();
}

}  // namespace

TEST_CASE("smooth step and chi profile") {
  CHECK(smooth_step(-1.0) == 0.0);
  CHECK(smooth_step(2.0) == 1.0);
  CHECK(smooth_step(0.5) == doctest::Approx(0.5).epsilon(1e-14));
  for (double u : {0.1, 0.3, 0.7}) CHECK(smooth_step(u) + smooth_step(1.0 - u) == doctest::Approx(1.0).epsilon(1e-14));
  ChiProfile chi;
  CHECK(chi(0.5) == 1.0);
  CHECK(chi(-0.5) == 0.0);
  CHECK_THROWS_AS((ChiProfile{-0.6, 0.5}.validate()), Error);
  CHECK_THROWS_AS((ChiProfile{0.2, 0.1}.validate()), Error);
}

TEST_CASE("order profiles: threshold, monotonicity, JSON") {
  const OrderProfile f = forward_profile(-0.4, -0.6, 1.0, 0.5);
  CHECK_NOTHROW(f.validate());
  CHECK(f.forward());
  CHECK(f.s_bar(-1.0) == -0.4);
  CHECK(f.s_bar(0.95) == -0.6);
  CHECK(f.s_bar(0.0) == doctest::Approx(-0.5).epsilon(1e-14));
  for (double s = -1.0; s < 1.0; s += 0.01) CHECK(f.s_bar(s + 0.01) <= f.s_bar(s));

  CHECK_THROWS_AS(forward_profile(-0.4, -0.45).validate(), Error);  // no threshold crossing
  OrderProfile bad = f;
  bad.s_knots = {{-0.9, -0.4}, {0.0, -0.7}, {0.9, -0.6}};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.s_knots = {{-0.95, -0.4}, {0.9, -0.6}};
  CHECK_THROWS_AS(bad.validate(), Error);

  const OrderProfile back = order_profile_from_json(to_json(f));
  CHECK(back.m == f.m);
  CHECK(back.ell == f.ell);
  CHECK(back.s_knots == f.s_knots);
  auto j = to_json(f);
  j["extra"] = 1;
  CHECK_THROWS_AS(order_profile_from_json(j), Error);

  const OrderProfile sh = shifted(f, -1.0, 1.0, -1.0);
  CHECK(sh.m == 0.0);
  CHECK(sh.ell == -0.5);
  CHECK(sh.s_bar(-1.0) == doctest::Approx(0.6));
}

TEST_CASE("sc_norm: L2, single mode, support localization") {
  const Grid g = spacetime(128, 32.0, 128, 32.0);
  const GridField u = packet(g, 2.0, 2.0, 0.0, 0.0);
  CHECK(sc_norm(u, 0.0, constant_weight(0.0)) == doctest::Approx(u.l2_norm()).epsilon(1e-12));

  const double xi = std::numbers::pi;
  const GridField w = packet(g, 2.0, 2.0, 0.0, xi);
  const double r = sc_norm(w, 1.0, constant_weight(0.0)) / w.l2_norm();
  CHECK(std::abs(r / std::sqrt(1.0 + xi * xi) - 1.0) <= 0.05);

  // ring at |z| = 6 of width 0.8, so <z> is in [4, 8]
  const double R = 4.0;
  const GridField ring = sample_field(g, [](const std::vector<double>& z) {
    const double rr = std::hypot(z[0], z[1]) - 6.0;
    return cplx(std::exp(-rr * rr / (2 * 0.64)));
  });
  const double q = sc_norm(ring, 0.0, constant_weight(1.0)) / (R * ring.l2_norm());
  CHECK(q >= 0.5);
  CHECK(q <= 2.0);
}

TEST_CASE("norms reject unresolved fields and non-spacetime grids") {
  const Grid g = spacetime(32, 8.0, 32, 8.0);
  GridField noise(g);
  for (std::size_t i = 0; i < noise.v.size(); ++i) noise.v[i] = (i % 2) ? 1.0 : -1.0;
  CHECK_THROWS_AS(sc_norm(noise, 0.0, constant_weight(0.0)), Error);
  try {
    natural_norm(noise, 0.0, constant_weight(0.0), 0.0, 0.5);
    FAIL("expected SpectrumOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SpectrumOverflow);
  }
  Grid flat = g;
  flat.time_axis = false;
  GridField u(flat);
  CHECK_THROWS_AS(sc_norm(u, 0.0, constant_weight(0.0)), Error);
}

TEST_CASE("natural_norm: L2, prefactor, carrier weight") {
  const Grid g = spacetime(128, 32.0, 128, 32.0);
  const GridField u = packet(g, 2.0, 2.0, 0.0, 0.0);
  for (double h : {0.1, 0.5, 1.0})
    CHECK(natural_norm(u, 0.0, constant_weight(0.0), 0.0, h) == doctest::Approx(u.l2_norm()).epsilon(1e-12));
  const double n0 = natural_norm(u, 1.0, constant_weight(-0.3), 0.0, 0.5);
  CHECK(natural_norm(u, 1.0, constant_weight(-0.3), 1.0, 0.5) == doctest::Approx(2.0 * n0).epsilon(1e-14));

  const double h = 0.5;
  const GridField w = packet(g, 2.0, 2.0, 0.0, 1.0 / h);
  const double r = natural_norm(w, 2.0, constant_weight(0.0), 0.0, h) / natural_norm(w, 0.0, constant_weight(0.0), 0.0, h);
  CHECK(r >= 1.8);
  CHECK(r <= 2.2);
}

TEST_CASE("calc_norm agrees with the natural norm away from the parabolic face") {
  const Grid g = spacetime(128, 32.0, 128, 32.0);
  const GridField u = packet(g, 2.0, 2.0, 0.0, 0.0);
  // ell = 0: identical multipliers
  CHECK(calc_norm(u, 1.0, constant_weight(-0.5), 0.0, 0.3) ==
        doctest::Approx(natural_norm(u, 1.0, constant_weight(-0.5), 0.0, 0.3)).epsilon(1e-12));
  // at frequencies far above 1/h the extra factor tends to h^-ell
  const Grid fine = spacetime(128, 32.0, 256, 32.0);
  const double h = 0.2;
  const GridField w = packet(fine, 2.0, 2.0, 0.0, 10.0);
  const double nat = natural_norm(w, 0.0, constant_weight(0.0), 1.0, h);
  const double r = calc_norm(w, 0.0, constant_weight(0.0), 1.0, h) / nat;
  CHECK(r > 0.85);
  CHECK(r < 1.0);
  // order 0 at the parabolic face: the ell factor stays bounded for low frequencies
  const double low = calc_norm(u, 0.0, constant_weight(0.0), 1.0, 0.01) / u.l2_norm();
  CHECK(low < 2.0);
}

TEST_CASE("split_energy: envelopes, symmetry, zero, reconstruction") {
  const double c = 4.0, h = 1.0 / c;
  const Grid g = spacetime(256, 16.0, 64, 16.0);
  const GridField psi = packet(g, 1.0, 1.5, 0.0, 0.5);
  GridField u = psi;
  for (std::size_t i = 0; i < u.v.size(); ++i) u.v[i] *= std::exp(I * (c * c * g.point(i)[0]));

  const SplitPair sp = split_energy(u, h);
  CHECK(sp.u_minus.l2_norm() <= 1e-6 * psi.l2_norm());
  CHECK(rel_diff(sp.u_plus, psi) <= 1e-6);
  CHECK(rel_diff(sp.reconstruct(), u) <= 1e-10);

  GridField mixed = u;
  const GridField bare = packet(g, 0.8, 1.0, 0.0, -1.0, 1.0, 2.0);
  for (std::size_t i = 0; i < mixed.v.size(); ++i) mixed.v[i] += std::conj(u.v[i]) + bare.v[i];
  const SplitPair sm = split_energy(mixed, h);
  CHECK(rel_diff(sm.reconstruct(), mixed) <= 1e-10);
  // splitting the reconstruction reproduces the envelopes
  const SplitPair again = split_energy(sm.reconstruct(), h);
  CHECK(rel_diff(again.u_plus, sm.u_plus) <= 1e-8);
  CHECK(rel_diff(again.u_minus, sm.u_minus) <= 1e-8);

  // real and even in t
  const GridField even = packet(g, 1.0, 1.5, 0.0, 0.0);
  const SplitPair se = split_energy(even, 0.5);
  CHECK(se.u_minus.l2_norm() == doctest::Approx(se.u_plus.l2_norm()).epsilon(1e-10));

  const SplitPair sz = split_energy(GridField(g), h);
  CHECK(sz.u_minus.max_abs() == 0.0);
  CHECK(sz.u_plus.max_abs() == 0.0);

  CHECK_THROWS_AS(split_energy(u, 0.0), Error);
}

TEST_CASE("calctwo_norm: partition bounds, pure envelope, q prefactor") {
  const double c = 4.0, h = 1.0 / c;
  const Grid g = spacetime(256, 16.0, 64, 16.0);
  auto on_carrier = [&](GridField f, double w) {
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] *= std::exp(I * (w * g.point(i)[0]));
    return f;
  };
  const GridField psi = packet(g, 1.0, 1.5, 0.0, 0.5);
  const GridField u = on_carrier(psi, c * c);

  for (const GridField& f : {u, packet(g, 0.7, 1.0, 0.0, 0.0), on_carrier(packet(g, 1.0, 1.2, 0.0, 1.0, 0.5), -c * c)}) {
    const double n = calctwo_norm(f, h, flat_orders());
    CHECK(n >= f.l2_norm() * (1.0 - 1e-12));
    CHECK(n <= 2.0 * f.l2_norm() * (1.0 + 1e-12));
  }

  const OrderProfile o = forward_profile(-0.4, -0.6, 1.0, 0.0);
  const double nat = natural_norm(psi, o.m, profile_weight(o), o.ell, h);
  CHECK(std::abs(calctwo_norm(u, h, o) - nat) <= 1e-6 * nat);

  // long in t so that the packet sits inside chi = 1 even at h = 0.5
  const Grid gl = spacetime(512, 48.0, 64, 16.0);
  const GridField slow = packet(gl, 3.0, 1.5, 0.0, 0.5);
  for (double hh : {0.25, 0.5}) {
    GridField v = slow;
    for (std::size_t i = 0; i < v.v.size(); ++i) v.v[i] *= std::exp(I * (gl.point(i)[0] / (hh * hh)));
    OrderProfile q0 = flat_orders(), q1 = flat_orders();
    q1.q_plus = 1.0;
    CHECK(calctwo_norm(v, hh, q1) / calctwo_norm(v, hh, q0) == doctest::Approx(1.0 / hh).epsilon(1e-6));
  }
}

TEST_CASE("calctwo_norm: admissible chi profiles give equivalent norms") {
  const OrderProfile o = forward_profile(-0.4, -0.6, 1.0, 0.0);
  const ChiProfile a{-0.5, 0.5}, b{-0.1, 0.4};
  for (double h : {0.25, 0.5}) {
    const double c = 1.0 / h;
    const Grid st = ratio_grid(1, c, RatioGrid{});
    for (const FieldSpec& f : default_family(1)) {
      const GridField u = manufacture(f, st, c);
      const double r = calctwo_norm(u, h, o, a) / calctwo_norm(u, h, o, b);
      CHECK(r <= 4.0);
      CHECK(r >= 0.25);
    }
  }
}

TEST_CASE("calctwo_norm: constant shift of s_bar on a localized field") {
  const Grid g = spacetime(128, 32.0, 128, 32.0);
  // two lumps at t = 0, x = +-8
  GridField u = packet(g, 0.8, 0.8, 0.0, 0.0, 0.0, 8.0);
  const GridField v = packet(g, 0.8, 0.8, 0.0, 0.0, 0.0, -8.0);
  for (std::size_t i = 0; i < u.v.size(); ++i) u.v[i] += v.v[i];
  const OrderProfile o = forward_profile(-0.4, -0.6);
  const double k = 1.0;
  const double shift = std::log(calctwo_norm(u, 0.5, shifted(o, 0.0, k, 0.0))) - std::log(calctwo_norm(u, 0.5, o));
  const double expect = k * std::log(std::sqrt(65.0));
  CHECK(std::abs(shift / expect - 1.0) <= 0.1);
}

TEST_CASE("field specs: JSON round trip and validation") {
  FieldSpec f;
  f.carrier = -1;
  f.amplitude = 0.5;
  f.center = {0.1, 0.2};
  f.width = {0.7, 1.5};
  f.velocity = {1.0};
  const FieldSpec b = field_spec_from_json(to_json(f));
  CHECK(b.carrier == -1);
  CHECK(b.amplitude == 0.5);
  CHECK(b.center == f.center);
  CHECK(b.velocity == f.velocity);
  auto j = to_json(f);
  j["carrier"] = 2;
  CHECK_THROWS_AS(field_spec_from_json(j), Error);
  j = to_json(f);
  j["width"] = {0.7, 0.0};
  CHECK_THROWS_AS(field_spec_from_json(j), Error);
  j = to_json(f);
  j["bogus"] = true;
  CHECK_THROWS_AS(field_spec_from_json(j), Error);
}

TEST_CASE("ratio grid resolves the carriers") {
  for (double c : {4.0, 8.0, 16.0}) {
    const Grid st = ratio_grid(1, c, RatioGrid{});
    FieldSpec f = default_family(1)[8];  // carrier +1
    REQUIRE(f.carrier == 1);
    CHECK(band_limited(manufacture(f, st, c)));
    const double carrier_mode = c * c * st.L[0] / (2 * std::numbers::pi);
    CHECK(3.0 * carrier_mode < st.n[0]);
  }
}

TEST_CASE("uniform ratio experiment: short ladder, zero data") {
  const MetricParams M = free_metric(1);
  const OrderProfile o = forward_profile(-0.4, -0.6);
  const std::vector<FieldSpec> fam = default_family(1);
  REQUIRE(fam.size() == 12);
  const RatioTable t = uniform_ratio_experiment(M, fam, {4.0, 8.0}, o);
  CHECK(t.rows.size() == 24);
  CHECK(t.max_per_c.size() == 2);
  CHECK(t.spread <= 3.0);
  CHECK(t.worst_growth <= 1.5);
  for (const auto& r : t.rows) {
    CHECK(std::isfinite(r.ratio));
    CHECK(r.ratio > 0.0);
  }
  // rerun is bit-identical
  const RatioTable t2 = uniform_ratio_experiment(M, fam, {4.0, 8.0}, o);
  CHECK(t2.spread == t.spread);

  std::vector<FieldSpec> zero = {fam[0]};
  zero[0].amplitude = 0.0;
  try {
    uniform_ratio_experiment(M, zero, {4.0}, o);
    FAIL("expected DegenerateFamily");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFamily);
  }
  CHECK_THROWS_AS(uniform_ratio_experiment(M, fam, {4.0}, forward_profile(-0.6, -0.4)), Error);
}

TEST_CASE("windowed free KG solution: Pu lives at the window edges") {
  const MetricParams M = free_metric(1);
  const OrderProfile o = forward_profile(-0.4, -0.6);
  const OrderProfile lower = shifted(o, -1.0, 1.0, -1.0);
  std::vector<double> ratios;
  for (double c : {4.0, 8.0}) {
    const Grid st = ratio_grid(1, c, RatioGrid{});
    const double k = 2 * std::numbers::pi * 4 / st.L[1];
    const double omega = kg_dispersion(c, k * k);
    const GridField u = sample_field(st, [&](const std::vector<double>& z) {
      const double w = std::exp(-std::pow(z[0] / 2.0, 8));
      return w * std::exp(I * (k * z[1] - omega * z[0]));
    });
    const GridField Pu = apply_kg_operator(M, c, u);
    double inner = 0.0;
    for_each_node(st, [&](std::size_t i, const std::vector<int>& idx) {
      if (std::abs(st.coord(0, idx[0])) < 0.5) inner = std::max(inner, std::abs(Pu.v[i]));
    });
    CHECK(inner <= 1e-3 * Pu.max_abs());
    const double h = 1.0 / c;
    ratios.push_back(calctwo_norm(u, h, o) / calctwo_norm(Pu, h, lower));
  }
  CHECK(std::isfinite(ratios[0]));
  CHECK(ratios[1] / ratios[0] <= 1.5);
  CHECK(ratios[1] / ratios[0] >= 1.0 / 1.5);
}

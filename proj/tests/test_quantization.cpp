#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "nrl/error.hpp"
#include "nrl/ham_flow.hpp"
#include "nrl/quantization.hpp"

using namespace nrl;

namespace {

const cplx I(0.0, 1.0);

double max_diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

// smooth compactly supported bump on (-1, 1)
double bump(double s) { return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0; }

Grid line_grid(int n = 256, double L = 16 * std::numbers::pi) { return uniform_grid(1, n, L); }

GridField gaussian(const Grid& g, double x0 = 0.0, double k0 = 0.0, double w = 1.0) {
  return sample_field(g, [&](const std::vector<double>& z) {
    double r2 = 0.0;
    for (std::size_t a = 0; a < z.size(); ++a) {
      const double d = z[a] - (a == 0 ? x0 : 0.0);
      r2 += d * d;
    }
    return std::exp(-r2 / (2 * w * w)) * std::polar(1.0, k0 * z.back());
  });
}

}  // namespace

TEST_CASE("fft round trip and mode placement") {
  const Grid g = uniform_grid(2, 16, 5.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<cplx> u(g.size());
  for (auto& x : u) x = {n(rng), n(rng)};
  const auto back = fft_inverse(g, fft_forward(g, u));
  double err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(back[i] - u[i]));
  CHECK(err <= 1e-12);

  // e^{i zeta_m . z} transforms to N at slot m
  const auto mode = sample_field(g, [&](const std::vector<double>& z) {
    return std::polar(1.0, g.frequency(0, 3) * z[0] + g.frequency(1, 13) * z[1]);
  });
  const auto uh = fft_forward(g, mode.v);
  CHECK(std::abs(uh[g.flatten({3, 13})] - cplx(256.0, 0.0)) <= 1e-10);
  CHECK(std::abs(uh[g.flatten({3, 12})]) <= 1e-10);
}

TEST_CASE("band limit flag and spectral derivative") {
  const Grid g = line_grid();
  const auto u = gaussian(g, 0.3, 2.0);
  CHECK(band_limited(u));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  GridField noise(g);
  for (auto& x : noise.v) x = n(rng);
  CHECK_FALSE(band_limited(noise));

  const auto du = spectral_derivative(u, 0, 1);
  double err = 0.0;
  for (std::size_t i = 0; i < u.v.size(); ++i) {
    const double x = g.coord(0, static_cast<int>(i));
    const cplx exact = -I * (-(x - 0.3) + I * 2.0) * u.v[i];
    err = std::max(err, std::abs(du.v[i] - exact));
  }
  CHECK(err <= 1e-10);
  CHECK_THROWS_AS(uniform_grid(1, 12, 1.0), Error);
}

TEST_CASE("field and symbol binary round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "nrl_io_test";
  std::filesystem::create_directories(dir);
  const Grid g = uniform_grid(2, 8, 3.0, true);
  const auto u = gaussian(g, 0.1, 1.0);
  save_field((dir / "u").string(), u);
  const auto u2 = load_field((dir / "u").string());
  CHECK(u2.grid == u.grid);
  CHECK(max_diff(u, u2) == 0.0);

  const auto a = sample_symbol(g, frequency_grid(g, 0.5, true), true,
                               [](const auto& z, const auto& w) { return cplx(z[0] * w[1], w[0]); }, {1, 0, 0, 0});
  save_symbol((dir / "a").string(), a);
  const auto a2 = load_symbol((dir / "a").string());
  CHECK(a2.a == a.a);
  CHECK(a2.zeta == a.zeta);
  CHECK(a2.natural);
  CHECK(a2.orders.m == 1.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("op_apply examples") {
  const Grid g = line_grid();
  const Grid fz = frequency_grid(g);
  const auto u = gaussian(g, 0.5, 3.0);

  const auto one = sample_symbol(g, fz, false, [](const auto&, const auto&) { return cplx(1.0); });
  CHECK(max_diff(op_apply(one, u), u) <= 1e-12);

  const auto xi = sample_symbol(g, fz, false, [](const auto&, const auto& w) { return cplx(w[0]); });
  CHECK(max_diff(op_apply(xi, u), spectral_derivative(u, 0, 1)) <= 1e-10);

  const auto xxi = sample_symbol(g, fz, false, [](const auto& z, const auto& w) { return cplx(z[0] * w[0]); });
  auto xdu = spectral_derivative(u, 0, 1);
  for (std::size_t i = 0; i < xdu.v.size(); ++i) xdu.v[i] *= g.coord(0, static_cast<int>(i));
  CHECK(max_diff(op_apply(xxi, u), xdu) <= 1e-10);

  // z-independent symbols are Fourier multipliers
  auto m = [](double w) { return cplx(1.0 / (1.0 + w * w), 0.3 * w); };
  const auto msym = sample_symbol(g, fz, false, [&](const auto&, const auto& w) { return m(w[0]); });
  CHECK(max_diff(op_apply(msym, u), apply_multiplier(u, [&](const auto& w) { return m(w[0]); })) <= 1e-12);

  // natural variables: xi_nat = h xi
  const double h = 0.25;
  const auto xin =
      sample_symbol(g, frequency_grid(g, h, true), true, [](const auto&, const auto& w) { return cplx(w[0]); });
  auto hdu = spectral_derivative(u, 0, 1);
  for (auto& v : hdu.v) v *= h;
  CHECK(max_diff(op_apply(xin, u, h), hdu) <= 1e-10);
}

TEST_CASE("op_apply errors and support") {
  const Grid g = line_grid(64, 8 * std::numbers::pi);
  const auto u = gaussian(g, 0.0, 4.0, 0.5);
  Grid small = frequency_grid(g);
  small.n[0] = 16;
  small.L[0] = small.L[0] / 4;
  const auto a = sample_symbol(g, small, false, [](const auto&, const auto&) { return cplx(1.0); });
  CHECK_THROWS_AS(op_apply(a, u), Error);
  try {
    op_apply(a, u);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SpectrumOverflow);
  }
  Grid off = frequency_grid(g);
  off.L[0] *= 1.5;
  const auto b = sample_symbol(g, off, false, [](const auto&, const auto&) { return cplx(1.0); });
  try {
    op_apply(b, u);
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridMismatch);
  }

  // left quantization: Op(a)u vanishes wherever a(z, .) does
  const auto c = sample_symbol(g, frequency_grid(g), false, [](const auto& z, const auto& w) {
    return bump(z[0] / 3.0) * cplx(1.0 + w[0] * w[0], w[0]);
  });
  const auto v = op_apply(c, u);
  double outside = 0.0;
  for (std::size_t i = 0; i < v.v.size(); ++i)
    if (std::abs(g.coord(0, static_cast<int>(i))) >= 3.0) outside = std::max(outside, std::abs(v.v[i]));
  CHECK(outside <= 1e-12);
}

TEST_CASE("star product examples") {
  const Grid g = line_grid();
  const Grid fz = frequency_grid(g);
  const auto xi = sample_symbol(g, fz, false, [](const auto&, const auto& w) { return cplx(w[0]); });
  const auto x = sample_symbol(g, fz, false, [](const auto& z, const auto&) { return cplx(z[0]); });
  const auto s1 = star_truncated(xi, x, 1);
  double err = 0.0;
  for (std::size_t zi = 0; zi < g.size(); ++zi)
    for (std::size_t wi = 0; wi < fz.size(); ++wi) {
      const cplx exact = g.coord(0, static_cast<int>(zi)) * s1.zeta_coord(0, static_cast<int>(wi)) - I;
      err = std::max(err, std::abs(s1.at(zi, wi) - exact));
    }
  CHECK(err <= 1e-9);
  const auto s0 = star_truncated(xi, x, 0);
  for (std::size_t i = 0; i < s0.a.size(); ++i) CHECK(s0.a[i] == xi.a[i] * x.a[i]);

  // operator action: Op(xi) Op(x) u = Op(x xi - i) u
  const auto u = gaussian(g, 0.4, 1.0);
  CHECK(max_diff(op_apply(xi, op_apply(x, u)), op_apply(s1, u)) <= 1e-10 * u.max_abs());

  // z-independent symbols multiply for every N
  const auto p = sample_symbol(g, fz, false, [](const auto&, const auto& w) { return cplx(std::cos(w[0])); });
  const auto q = sample_symbol(g, fz, false, [](const auto&, const auto& w) { return cplx(1.0 / (2 + std::sin(w[0]))); });
  for (int N = 0; N <= 3; ++N) {
    const auto s = star_truncated(p, q, N);
    double e = 0.0;
    for (std::size_t i = 0; i < s.a.size(); ++i) e = std::max(e, std::abs(s.a[i] - p.a[i] * q.a[i]));
    CHECK(e <= 1e-12);
  }
  CHECK_THROWS_AS(star_truncated(p, sample_symbol(g, frequency_grid(g, 0.5, true), true,
                                                  [](const auto&, const auto&) { return cplx(1.0); }),
                                 1),
                  Error);
}

TEST_CASE("composition residual gains an order of h per term") {
  const Grid g = line_grid(256, 16 * std::numbers::pi);
  const double h = 0.2;
  const Grid fz = frequency_grid(g, h, true);
  const auto a = sample_symbol(g, fz, true, [](const auto& z, const auto& w) {
    return std::exp(-z[0] * z[0] / 8) * std::exp(-w[0] * w[0] / 2) * cplx(1.0 + w[0], 0.5);
  });
  const auto b = sample_symbol(g, fz, true, [](const auto& z, const auto& w) {
    return std::exp(-(z[0] - 0.5) * (z[0] - 0.5) / 2) * cplx(std::cos(w[0]), 0.2 * w[0]);
  });
  const auto u = gaussian(g, 0.0, 2.0, 1.5);
  const auto st = composition_residuals(a, b, u, h, 3);
  for (int N = 0; N < 3; ++N) CHECK(st.residual[N + 1] < st.residual[N]);
  CHECK(st.gain >= 0.8);
  MESSAGE("composition residuals " << st.residual[0] << " " << st.residual[1] << " " << st.residual[2] << " "
                                   << st.residual[3] << " gain " << st.gain);
}

TEST_CASE("polynomial exactness and the commutator bracket") {
  const Grid g = line_grid(256, 16 * std::numbers::pi);
  const Grid fz = frequency_grid(g);
  // a polynomial of degree 2 in xi
  const auto a = sample_symbol(g, fz, false, [](const auto& z, const auto& w) {
    return std::exp(-z[0] * z[0] / 4) * (w[0] * w[0] - 0.5 * w[0]);
  });
  const auto b = sample_symbol(g, fz, false, [](const auto& z, const auto& w) {
    return std::exp(-(z[0] - 1) * (z[0] - 1) / 2) / (1.0 + 0.1 * w[0] * w[0]);
  });
  const auto u = gaussian(g, 0.0, 0.5, 1.0);
  const auto lhs = op_apply(a, op_apply(b, u));
  CHECK(max_diff(lhs, op_apply(star_truncated(a, b, 2), u)) <= 1e-10 * lhs.max_abs());

  // b polynomial of degree 1 in z
  const auto c = sample_symbol(g, fz, false, [](const auto& z, const auto&) { return cplx(2.0 * z[0] - 1.0); });
  const auto lhs2 = op_apply(b, op_apply(c, u));
  CHECK(max_diff(lhs2, op_apply(star_truncated(b, c, 1), u)) <= 1e-10 * lhs2.max_abs());

  // a *_1 b - b *_1 a = -i {a, b}
  const auto ab = star_truncated(a, b, 1), ba = star_truncated(b, a, 1);
  const auto pb = poisson(a, b);
  double e = 0.0, m = 0.0;
  for (std::size_t i = 0; i < pb.a.size(); ++i) {
    e = std::max(e, std::abs(ab.a[i] - ba.a[i] + I * pb.a[i]));
    m = std::max(m, std::abs(pb.a[i]));
  }
  CHECK(e <= 1e-12 * std::max(1.0, m));
}

TEST_CASE("poisson bracket") {
  const Grid g = uniform_grid(2, 32, 16.0, true);
  const Grid fz = uniform_grid(2, 32, 16.0, true);
  const auto tau = sample_symbol(g, fz, false, [](const auto&, const auto& w) { return cplx(w[0]); });
  const auto t = sample_symbol(g, fz, false, [](const auto& z, const auto&) { return cplx(z[0]); });
  const auto one = poisson(tau, t);
  double e = 0.0;
  for (const auto& v : one.a) e = std::max(e, std::abs(v - 1.0));
  CHECK(e <= 1e-10);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uc(-1.0, 1.0);
  const double c1 = uc(rng), c2 = uc(rng), c3 = uc(rng);
  const auto a = sample_symbol(g, fz, true, [&](const auto& z, const auto& w) {
    return cplx(std::exp(-(z[0] * z[0] + z[1] * z[1]) / 4.5 - (w[0] - c1) * (w[0] - c1) / 4.5 - w[1] * w[1] / 4.5) *
                (1 + c2 * z[1] * w[0] + c3 * w[1]));
  });
  const auto aa = poisson(a, a, 0.4);
  double mx = 0.0;
  for (const auto& v : aa.a) mx = std::max(mx, std::abs(v));
  CHECK(mx <= 1e-12);
}

TEST_CASE("poisson bracket with the free symbol matches the flow field") {
  const double h = 0.5, s = 1.2;
  for (SignBranch br : {SignBranch::Plus, SignBranch::Minus}) {
    const double pm = branch_sign(br);
    const Grid g = uniform_grid(2, 32, 16.0, true);
    const Grid fz = uniform_grid(2, 32, 16.0, true);
    // p in standard units, sampled on natural frequencies: (tau^2 +- 2 tau - xi^2) / h^2
    const auto p = sample_symbol(g, fz, true, [&](const auto&, const auto& w) {
      return cplx((w[0] * w[0] + 2 * pm * w[0] - w[1] * w[1]) / (h * h));
    });
    auto f = [&](double t, double x, double tn, double xn) {
      return std::exp(-(t * t + (x - 0.5) * (x - 0.5)) / (2 * s * s) - ((tn - 0.3) * (tn - 0.3) + xn * xn) / (2 * s * s));
    };
    const auto fs = sample_symbol(g, fz, true, [&](const auto& z, const auto& w) { return cplx(f(z[0], z[1], w[0], w[1])); });
    const auto pf = poisson(p, fs, h);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1), pickw(0, fz.size() - 1);
    double err = 0.0;
    for (int k = 0; k < 2000; ++k) {
      const std::size_t zi = pick(rng), wi = pickw(rng);
      const auto z = g.point(zi);
      const auto w = pf.zeta_point(wi);
      const auto cc = to_chart(make_point(z[0], {z[1]}, w[0], {w[1]}, h), {ChartTag::NatInterior});
      const auto V = ham_field(cc, free_metric(1), br).components;
      const double fv = f(z[0], z[1], w[0], w[1]);
      const double grad[4] = {-z[0] / (s * s) * fv, -(z[1] - 0.5) / (s * s) * fv, -(w[0] - 0.3) / (s * s) * fv,
                              -w[1] / (s * s) * fv};
      double vf = 0.0;
      for (int c = 0; c < 4; ++c) vf += V[c] * grad[c];
      err = std::max(err, std::abs(0.5 * h * pf.at(zi, wi) - vf));
    }
    CHECK(err <= 1e-8);
  }
}

TEST_CASE("frequency translation conjugation") {
  const double h = 0.3, shift = 1.0;
  const double Lt = 2 * std::numbers::pi * 8 * h * h / shift;  // shift = 8 tau_nat nodes
  Grid g;
  g.n = {32, 32};
  g.L = {Lt, 12.0};
  g.time_axis = true;
  const Grid fz = frequency_grid(g, h, true);
  const auto a = sample_symbol(g, fz, true, [](const auto& z, const auto& w) {
    return bump(w[0]) * std::exp(-z[1] * z[1] / 8) * cplx(1.0 + 0.2 * w[1] * w[1], 0.1 * std::sin(z[0]));
  });
  const auto same = conjugate_translate(a, 0.0, h);
  CHECK(same.a == a.a);

  const auto b = conjugate_translate(a, shift, h);
  // the bump now sits at tau_nat = 1
  for (int j = 0; j < 32; ++j) {
    const double tn = b.zeta_coord(0, j);
    const std::size_t wi = fz.flatten({j, 16}), zi = g.flatten({0, 16});
    const cplx expect = j >= 8 ? a.at(zi, fz.flatten({j - 8, 16})) : cplx(0.0);
    CHECK(b.at(zi, wi) == expect);
    if (std::abs(tn - 1.0) < 1e-12) CHECK(std::abs(b.at(zi, wi)) > 0.9);
  }

  // Op(b) = e^{i shift t / h^2} Op(a) e^{-i shift t / h^2}
  const double om = 2 * std::numbers::pi / Lt;
  const auto u = sample_field(g, [&](const auto& z) {
    return (1.0 + 0.5 * std::cos(om * z[0]) + 0.3 * I * std::sin(2 * om * z[0])) * std::exp(-z[1] * z[1] / 2);
  });
  GridField um(g);
  for (std::size_t i = 0; i < g.size(); ++i) um.v[i] = std::polar(1.0, -shift * g.point(i)[0] / (h * h)) * u.v[i];
  auto rhs = op_apply(a, um, h);
  for (std::size_t i = 0; i < g.size(); ++i) rhs.v[i] *= std::polar(1.0, shift * g.point(i)[0] / (h * h));
  CHECK(max_diff(op_apply(b, u, h), rhs) <= 1e-8);

  // a non-node shift goes through spectral interpolation
  auto gauss = [](double c) {
    return [c](const auto& z, const auto& w) {
      return std::exp(-(w[0] - c) * (w[0] - c) / (2 * 0.22 * 0.22)) * std::exp(-z[1] * z[1] / 8) * cplx(1.0 + w[1] * w[1]);
    };
  };
  const auto c = conjugate_translate(sample_symbol(g, fz, true, gauss(0.0)), 0.3, h);
  const auto a3 = sample_symbol(g, fz, true, gauss(0.3));
  double e = 0.0;
  for (std::size_t i = 0; i < c.a.size(); ++i) e = std::max(e, std::abs(c.a[i] - a3.a[i]));
  CHECK(e <= 1e-6 * symbol_max_abs(a3));

  CHECK_THROWS_AS(conjugate_translate(a, 1.5, h), Error);
}

TEST_CASE("normal symbol extrapolation") {
  const Grid g = uniform_grid(2, 2, 4.0, true);
  const Grid fz = uniform_grid(2, 16, 8.0, true);
  const double h0 = 1e-3;
  const std::vector<double> hs{h0, h0 / 2, h0 / 4};
  auto family = [&](const std::function<cplx(double, const std::vector<double>&, const std::vector<double>&)>& f) {
    std::vector<GridSymbol> fam;
    for (double h : hs)
      fam.push_back(sample_symbol(g, fz, false, [&](const auto& z, const auto& w) { return f(h, z, w); }));
    return fam;
  };
  const auto free = normal_symbol(family([](double h, const auto&, const auto& w) {
                                    return cplx(h * h * w[0] * w[0] - w[1] * w[1] + 2 * w[0]);
                                  }),
                                  hs);
  double e = 0.0;
  for (std::size_t wi = 0; wi < fz.size(); ++wi) {
    const auto w = free.zeta_point(wi);
    e = std::max(e, std::abs(free.at(0, wi) - (-w[1] * w[1] + 2 * w[0])));
  }
  CHECK(e <= 1e-10);

  const auto same = normal_symbol(family([](double, const auto& z, const auto& w) { return cplx(z[0] + w[1]); }), hs);
  const auto direct = sample_symbol(g, fz, false, [](const auto& z, const auto& w) { return cplx(z[0] + w[1]); });
  for (std::size_t i = 0; i < same.a.size(); ++i) CHECK(std::abs(same.a[i] - direct.a[i]) <= 1e-12);

  const auto corr = normal_symbol(family([](double h, const auto& z, const auto& w) {
                                    return cplx(w[0] + h / std::sqrt(1 + z[0] * z[0] + z[1] * z[1]));
                                  }),
                                  hs, 2);
  for (std::size_t wi = 0; wi < fz.size(); ++wi) CHECK(std::abs(corr.at(0, wi) - corr.zeta_point(wi)[0]) <= 1e-6);

  try {
    normal_symbol(family([](double h, const auto&, const auto&) { return cplx(1.0 / h); }), hs);
    FAIL("expected ExtrapolationUnstable");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ExtrapolationUnstable);
  }
}

TEST_CASE("declared frequency order matches sampled growth") {
  const Grid g = uniform_grid(1, 4, 2.0);
  const Grid fz = uniform_grid(1, 256, 400.0);
  for (double m : {1.0, -2.0, 0.5}) {
    const auto a = sample_symbol(
        g, fz, false, [&](const auto&, const auto& w) { return cplx(std::pow(1.0 + w[0] * w[0], m / 2)); },
        {m, 0, 0, 0});
    CHECK(std::abs(fit_frequency_order(a, 0, {1.0}) - a.orders.m) <= 0.2);
    CHECK(std::abs(fit_frequency_order(a, 0, {-1.0}) - a.orders.m) <= 0.2);
  }
}

#include "nrl/grid.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include "nrl/error.hpp"

namespace nrl {

namespace {

// FFTW planning is not thread safe; execution on distinct plans is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::vector<int> shape_of(const Grid& g) { return g.n; }

}  // namespace

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int k : n) s *= static_cast<std::size_t>(k);
  return s;
}

double Grid::frequency(int a, int k) const { return 2.0 * std::numbers::pi * mode(a, k) / L[a]; }

std::vector<int> Grid::unflatten(std::size_t flat) const {
  std::vector<int> idx(n.size());
  for (int a = dims() - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % n[a]);
    flat /= n[a];
  }
  return idx;
}

std::size_t Grid::flatten(const std::vector<int>& idx) const {
  std::size_t f = 0;
  for (int a = 0; a < dims(); ++a) f = f * n[a] + idx[a];
  return f;
}

std::vector<double> Grid::point(std::size_t flat) const {
  const auto idx = unflatten(flat);
  std::vector<double> z(n.size());
  for (int a = 0; a < dims(); ++a) z[a] = coord(a, idx[a]);
  return z;
}

void Grid::validate() const {
  if (n.empty() || n.size() != L.size()) throw Error(ErrorCode::ConfigInvalid, "grid: n and L must match");
  for (int a = 0; a < dims(); ++a) {
    if (!is_pow2(n[a]) || n[a] < 2) throw Error(ErrorCode::ConfigInvalid, "grid: n must be a power of two");
    if (!(L[a] > 0.0)) throw Error(ErrorCode::ConfigInvalid, "grid: L must be positive");
  }
}

Grid uniform_grid(int dims, int n, double L, bool time_axis) {
  Grid g;
  g.n.assign(dims, n);
  g.L.assign(dims, L);
  g.time_axis = time_axis;
  g.validate();
  return g;
}

double GridField::l2_norm() const {
  double vol = 1.0;
  for (int a = 0; a < grid.dims(); ++a) vol *= grid.spacing(a);
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s * vol);
}

double GridField::max_abs() const {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

GridField sample_field(const Grid& g, const std::function<cplx(const std::vector<double>&)>& f) {
  GridField u(g);
  std::vector<double> z(g.n.size());
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    for (int a = 0; a < g.dims(); ++a) z[a] = g.coord(a, idx[a]);
    u.v[i] = f(z);
  });
  return u;
}

void fft_axis(std::vector<cplx>& data, const std::vector<int>& shape, int axis, bool inverse) {
  std::size_t inner = 1, outer = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  for (int a = 0; a < axis; ++a) outer *= shape[a];
  const int n = shape[axis];
  const std::size_t block = inner * n;
  fftw_complex* buf = fftw_alloc_complex(block);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_many_dft(1, &n, static_cast<int>(inner), buf, nullptr, static_cast<int>(inner), 1, buf,
                              nullptr, static_cast<int>(inner), 1, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                              FFTW_ESTIMATE);
  }
  for (std::size_t o = 0; o < outer; ++o) {
    std::memcpy(static_cast<void*>(buf), static_cast<const void*>(data.data() + o * block), block * sizeof(cplx));
    fftw_execute(plan);
    std::memcpy(static_cast<void*>(data.data() + o * block), static_cast<const void*>(buf), block * sizeof(cplx));
  }
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
}

std::vector<cplx> fft_forward(const Grid& g, const std::vector<cplx>& u) {
  std::vector<cplx> out = u;
  const auto shape = shape_of(g);
  for (int a = 0; a < g.dims(); ++a) fft_axis(out, shape, a, false);
  // nodes start at -L/2, so the transform picks up e^{i zeta L / 2} = (-1)^m
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    int parity = 0;
    for (int a = 0; a < g.dims(); ++a) parity += g.mode(a, idx[a]);
    if (parity & 1) out[i] = -out[i];
  });
  return out;
}

std::vector<cplx> fft_inverse(const Grid& g, const std::vector<cplx>& uhat) {
  std::vector<cplx> out = uhat;
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    int parity = 0;
    for (int a = 0; a < g.dims(); ++a) parity += g.mode(a, idx[a]);
    if (parity & 1) out[i] = -out[i];
  });
  const auto shape = shape_of(g);
  for (int a = 0; a < g.dims(); ++a) fft_axis(out, shape, a, true);
  const double s = 1.0 / static_cast<double>(g.size());
  for (auto& x : out) x *= s;
  return out;
}

GridField apply_multiplier(const GridField& u, const std::function<cplx(const std::vector<double>&)>& m) {
  auto uh = fft_forward(u.grid, u.v);
  std::vector<double> zeta(u.grid.dims());
  for_each_node(u.grid, [&](std::size_t i, const std::vector<int>& idx) {
    for (int a = 0; a < u.grid.dims(); ++a) zeta[a] = u.grid.frequency(a, idx[a]);
    uh[i] *= m(zeta);
  });
  GridField out(u.grid);
  out.v = fft_inverse(u.grid, uh);
  return out;
}

GridField spectral_derivative(const GridField& u, int axis, int order) {
  // only the lines along `axis` need transforming; the node offset phase cancels
  const Grid& g = u.grid;
  const int n = g.n[axis];
  std::size_t inner = 1;
  for (int a = axis + 1; a < g.dims(); ++a) inner *= g.n[a];
  std::vector<cplx> mult(n);
  for (int k = 0; k < n; ++k)
    mult[k] = (order % 2 == 1 && k == n / 2) ? 0.0 : std::pow(g.frequency(axis, k), order) / static_cast<double>(n);
  GridField out(g);
  out.v = u.v;
  const auto shape = shape_of(g);
  fft_axis(out.v, shape, axis, false);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mult[(i / inner) % n];
  fft_axis(out.v, shape, axis, true);
  return out;
}

double top_third_energy(const Grid& g, const std::vector<cplx>& u) {
  const auto uh = fft_forward(g, u);
  double total = 0.0, top = 0.0;
  for_each_node(g, [&](std::size_t i, const std::vector<int>& idx) {
    const double e = std::norm(uh[i]);
    total += e;
    for (int a = 0; a < g.dims(); ++a) {
      if (3 * std::abs(g.mode(a, idx[a])) > g.n[a]) {
        top += e;
        break;
      }
    }
  });
  return total > 0.0 ? top / total : 0.0;
}

bool band_limited(const GridField& u, double threshold) { return top_third_energy(u.grid, u.v) < threshold; }

void write_binary(const std::string& path, const std::vector<cplx>& data) {
  static_assert(std::endian::native == std::endian::little, "binary IO assumes a little-endian host");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::ConfigInvalid, "cannot write " + path);
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(cplx)));
}

std::vector<cplx> read_binary(const std::string& path, std::size_t count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::ConfigInvalid, "cannot read " + path);
  std::vector<cplx> data(count);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(cplx)));
  if (is.gcount() != static_cast<std::streamsize>(count * sizeof(cplx)))
    throw Error(ErrorCode::ConfigInvalid, path + ": short read");
  return data;
}

nlohmann::json grid_to_json(const Grid& g) { return {{"n", g.n}, {"L", g.L}, {"time_axis", g.time_axis}}; }

Grid grid_from_json(const nlohmann::json& j) {
  for (const auto& [k, v] : j.items()) {
    if (k != "n" && k != "L" && k != "time_axis") throw Error(ErrorCode::ConfigInvalid, "grid: unknown key " + k);
  }
  Grid g;
  try {
    g.n = j.at("n").get<std::vector<int>>();
    g.L = j.at("L").get<std::vector<double>>();
    g.time_axis = j.value("time_axis", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("grid: ") + e.what());
  }
  g.validate();
  return g;
}

void save_field(const std::string& base, const GridField& u) {
  write_binary(base + ".bin", u.v);
  nlohmann::json side = {{"kind", "GridField"},
                         {"grid", grid_to_json(u.grid)},
                         {"dtype", "complex128"},
                         {"byte_order", "little"},
                         {"layout", "row-major"}};
  std::ofstream os(base + ".json");
  os << side.dump(2) << "\n";
}

GridField load_field(const std::string& base) {
  std::ifstream is(base + ".json");
  if (!is) throw Error(ErrorCode::ConfigInvalid, "cannot read " + base + ".json");
  nlohmann::json side;
  try {
    is >> side;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("field sidecar: ") + e.what());
  }
  if (side.value("kind", "") != "GridField") throw Error(ErrorCode::ConfigInvalid, "sidecar is not a GridField");
  GridField u(grid_from_json(side.at("grid")));
  u.v = read_binary(base + ".bin", u.grid.size());
  return u;
}

}  // namespace nrl

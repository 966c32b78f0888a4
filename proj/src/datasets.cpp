#include "opforge/datasets.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "opforge/error.hpp"
#include "opforge/fft.hpp"

namespace opforge {

namespace fs = std::filesystem;
using kernels::GridGeom;

namespace {

constexpr std::size_t kMaxGrfGrid = 64;

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

bool is_interior(const GridGeom& g, std::size_t idx) {
  if (g.dims == 1) return idx != 0;
  return idx / g.n != 0 && idx % g.n != 0;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class Apply>
std::vector<double> conjugate_gradient(const GridGeom& g, Apply apply, std::span<const double> f, CgInfo* info,
                                       const char* what) {
  if (g.dims != 1 && g.dims != 2) throw ArgumentError(std::string(what) + ": grid must be 1D or 2D");
  std::size_t N = g.points();
  if (f.size() != N) throw ShapeError(std::string(what) + ": right-hand side has the wrong size");
  std::vector<double> b(N, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    if (is_interior(g, i)) b[i] = f[i];
  double bnorm = std::sqrt(dot(b, b));
  double target = 1e-12 * std::max(1.0, bnorm);
  double accept = 1e-10 * std::max(1.0, bnorm);
  std::size_t max_iter = 10 * N;

  std::vector<double> x(N, 0.0), r = b, p = r, Ap(N);
  double rr = dot(r, r);
  std::size_t it = 0;
  for (; it < max_iter && std::sqrt(rr) > target; ++it) {
    apply(p.data(), Ap.data());
    double alpha = rr / dot(p, Ap);
    for (std::size_t i = 0; i < N; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    double rr_new = dot(r, r);
    double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < N; ++i) p[i] = r[i] + beta * p[i];
  }
  apply(x.data(), Ap.data());
  for (std::size_t i = 0; i < N; ++i) r[i] = b[i] - Ap[i];
  double res = std::sqrt(dot(r, r));
  if (!(res <= accept))
    throw NumericalError(std::string(what) + ": conjugate gradient did not converge in " + std::to_string(max_iter) +
                         " iterations (residual " + std::to_string(res) + ")");
  if (info) *info = {it, res};
  return x;
}

std::vector<double> grid_coords(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = static_cast<double>(j) / static_cast<double>(n);
  return x;
}

}  // namespace

std::vector<double> grf_kernel_1d(const GrfSpec& spec) {
  std::size_t n = spec.n;
  auto x = grid_coords(n);
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d = x[i] - x[j];
      K[i * n + j] = spec.variance * std::exp(-d * d / (2.0 * spec.length * spec.length));
    }
  return K;
}

std::vector<std::vector<double>> grf_sample(const GrfSpec& spec, std::size_t count) {
  if (spec.n < 2 || spec.n > kMaxGrfGrid)
    throw ArgumentError("grf_sample: grid must have 2.." + std::to_string(kMaxGrfGrid) + " points per axis");
  if (spec.dims != 1 && spec.dims != 2) throw ArgumentError("grf_sample: dims must be 1 or 2");
  if (!(spec.length > 0.0) || !(spec.variance > 0.0))
    throw ArgumentError("grf_sample: length and variance must be positive");
  std::size_t n = spec.n;
  GrfSpec unit = spec;
  unit.variance = 1.0;
  auto K = grf_kernel_1d(unit);
  Eigen::MatrixXd C(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) C(i, j) = K[i * n + j];

  Eigen::MatrixXd L;
  bool ok = false;
  for (double jitter = 1e-10; jitter <= 1e-2 && !ok; jitter *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(C + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      L = llt.matrixL();
      ok = L.allFinite();
    }
  }
  if (!ok) throw NumericalError("grf_sample: covariance factorization failed at maximum jitter");

  double sigma = std::sqrt(spec.variance);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> v(spec.dims == 1 ? n : n * n);
    if (spec.dims == 1) {
      Eigen::VectorXd z(n);
      for (std::size_t i = 0; i < n; ++i) z(i) = normal(rng);
      Eigen::VectorXd y = L * z;
      for (std::size_t i = 0; i < n; ++i) v[i] = sigma * y(i);
    } else {
      Eigen::MatrixXd Z(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) Z(i, j) = normal(rng);
      Eigen::MatrixXd Y = L * Z * L.transpose();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) v[i * n + j] = sigma * Y(i, j);
    }
    out.push_back(std::move(v));
  }
  return out;
}

double psi_value(double v) { return v > 0.0 ? 12.0 : 3.0; }

std::vector<double> psi_map(std::span<const double> field) {
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = psi_value(field[i]);
  return out;
}

std::vector<double> solve_poisson_fd(const GridGeom& g, std::span<const double> f, CgInfo* info) {
  return conjugate_gradient(
      g, [&](const double* u, double* out) { kernels::neg_laplacian(g, u, out); }, f, info, "solve_poisson_fd");
}

std::vector<double> solve_darcy_fd(const GridGeom& g, std::span<const double> a, std::span<const double> f,
                                   CgInfo* info) {
  if (a.size() != g.points()) throw ShapeError("solve_darcy_fd: coefficient has the wrong size");
  for (double v : a)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("solve_darcy_fd: coefficient must be positive everywhere");
  return conjugate_gradient(
      g, [&](const double* u, double* out) { kernels::darcy_apply(g, a.data(), u, out); }, f, info, "solve_darcy_fd");
}

std::vector<double> transport_exact(std::span<const double> f0, std::size_t dims, std::size_t n,
                                    std::vector<double> velocity, double T) {
  if (dims != 1 && dims != 2) throw ArgumentError("transport_exact: dims must be 1 or 2");
  std::size_t N = dims == 1 ? n : n * n;
  if (f0.size() != N) throw ShapeError("transport_exact: field size does not match the grid");
  if (velocity.size() == 1) velocity.resize(dims, velocity[0]);
  if (velocity.size() != dims) throw ArgumentError("transport_exact: velocity needs one entry per axis");

  std::vector<cdouble> a(f0.begin(), f0.end());
  auto transform_axis = [&](std::size_t axis, bool inverse) {
    std::size_t lines = N / n;
    std::vector<cdouble> line(n);
    for (std::size_t l = 0; l < lines; ++l) {
      auto at = [&](std::size_t k) -> cdouble& { return axis == 0 && dims == 2 ? a[k * n + l] : a[l * n + k]; };
      for (std::size_t k = 0; k < n; ++k) line[k] = at(k);
      fft_inplace(line, inverse);
      for (std::size_t k = 0; k < n; ++k) at(k) = line[k];
    }
  };
  for (std::size_t ax = 0; ax < dims; ++ax) transform_axis(ax, false);

  auto freq = [n](std::size_t k) { return k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - n; };
  for (std::size_t idx = 0; idx < N; ++idx) {
    std::size_t k[2] = {dims == 1 ? idx : idx / n, dims == 1 ? 0 : idx % n};
    double phase = 0.0;
    bool nyquist = false;
    for (std::size_t ax = 0; ax < dims; ++ax) {
      phase += freq(k[ax]) * velocity[ax] * T;
      nyquist = nyquist || (n % 2 == 0 && k[ax] == n / 2);
    }
    phase = -2.0 * std::numbers::pi * (phase - std::floor(phase));
    a[idx] *= nyquist ? cdouble(std::cos(phase), 0.0) : std::polar(1.0, phase);
  }

  for (std::size_t ax = 0; ax < dims; ++ax) transform_axis(ax, true);
  std::vector<double> out(N);
  for (std::size_t i = 0; i < N; ++i) out[i] = a[i].real() / static_cast<double>(N);
  return out;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

std::size_t OperatorDataset::split_begin(Split s) const {
  switch (s) {
    case Split::Train: return 0;
    case Split::Validation: return n_train;
    case Split::Test: return n_train + n_val;
  }
  return 0;
}

std::size_t OperatorDataset::split_size(Split s) const {
  switch (s) {
    case Split::Train: return n_train;
    case Split::Validation: return n_val;
    case Split::Test: return n_test;
  }
  return 0;
}

namespace {

Tensor gather(const std::vector<double>& src, const Shape& spatial, std::size_t channels,
              std::span<const std::size_t> idx, std::size_t count) {
  std::size_t stride = numel(spatial) * channels;
  std::vector<double> out(idx.size() * stride);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (idx[b] >= count) throw ArgumentError("dataset index " + std::to_string(idx[b]) + " out of range");
    std::copy_n(src.begin() + static_cast<long>(idx[b] * stride), stride, out.begin() + static_cast<long>(b * stride));
  }
  Shape s{idx.size()};
  s.insert(s.end(), spatial.begin(), spatial.end());
  s.push_back(channels);
  return Tensor::from(std::move(s), std::move(out));
}

std::vector<std::size_t> split_indices(const OperatorDataset& ds, Split s) {
  std::vector<std::size_t> idx(ds.split_size(s));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = ds.split_begin(s) + i;
  return idx;
}

}  // namespace

Tensor OperatorDataset::input_batch(std::span<const std::size_t> idx) const {
  return gather(inputs, spatial, in_channels, idx, count());
}

Tensor OperatorDataset::output_batch(std::span<const std::size_t> idx) const {
  return gather(outputs, spatial, out_channels, idx, count());
}

Tensor OperatorDataset::split_inputs(Split s) const { return input_batch(split_indices(*this, s)); }
Tensor OperatorDataset::split_outputs(Split s) const { return output_batch(split_indices(*this, s)); }

void OperatorDataset::validate() const {
  if (spatial.empty() || spatial.size() > 2) throw DataError("dataset must have 1 or 2 spatial axes");
  for (auto n : spatial)
    if (n < 2) throw DataError("dataset resolution must be at least 2");
  if (in_channels == 0 || out_channels == 0) throw DataError("dataset channel counts must be positive");
  if (inputs.size() != count() * points() * in_channels) throw DataError("dataset input array has the wrong size");
  if (outputs.size() != count() * points() * out_channels) throw DataError("dataset output array has the wrong size");
}

Normalization compute_normalization(const OperatorDataset& ds) {
  Normalization n;
  auto scan = [&](const std::vector<double>& v, std::size_t C, std::vector<double>& lo, std::vector<double>& hi) {
    lo.assign(C, std::numeric_limits<double>::infinity());
    hi.assign(C, -std::numeric_limits<double>::infinity());
    std::size_t end = ds.n_train * ds.points() * C;
    for (std::size_t i = 0; i < end; ++i) {
      lo[i % C] = std::min(lo[i % C], v[i]);
      hi[i % C] = std::max(hi[i % C], v[i]);
    }
  };
  if (ds.n_train == 0) throw DataError("normalization needs a non-empty training split");
  scan(ds.inputs, ds.in_channels, n.in_min, n.in_max);
  scan(ds.outputs, ds.out_channels, n.out_min, n.out_max);
  return n;
}

namespace {
double span_of(double lo, double hi) { return hi > lo ? hi - lo : 1.0; }
}  // namespace

std::vector<double> normalize_values(std::span<const double> v, const std::vector<double>& lo,
                                     const std::vector<double>& hi) {
  std::size_t C = lo.size();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo[i % C]) / span_of(lo[i % C], hi[i % C]);
  return out;
}

std::vector<double> denormalize_values(std::span<const double> v, const std::vector<double>& lo,
                                       const std::vector<double>& hi) {
  std::size_t C = lo.size();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * span_of(lo[i % C], hi[i % C]) + lo[i % C];
  return out;
}

void save_dataset(const OperatorDataset& ds, const fs::path& dir) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  std::vector<double> blob(ds.inputs);
  blob.insert(blob.end(), ds.outputs.begin(), ds.outputs.end());
  write_f64(dir / "data.bin", blob);
  json m = {{"format", "opforge-dataset"},
            {"version", 1},
            {"resolution", ds.spatial},
            {"count", ds.count()},
            {"channels", {{"input", ds.in_channels}, {"output", ds.out_channels}}},
            {"splits", {{"train", ds.n_train}, {"validation", ds.n_val}, {"test", ds.n_test}}},
            {"normalization", ds.norm.to_json()},
            {"provenance", ds.provenance},
            {"blob",
             {{"file", "data.bin"},
              {"dtype", "float64-le"},
              {"inputs_offset", 0},
              {"outputs_offset", ds.inputs.size() * sizeof(double)}}}};
  write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

OperatorDataset load_dataset(const fs::path& dir) {
  fs::path mf = dir / "manifest.json";
  if (!fs::exists(mf)) throw NotFoundError("no dataset manifest at " + mf.string());
  json m;
  try {
    std::ifstream in(mf);
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("unreadable dataset manifest " + mf.string() + ": " + e.what());
  }
  OperatorDataset ds;
  try {
    if (m.at("format") != "opforge-dataset") throw DataError("not a dataset manifest: " + mf.string());
    if (m.at("version") != 1) throw DataError("unsupported dataset version in " + mf.string());
    ds.spatial = m.at("resolution").get<Shape>();
    ds.in_channels = m.at("channels").at("input").get<std::size_t>();
    ds.out_channels = m.at("channels").at("output").get<std::size_t>();
    ds.n_train = m.at("splits").at("train").get<std::size_t>();
    ds.n_val = m.at("splits").at("validation").get<std::size_t>();
    ds.n_test = m.at("splits").at("test").get<std::size_t>();
    ds.norm = Normalization::from_json(m.at("normalization"));
    ds.provenance = m.value("provenance", json::object());
    auto blob = read_f64(dir / m.at("blob").at("file").get<std::string>());
    std::size_t n_in = ds.count() * numel(ds.spatial) * ds.in_channels;
    if (blob.size() != n_in + ds.count() * numel(ds.spatial) * ds.out_channels)
      throw DataError("dataset blob size does not match the manifest in " + dir.string());
    ds.inputs.assign(blob.begin(), blob.begin() + static_cast<long>(n_in));
    ds.outputs.assign(blob.begin() + static_cast<long>(n_in), blob.end());
  } catch (const json::exception& e) {
    throw DataError("malformed dataset manifest " + mf.string() + ": " + e.what());
  }
  ds.validate();
  return ds;
}

json GenSpec::to_json() const {
  return {{"problem", problem}, {"resolution", resolution}, {"n_train", n_train}, {"n_val", n_val},
          {"n_test", n_test},   {"length", length},         {"seed", seed},       {"modes", modes},
          {"decay", decay},     {"velocity", velocity},     {"time", time}};
}

GenSpec GenSpec::from_json(const json& j) {
  GenSpec s;
  try {
    s.problem = j.value("problem", s.problem);
    s.resolution = j.value("resolution", s.resolution);
    s.n_train = j.value("n_train", s.n_train);
    s.n_val = j.value("n_val", s.n_val);
    s.n_test = j.value("n_test", s.n_test);
    s.length = j.value("length", s.length);
    s.seed = j.value("seed", s.seed);
    s.modes = j.value("modes", s.modes);
    s.decay = j.value("decay", s.decay);
    s.velocity = j.value("velocity", s.velocity);
    s.time = j.value("time", s.time);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed generator spec: ") + e.what());
  }
  return s;
}

namespace {

// Sine series sum_k w_k a_k sin(pi k x), vanishing at x = 0 and x = 1.
std::vector<double> sine_source(std::mt19937_64& rng, const GenSpec& s, std::size_t dims) {
  std::size_t n = s.resolution, K = s.modes;
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto x = grid_coords(n);
  std::vector<double> sines(K * n);
  for (std::size_t k = 1; k <= K; ++k)
    for (std::size_t j = 0; j < n; ++j) sines[(k - 1) * n + j] = std::sin(std::numbers::pi * static_cast<double>(k) * x[j]);
  if (dims == 1) {
    std::vector<double> f(n, 0.0);
    for (std::size_t k = 1; k <= K; ++k) {
      double c = U(rng) * std::pow(static_cast<double>(k), -s.decay);
      for (std::size_t j = 0; j < n; ++j) f[j] += c * sines[(k - 1) * n + j];
    }
    return f;
  }
  std::vector<double> f(n * n, 0.0);
  for (std::size_t k = 1; k <= K; ++k)
    for (std::size_t l = 1; l <= K; ++l) {
      double c = U(rng) * std::pow(static_cast<double>(k * k + l * l), -0.5 * s.decay);
      for (std::size_t i = 0; i < n; ++i) {
        double si = c * sines[(k - 1) * n + i];
        for (std::size_t j = 0; j < n; ++j) f[i * n + j] += si * sines[(l - 1) * n + j];
      }
    }
  return f;
}

// Real periodic series with frequencies |k| <= K per axis and no mean.
std::vector<double> periodic_source(std::mt19937_64& rng, const GenSpec& s, std::size_t dims) {
  std::size_t n = s.resolution;
  long K = static_cast<long>(s.modes);
  std::normal_distribution<double> N01(0.0, 1.0);
  auto x = grid_coords(n);
  const double tau = 2.0 * std::numbers::pi;
  if (dims == 1) {
    std::vector<double> f(n, 0.0);
    for (long k = 1; k <= K; ++k) {
      double w = std::pow(static_cast<double>(k), -s.decay);
      double a = w * N01(rng), b = w * N01(rng);
      for (std::size_t j = 0; j < n; ++j) {
        double t = tau * static_cast<double>(k) * x[j];
        f[j] += a * std::cos(t) + b * std::sin(t);
      }
    }
    return f;
  }
  std::vector<double> f(n * n, 0.0);
  for (long k = 0; k <= K; ++k)
    for (long l = -K; l <= K; ++l) {
      if (k == 0 && l <= 0) continue;
      double w = std::pow(static_cast<double>(k * k + l * l), -0.5 * s.decay);
      double a = w * N01(rng), b = w * N01(rng);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double t = tau * (static_cast<double>(k) * x[i] + static_cast<double>(l) * x[j]);
          f[i * n + j] += a * std::cos(t) + b * std::sin(t);
        }
    }
  return f;
}

}  // namespace

OperatorDataset generate_dataset(const GenSpec& s) {
  static const std::vector<std::string> known = {"poisson1d", "poisson2d", "darcy2d", "transport1d", "transport2d"};
  if (std::find(known.begin(), known.end(), s.problem) == known.end())
    throw ConfigError("unknown problem '" + s.problem + "' (expected poisson1d, poisson2d, darcy2d, transport1d, transport2d)");
  if (s.n_train < 1 || s.n_val < 1 || s.n_test < 1) throw ConfigError("every split needs at least one sample");
  if (s.resolution < 8) throw ConfigError("resolution must be at least 8");
  std::size_t dims = s.problem.ends_with("2d") ? 2 : 1;
  std::size_t n = s.resolution;
  bool periodic = s.problem.starts_with("transport");
  if (periodic && 2 * s.modes >= n)
    throw ConfigError("transport sources need modes < resolution/2 to stay bandlimited on the grid");
  if (s.modes < 1) throw ConfigError("modes must be at least 1");

  OperatorDataset ds;
  ds.spatial = Shape(dims, n);
  ds.n_train = s.n_train;
  ds.n_val = s.n_val;
  ds.n_test = s.n_test;
  std::size_t N = ds.count(), P = ds.points();
  ds.inputs.resize(N * P);
  ds.outputs.resize(N * P);
  GridGeom g{dims, n, 1.0 / static_cast<double>(n)};

  std::vector<std::vector<double>> grf;
  if (s.problem == "darcy2d") {
    if (n > kMaxGrfGrid) throw ConfigError("darcy2d resolution is limited to " + std::to_string(kMaxGrfGrid));
    grf = grf_sample(GrfSpec{s.length, 0.1, n, 2, s.seed}, N);
  }
  std::vector<double> ones(P, 1.0);

  for (std::size_t i = 0; i < N; ++i) {
    auto rng = sample_rng(s.seed, i);
    std::vector<double> in, out;
    if (s.problem.starts_with("poisson")) {
      in = sine_source(rng, s, dims);
      out = solve_poisson_fd(g, in);
    } else if (s.problem == "darcy2d") {
      in = psi_map(grf[i]);
      out = solve_darcy_fd(g, in, ones);
    } else {
      in = periodic_source(rng, s, dims);
      out = transport_exact(in, dims, n, {s.velocity}, s.time);
    }
    std::copy(in.begin(), in.end(), ds.inputs.begin() + static_cast<long>(i * P));
    std::copy(out.begin(), out.end(), ds.outputs.begin() + static_cast<long>(i * P));
  }
  ds.norm = compute_normalization(ds);
  ds.provenance = {{"generator", s.problem}, {"params", s.to_json()}, {"seed", s.seed}};
  return ds;
}

OperatorDataset subsample(const OperatorDataset& ds, std::size_t target) {
  std::size_t n = ds.resolution();
  if (target == 0 || n % target != 0)
    throw DivisibilityError("resolution " + std::to_string(target) + " does not divide the base resolution " +
                            std::to_string(n));
  if (target == n) return ds;
  std::size_t stride = n / target, d = ds.dims();
  OperatorDataset out = ds;
  out.spatial = Shape(d, target);
  std::size_t P = out.points();
  auto pick = [&](const std::vector<double>& src, std::size_t C) {
    std::vector<double> v(ds.count() * P * C);
    for (std::size_t s = 0; s < ds.count(); ++s)
      for (std::size_t p = 0; p < P; ++p) {
        std::size_t src_p = d == 1 ? p * stride : (p / target) * stride * n + (p % target) * stride;
        for (std::size_t c = 0; c < C; ++c) v[(s * P + p) * C + c] = src[(s * ds.points() + src_p) * C + c];
      }
    return v;
  };
  out.inputs = pick(ds.inputs, ds.in_channels);
  out.outputs = pick(ds.outputs, ds.out_channels);
  out.provenance["subsampled_from"] = n;
  return out;
}

std::size_t DatasetCollection::split_size(Split s) const {
  std::size_t total = 0;
  for (const auto& src : sources) total += src->split_size(s);
  return total;
}

Normalization DatasetCollection::normalization() const {
  std::vector<Normalization> parts;
  for (const auto& src : sources) parts.push_back(src->norm);
  return Normalization::merge(parts);
}

DatasetCollection concat_datasets(std::vector<std::shared_ptr<const OperatorDataset>> sets) {
  if (sets.empty()) throw ContractError("concat_datasets needs at least one dataset");
  for (const auto& s : sets) {
    if (!s) throw ContractError("concat_datasets: null dataset");
    if (s->in_channels != sets.front()->in_channels || s->out_channels != sets.front()->out_channels)
      throw ContractError("concat_datasets: channel counts differ between datasets");
    if (s->dims() != sets.front()->dims())
      throw ContractError("concat_datasets: spatial dimension differs between datasets");
  }
  return DatasetCollection{std::move(sets)};
}

DatasetCollection load_multiresolution(std::shared_ptr<const OperatorDataset> base,
                                       const std::vector<std::size_t>& targets, std::size_t fno_modes) {
  if (!base) throw ContractError("load_multiresolution: null base dataset");
  if (targets.empty()) throw ContractError("load_multiresolution needs at least one target resolution");
  std::vector<std::shared_ptr<const OperatorDataset>> views;
  for (auto t : targets) {
    if (t == 0 || base->resolution() % t != 0)
      throw DivisibilityError("resolution " + std::to_string(t) + " does not divide the base resolution " +
                              std::to_string(base->resolution()));
    if (fno_modes > 0 && fno_modes > t / 2 + 1)
      throw ConfigError("resolution " + std::to_string(t) + " supports at most " + std::to_string(t / 2 + 1) +
                        " modes, got " + std::to_string(fno_modes));
    if (t == base->resolution())
      views.push_back(base);
    else
      views.push_back(std::make_shared<const OperatorDataset>(subsample(*base, t)));
  }
  return concat_datasets(std::move(views));
}

std::vector<Batch> make_batches(const DatasetCollection& data, Split s, std::size_t batch_size,
                                std::mt19937_64* rng) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  std::vector<Batch> batches;
  for (std::size_t src = 0; src < data.sources.size(); ++src) {
    const auto& ds = *data.sources[src];
    std::vector<std::size_t> idx(ds.split_size(s));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = ds.split_begin(s) + i;
    if (rng) std::shuffle(idx.begin(), idx.end(), *rng);
    for (std::size_t b = 0; b < idx.size(); b += batch_size) {
      std::size_t e = std::min(idx.size(), b + batch_size);
      batches.push_back(Batch{src, std::vector<std::size_t>(idx.begin() + static_cast<long>(b),
                                                             idx.begin() + static_cast<long>(e))});
    }
  }
  if (rng) std::shuffle(batches.begin(), batches.end(), *rng);
  return batches;
}

}  // namespace opforge

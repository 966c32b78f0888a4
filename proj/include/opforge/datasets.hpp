#pragma once

// Synthetic operator datasets: generators, FD solvers, storage and views.
//
// Grids are node-based with x_j = j / n, j = 0..n-1. For the Dirichlet
// problems index 0 is the boundary and x = 1 is an implicit zero node; the
// periodic problems treat the grid as a torus.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "opforge/kernels.hpp"
#include "opforge/model.hpp"
#include "opforge/wrappers.hpp"

namespace opforge {

struct GrfSpec {
  double length = 0.1;
  double variance = 0.1;
  std::size_t n = 64;
  std::size_t dims = 1;
  std::uint64_t seed = 0;
};

// K_ij = variance * exp(-|x_i - x_j|^2 / (2 length^2)) on the 1D grid.
std::vector<double> grf_kernel_1d(const GrfSpec& spec);

// Zero-mean draws with squared-exponential covariance, each n^dims values.
// Separable covariance lets the 2D case reuse the 1D factor.
std::vector<std::vector<double>> grf_sample(const GrfSpec& spec, std::size_t count);

// 12 where v > 0, 3 elsewhere.
double psi_value(double v);
std::vector<double> psi_map(std::span<const double> field);

struct CgInfo {
  std::size_t iterations = 0;
  double residual = 0.0;
};

// -lap_h u = f with u = 0 on the boundary; boundary entries of f are ignored.
std::vector<double> solve_poisson_fd(const kernels::GridGeom& g, std::span<const double> f, CgInfo* info = nullptr);
// -div(a grad u) = f, flux form with harmonic face averages. a must be > 0.
std::vector<double> solve_darcy_fd(const kernels::GridGeom& g, std::span<const double> a, std::span<const double> f,
                                   CgInfo* info = nullptr);

// u(x) = f0(x - v T) on a periodic grid by a phase shift of every Fourier mode.
// velocity holds one entry per axis (a single entry is broadcast).
std::vector<double> transport_exact(std::span<const double> f0, std::size_t dims, std::size_t n,
                                    std::vector<double> velocity, double T);

enum class Split { Train, Validation, Test };
std::string split_name(Split s);

struct OperatorDataset {
  Shape spatial;  // e.g. {64} or {64, 64}
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<double> inputs;   // [N, spatial..., in_channels]
  std::vector<double> outputs;  // [N, spatial..., out_channels]
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  Normalization norm;
  json provenance = json::object();

  std::size_t count() const { return n_train + n_val + n_test; }
  std::size_t points() const { return numel(spatial); }
  std::size_t dims() const { return spatial.size(); }
  std::size_t resolution() const { return spatial.front(); }
  std::size_t split_begin(Split s) const;
  std::size_t split_size(Split s) const;

  Tensor input_batch(std::span<const std::size_t> indices) const;
  Tensor output_batch(std::span<const std::size_t> indices) const;
  Tensor split_inputs(Split s) const;
  Tensor split_outputs(Split s) const;

  void validate() const;
};

// Per-channel min/max over the training split only.
Normalization compute_normalization(const OperatorDataset& ds);
std::vector<double> normalize_values(std::span<const double> v, const std::vector<double>& lo,
                                     const std::vector<double>& hi);
std::vector<double> denormalize_values(std::span<const double> v, const std::vector<double>& lo,
                                       const std::vector<double>& hi);

// manifest.json plus data.bin (inputs then outputs, little-endian float64).
void save_dataset(const OperatorDataset& ds, const std::filesystem::path& dir);
OperatorDataset load_dataset(const std::filesystem::path& dir);

struct GenSpec {
  std::string problem = "poisson1d";  // poisson1d poisson2d darcy2d transport1d transport2d
  std::size_t resolution = 64;
  std::size_t n_train = 256, n_val = 128, n_test = 128;
  double length = 0.1;  // GRF correlation length (darcy)
  std::uint64_t seed = 0;
  std::size_t modes = 16;  // series terms for poisson and transport sources
  double decay = 1.5;      // coefficient k decays like k^-decay
  double velocity = 0.2;
  double time = 1.0;

  json to_json() const;
  static GenSpec from_json(const json& j);
};

// Every sample draws its coefficients from (seed, sample index), so series
// based problems give the same functions at any resolution.
OperatorDataset generate_dataset(const GenSpec& spec);

// Keeps every (n / target)-th node along each axis.
OperatorDataset subsample(const OperatorDataset& ds, std::size_t target);

// Several datasets with matching channels; batches never mix sources.
struct DatasetCollection {
  std::vector<std::shared_ptr<const OperatorDataset>> sources;

  std::size_t in_channels() const { return sources.front()->in_channels; }
  std::size_t out_channels() const { return sources.front()->out_channels; }
  std::size_t split_size(Split s) const;
  // Normalization covering every source.
  Normalization normalization() const;
};

DatasetCollection concat_datasets(std::vector<std::shared_ptr<const OperatorDataset>> sets);

// Strided views of `base` at each target resolution. With fno_modes > 0 every
// target must keep fno_modes <= target/2 + 1.
DatasetCollection load_multiresolution(std::shared_ptr<const OperatorDataset> base,
                                       const std::vector<std::size_t>& targets, std::size_t fno_modes = 0);

struct Batch {
  std::size_t source = 0;
  std::vector<std::size_t> indices;  // absolute sample indices in the source
};

// Shuffled when rng is given, ordered otherwise. Each source's split is cut
// into batches, then the batch order is shuffled across sources.
std::vector<Batch> make_batches(const DatasetCollection& data, Split s, std::size_t batch_size,
                                std::mt19937_64* rng);

}  // namespace opforge

#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lkgrf/covariance.hpp"
#include "lkgrf/flats.hpp"

namespace lkgrf {

/// Regular lattice origin + h * index on each axis, row-major storage
/// (axis 0 slowest).
struct Grid {
  int d = 0;
  double h = 0.0;
  std::vector<int> shape;
  std::vector<double> origin;

  /// Nodes -n h, ..., n h on every axis with n = ceil(half_width / h).
  static Grid centered(int d, double half_width, double h);

  std::size_t size() const;
  double coord(int axis, int index) const { return origin[axis] + h * index; }
  Eigen::VectorXd point(std::size_t flat_index) const;
  std::size_t stride(int axis) const;
};

struct FieldSample {
  Grid grid;
  std::vector<double> X;
  std::vector<std::vector<double>> gradient;  // d arrays
  std::vector<std::vector<double>> hessian;   // d(d+1)/2 arrays, (i<=j) lexicographic
  std::uint64_t seed = 0;
  std::string method;       // "circulant" or "harmonic"
  double bias_bound = 0.0;  // |excess kurtosis| bound of the harmonic fallback, 0 for circulant

  int hessian_index(int i, int j) const;
};

struct SimulationOptions {
  bool derivatives = true;
  int padding = 2;       // embedding length / window length per axis
  int max_padding = 8;
  int harmonics = 4096;  // fallback component count
  bool force_fallback = false;
};

/// Reusable sampler: the circulant eigenvalues and spectral multipliers are
/// computed once per (model, grid).
class FieldSimulator {
 public:
  FieldSimulator(const CovarianceModel& model, const Grid& grid, const SimulationOptions& options = {});
  ~FieldSimulator();
  FieldSimulator(FieldSimulator&&) noexcept;
  FieldSimulator& operator=(FieldSimulator&&) noexcept;

  FieldSample sample(std::uint64_t seed) const;

  const Grid& grid() const;
  const std::string& method() const;
  int padding_used() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

FieldSample simulate(const CovarianceModel& model, const Grid& grid, std::uint64_t seed,
                     const SimulationOptions& options = {});

/// Field along a k-flat, simulated intrinsically on R^k with the same radial
/// covariance (law-equal to restricting a d-dimensional realization).
FieldSample restrict_to_flat(const CovarianceModel& model, const Flat& flat, const Grid& grid_k,
                             std::uint64_t seed, const SimulationOptions& options = {});

/// Deterministic field on a grid from a jet function (tests, synthetic inputs).
struct PointJet {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};
FieldSample tabulate_field(const Grid& grid, const std::function<PointJet(const Eigen::VectorXd&)>& fn);

/// Binary dump: int64 d, int64 shape[d], double h, uint64 seed, then X and the
/// derivative arrays (gradient, Hessian i<=j) as little-endian doubles.
void dump_field(const FieldSample& sample, const std::string& path);
FieldSample load_field(const std::string& path);

}  // namespace lkgrf

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lkgrf/fieldsim.hpp"
#include "lkgrf/flats.hpp"

namespace lkgrf {

using Mask = std::vector<std::uint8_t>;

/// Number of maximal runs of true entries.
int euler_char_1d(std::span<const std::uint8_t> mask);
/// V - E + F of the cubical complex made of the closed true pixels
/// (row-major rows x cols).
int euler_char_2d(std::span<const std::uint8_t> mask, int rows, int cols);
/// Same for closed voxels (n0 x n1 x n2, row-major).
int euler_char_3d(std::span<const std::uint8_t> mask, int n0, int n1, int n2);

struct ExcursionSet {
  Grid grid;
  Mask mask;  // X >= u and |t| <= N
  double u = 0.0;
};

/// Excursion set restricted to the window ball of radius N (nodes with
/// |t| <= N belong to the window).
ExcursionSet excursion_set(const FieldSample& sample, double u, double N);

/// Level function g on the grid with the set {g >= 0}; combined with the
/// window as min(X - u, N - |t|).
std::vector<double> window_level(const FieldSample& sample, double u, double N);
/// Level function of a boolean mask (+1 inside, -1 outside), so marching
/// squares interpolates crossings at edge midpoints.
std::vector<double> mask_level(std::span<const std::uint8_t> mask);

/// Half the marching-squares perimeter of {g >= 0} with linear edge
/// interpolation (ambiguous cells resolved by the cell-centre average).
double half_perimeter_2d(std::span<const double> level, int rows, int cols, double h);

/// Direct lattice LK of a 2-d set: m = 2 area (count * h^2), m = 1 half
/// marching-squares perimeter, m = 0 cubical Euler characteristic.
double direct_lk_2d(std::span<const double> level, int rows, int cols, double h, int m);
double direct_lk_2d(std::span<const std::uint8_t> mask, int rows, int cols, double h, int m);
/// d = 3 supports m = 3 (volume) and m = 0 (voxel Euler characteristic).
double direct_lk_3d(std::span<const std::uint8_t> mask, int n0, int n1, int n2, double h, int m);

/// Morse count of the excursion above u inside a window ball.
struct MorseCount {
  int interior = 0;   // zeta: interior critical points with X >= u, +-1 by index parity of -X
  int boundary = 0;   // critical points of X on the window boundary pointing outward
  int total() const { return interior + boundary; }
  int degenerate = 0; // located critical points with |det D^2 X| < 1e-9 mu4^{k/2}
  bool suspect() const { return degenerate > 0; }
};

/// k = 1: sign changes of X' (zero counts as positive) refined linearly;
/// boundary term [X(L) >= u][X'(L) <= 0] + [X(R) >= u][X'(R) > 0] so that
/// total() equals the run count of the closed excursion. k = 2: corner
/// sign-change candidates refined by one Newton step from the cell centre
/// (accepted when it stays in the half-open cell); the boundary term counts
/// extrema of X on the window circle where the outward normal derivative is
/// positive. The window is the whole grid for k = 1 when N is infinite.
MorseCount zeta_morse(const FieldSample& sample, double u,
                      double N = std::numeric_limits<double>::infinity(), double mu4 = 3.0);

struct DiracResult {
  double value = 0.0;
  bool resolution_warning = false;  // eps < h
};

/// (-1)^k sum h^k delta_eps(grad X) 1{X >= u} det D^2 X over window nodes,
/// delta_eps = 1 / (eps^k kappa_k) on the eps-ball.
DiracResult zeta_epsilon(const FieldSample& sample, double u, double eps,
                         double N = std::numeric_limits<double>::infinity());

/// Multilinear interpolation of a grid array at t (t must lie in the grid box).
double interpolate(const Grid& grid, std::span<const double> values, const Eigen::VectorXd& t);

/// 1-d field along the chord of a line through the window ball of radius N,
/// with X, X' = <grad X, v>, X'' = v^T D^2 X v interpolated from a d-field.
FieldSample line_field(const FieldSample& sample, const Flat& line, double N, double h);

struct FlatValue {
  double value = 0.0;
  bool suspect = false;
};

/// chi of (excursion within B_N) restricted to a flat; called with the single
/// flat R^d when m = 0.
using FlatFunctional = std::function<FlatValue(const Flat& flat, double N)>;

enum class LineCount { runs, morse, dirac };

/// chi along flats of the set {level >= 0}: run counts on chords (k = 1),
/// cubical chi on a planar grid (k = 2), or the full window chi (k = d = 2).
FlatFunctional level_set_chi(std::function<double(const Eigen::VectorXd&)> level, double h);

/// chi along flats of the excursion of a simulated field (k = 1 chords or the
/// full window for k = d), counted by runs, Morse counts or the Dirac sum
/// (interior Dirac sum plus the exact boundary term).
FlatFunctional field_chi(const FieldSample& sample, double u, LineCount mode, double eps = 0.1,
                         double mu4 = 3.0);

struct LKEstimate {
  int m = 0;
  double value = 0.0;
  std::string estimator;  // "direct", "crofton_morse", "dirac_eps"
  std::optional<double> mc_std_error;
  std::optional<std::size_t> flats_used;
  std::optional<double> epsilon;
  int suspect_flats = 0;
};

/// Weighted Monte Carlo Crofton integral over affine (d-m)-flats hitting B_N.
/// m = 0 evaluates the functional once on R^d (nu(G(d,d)) = 1).
LKEstimate crofton_lkc(const FlatFunctional& chi, int d, int m, double N, std::size_t n_flats,
                       std::uint64_t seed, unsigned threads = 1);

}  // namespace lkgrf

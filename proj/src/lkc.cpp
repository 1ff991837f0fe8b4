#include "lkgrf/lkc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lkgrf/error.hpp"
#include "lkgrf/parallel.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

int euler_char_1d(std::span<const std::uint8_t> mask) {
  int runs = 0;
  bool inside = false;
  for (auto v : mask) {
    if (v && !inside) ++runs;
    inside = v != 0;
  }
  return runs;
}

int euler_char_2d(std::span<const std::uint8_t> mask, int rows, int cols) {
  require(static_cast<std::size_t>(rows) * cols == mask.size(), ErrorCode::invalid_argument,
          "euler_char_2d: mask size does not match shape");
  auto px = [&](int i, int j) -> bool {
    return i >= 0 && i < rows && j >= 0 && j < cols && mask[static_cast<std::size_t>(i) * cols + j];
  };
  long faces = 0, edges = 0, vertices = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) faces += px(i, j);
  // Vertex (i, j) is the corner shared by pixels (i-1..i, j-1..j).
  for (int i = 0; i <= rows; ++i)
    for (int j = 0; j <= cols; ++j)
      vertices += px(i - 1, j - 1) || px(i - 1, j) || px(i, j - 1) || px(i, j);
  // Horizontal edge (i, j) between pixel rows i-1 and i; vertical edge between columns.
  for (int i = 0; i <= rows; ++i)
    for (int j = 0; j < cols; ++j) edges += px(i - 1, j) || px(i, j);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j <= cols; ++j) edges += px(i, j - 1) || px(i, j);
  return static_cast<int>(vertices - edges + faces);
}

int euler_char_3d(std::span<const std::uint8_t> mask, int n0, int n1, int n2) {
  require(static_cast<std::size_t>(n0) * n1 * n2 == mask.size(), ErrorCode::invalid_argument,
          "euler_char_3d: mask size does not match shape");
  auto vx = [&](int a, int b, int c) -> bool {
    return a >= 0 && a < n0 && b >= 0 && b < n1 && c >= 0 && c < n2 &&
           mask[(static_cast<std::size_t>(a) * n1 + b) * n2 + c];
  };
  // A cell of the dual lattice at (a, b, c) with some axes "between" voxels is
  // present when any voxel it bounds is true. ext[axis] = 1 means the cell
  // spans that axis (length one), 0 means it sits on a lattice plane.
  long chi = 0;
  for (int mask_bits = 0; mask_bits < 8; ++mask_bits) {
    const int span0 = mask_bits & 1, span1 = (mask_bits >> 1) & 1, span2 = (mask_bits >> 2) & 1;
    const int dim = span0 + span1 + span2;
    const int sign = (dim % 2 == 0) ? 1 : -1;
    long count = 0;
    for (int a = 0; a < n0 + 1 - span0; ++a)
      for (int b = 0; b < n1 + 1 - span1; ++b)
        for (int c = 0; c < n2 + 1 - span2; ++c) {
          bool present = false;
          for (int da = span0 ? 0 : -1; da <= 0 && !present; ++da)
            for (int db = span1 ? 0 : -1; db <= 0 && !present; ++db)
              for (int dc = span2 ? 0 : -1; dc <= 0 && !present; ++dc) present = vx(a + da, b + db, c + dc);
          count += present;
        }
    chi += sign * count;
  }
  return static_cast<int>(chi);
}

// ---------------------------------------------------------------------------

ExcursionSet excursion_set(const FieldSample& sample, double u, double N) {
  ExcursionSet e;
  e.grid = sample.grid;
  e.u = u;
  e.mask.resize(sample.X.size());
  const double r2 = std::isfinite(N) ? N * N * (1.0 + 1e-12) : std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < sample.X.size(); ++p)
    e.mask[p] = sample.X[p] >= u && sample.grid.point(p).squaredNorm() <= r2;
  return e;
}

std::vector<double> window_level(const FieldSample& sample, double u, double N) {
  std::vector<double> g(sample.X.size());
  for (std::size_t p = 0; p < g.size(); ++p)
    g[p] = std::min(sample.X[p] - u, N - sample.grid.point(p).norm());
  return g;
}

std::vector<double> mask_level(std::span<const std::uint8_t> mask) {
  std::vector<double> g(mask.size());
  for (std::size_t p = 0; p < g.size(); ++p) g[p] = mask[p] ? 1.0 : -1.0;
  return g;
}

double half_perimeter_2d(std::span<const double> level, int rows, int cols, double h) {
  require(static_cast<std::size_t>(rows) * cols == level.size(), ErrorCode::invalid_argument,
          "half_perimeter_2d: level size does not match shape");
  auto g = [&](int i, int j) { return level[static_cast<std::size_t>(i) * cols + j]; };
  // Crossing on the edge between a and b, as a fraction from a.
  auto frac = [](double a, double b) { return a / (a - b); };
  double length = 0.0;
  for (int i = 0; i + 1 < rows; ++i) {
    for (int j = 0; j + 1 < cols; ++j) {
      // Corners counter-clockwise: 0 (i,j), 1 (i,j+1), 2 (i+1,j+1), 3 (i+1,j)
      // in (row, col) units.
      const double v[4] = {g(i, j), g(i, j + 1), g(i + 1, j + 1), g(i + 1, j)};
      const double pos[4][2] = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
      bool in[4];
      int code = 0;
      for (int c = 0; c < 4; ++c) {
        in[c] = v[c] >= 0.0;
        code |= in[c] << c;
      }
      if (code == 0 || code == 15) continue;
      // Crossing points on edges e = (c, c+1).
      Eigen::Vector2d cross[4];
      bool has[4];
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        has[e] = in[a] != in[b];
        if (has[e]) {
          const double t = frac(v[a], v[b]);
          cross[e] = {pos[a][0] + t * (pos[b][0] - pos[a][0]), pos[a][1] + t * (pos[b][1] - pos[a][1])};
        }
      }
      const int n_cross = has[0] + has[1] + has[2] + has[3];
      if (n_cross == 2) {
        int e0 = -1, e1 = -1;
        for (int e = 0; e < 4; ++e)
          if (has[e]) (e0 < 0 ? e0 : e1) = e;
        length += (cross[e0] - cross[e1]).norm();
      } else {
        // Saddle: inside corners 0 and 2, or 1 and 3.
        const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        const bool connect_inside = centre >= 0.0;
        // Edge e joins corner e and e+1. Segments either cut off corners
        // {1, 3} (pairs (0,1), (2,3)) or corners {0, 2} (pairs (3,0), (1,2)).
        const bool cut_13 = (in[0] == connect_inside);
        if (cut_13) {
          length += (cross[0] - cross[1]).norm() + (cross[2] - cross[3]).norm();
        } else {
          length += (cross[3] - cross[0]).norm() + (cross[1] - cross[2]).norm();
        }
      }
    }
  }
  return 0.5 * length * h;
}

double direct_lk_2d(std::span<const double> level, int rows, int cols, double h, int m) {
  require(m >= 0 && m <= 2, ErrorCode::invalid_argument, "direct_lk_2d: m must be 0, 1 or 2");
  if (m == 1) return half_perimeter_2d(level, rows, cols, h);
  Mask mask(level.size());
  for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = level[p] >= 0.0;
  if (m == 2) return static_cast<double>(std::count(mask.begin(), mask.end(), 1)) * h * h;
  return euler_char_2d(mask, rows, cols);
}

double direct_lk_2d(std::span<const std::uint8_t> mask, int rows, int cols, double h, int m) {
  const auto level = mask_level(mask);
  return direct_lk_2d(level, rows, cols, h, m);
}

double direct_lk_3d(std::span<const std::uint8_t> mask, int n0, int n1, int n2, double h, int m) {
  require(m == 0 || m == 3, ErrorCode::capability, "direct_lk_3d supports m = 0 and m = 3");
  if (m == 3) return static_cast<double>(std::count(mask.begin(), mask.end(), 1)) * h * h * h;
  return euler_char_3d(mask, n0, n1, n2);
}

// ---------------------------------------------------------------------------

double interpolate(const Grid& grid, std::span<const double> values, const Eigen::VectorXd& t) {
  const int d = grid.d;
  require(d <= 3, ErrorCode::capability, "interpolate: d <= 3");
  int base[3];
  double w[3];
  for (int a = 0; a < d; ++a) {
    const double x = (t(a) - grid.origin[a]) / grid.h;
    require(x >= -1e-9 && x <= grid.shape[a] - 1 + 1e-9, ErrorCode::domain,
            "interpolate: point outside the grid");
    int i = static_cast<int>(std::floor(x));
    i = std::clamp(i, 0, std::max(grid.shape[a] - 2, 0));
    base[a] = i;
    w[a] = std::clamp(x - i, 0.0, 1.0);
  }
  double total = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double weight = 1.0;
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) {
      const int bit = (corner >> a) & 1;
      weight *= bit ? w[a] : 1.0 - w[a];
      idx = idx * grid.shape[a] + std::min(base[a] + bit, grid.shape[a] - 1);
    }
    if (weight != 0.0) total += weight * values[idx];
  }
  return total;
}

namespace {

// Inclusive node range of a 1-d grid inside [-N, N].
std::pair<int, int> window_range_1d(const Grid& g, double N) {
  int lo = 0, hi = g.shape[0] - 1;
  if (std::isfinite(N)) {
    const double slack = 1e-9 * g.h;
    while (lo <= hi && g.coord(0, lo) < -N - slack) ++lo;
    while (hi >= lo && g.coord(0, hi) > N + slack) --hi;
  }
  return {lo, hi};
}

MorseCount morse_1d(const FieldSample& s, double u, double N, double mu4) {
  require(!s.gradient.empty() && !s.hessian.empty(), ErrorCode::invalid_argument,
          "zeta_morse: field carries no derivatives");
  MorseCount out;
  const auto [lo, hi] = window_range_1d(s.grid, N);
  if (hi < lo) return out;
  const auto& X = s.X;
  const auto& D1 = s.gradient[0];
  const auto& D2 = s.hessian[0];
  const double h = s.grid.h;
  const double tol = 1e-9 * std::sqrt(mu4);
  for (int i = lo; i < hi; ++i) {
    const bool pos0 = D1[i] >= 0.0, pos1 = D1[i + 1] >= 0.0;
    if (pos0 == pos1) continue;
    const double delta = D1[i] / (D1[i] - D1[i + 1]);
    if ((i == lo && delta <= 0.0) || (i + 1 == hi && delta >= 1.0)) continue;
    // Cubic Hermite value and linear curvature at the crossing.
    const double t = delta;
    const double x = (2 * t * t * t - 3 * t * t + 1) * X[i] + (t * t * t - 2 * t * t + t) * h * D1[i] +
                     (-2 * t * t * t + 3 * t * t) * X[i + 1] + (t * t * t - t * t) * h * D1[i + 1];
    const double curv = (1.0 - t) * D2[i] + t * D2[i + 1];
    if (x < u) continue;
    if (std::abs(curv) < tol) {
      ++out.degenerate;
      continue;
    }
    out.interior += pos0 ? 1 : -1;  // + to - is a maximum
  }
  if (X[lo] >= u && D1[lo] <= 0.0) ++out.boundary;
  if (X[hi] >= u && D1[hi] > 0.0) ++out.boundary;
  return out;
}

MorseCount morse_2d(const FieldSample& s, double u, double N, double mu4) {
  require(s.gradient.size() == 2 && s.hessian.size() == 3, ErrorCode::invalid_argument,
          "zeta_morse: field carries no derivatives");
  require(std::isfinite(N), ErrorCode::invalid_argument, "zeta_morse: k = 2 needs a finite window");
  MorseCount out;
  const Grid& g = s.grid;
  const int rows = g.shape[0], cols = g.shape[1];
  const double h = g.h;
  auto at = [&](const std::vector<double>& a, int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; };
  const auto &Gx = s.gradient[0], &Gy = s.gradient[1];
  const auto &Hxx = s.hessian[0], &Hxy = s.hessian[1], &Hyy = s.hessian[2];
  const double tol = 1e-9 * mu4;
  for (int i = 0; i + 1 < rows; ++i) {
    const double x0 = g.coord(0, i);
    if (std::abs(x0 + 0.5 * h) > N + h) continue;
    for (int j = 0; j + 1 < cols; ++j) {
      const double y0 = g.coord(1, j);
      if (x0 * x0 + y0 * y0 > (N + 2 * h) * (N + 2 * h) &&
          (x0 + h) * (x0 + h) + (y0 + h) * (y0 + h) > (N + 2 * h) * (N + 2 * h))
        continue;
      bool gx_neg = false, gx_pos = false, gy_neg = false, gy_pos = false;
      for (int di = 0; di <= 1; ++di)
        for (int dj = 0; dj <= 1; ++dj) {
          (at(Gx, i + di, j + dj) >= 0.0 ? gx_pos : gx_neg) = true;
          (at(Gy, i + di, j + dj) >= 0.0 ? gy_pos : gy_neg) = true;
        }
      if (!(gx_neg && gx_pos && gy_neg && gy_pos)) continue;
      Eigen::Vector2d grad = Eigen::Vector2d::Zero();
      Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
      for (int di = 0; di <= 1; ++di)
        for (int dj = 0; dj <= 1; ++dj) {
          grad += 0.25 * Eigen::Vector2d(at(Gx, i + di, j + dj), at(Gy, i + di, j + dj));
          hess(0, 0) += 0.25 * at(Hxx, i + di, j + dj);
          hess(0, 1) += 0.25 * at(Hxy, i + di, j + dj);
          hess(1, 1) += 0.25 * at(Hyy, i + di, j + dj);
        }
      hess(1, 0) = hess(0, 1);
      const double det = hess.determinant();
      if (std::abs(det) < tol) {
        ++out.degenerate;
        continue;
      }
      const Eigen::Vector2d offset = Eigen::Vector2d(0.5 * h, 0.5 * h) - hess.inverse() * grad;
      if (offset(0) < 0.0 || offset(0) >= h || offset(1) < 0.0 || offset(1) >= h) continue;
      const Eigen::Vector2d point(x0 + offset(0), y0 + offset(1));
      if (point.norm() >= N) continue;
      // Second-order Taylor value from the nearest corner.
      const int ci = i + (offset(0) >= 0.5 * h), cj = j + (offset(1) >= 0.5 * h);
      const Eigen::Vector2d dx = point - Eigen::Vector2d(g.coord(0, ci), g.coord(1, cj));
      Eigen::Matrix2d hc;
      hc << at(Hxx, ci, cj), at(Hxy, ci, cj), at(Hxy, ci, cj), at(Hyy, ci, cj);
      const double value = at(s.X, ci, cj) + Eigen::Vector2d(at(Gx, ci, cj), at(Gy, ci, cj)).dot(dx) +
                           0.5 * dx.dot(hc * dx);
      if (value < u) continue;
      // (-1)^{index of -X}: +1 at extrema, -1 at saddles.
      out.interior += det > 0.0 ? 1 : -1;
    }
  }
  // Window circle: extrema of X restricted to |t| = N with outward gradient.
  const int n_theta = std::max(64, static_cast<int>(std::ceil(4.0 * std::numbers::pi * N / h)));
  std::vector<double> val(n_theta), tang(n_theta), normal(n_theta);
  Eigen::VectorXd t(2);
  for (int k = 0; k < n_theta; ++k) {
    const double th = 2.0 * std::numbers::pi * k / n_theta;
    const double c = std::cos(th), sn = std::sin(th);
    t << N * c, N * sn;
    val[k] = interpolate(g, s.X, t);
    const double gx = interpolate(g, Gx, t), gy = interpolate(g, Gy, t);
    tang[k] = -sn * gx + c * gy;
    normal[k] = c * gx + sn * gy;
  }
  for (int k = 0; k < n_theta; ++k) {
    const int k1 = (k + 1) % n_theta;
    const bool pos0 = tang[k] >= 0.0, pos1 = tang[k1] >= 0.0;
    if (pos0 == pos1) continue;
    const double delta = tang[k] / (tang[k] - tang[k1]);
    const double x = (1.0 - delta) * val[k] + delta * val[k1];
    const double nd = (1.0 - delta) * normal[k] + delta * normal[k1];
    if (x < u || nd <= 0.0) continue;
    out.boundary += pos0 ? 1 : -1;
  }
  return out;
}

}  // namespace

MorseCount zeta_morse(const FieldSample& sample, double u, double N, double mu4) {
  switch (sample.grid.d) {
    case 1: return morse_1d(sample, u, N, mu4);
    case 2: return morse_2d(sample, u, N, mu4);
    default: throw Error(ErrorCode::capability, "zeta_morse supports k = 1 and k = 2");
  }
}

DiracResult zeta_epsilon(const FieldSample& sample, double u, double eps, double N) {
  require(eps > 0.0, ErrorCode::invalid_argument, "zeta_epsilon: eps must be > 0");
  const int k = sample.grid.d;
  require(k == 1 || k == 2, ErrorCode::capability, "zeta_epsilon supports k = 1 and k = 2");
  require(static_cast<int>(sample.gradient.size()) == k, ErrorCode::invalid_argument,
          "zeta_epsilon: field carries no derivatives");
  DiracResult out;
  out.resolution_warning = eps < sample.grid.h;
  const double kernel = 1.0 / (std::pow(eps, k) * kappa(k));
  const double cell = std::pow(sample.grid.h, k);
  const double r2 = std::isfinite(N) ? N * N * (1.0 + 1e-12) : std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t p = 0; p < sample.X.size(); ++p) {
    if (sample.X[p] < u) continue;
    double g2 = 0.0;
    for (int a = 0; a < k; ++a) g2 += sample.gradient[a][p] * sample.gradient[a][p];
    if (g2 > eps * eps) continue;
    if (sample.grid.point(p).squaredNorm() > r2) continue;
    const double det = k == 1 ? sample.hessian[0][p]
                              : sample.hessian[0][p] * sample.hessian[2][p] - sample.hessian[1][p] * sample.hessian[1][p];
    sum += det;
  }
  out.value = (k % 2 == 1 ? -1.0 : 1.0) * cell * kernel * sum;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double chord_half_length(const Flat& flat, double N) {
  const double r2 = flat.foot.squaredNorm();
  return r2 >= N * N ? 0.0 : std::sqrt(N * N - r2);
}

}  // namespace

FieldSample line_field(const FieldSample& sample, const Flat& line, double N, double h) {
  require(line.k() == 1, ErrorCode::invalid_dimension, "line_field: flat must be a line");
  const int d = sample.grid.d;
  require(line.d() == d, ErrorCode::invalid_dimension, "line_field: dimension mismatch");
  require(static_cast<int>(sample.gradient.size()) == d, ErrorCode::invalid_argument,
          "line_field: field carries no derivatives");
  const double L = chord_half_length(line, N);
  FieldSample out;
  out.grid.d = 1;
  out.seed = sample.seed;
  out.method = sample.method;
  out.gradient.resize(1);
  out.hessian.resize(1);
  if (L <= 0.0) {
    out.grid.h = h;
    out.grid.shape = {0};
    out.grid.origin = {0.0};
    return out;
  }
  const int n = std::max(2, static_cast<int>(std::ceil(2.0 * L / h)) + 1);
  out.grid.h = 2.0 * L / (n - 1);
  out.grid.shape = {n};
  out.grid.origin = {-L};
  out.X.resize(n);
  out.gradient[0].resize(n);
  out.hessian[0].resize(n);
  const Eigen::VectorXd v = line.basis.col(0);
  std::vector<double> grad(d);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd t = line.foot + (-L + i * out.grid.h) * v;
    out.X[i] = interpolate(sample.grid, sample.X, t);
    double g1 = 0.0, g2 = 0.0;
    for (int a = 0; a < d; ++a) {
      g1 += v(a) * interpolate(sample.grid, sample.gradient[a], t);
      for (int b = 0; b < d; ++b)
        g2 += v(a) * v(b) * interpolate(sample.grid, sample.hessian[sample.hessian_index(a, b)], t);
    }
    out.gradient[0][i] = g1;
    out.hessian[0][i] = g2;
  }
  return out;
}

FlatFunctional level_set_chi(std::function<double(const Eigen::VectorXd&)> level, double h) {
  require(h > 0.0, ErrorCode::invalid_argument, "level_set_chi: spacing must be > 0");
  return [level = std::move(level), h](const Flat& flat, double N) -> FlatValue {
    const double L = chord_half_length(flat, N);
    if (L <= 0.0) return {};
    if (flat.k() == 1) {
      const int n = std::max(2, static_cast<int>(std::ceil(2.0 * L / h)) + 1);
      const double step = 2.0 * L / (n - 1);
      Mask mask(n);
      for (int i = 0; i < n; ++i) mask[i] = level(flat.rho(Eigen::VectorXd::Constant(1, -L + i * step))) >= 0.0;
      return {static_cast<double>(euler_char_1d(mask)), false};
    }
    require(flat.k() == 2, ErrorCode::capability, "level_set_chi supports flats of dimension 1 and 2");
    const int half = static_cast<int>(std::ceil(L / h));
    const int n = 2 * half + 1;
    Mask mask(static_cast<std::size_t>(n) * n);
    Eigen::VectorXd s(2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        s << (i - half) * h, (j - half) * h;
        mask[static_cast<std::size_t>(i) * n + j] = s.squaredNorm() <= L * L && level(flat.rho(s)) >= 0.0;
      }
    return {static_cast<double>(euler_char_2d(mask, n, n)), false};
  };
}

FlatFunctional field_chi(const FieldSample& sample, double u, LineCount mode, double eps, double mu4) {
  return [&sample, u, mode, eps, mu4](const Flat& flat, double N) -> FlatValue {
    const int d = sample.grid.d;
    const int k = flat.k();
    if (k == d) {
      require(flat.foot.isZero(), ErrorCode::invalid_argument, "field_chi: full-dimensional flat must be R^d");
      if (mode == LineCount::runs) {
        const ExcursionSet e = excursion_set(sample, u, N);
        if (d == 1) {
          const auto [lo, hi] = window_range_1d(sample.grid, N);
          if (hi < lo) return {};
          return {static_cast<double>(
                      euler_char_1d(std::span<const std::uint8_t>(e.mask).subspan(lo, hi - lo + 1))),
                  false};
        }
        require(d == 2, ErrorCode::capability, "field_chi: d <= 2");
        return {static_cast<double>(euler_char_2d(e.mask, sample.grid.shape[0], sample.grid.shape[1])), false};
      }
      const MorseCount mc = zeta_morse(sample, u, N, mu4);
      if (mode == LineCount::morse) return {static_cast<double>(mc.total()), mc.suspect()};
      return {zeta_epsilon(sample, u, eps, N).value + mc.boundary, mc.suspect()};
    }
    require(k == 1, ErrorCode::capability, "field_chi supports lines and the full window");
    const FieldSample line = line_field(sample, flat, N, sample.grid.h);
    if (line.X.empty()) return {};
    if (mode == LineCount::runs) {
      Mask mask(line.X.size());
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = line.X[i] >= u;
      return {static_cast<double>(euler_char_1d(mask)), false};
    }
    const MorseCount mc = zeta_morse(line, u, std::numeric_limits<double>::infinity(), mu4);
    if (mode == LineCount::morse) return {static_cast<double>(mc.total()), mc.suspect()};
    return {zeta_epsilon(line, u, eps).value + mc.boundary, mc.suspect()};
  };
}

LKEstimate crofton_lkc(const FlatFunctional& chi, int d, int m, double N, std::size_t n_flats,
                       std::uint64_t seed, unsigned threads) {
  require(m >= 0 && m <= d - 1, ErrorCode::invalid_argument, "crofton_lkc: need 0 <= m <= d-1");
  require(N > 0.0, ErrorCode::invalid_argument, "crofton_lkc: N must be > 0");
  LKEstimate est;
  est.m = m;
  est.estimator = "crofton_morse";
  if (m == 0) {
    Flat whole;
    whole.basis = Eigen::MatrixXd::Identity(d, d);
    whole.foot = Eigen::VectorXd::Zero(d);
    whole.complement = Eigen::MatrixXd::Zero(d, 0);
    const FlatValue v = chi(whole, N);
    est.value = v.value;
    est.suspect_flats = v.suspect;
    return est;
  }
  require(n_flats >= 1, ErrorCode::invalid_argument, "crofton_lkc: n_flats must be >= 1");
  std::vector<double> values(n_flats);
  std::vector<std::uint8_t> suspect(n_flats);
  parallel_for(n_flats, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, {0xC0F7u, i});
    const WeightedFlat wf = sample_affine_flat_hitting(d, d - m, N, rng);
    const FlatValue v = chi(wf.flat, N);
    values[i] = wf.weight * v.value;
    suspect[i] = v.suspect;
  });
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n_flats; ++i) {
    sum += values[i];
    sum2 += values[i] * values[i];
    est.suspect_flats += suspect[i];
  }
  const double n = static_cast<double>(n_flats);
  est.value = sum / n;
  est.mc_std_error = n_flats > 1 ? std::sqrt(std::max(0.0, sum2 / n - est.value * est.value) / (n - 1)) : 0.0;
  est.flats_used = n_flats;
  return est;
}

}  // namespace lkgrf

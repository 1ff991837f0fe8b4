#include "lkgrf/covariance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "lkgrf/error.hpp"
#include "lkgrf/flats.hpp"

namespace lkgrf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_dimension: return "invalid-dimension";
    case ErrorCode::domain: return "domain";
    case ErrorCode::capability: return "capability";
    case ErrorCode::nondegeneracy: return "nondegeneracy";
    case ErrorCode::complexity_guard: return "complexity-guard";
    case ErrorCode::dependency: return "dependency";
    case ErrorCode::singularity: return "singularity";
    case ErrorCode::internal_consistency: return "internal-consistency";
    case ErrorCode::inapplicable_bound: return "inapplicable-bound";
    case ErrorCode::insufficient_sample: return "insufficient-sample";
    case ErrorCode::degenerate_distribution: return "degenerate-distribution";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

namespace {

constexpr double kPi = std::numbers::pi;

// Radial derivatives of R(r) = phi(r^2 / 2) from profile derivatives.
double radial_from_profile(const std::function<double(double, int)>& phi, double r, int order) {
  const double s = 0.5 * r * r;
  switch (order) {
    case 0: return phi(s, 0);
    case 1: return r * phi(s, 1);
    case 2: return phi(s, 1) + r * r * phi(s, 2);
    case 3: return 3.0 * r * phi(s, 2) + r * r * r * phi(s, 3);
    case 4: return 3.0 * phi(s, 2) + 6.0 * r * r * phi(s, 3) + r * r * r * r * phi(s, 4);
    default: throw Error(ErrorCode::capability, "radial derivative order > 4");
  }
}

// Profile derivatives from radial derivatives (phi^(k) = ((1/r) d/dr)^k R).
// The quotients cancel badly near r = 0, so small radii use the limits
// phi'(0) = R''(0), phi''(0) = R''''(0) / 3 and freeze phi''' and phi''''.
double profile_from_radial(const std::function<double(double, int)>& R, double s, int order) {
  constexpr double kFloor = 0.05;
  double r = std::sqrt(2.0 * std::max(s, 0.0));
  if (order == 0) return R(r, 0);
  if (r < kFloor) {
    if (order == 1) return R(0.0, 2) + s * R(0.0, 4) / 3.0;
    if (order == 2) return R(0.0, 4) / 3.0;
    r = kFloor;
  }
  const double r1 = R(r, 1), r2 = R(r, 2), r3 = R(r, 3), r4 = R(r, 4);
  switch (order) {
    case 1: return r1 / r;
    case 2: return (r * r2 - r1) / (r * r * r);
    case 3: return (r * r * r3 - 3.0 * r * r2 + 3.0 * r1) / std::pow(r, 5);
    case 4:
      return (r * r * r * r4 - 6.0 * r * r * r3 + 15.0 * r * r2 - 15.0 * r1) / std::pow(r, 7);
    default: throw Error(ErrorCode::capability, "profile derivative order > 4");
  }
}

// Sum over partitions of the direction list into singletons and pairs:
//   d/du_1..d/du_k phi(|t|^2/2) = sum_P phi^(|P|)(s) prod_singletons <u,t> prod_pairs <u,u'>.
double pairing_sum(const CovarianceModel& model, double s, const std::vector<double>& dot_t,
                   const Eigen::MatrixXd& gram, unsigned remaining, int blocks) {
  if (remaining == 0) return model.profile(s, blocks);
  const int first = std::countr_zero(remaining);
  const unsigned rest = remaining & ~(1u << first);
  double total = 0.0;
  if (dot_t[first] != 0.0)
    total += dot_t[first] * pairing_sum(model, s, dot_t, gram, rest, blocks + 1);
  for (unsigned mask = rest; mask != 0; mask &= mask - 1) {
    const int other = std::countr_zero(mask);
    const double g = gram(first, other);
    if (g == 0.0) continue;
    total += g * pairing_sum(model, s, dot_t, gram, rest & ~(1u << other), blocks + 1);
  }
  return total;
}

}  // namespace

CovarianceModel::CovarianceModel(int dimension, std::shared_ptr<const RadialFamily> family)
    : dimension_(dimension), family_(std::move(family)) {
  require(dimension_ >= 1, ErrorCode::invalid_dimension, "covariance model: dimension must be >= 1");
  require(family_ != nullptr, ErrorCode::invalid_argument, "covariance model: missing radial family");
}

double CovarianceModel::radial(double r, int order) const {
  require(order >= 0 && order <= family_->max_order, ErrorCode::capability,
          "model '" + name() + "' does not provide radial derivative of order " + std::to_string(order));
  return family_->radial(std::abs(r), order) * ((order % 2 == 1 && r < 0.0) ? -1.0 : 1.0);
}

double CovarianceModel::profile(double s, int order) const {
  require(order >= 0 && order <= 4, ErrorCode::capability, "profile derivative order > 4");
  return family_->profile(s, order);
}

double CovarianceModel::spectral_density(double rho) const {
  if (family_->spectral) return family_->spectral(rho, dimension_);
  return spectral_density_numeric(*this, rho);
}

Eigen::VectorXd CovarianceModel::sample_frequency(std::mt19937_64& rng) const {
  require(has_spectral_sampler(), ErrorCode::capability,
          "model '" + name() + "' has no spectral sampler");
  return family_->spectral_sampler(dimension_, rng);
}

double CovarianceModel::cov(const Eigen::VectorXd& t) const { return profile(0.5 * t.squaredNorm(), 0); }

double CovarianceModel::directional_derivative(const Eigen::VectorXd& t,
                                               std::span<const Eigen::VectorXd> directions) const {
  const int k = static_cast<int>(directions.size());
  require(k <= 4, ErrorCode::capability, "directional derivative order > 4");
  std::vector<double> dot_t(k);
  Eigen::MatrixXd gram(k, k);
  for (int a = 0; a < k; ++a) {
    dot_t[a] = directions[a].dot(t);
    for (int b = 0; b < k; ++b) gram(a, b) = directions[a].dot(directions[b]);
  }
  const double s = 0.5 * t.squaredNorm();
  return pairing_sum(*this, s, dot_t, gram, (1u << k) - 1u, 0);
}

CovarianceModel CovarianceModel::with_dimension(int k) const { return CovarianceModel(k, family_); }

// ---------------------------------------------------------------------------

CovarianceModel make_gaussian_cov(int d) {
  require(d >= 1, ErrorCode::invalid_dimension, "make_gaussian_cov: d must be >= 1");
  static const auto family = [] {
    auto f = std::make_shared<RadialFamily>();
    f->name = "gaussian";
    f->profile = [](double s, int order) { return (order % 2 == 0 ? 1.0 : -1.0) * std::exp(-s); };
    f->radial = [](double r, int order) {
      const double e = std::exp(-0.5 * r * r);
      const double r2 = r * r;
      switch (order) {
        case 0: return e;
        case 1: return -r * e;
        case 2: return (r2 - 1.0) * e;
        case 3: return (3.0 * r - r2 * r) * e;
        case 4: return (r2 * r2 - 6.0 * r2 + 3.0) * e;
        default: throw Error(ErrorCode::capability, "radial derivative order > 4");
      }
    };
    f->spectral = [](double rho, int dim) {
      return std::pow(2.0 * kPi, -0.5 * dim) * std::exp(-0.5 * rho * rho);
    };
    f->spectral_sampler = [](int dim, std::mt19937_64& rng) {
      std::normal_distribution<double> normal;
      Eigen::VectorXd w(dim);
      for (int i = 0; i < dim; ++i) w(i) = normal(rng);
      return w;
    };
    return std::shared_ptr<const RadialFamily>(f);
  }();
  return CovarianceModel(d, family);
}

CovarianceModel make_cauchy_cov(int d, double beta) {
  require(beta > 0.0, ErrorCode::invalid_argument, "make_cauchy_cov: beta must be > 0");
  auto f = std::make_shared<RadialFamily>();
  std::ostringstream name;
  name << "cauchy(" << beta << ")";
  f->name = name.str();
  f->profile = [beta](double s, int order) {
    double coeff = 1.0;
    for (int j = 0; j < order; ++j) coeff *= -(beta + j) / beta;
    return coeff * std::pow(1.0 + s / beta, -beta - order);
  };
  auto profile = f->profile;
  f->radial = [profile](double r, int order) { return radial_from_profile(profile, r, order); };
  return CovarianceModel(d, f);
}

CovarianceModel make_scaled_cov(const CovarianceModel& base, double variance, double length_scale) {
  require(length_scale > 0.0, ErrorCode::invalid_argument, "make_scaled_cov: length scale must be > 0");
  auto src = base.family();
  auto f = std::make_shared<RadialFamily>();
  std::ostringstream name;
  name << src->name << "*" << variance << "@" << length_scale;
  f->name = name.str();
  f->max_order = src->max_order;
  const double inv_l2 = 1.0 / (length_scale * length_scale);
  f->profile = [src, variance, inv_l2](double s, int order) {
    return variance * std::pow(inv_l2, order) * src->profile(s * inv_l2, order);
  };
  const double inv_l = 1.0 / length_scale;
  f->radial = [src, variance, inv_l](double r, int order) {
    return variance * std::pow(inv_l, order) * src->radial(r * inv_l, order);
  };
  if (src->spectral) {
    f->spectral = [src, variance, length_scale](double rho, int dim) {
      return variance * std::pow(length_scale, dim) * src->spectral(rho * length_scale, dim);
    };
  }
  return CovarianceModel(base.dimension(), f);
}

CovarianceModel make_table_cov(int d, const std::string& name, std::vector<double> r,
                               std::vector<std::array<double, 5>> derivatives) {
  require(r.size() >= 2 && r.size() == derivatives.size(), ErrorCode::invalid_argument,
          "table model: need at least two rows");
  require(r.front() == 0.0, ErrorCode::invalid_argument, "table model: first row must be r = 0");
  for (std::size_t i = 1; i < r.size(); ++i)
    require(r[i] > r[i - 1], ErrorCode::invalid_argument, "table model: r must be increasing");
  auto f = std::make_shared<RadialFamily>();
  f->name = name;
  auto rr = std::make_shared<const std::vector<double>>(std::move(r));
  auto dd = std::make_shared<const std::vector<std::array<double, 5>>>(std::move(derivatives));
  f->radial = [rr, dd](double x, int order) {
    const auto& r = *rr;
    const auto& v = *dd;
    if (x >= r.back()) return x == r.back() ? v.back()[order] : 0.0;
    const auto it = std::upper_bound(r.begin(), r.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - r.begin()) - 1;
    const double h = r[i + 1] - r[i];
    const double t = (x - r[i]) / h;
    if (order == 4) return (1.0 - t) * v[i][4] + t * v[i + 1][4];
    const double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
    const double h10 = t * (1.0 - t) * (1.0 - t);
    const double h01 = t * t * (3.0 - 2.0 * t);
    const double h11 = t * t * (t - 1.0);
    return h00 * v[i][order] + h10 * h * v[i][order + 1] + h01 * v[i + 1][order] +
           h11 * h * v[i + 1][order + 1];
  };
  auto radial = f->radial;
  f->profile = [radial](double s, int order) { return profile_from_radial(radial, s, order); };
  return CovarianceModel(d, f);
}

CovarianceModel load_table_cov(int d, const std::string& csv_path) {
  std::ifstream in(csv_path);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open covariance table '" + csv_path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse,
          "covariance table '" + csv_path + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(std::remove_if(cell.begin(), cell.end(), ::isspace), cell.end());
      header.push_back(cell);
    }
  }
  const std::array<std::string, 6> wanted{"r", "R", "R1", "R2", "R3", "R4"};
  std::array<int, 6> column{};
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    auto it = std::find(header.begin(), header.end(), wanted[w]);
    require(it != header.end(), ErrorCode::capability,
            "covariance table '" + csv_path + "' lacks column " + wanted[w] +
                " (radial derivatives up to order 4 are required)");
    column[w] = static_cast<int>(it - header.begin());
  }
  std::vector<double> r;
  std::vector<std::array<double, 5>> values;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::parse, "covariance table '" + csv_path + "': bad number '" + cell + "'");
      }
    }
    require(cells.size() == header.size(), ErrorCode::parse,
            "covariance table '" + csv_path + "': ragged row");
    r.push_back(cells[column[0]]);
    std::array<double, 5> row{};
    for (int k = 0; k < 5; ++k) row[k] = cells[column[k + 1]];
    values.push_back(row);
  }
  return make_table_cov(d, "table:" + csv_path, std::move(r), std::move(values));
}

CovarianceModel make_model(const std::string& name, int d, double param, const std::string& path) {
  if (name == "gaussian") return make_gaussian_cov(d);
  if (name == "cauchy") return make_cauchy_cov(d, param);
  if (name == "table") return load_table_cov(d, path);
  throw Error(ErrorCode::invalid_argument, "unknown covariance model '" + name + "'");
}

double spectral_density_numeric(const CovarianceModel& model, double rho) {
  // f(rho) = (2 pi)^(-d/2) rho^(1-d/2) int_0^inf R(r) r^(d/2) J_{d/2-1}(rho r) dr.
  const int d = model.dimension();
  constexpr double kRmax = 60.0;
  constexpr int kIntervals = 24000;  // even, Simpson
  const double h = kRmax / kIntervals;
  auto integrand = [&](double r) -> double {
    const double R = model.radial(r, 0);
    if (rho == 0.0) return R * std::pow(r, d - 1);
    if (d == 1) return R * std::cos(rho * r);
    if (d == 3) return R * r * r * (r == 0.0 ? 1.0 : std::sin(rho * r) / (rho * r));
    return R * std::pow(r, 0.5 * d) * std::cyl_bessel_j(0.5 * d - 1.0, rho * r);
  };
  double sum = integrand(0.0) + integrand(kRmax);
  for (int i = 1; i < kIntervals; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * h);
  const double integral = sum * h / 3.0;
  if (rho == 0.0) return std::pow(2.0 * kPi, -d) * omega(d) * integral;
  if (d == 1) return integral / kPi;
  if (d == 3) return integral / (2.0 * kPi * kPi);
  return std::pow(2.0 * kPi, -0.5 * d) * std::pow(rho, 1.0 - 0.5 * d) * integral;
}

// ---------------------------------------------------------------------------

std::vector<JetComponent> jet_layout(int k) {
  std::vector<JetComponent> layout;
  for (int i = 0; i < k; ++i) layout.push_back({JetComponentKind::gradient, i, 0});
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) layout.push_back({JetComponentKind::hessian, i, j});
  layout.push_back({JetComponentKind::value, 0, 0});
  return layout;
}

namespace {

void append_directions(const JetComponent& c, const Eigen::MatrixXd& basis,
                       std::vector<Eigen::VectorXd>& dirs) {
  switch (c.kind) {
    case JetComponentKind::gradient: dirs.push_back(basis.col(c.i)); break;
    case JetComponentKind::hessian:
      dirs.push_back(basis.col(c.i));
      dirs.push_back(basis.col(c.j));
      break;
    case JetComponentKind::value: break;
  }
}

int derivative_order(const JetComponent& c) {
  return c.kind == JetComponentKind::gradient ? 1 : c.kind == JetComponentKind::hessian ? 2 : 0;
}

}  // namespace

Eigen::MatrixXd jet_cross_covariance(const CovarianceModel& model, const Eigen::VectorXd& t,
                                     const Eigen::MatrixXd& basis_t, const Eigen::MatrixXd& basis_0) {
  // E[d^a X(t) d^b X(0)] = (-1)^{|b|} d^{a+b} Cov(t).
  const auto layout_t = jet_layout(static_cast<int>(basis_t.cols()));
  const auto layout_0 = jet_layout(static_cast<int>(basis_0.cols()));
  Eigen::MatrixXd out(layout_t.size(), layout_0.size());
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(4);
  for (std::size_t a = 0; a < layout_t.size(); ++a) {
    for (std::size_t b = 0; b < layout_0.size(); ++b) {
      dirs.clear();
      append_directions(layout_t[a], basis_t, dirs);
      append_directions(layout_0[b], basis_0, dirs);
      const double sign = derivative_order(layout_0[b]) % 2 == 1 ? -1.0 : 1.0;
      out(a, b) = sign * model.directional_derivative(t, dirs);
    }
  }
  return out;
}

SigmaMatrix build_sigma(const CovarianceModel& model, int m) {
  const int d = model.dimension();
  require(m >= 0 && m <= d - 1, ErrorCode::invalid_dimension, "build_sigma: need 0 <= m <= d-1");
  SigmaMatrix s;
  s.d = d;
  s.m = m;
  s.k = d - m;
  s.K = s.k * (s.k + 1) / 2;
  s.D = s.k + s.K + 1;
  const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, s.k);
  s.sigma = jet_cross_covariance(model, Eigen::VectorXd::Zero(d), basis, basis);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(s.sigma);
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.sigma).eigenvalues().minCoeff();
  require(llt.info() == Eigen::Success && min_eig > 0.0, ErrorCode::nondegeneracy,
          "jet covariance is not positive definite (min eigenvalue " + std::to_string(min_eig) + ")");
  s.lambda = llt.matrixL();
  s.lambda_inv = s.lambda.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(s.D, s.D));
  return s;
}

double mu4(const CovarianceModel& model) {
  const double value = model.radial(0.0, 4);
  require(value > 0.0, ErrorCode::nondegeneracy, "fourth spectral moment must be positive");
  return value;
}

double psi(const CovarianceModel& model, double r) {
  const int d = model.dimension();
  std::vector<Eigen::VectorXd> axes;
  for (int i = 0; i < d; ++i) axes.push_back(Eigen::VectorXd::Unit(d, i));
  std::vector<Eigen::VectorXd> points{r * Eigen::VectorXd::Unit(d, 0)};
  if (d > 1) points.push_back(r * Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d))));
  double best = 0.0;
  std::vector<Eigen::VectorXd> dirs;
  for (const auto& t : points) {
    for (int order = 0; order <= 4; ++order) {
      // Enumerate index tuples j_1 <= ... <= j_order (mixed partials commute).
      std::vector<int> idx(order, 0);
      for (;;) {
        dirs.clear();
        for (int j : idx) dirs.push_back(axes[j]);
        best = std::max(best, std::abs(model.directional_derivative(t, dirs)));
        int pos = order - 1;
        while (pos >= 0 && idx[pos] == d - 1) --pos;
        if (pos < 0) break;
        ++idx[pos];
        for (int q = pos + 1; q < order; ++q) idx[q] = idx[pos];
      }
    }
  }
  return best;
}

AssumptionReport check_assumptions(const CovarianceModel& model, int m) {
  const int d = model.dimension();
  require(m >= 0 && m <= d - 1, ErrorCode::invalid_dimension, "check_assumptions: need 0 <= m <= d-1");
  require(model.max_order() >= 4, ErrorCode::capability,
          "model '" + model.name() + "' must provide radial derivatives up to order 4");
  AssumptionReport rep;
  rep.d = d;
  rep.m = m;

  rep.normalization_error = std::abs(model.radial(0.0, 0) - 1.0);
  rep.curvature_error = std::abs(model.radial(0.0, 2) + 1.0);
  rep.normalization_ok = rep.normalization_error <= 1e-8 && rep.curvature_error <= 1e-8;

  // Integral of psi over the ball of radius 10, Simpson in r.
  constexpr double kRadius = 10.0;
  constexpr int kIntervals = 400;
  const double h = kRadius / kIntervals;
  double sum = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double r = i * h;
    const double w = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * psi(model, r) * std::pow(r, d - 1);
  }
  rep.psi_integral = omega(d) * sum * h / 3.0;
  const double psi_far = psi(model, kRadius);
  const double psi_near = psi(model, 0.8 * kRadius);
  rep.psi_at_radius = psi_far;
  if (psi_far < 1e-300) {
    rep.psi_tail_slope = std::numeric_limits<double>::infinity();
    rep.psi_tail_estimate = 0.0;
  } else {
    rep.psi_tail_slope = -(std::log(psi_far) - std::log(psi_near)) / std::log(1.0 / 0.8);
    rep.psi_tail_estimate = rep.psi_tail_slope > d
                                ? omega(d) * psi_far * std::pow(kRadius, d) / (rep.psi_tail_slope - d)
                                : std::numeric_limits<double>::infinity();
  }
  rep.integrable = std::isfinite(rep.psi_tail_estimate) && psi_far < psi_near;

  // Covariance of (X(t), grad X(t), D^2 X(t), grad X(0)) at several lags.
  const Eigen::MatrixXd full = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd same = jet_cross_covariance(model, Eigen::VectorXd::Zero(d), full, full);
  const int J = static_cast<int>(same.rows());
  rep.nondegenerate = true;
  for (double lag : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const Eigen::VectorXd t = lag * Eigen::VectorXd::Unit(d, 0);
    const Eigen::MatrixXd cross = jet_cross_covariance(model, t, full, full);
    Eigen::MatrixXd big(J + d, J + d);
    big.topLeftCorner(J, J) = same;
    big.topRightCorner(J, d) = cross.leftCols(d);
    big.bottomLeftCorner(d, J) = cross.leftCols(d).transpose();
    big.bottomRightCorner(d, d) = same.topLeftCorner(d, d);
    big = 0.5 * (big + big.transpose());
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(big).eigenvalues().minCoeff();
    rep.lag_eigenvalues.push_back({lag, min_eig});
    if (!(min_eig > 1e-12)) rep.nondegenerate = false;
  }
  rep.mu4 = model.radial(0.0, 4);
  if (!(rep.mu4 > 0.0)) rep.nondegenerate = false;
  const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, d - m);
  const Eigen::MatrixXd sigma = jet_cross_covariance(model, Eigen::VectorXd::Zero(d), basis, basis);
  rep.sigma_min_eigenvalue =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (sigma + sigma.transpose())).eigenvalues().minCoeff();
  if (!(rep.sigma_min_eigenvalue > 0.0)) rep.nondegenerate = false;
  return rep;
}

}  // namespace lkgrf

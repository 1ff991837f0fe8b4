#include "lkgrf/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lkgrf/error.hpp"
#include "lkgrf/parallel.hpp"
#include "lkgrf/quadrature.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

namespace {

bool gradient_block_odd(const MultiIndex& n, int k) {
  for (int i = 0; i < k; ++i)
    if (n[i] % 2 == 1) return true;
  return false;
}

double prefactor(const MultiIndex& n, int k) {
  double value = std::pow(2.0 * std::numbers::pi, -0.5 * k);
  for (int i = 0; i < k; ++i) value *= hermite_at_zero(n[i]) / factorial(n[i]);
  if (k % 2 == 1) value = -value;
  for (std::size_t i = k; i < n.size(); ++i) value /= factorial(n[i]);
  return value;
}

// Evaluates the smooth K-dimensional integrand at y' and adds w * integrand(n)
// for every index into acc.
class Integrand {
 public:
  Integrand(const SigmaMatrix& sigma, double u, const std::vector<MultiIndex>& indices)
      : k_(sigma.k), K_(sigma.K), u_(u), L_(sigma.L()), l_(sigma.l()), alpha_(sigma.alpha()),
        indices_(indices) {
    for (const auto& n : indices)
      for (int v : n) qmax_ = std::max(qmax_, v);
    hermite_.resize(static_cast<std::size_t>(K_) * (qmax_ + 1));
    tail_.resize(qmax_ + 1);
  }

  int K() const { return K_; }

  void accumulate(const double* y, double w, double* acc) {
    Eigen::Map<const Eigen::VectorXd> yv(y, K_);
    const Eigen::VectorXd h = L_ * yv;
    const double det = symmetric_det(h);
    const double a = (u_ - l_.dot(yv)) / alpha_;
    // int_a^inf H_j(z) phi(z) dz = H_{j-1}(a) phi(a) for j >= 1.
    tail_[0] = normal_sf(a);
    if (qmax_ >= 1) {
      std::vector<double> ha(qmax_);
      hermite_all(qmax_ - 1, a, ha.data());
      const double pa = normal_pdf(a);
      for (int j = 1; j <= qmax_; ++j) tail_[j] = ha[j - 1] * pa;
    }
    for (int i = 0; i < K_; ++i) hermite_all(qmax_, y[i], &hermite_[static_cast<std::size_t>(i) * (qmax_ + 1)]);
    const double base = w * det;
    for (std::size_t idx = 0; idx < indices_.size(); ++idx) {
      const MultiIndex& n = indices_[idx];
      double v = base * tail_[n[k_ + K_]];
      for (int i = 0; i < K_ && v != 0.0; ++i) v *= hermite_[static_cast<std::size_t>(i) * (qmax_ + 1) + n[k_ + i]];
      acc[idx] += v;
    }
  }

 private:
  double symmetric_det(const Eigen::VectorXd& h) const {
    switch (k_) {
      case 1: return h(0);
      case 2: return h(0) * h(2) - h(1) * h(1);
      default: {
        Eigen::MatrixXd s(k_, k_);
        int pos = 0;
        for (int i = 0; i < k_; ++i)
          for (int j = i; j < k_; ++j) s(i, j) = s(j, i) = h(pos++);
        return s.determinant();
      }
    }
  }

  int k_, K_;
  double u_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd l_;
  double alpha_;
  const std::vector<MultiIndex>& indices_;
  int qmax_ = 0;
  std::vector<double> hermite_;
  std::vector<double> tail_;
};

std::vector<double> tensor_gauss_hermite(const SigmaMatrix& sigma, double u,
                                         const std::vector<MultiIndex>& indices, int nodes,
                                         unsigned threads) {
  const QuadratureRule rule = gauss_hermite(nodes);
  const int K = sigma.K;
  std::vector<std::vector<double>> partial(nodes, std::vector<double>(indices.size(), 0.0));
  parallel_for(static_cast<std::size_t>(nodes), threads, [&](std::size_t first) {
    Integrand f(sigma, u, indices);
    std::vector<int> idx(K, 0);
    idx[0] = static_cast<int>(first);
    std::vector<double> y(K);
    for (;;) {
      double w = 1.0;
      for (int i = 0; i < K; ++i) {
        y[i] = rule.nodes[idx[i]];
        w *= rule.weights[idx[i]];
      }
      f.accumulate(y.data(), w, partial[first].data());
      int pos = K - 1;
      while (pos >= 1 && idx[pos] == nodes - 1) idx[pos--] = 0;
      if (pos < 1) break;
      ++idx[pos];
    }
  });
  std::vector<double> total(indices.size(), 0.0);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  return total;
}

struct QmcEstimate {
  std::vector<double> mean;
  std::vector<double> se;
};

QmcEstimate shifted_sobol(const SigmaMatrix& sigma, double u, const std::vector<MultiIndex>& indices,
                          const CoefficientOptions& options) {
  const int K = sigma.K;
  const int shifts = std::max(2, options.qmc_shifts);
  const std::uint64_t per_shift = std::max<std::uint64_t>(1, options.qmc_points / shifts);
  std::vector<std::vector<double>> estimates(shifts, std::vector<double>(indices.size(), 0.0));
  parallel_for(static_cast<std::size_t>(shifts), options.threads, [&](std::size_t s) {
    SobolSequence sobol(K, derive_seed(options.seed, {0xC0EFu, s}) | 1u);
    Integrand f(sigma, u, indices);
    std::vector<double> p(K);
    const double w = 1.0 / static_cast<double>(per_shift);
    for (std::uint64_t i = 0; i < per_shift; ++i) {
      sobol.point(i, p.data());
      for (int j = 0; j < K; ++j) p[j] = normal_quantile(p[j]);
      f.accumulate(p.data(), w, estimates[s].data());
    }
  });
  QmcEstimate out;
  out.mean.assign(indices.size(), 0.0);
  out.se.assign(indices.size(), 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < shifts; ++s) {
      sum += estimates[s][i];
      sum2 += estimates[s][i] * estimates[s][i];
    }
    const double mean = sum / shifts;
    const double var = std::max(0.0, (sum2 - shifts * mean * mean) / (shifts - 1));
    out.mean[i] = mean;
    out.se[i] = std::sqrt(var / shifts);
  }
  return out;
}

}  // namespace

std::vector<CoefficientResult> coefficients_c(const std::vector<MultiIndex>& indices,
                                              const SigmaMatrix& sigma, double u,
                                              const CoefficientOptions& options) {
  std::vector<CoefficientResult> out(indices.size());
  std::vector<MultiIndex> live;
  std::vector<std::size_t> live_pos;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(static_cast<int>(indices[i].size()) == sigma.D, ErrorCode::invalid_argument,
            "coefficient_c: multi-index length " + std::to_string(indices[i].size()) +
                " does not match D = " + std::to_string(sigma.D));
    for (int v : indices[i]) require(v >= 0, ErrorCode::invalid_argument, "coefficient_c: negative entry");
    if (gradient_block_odd(indices[i], sigma.k)) {
      out[i] = {0.0, 0.0, "zero", false};
    } else {
      live.push_back(indices[i]);
      live_pos.push_back(i);
    }
  }
  if (live.empty()) return out;

  std::vector<double> z, err;
  std::string method;
  if (sigma.K <= 3 && !options.force_qmc) {
    require(options.gh_nodes >= 2, ErrorCode::invalid_argument, "coefficient_c: need >= 2 nodes");
    const auto coarse = tensor_gauss_hermite(sigma, u, live, options.gh_nodes, options.threads);
    z = tensor_gauss_hermite(sigma, u, live, 2 * options.gh_nodes, options.threads);
    err.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) err[i] = std::abs(z[i] - coarse[i]);
    method = "gauss-hermite";
  } else {
    auto est = shifted_sobol(sigma, u, live, options);
    z = std::move(est.mean);
    err = std::move(est.se);
    method = "qmc";
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    const double pre = prefactor(live[i], sigma.k);
    CoefficientResult r;
    r.value = pre * z[i];
    r.std_error = std::abs(pre) * err[i];
    r.method = method;
    r.precision_warning = r.std_error > 0.1 * (std::abs(r.value) + 1e-6);
    out[live_pos[i]] = r;
  }
  return out;
}

CoefficientResult coefficient_c(const MultiIndex& n, const SigmaMatrix& sigma, double u,
                                const CoefficientOptions& options) {
  return coefficients_c({n}, sigma, u, options).front();
}

double coefficient_c_last_closed_form(const SigmaMatrix& sigma, double u) {
  return std::pow(2.0 * std::numbers::pi, -0.5 * sigma.k) * sigma.alpha() * hermite(sigma.k, u) *
         normal_pdf(u);
}

// ---------------------------------------------------------------------------

std::string format_multi_index(const MultiIndex& n) {
  std::string s;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(n[i]);
  }
  return s;
}

namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string cache_key(const std::string& model, int d, int m, double u, const MultiIndex& n) {
  return model + "|" + std::to_string(d) + "|" + std::to_string(m) + "|" + format_double(u) + "|" +
         format_multi_index(n);
}

}  // namespace

CoefficientCache::CoefficientCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == 8, ErrorCode::parse, "coefficient cache '" + path_ + "': malformed row");
    try {
      MultiIndex n;
      std::stringstream ns(cells[4]);
      std::string part;
      while (std::getline(ns, part, '-')) n.push_back(std::stoi(part));
      const std::string key =
          cache_key(cells[3], std::stoi(cells[0]), std::stoi(cells[1]), std::stod(cells[2]), n);
      entries_[key] = {std::stod(cells[5]), std::stod(cells[6]), cells[7], false};
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::parse, "coefficient cache '" + path_ + "': bad number");
    }
  }
}

std::optional<CoefficientResult> CoefficientCache::lookup(const std::string& model, int d, int m, double u,
                                                          const MultiIndex& n) const {
  auto it = entries_.find(cache_key(model, d, m, u, n));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CoefficientCache::insert(const std::string& model, int d, int m, double u, const MultiIndex& n,
                              const CoefficientResult& value) {
  entries_[cache_key(model, d, m, u, n)] = value;
}

void CoefficientCache::save() const {
  if (path_.empty()) return;
  std::ofstream out(path_);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write coefficient cache '" + path_ + "'");
  out << "d,m,u,model,n,value,std_error,method\n";
  for (const auto& [key, value] : entries_) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '|')) parts.push_back(part);
    out << parts[1] << ',' << parts[2] << ',' << parts[3] << ',' << parts[0] << ',' << parts[4] << ','
        << format_double(value.value) << ',' << format_double(value.std_error) << ',' << value.method
        << '\n';
  }
}

// ---------------------------------------------------------------------------

const CoefficientResult& ChaosTable::at(const MultiIndex& n) const {
  auto it = coefficients.find(n);
  require(it != coefficients.end(), ErrorCode::dependency,
          "chaos table has no coefficient for n = " + format_multi_index(n));
  return it->second;
}

ChaosTable build_chaos_table(const CovarianceModel& model, int m, double u, int max_order,
                             const CoefficientOptions& options, CoefficientCache* cache) {
  require(max_order >= 0 && max_order <= 6, ErrorCode::complexity_guard,
          "build_chaos_table: chaos order must be in [0, 6]");
  ChaosTable table;
  table.d = model.dimension();
  table.m = m;
  table.u = u;
  table.model = model.name();
  table.sigma = build_sigma(model, m);
  table.max_order = max_order;
  std::vector<MultiIndex> todo;
  for (int q = 0; q <= max_order; ++q) {
    for (auto& n : multi_indices(table.sigma.D, q)) {
      if (cache) {
        if (auto hit = cache->lookup(table.model, table.d, m, u, n)) {
          table.coefficients[n] = *hit;
          continue;
        }
      }
      todo.push_back(std::move(n));
    }
  }
  const auto results = coefficients_c(todo, table.sigma, u, options);
  for (std::size_t i = 0; i < todo.size(); ++i) {
    table.coefficients[todo[i]] = results[i];
    if (cache && results[i].method != "zero") cache->insert(table.model, table.d, m, u, todo[i], results[i]);
  }
  return table;
}

double BTensor::at(std::span<const int> k) const {
  require(static_cast<int>(k.size()) == q, ErrorCode::invalid_argument, "BTensor: index length != q");
  std::size_t pos = 0;
  for (int ki : k) {
    require(ki >= 0 && ki < D, ErrorCode::invalid_argument, "BTensor: index out of range");
    pos = pos * D + ki;
  }
  return values[pos];
}

BTensor coefficients_b(int q, const ChaosTable& table) {
  require(q >= 1 && q <= table.max_order, ErrorCode::dependency,
          "coefficients_b: order " + std::to_string(q) + " not in the chaos table");
  BTensor b;
  b.D = table.D();
  b.q = q;
  std::size_t size = 1;
  for (int i = 0; i < q; ++i) size *= b.D;
  b.values.assign(size, 0.0);
  // k lies in A_n iff its digit counts equal n; b(k) = c(n) / |A_n|.
  std::vector<int> digits(q, 0);
  MultiIndex counts(b.D);
  for (std::size_t pos = 0; pos < size; ++pos) {
    std::size_t rest = pos;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = q - 1; i >= 0; --i) {
      digits[i] = static_cast<int>(rest % b.D);
      rest /= b.D;
      ++counts[digits[i]];
    }
    const double orbit = factorial(q) / multi_factorial(counts);
    b.values[pos] = table.at(counts).value / orbit;
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

struct MehlerState {
  const Eigen::MatrixXd& r;
  std::vector<int> row_left;
  std::vector<int> col_left;
  int D;
  double total = 0.0;
};

void mehler_fill(MehlerState& s, int i, int j, double product) {
  if (i == s.D) {
    s.total += product;
    return;
  }
  if (j == s.D) {
    if (s.row_left[i] == 0) mehler_fill(s, i + 1, 0, product);
    return;
  }
  const int cap = std::min(s.row_left[i], s.col_left[j]);
  const double rij = s.r(i, j);
  const int hi = rij == 0.0 ? 0 : cap;
  // The last column must absorb whatever is left of the row.
  const int lo = (j == s.D - 1) ? s.row_left[i] : 0;
  if (lo > hi) return;
  double term = product;
  double power = 1.0;
  for (int v = 0; v < lo; ++v) power *= rij / (v + 1);
  term *= power;
  for (int v = lo; v <= hi; ++v) {
    s.row_left[i] -= v;
    s.col_left[j] -= v;
    mehler_fill(s, i, j + 1, term);
    s.row_left[i] += v;
    s.col_left[j] += v;
    term *= rij / (v + 1);
  }
}

double pairing_sum(const Eigen::MatrixXd& cov, std::vector<int>& items) {
  if (items.empty()) return 1.0;
  const int first = items.front();
  double total = 0.0;
  for (std::size_t j = 1; j < items.size(); ++j) {
    const double c = cov(first, items[j]);
    if (c == 0.0) continue;
    std::vector<int> rest;
    rest.reserve(items.size() - 2);
    for (std::size_t q = 1; q < items.size(); ++q)
      if (q != j) rest.push_back(items[q]);
    total += c * pairing_sum(cov, rest);
  }
  return total;
}

}  // namespace

double mehler_expectation(const MultiIndex& n, const MultiIndex& n_prime, const Eigen::MatrixXd& r) {
  const int D = static_cast<int>(n.size());
  require(static_cast<int>(n_prime.size()) == D && r.rows() == D && r.cols() == D,
          ErrorCode::invalid_argument, "mehler_expectation: dimension mismatch");
  const int q = total_order(n);
  if (q != total_order(n_prime)) return 0.0;
  require(q <= 12, ErrorCode::complexity_guard, "mehler_expectation: |n| > 12");
  MehlerState s{r, std::vector<int>(n.begin(), n.end()), std::vector<int>(n_prime.begin(), n_prime.end()), D};
  mehler_fill(s, 0, 0, 1.0);
  return multi_factorial(n) * multi_factorial(n_prime) * s.total;
}

double wick_moment(const Eigen::MatrixXd& cov) {
  require(cov.rows() == cov.cols(), ErrorCode::invalid_argument, "wick_moment: matrix must be square");
  const int p = static_cast<int>(cov.rows());
  if (p % 2 == 1) return 0.0;
  require(p <= 16, ErrorCode::complexity_guard, "wick_moment: more than 16 variables");
  std::vector<int> items(p);
  for (int i = 0; i < p; ++i) items[i] = i;
  return pairing_sum(cov, items);
}

double arcones_tau(const Eigen::MatrixXd& r) {
  const double rows = r.cwiseAbs().rowwise().sum().maxCoeff();
  const double cols = r.cwiseAbs().colwise().sum().maxCoeff();
  return std::max(rows, cols);
}

ArconesCheck arcones_bound_check(const std::function<double(const Eigen::VectorXd&)>& h,
                                 const Eigen::MatrixXd& r, int rank, std::size_t samples,
                                 std::mt19937_64& rng) {
  ArconesCheck out;
  out.tau = arcones_tau(r);
  require(out.tau < 1.0, ErrorCode::inapplicable_bound, "arcones bound requires tau < 1");
  require(samples >= 2, ErrorCode::insufficient_sample, "arcones_bound_check: need >= 2 samples");
  const int D = static_cast<int>(r.rows());
  Eigen::MatrixXd joint = Eigen::MatrixXd::Identity(2 * D, 2 * D);
  joint.topRightCorner(D, D) = r;
  joint.bottomLeftCorner(D, D) = r.transpose();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(joint);
  require(ldlt.info() == Eigen::Success && (ldlt.vectorD().array() >= -1e-12).all(),
          ErrorCode::nondegeneracy, "arcones_bound_check: joint covariance not positive semidefinite");
  const Eigen::MatrixXd factor = ldlt.transpositionsP().transpose() * Eigen::MatrixXd(ldlt.matrixL()) *
                                 ldlt.vectorD().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::normal_distribution<double> normal;
  std::vector<double> hv(samples), hw(samples);
  Eigen::VectorXd z(2 * D);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (int j = 0; j < 2 * D; ++j) z(j) = normal(rng);
    const Eigen::VectorXd x = factor * z;
    hv[i] = h(x.head(D));
    hw[i] = h(x.tail(D));
    sum += hv[i] + hw[i];
    sum_sq += hv[i] * hv[i] + hw[i] * hw[i];
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / (2.0 * n);
  double acc = 0.0, acc2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double p = (hv[i] - mean) * (hw[i] - mean);
    acc += p;
    acc2 += p * p;
  }
  out.covariance = acc / n;
  out.covariance_se = std::sqrt(std::max(0.0, acc2 / n - out.covariance * out.covariance) / n);
  out.bound = std::pow(out.tau, rank) * sum_sq / (2.0 * n);
  out.holds = std::abs(out.covariance) <= out.bound + 3.0 * out.covariance_se;
  return out;
}

double chaos_variance_per_order(const ChaosTable& table, int q) {
  require(q >= 0 && q <= table.max_order, ErrorCode::dependency,
          "chaos_variance_per_order: order not in the chaos table");
  double total = 0.0;
  for (const auto& n : multi_indices(table.D(), q)) {
    const double c = table.at(n).value;
    total += c * c * multi_factorial(n);
  }
  return total;
}

int hermite_rank(const ChaosTable& table, double tol) {
  for (int q = 1; q <= table.max_order; ++q)
    for (const auto& n : multi_indices(table.D(), q)) {
      const auto& c = table.at(n);
      if (std::abs(c.value) > std::max(tol, 3.0 * c.std_error)) return q;
    }
  return -1;
}

}  // namespace lkgrf

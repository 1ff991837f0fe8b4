#include "lkgrf/fieldsim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "lkgrf/error.hpp"
#include "lkgrf/rng.hpp"

namespace lkgrf {

Grid Grid::centered(int d, double half_width, double h) {
  require(d >= 1, ErrorCode::invalid_dimension, "Grid: d must be >= 1");
  require(h > 0.0 && half_width > 0.0, ErrorCode::invalid_argument, "Grid: spacing and width must be > 0");
  const int n = static_cast<int>(std::ceil(half_width / h - 1e-9));
  Grid g;
  g.d = d;
  g.h = h;
  g.shape.assign(d, 2 * n + 1);
  g.origin.assign(d, -n * h);
  return g;
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

std::size_t Grid::stride(int axis) const {
  std::size_t s = 1;
  for (int a = d - 1; a > axis; --a) s *= static_cast<std::size_t>(shape[a]);
  return s;
}

Eigen::VectorXd Grid::point(std::size_t flat_index) const {
  Eigen::VectorXd p(d);
  for (int a = d - 1; a >= 0; --a) {
    p(a) = coord(a, static_cast<int>(flat_index % shape[a]));
    flat_index /= shape[a];
  }
  return p;
}

int FieldSample::hessian_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  const int d = grid.d;
  return i * d - i * (i - 1) / 2 + (j - i);
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

int good_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {
    require(data != nullptr, ErrorCode::internal_consistency, "fftw allocation failed");
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

}  // namespace

struct FieldSimulator::Impl {
  CovarianceModel model;
  Grid grid;
  SimulationOptions options;
  std::string method;
  int padding = 0;

  // circulant
  std::vector<int> ext;
  std::size_t ext_size = 0;
  std::vector<double> amplitude;
  std::vector<std::vector<double>> omega;  // per axis, per ext index
  std::vector<std::vector<bool>> nyquist;
  fftw_plan plan = nullptr;

  Impl(const CovarianceModel& m, const Grid& g, const SimulationOptions& o) : model(m), grid(g), options(o) {}

  ~Impl() {
    if (plan) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
  }

  bool try_circulant(int pad) {
    const int d = grid.d;
    ext.resize(d);
    ext_size = 1;
    for (int a = 0; a < d; ++a) {
      ext[a] = good_fft_size(pad * grid.shape[a]);
      ext_size *= ext[a];
    }
    FftwBuffer in(ext_size), out(ext_size);
    std::vector<int> idx(d, 0);
    Eigen::VectorXd lag(d);
    for (std::size_t p = 0; p < ext_size; ++p) {
      std::size_t rest = p;
      for (int a = d - 1; a >= 0; --a) {
        const int i = static_cast<int>(rest % ext[a]);
        rest /= ext[a];
        lag(a) = grid.h * std::min(i, ext[a] - i);
      }
      in.data[p][0] = model.radial(lag.norm(), 0);
      in.data[p][1] = 0.0;
    }
    fftw_plan forward;
    {
      std::lock_guard lock(fftw_planner_mutex());
      forward = fftw_plan_dft(d, ext.data(), in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(forward);
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(forward);
    }
    double max_eig = 0.0, min_eig = 0.0;
    for (std::size_t p = 0; p < ext_size; ++p) {
      max_eig = std::max(max_eig, out.data[p][0]);
      min_eig = std::min(min_eig, out.data[p][0]);
    }
    // Rounding noise in the far spectral tail is clipped; genuine negative
    // mass means the embedding is not nonnegative definite.
    if (min_eig < -1e-8 * max_eig) return false;
    amplitude.resize(ext_size);
    for (std::size_t p = 0; p < ext_size; ++p)
      amplitude[p] = std::sqrt(std::max(out.data[p][0], 0.0) / static_cast<double>(ext_size));
    omega.assign(d, {});
    nyquist.assign(d, {});
    for (int a = 0; a < d; ++a) {
      omega[a].resize(ext[a]);
      nyquist[a].resize(ext[a]);
      for (int i = 0; i < ext[a]; ++i) {
        const int wrapped = (2 * i < ext[a]) ? i : i - ext[a];
        omega[a][i] = 2.0 * std::numbers::pi * wrapped / (ext[a] * grid.h);
        nyquist[a][i] = (ext[a] % 2 == 0 && 2 * i == ext[a]);
      }
    }
    {
      std::lock_guard lock(fftw_planner_mutex());
      plan = fftw_plan_dft(d, ext.data(), in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    padding = pad;
    method = "circulant";
    return true;
  }

  void init() {
    if (!options.force_fallback) {
      for (int pad = options.padding; pad <= options.max_padding; pad *= 2)
        if (try_circulant(pad)) return;
    }
    require(model.has_spectral_sampler(), ErrorCode::capability,
            "circulant embedding failed and model '" + model.name() +
                "' has no spectral sampler for the harmonic fallback");
    method = "harmonic";
  }

  void copy_window(const fftw_complex* out, int part, std::vector<double>& dest) const {
    const int d = grid.d;
    dest.resize(grid.size());
    std::vector<int> idx(d, 0);
    for (std::size_t p = 0; p < dest.size(); ++p) {
      std::size_t e = 0;
      for (int a = 0; a < d; ++a) e = e * ext[a] + idx[a];
      dest[p] = out[e][part];
      for (int a = d - 1; a >= 0; --a) {
        if (++idx[a] < grid.shape[a]) break;
        idx[a] = 0;
      }
    }
  }

  FieldSample sample_circulant(std::uint64_t seed) const {
    const int d = grid.d;
    FieldSample s;
    s.grid = grid;
    s.seed = seed;
    s.method = method;
    Rng rng = make_stream(seed, {0xF1E1Du});
    std::normal_distribution<double> normal;
    FftwBuffer base(ext_size), work(ext_size), out(ext_size);
    for (std::size_t p = 0; p < ext_size; ++p) {
      const double re = normal(rng);
      const double im = normal(rng);
      base.data[p][0] = amplitude[p] * re;
      base.data[p][1] = amplitude[p] * im;
    }
    fftw_execute_dft(plan, base.data, out.data);
    copy_window(out.data, 0, s.X);
    if (!options.derivatives) return s;

    // i omega multiplies (re, im) into (-omega im, omega re).
    std::vector<int> idx(d);
    auto axis_index = [&](std::size_t p) {
      for (int a = d - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(p % ext[a]);
        p /= ext[a];
      }
    };
    s.gradient.resize(d);
    for (int a = 0; a < d; ++a) {
      for (std::size_t p = 0; p < ext_size; ++p) {
        axis_index(p);
        const double w = nyquist[a][idx[a]] ? 0.0 : omega[a][idx[a]];
        work.data[p][0] = -w * base.data[p][1];
        work.data[p][1] = w * base.data[p][0];
      }
      fftw_execute_dft(plan, work.data, out.data);
      copy_window(out.data, 0, s.gradient[a]);
    }
    s.hessian.resize(d * (d + 1) / 2);
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) {
        for (std::size_t p = 0; p < ext_size; ++p) {
          axis_index(p);
          double w;
          if (a == b) {
            w = -omega[a][idx[a]] * omega[a][idx[a]];
          } else {
            const bool drop = nyquist[a][idx[a]] || nyquist[b][idx[b]];
            w = drop ? 0.0 : -omega[a][idx[a]] * omega[b][idx[b]];
          }
          work.data[p][0] = w * base.data[p][0];
          work.data[p][1] = w * base.data[p][1];
        }
        fftw_execute_dft(plan, work.data, out.data);
        copy_window(out.data, 0, s.hessian[s.hessian_index(a, b)]);
      }
    }
    return s;
  }

  FieldSample sample_harmonic(std::uint64_t seed) const {
    const int d = grid.d;
    const int J = options.harmonics;
    FieldSample s;
    s.grid = grid;
    s.seed = seed;
    s.method = method;
    s.bias_bound = 1.5 / J;
    Rng rng = make_stream(seed, {0x4A2Bu});
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<Eigen::VectorXd> w(J);
    std::vector<double> theta(J);
    for (int j = 0; j < J; ++j) {
      w[j] = model.sample_frequency(rng);
      theta[j] = phase(rng);
    }
    const double amp = std::sqrt(2.0 / J);
    const std::size_t n = grid.size();
    s.X.assign(n, 0.0);
    if (options.derivatives) {
      s.gradient.assign(d, std::vector<double>(n, 0.0));
      s.hessian.assign(d * (d + 1) / 2, std::vector<double>(n, 0.0));
    }
    for (std::size_t p = 0; p < n; ++p) {
      const Eigen::VectorXd t = grid.point(p);
      for (int j = 0; j < J; ++j) {
        const double arg = w[j].dot(t) + theta[j];
        const double c = std::cos(arg);
        s.X[p] += amp * c;
        if (!options.derivatives) continue;
        const double sn = std::sin(arg);
        for (int a = 0; a < d; ++a) {
          s.gradient[a][p] -= amp * w[j](a) * sn;
          for (int b = a; b < d; ++b) s.hessian[s.hessian_index(a, b)][p] -= amp * w[j](a) * w[j](b) * c;
        }
      }
    }
    return s;
  }
};

FieldSimulator::FieldSimulator(const CovarianceModel& model, const Grid& grid, const SimulationOptions& options)
    : impl_(std::make_unique<Impl>(model, grid, options)) {
  require(grid.d == model.dimension(), ErrorCode::invalid_dimension,
          "FieldSimulator: grid and model dimensions differ");
  require(grid.h > 0.0 && grid.size() > 0, ErrorCode::invalid_argument, "FieldSimulator: empty grid");
  require(options.padding >= 1 && options.harmonics >= 1, ErrorCode::invalid_argument,
          "FieldSimulator: bad options");
  impl_->init();
}

FieldSimulator::~FieldSimulator() = default;
FieldSimulator::FieldSimulator(FieldSimulator&&) noexcept = default;
FieldSimulator& FieldSimulator::operator=(FieldSimulator&&) noexcept = default;

FieldSample FieldSimulator::sample(std::uint64_t seed) const {
  return impl_->method == "circulant" ? impl_->sample_circulant(seed) : impl_->sample_harmonic(seed);
}

const Grid& FieldSimulator::grid() const { return impl_->grid; }
const std::string& FieldSimulator::method() const { return impl_->method; }
int FieldSimulator::padding_used() const { return impl_->padding; }

FieldSample simulate(const CovarianceModel& model, const Grid& grid, std::uint64_t seed,
                     const SimulationOptions& options) {
  return FieldSimulator(model, grid, options).sample(seed);
}

FieldSample restrict_to_flat(const CovarianceModel& model, const Flat& flat, const Grid& grid_k,
                             std::uint64_t seed, const SimulationOptions& options) {
  require(flat.k() == grid_k.d && flat.k() <= model.dimension(), ErrorCode::invalid_dimension,
          "restrict_to_flat: grid dimension must equal the flat dimension");
  return simulate(model.with_dimension(flat.k()), grid_k, seed, options);
}

FieldSample tabulate_field(const Grid& grid, const std::function<PointJet(const Eigen::VectorXd&)>& fn) {
  const int d = grid.d;
  FieldSample s;
  s.grid = grid;
  s.method = "tabulated";
  const std::size_t n = grid.size();
  s.X.resize(n);
  s.gradient.assign(d, std::vector<double>(n));
  s.hessian.assign(d * (d + 1) / 2, std::vector<double>(n));
  for (std::size_t p = 0; p < n; ++p) {
    const PointJet jet = fn(grid.point(p));
    s.X[p] = jet.value;
    for (int a = 0; a < d; ++a) {
      s.gradient[a][p] = jet.gradient.size() > a ? jet.gradient(a) : 0.0;
      for (int b = a; b < d; ++b)
        s.hessian[s.hessian_index(a, b)][p] = jet.hessian.rows() > a ? jet.hessian(a, b) : 0.0;
    }
  }
  return s;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");

template <class T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(static_cast<bool>(in), ErrorCode::parse, "truncated field dump");
  return value;
}

}  // namespace

void dump_field(const FieldSample& sample, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write field dump '" + path + "'");
  put<std::int64_t>(out, sample.grid.d);
  for (int s : sample.grid.shape) put<std::int64_t>(out, s);
  put<double>(out, sample.grid.h);
  put<std::uint64_t>(out, sample.seed);
  auto write_array = [&](const std::vector<double>& a) {
    out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  };
  write_array(sample.X);
  for (const auto& g : sample.gradient) write_array(g);
  for (const auto& g : sample.hessian) write_array(g);
  require(static_cast<bool>(out), ErrorCode::io, "write failed for '" + path + "'");
}

FieldSample load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open field dump '" + path + "'");
  FieldSample s;
  const auto d = get<std::int64_t>(in);
  require(d >= 1 && d <= 8, ErrorCode::parse, "field dump: bad dimension");
  s.grid.d = static_cast<int>(d);
  for (int a = 0; a < d; ++a) s.grid.shape.push_back(static_cast<int>(get<std::int64_t>(in)));
  s.grid.h = get<double>(in);
  s.seed = get<std::uint64_t>(in);
  s.grid.origin.resize(d);
  for (int a = 0; a < d; ++a) s.grid.origin[a] = -(s.grid.shape[a] / 2) * s.grid.h;
  const std::size_t n = s.grid.size();
  auto read_array = [&](std::vector<double>& a) {
    a.resize(n);
    in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * sizeof(double)));
  };
  read_array(s.X);
  s.gradient.resize(d);
  for (auto& g : s.gradient) read_array(g);
  s.hessian.resize(d * (d + 1) / 2);
  for (auto& g : s.hessian) read_array(g);
  if (!in) {
    s.gradient.clear();
    s.hessian.clear();
  }
  return s;
}

}  // namespace lkgrf

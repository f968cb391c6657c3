#include "optotrap/timedomain.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

namespace optotrap {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::mt19937_64 channel_engine(std::uint64_t seed, int channel) {
  std::uint64_t s = seed ^ (0xA5A5A5A5A5A5A5A5ull + static_cast<std::uint64_t>(channel));
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

void format_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

double classical_thermal_force_psd(const SystemParams& p) {
  return p.mirror_mass * p.mech_damping * constants::boltzmann * p.bath_temperature;
}

Eigen::VectorXd scaled_diffusion_diagonal(const DriftMatrix& a, const NoiseModel& noise) {
  if (noise.vacuum_strength < 0.0 || noise.thermal_force_psd < 0.0) {
    throw InvalidParameter("NoiseModel: strengths must be non-negative");
  }
  const int n = a.dim();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  // optical quadratures: input term sqrt(g) * X_in with symmetrized intensity
  // vacuum_strength / 2 per quadrature; -gamma/2 sits on the matrix diagonal
  for (int i = 0; i < n - 2; ++i) {
    d(i) = -a.entries(i, i) * noise.vacuum_strength;
  }
  // mirror momentum: white force in SI, rescaled to zero-point units
  const double p_scale = a.state_scale(a.momentum_index());
  d(a.momentum_index()) = noise.thermal_force_psd / (p_scale * p_scale);
  return d;
}

namespace {

struct StepContext {
  const Eigen::MatrixXd& phi;
  const Eigen::MatrixXd& noise_transform;
  bool plain_noise;
  const std::vector<int>& channels;
  const std::vector<double>& sigma;
  std::vector<std::mt19937_64>& engines;
  std::vector<std::normal_distribution<double>>& gauss;
  const Eigen::VectorXd& state_scale;
  const std::vector<int>& record;
  std::int64_t n_steps;
  std::int64_t record_stride;
  double amplitude_cutoff;
};

template <int N>
void run_steps(const StepContext& ctx, Eigen::MatrixXd& samples, Eigen::VectorXd& state_io) {
  using Vec = Eigen::Matrix<double, N, 1>;
  using Mat = Eigen::Matrix<double, N, N>;
  const Mat phi = ctx.phi;
  const Mat bt = ctx.noise_transform;
  Vec u = state_io;
  Vec u_next;
  if constexpr (N == Eigen::Dynamic) u_next.resize(u.size());

  const int n_channels = static_cast<int>(ctx.channels.size());
  std::int64_t row = 0;
  for (std::int64_t step = 0; step < ctx.n_steps; ++step) {
    if (step % ctx.record_stride == 0) {
      for (std::size_t j = 0; j < ctx.record.size(); ++j) {
        const int idx = ctx.record[j];
        samples(row, static_cast<Eigen::Index>(j)) = u(idx) * ctx.state_scale(idx);
      }
      ++row;
    }

    u_next.noalias() = phi * u;
    for (int c = 0; c < n_channels; ++c) {
      const double w = ctx.sigma[c] * ctx.gauss[c](ctx.engines[c]);
      if (ctx.plain_noise) {
        u_next(ctx.channels[c]) += w;
      } else {
        u_next.noalias() += bt.col(ctx.channels[c]) * w;
      }
    }
    u.swap(u_next);

    if ((step & 1023) == 0) {
      const double amp = u.cwiseAbs().maxCoeff();
      if (!(amp < ctx.amplitude_cutoff)) {
        throw NumericalError("integrate_trajectory: amplitude overflow at step " +
                             std::to_string(step) + " (scaled amplitude " +
                             std::to_string(amp) + ")");
      }
    }
  }
  state_io = u;
}

}  // namespace

StateTrajectory integrate_trajectory(const DriftMatrix& a, const NoiseModel& noise,
                                     const TrajectoryOptions& opts) {
  const int n = a.dim();
  if (!(opts.dt > 0.0) || opts.n_steps <= 0) {
    throw InvalidParameter("integrate_trajectory: dt and n_steps must be positive");
  }
  if (opts.record_stride < 1) {
    throw InvalidParameter("integrate_trajectory: record_stride must be >= 1");
  }

  const Eigen::MatrixXd scaled = a.scaled();
  const double norm = scaled.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(opts.dt < 0.1 / norm)) {
    throw InvalidParameter("integrate_trajectory: dt exceeds 0.1/||A|| for the explicit scheme");
  }

  {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(scaled);
    if (solver.eigenvalues().real().maxCoeff() > 0.0 && !opts.allow_unstable) {
      throw InvalidParameter(
          "integrate_trajectory: drift matrix is unstable; set allow_unstable to proceed");
    }
  }

  const Eigen::VectorXd diffusion = scaled_diffusion_diagonal(a, noise);

  Eigen::MatrixXd phi, noise_transform;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  if (opts.trapezoidal) {
    const Eigen::MatrixXd minus = identity - 0.5 * opts.dt * scaled;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(minus);
    phi = lu.solve(identity + 0.5 * opts.dt * scaled);
    noise_transform = lu.solve(identity);
  } else {
    phi = identity + opts.dt * scaled;
    noise_transform = identity;
  }

  std::vector<int> channels;
  std::vector<double> sigma;
  for (int i = 0; i < n; ++i) {
    if (diffusion(i) > 0.0) {
      channels.push_back(i);
      sigma.push_back(std::sqrt(diffusion(i) * opts.dt));
    }
  }
  std::vector<std::mt19937_64> engines;
  std::vector<std::normal_distribution<double>> gauss(channels.size(),
                                                      std::normal_distribution<double>(0.0, 1.0));
  for (std::size_t c = 0; c < channels.size(); ++c) {
    engines.push_back(channel_engine(noise.seed, channels[c]));
  }

  std::vector<int> record = opts.record_components;
  if (record.empty()) {
    record.resize(n);
    for (int i = 0; i < n; ++i) record[i] = i;
  }
  for (int idx : record) {
    if (idx < 0 || idx >= n) {
      throw InvalidParameter("integrate_trajectory: record component out of range");
    }
  }

  StateTrajectory out;
  out.dt = opts.dt;
  out.stride = opts.record_stride;
  out.components = record;
  for (int idx : record) out.component_names.push_back(a.state_names[idx]);

  const std::int64_t n_recorded = (opts.n_steps + opts.record_stride - 1) / opts.record_stride;
  out.samples.resize(n_recorded, static_cast<Eigen::Index>(record.size()));

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  if (opts.initial_state.size() != 0) {
    if (opts.initial_state.size() != n) {
      throw InvalidParameter("integrate_trajectory: initial_state has wrong dimension");
    }
    u = opts.initial_state.cwiseQuotient(a.state_scale);
  }

  const StepContext ctx{phi,
                        noise_transform,
                        !opts.trapezoidal,
                        channels,
                        sigma,
                        engines,
                        gauss,
                        a.state_scale,
                        record,
                        opts.n_steps,
                        opts.record_stride,
                        opts.amplitude_cutoff};
  if (n == 6) {
    run_steps<6>(ctx, out.samples, u);
  } else if (n == 4) {
    run_steps<4>(ctx, out.samples, u);
  } else {
    run_steps<Eigen::Dynamic>(ctx, out.samples, u);
  }

  out.final_state = u.cwiseProduct(a.state_scale);
  return out;
}

namespace {

struct PsdFit {
  double omega = 0.0;
  double width = 0.0;
  double log_c = 0.0;
  double residual = 0.0;
};

// displacement-Lorentzian fit of S(w) = C / ((W^2-w^2)^2 + G^2 w^2) in log
// space, Gauss-Newton with multiplicative damping
PsdFit fit_psd_peak(const Eigen::VectorXd& w, const Eigen::VectorXd& s, double omega0,
                    double width0) {
  const int n = static_cast<int>(w.size());
  PsdFit fit;
  double omega = omega0;
  double width = std::max(width0, 1e-6 * omega0);
  double log_c = 0.0;
  {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = (omega * omega - w(i) * w(i));
      acc += std::log(s(i)) + std::log(d * d + width * width * w(i) * w(i));
    }
    log_c = acc / n;
  }

  double lambda = 1e-3;
  double prev_cost = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      const double wi = w(i);
      const double d = omega * omega - wi * wi;
      const double denom = d * d + width * width * wi * wi;
      const double r = std::log(s(i)) - (log_c - std::log(denom));
      const double d_omega = -(2.0 * d * 2.0 * omega) / denom;   // d log m / d omega
      const double d_width = -(2.0 * width * wi * wi) / denom;   // d log m / d width
      Eigen::Vector3d jrow(d_omega, d_width, 1.0);
      jtj += jrow * jrow.transpose();
      jtr += jrow * r;
      cost += r * r;
    }
    if (cost < prev_cost) {
      lambda = std::max(lambda * 0.5, 1e-12);
    } else {
      lambda = std::min(lambda * 4.0, 1e6);
    }
    prev_cost = cost;
    Eigen::Matrix3d damped = jtj;
    damped.diagonal() *= (1.0 + lambda);
    const Eigen::Vector3d step = damped.ldlt().solve(jtr);
    if (!step.allFinite()) break;
    omega += step(0);
    width += step(1);
    log_c += step(2);
    omega = std::abs(omega);
    width = std::abs(width);
    if (step.cwiseAbs().maxCoeff() <
        1e-12 * std::max({std::abs(omega), std::abs(width), 1.0})) {
      break;
    }
  }

  double cost = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = omega * omega - w(i) * w(i);
    const double denom = d * d + width * width * w(i) * w(i);
    const double r = std::log(s(i)) - (log_c - std::log(denom));
    cost += r * r;
  }
  fit.omega = omega;
  fit.width = width;
  fit.log_c = log_c;
  fit.residual = std::sqrt(cost / n);
  return fit;
}

}  // namespace

SpectrumEstimate estimate_spectrum(const StateTrajectory& series, const WindowConfig& cfg) {
  int component = cfg.component;
  if (component < 0) {
    for (std::size_t i = 0; i < series.component_names.size(); ++i) {
      if (series.component_names[i] == "dQ") {
        component = static_cast<int>(i);
        break;
      }
    }
  }
  if (component < 0 || component >= series.samples.cols()) {
    throw InvalidParameter("estimate_spectrum: displacement component not recorded");
  }
  const int seg = cfg.segment_samples;
  if (seg < 64) throw InvalidParameter("estimate_spectrum: segment_samples must be >= 64");
  const auto n = static_cast<std::int64_t>(series.samples.rows());
  if (n < 32ll * seg) {
    throw InvalidParameter("estimate_spectrum: series must span at least 32 segments");
  }
  if (!(cfg.overlap >= 0.0) || cfg.overlap > 0.9) {
    throw InvalidParameter("estimate_spectrum: overlap must lie in [0, 0.9]");
  }

  const double dt = series.sample_dt();
  const std::int64_t hop = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(seg * (1.0 - cfg.overlap))));

  Eigen::VectorXd window(seg);
  double window_power = 0.0;
  for (int i = 0; i < seg; ++i) {
    window(i) = 0.5 * (1.0 - std::cos(2.0 * constants::pi * i / seg));
    window_power += window(i) * window(i);
  }

  Eigen::FFT<double> fft;
  const int n_bins = seg / 2 + 1;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_bins);
  std::vector<double> buf(seg);
  std::vector<std::complex<double>> spec(seg);
  int segments = 0;
  for (std::int64_t start = 0; start + seg <= n; start += hop) {
    double mean = 0.0;
    for (int i = 0; i < seg; ++i) mean += series.samples(start + i, component);
    mean /= seg;
    for (int i = 0; i < seg; ++i) {
      buf[i] = (series.samples(start + i, component) - mean) * window(i);
    }
    fft.fwd(spec, buf);
    for (int k = 0; k < n_bins; ++k) acc(k) += std::norm(spec[k]);
    ++segments;
  }

  SpectrumEstimate est;
  est.segments_averaged = segments;
  est.freq_grid.resize(n_bins);
  est.psd.resize(n_bins);
  for (int k = 0; k < n_bins; ++k) {
    est.freq_grid(k) = 2.0 * constants::pi * k / (static_cast<double>(seg) * dt);
    est.psd(k) = dt * acc(k) / (segments * window_power);
  }

  // dominant interior peak with a prominence gate against the median level
  std::vector<double> sorted(est.psd.data() + 1, est.psd.data() + n_bins);
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  int peak = -1;
  double peak_val = 0.0;
  for (int k = 2; k < n_bins - 1; ++k) {
    if (est.psd(k) > peak_val) {
      peak_val = est.psd(k);
      peak = k;
    }
  }
  if (peak < 0 || !(peak_val > 0.0) || peak_val < cfg.peak_prominence * std::max(median, 0.0) ||
      median == 0.0) {
    throw NumericalError("estimate_spectrum: no prominent spectral peak");
  }

  int lo = peak, hi = peak;
  while (lo > 1 && est.psd(lo - 1) > peak_val / 8.0 && peak - lo < seg / 8) --lo;
  while (hi < n_bins - 2 && est.psd(hi + 1) > peak_val / 8.0 && hi - peak < seg / 8) ++hi;
  lo = std::min(lo, peak - 2);
  hi = std::max(hi, peak + 2);
  lo = std::max(lo, 1);
  hi = std::min(hi, n_bins - 2);

  const int m = hi - lo + 1;
  Eigen::VectorXd wv(m), sv(m);
  for (int i = 0; i < m; ++i) {
    wv(i) = est.freq_grid(lo + i);
    sv(i) = est.psd(lo + i);
  }

  const double width0 = std::max(est.freq_grid(hi) - est.freq_grid(lo),
                                 est.freq_grid(1) - est.freq_grid(0));
  const auto fit = fit_psd_peak(wv, sv, est.freq_grid(peak), 0.5 * width0);
  est.fitted_peak = fit.omega;
  est.fitted_width = fit.width;
  est.fit_residual = fit.residual;
  return est;
}

void write_trajectory_csv(std::ostream& os, const StateTrajectory& series) {
  std::string line = "time_s";
  for (const auto& name : series.component_names) {
    line += ",";
    line += name;
    line += (name == "dQ") ? "_m" : (name == "dP" ? "_kg_m_per_s" : "");
  }
  line += "\n";
  os << line;
  const double dt = series.sample_dt();
  for (Eigen::Index r = 0; r < series.samples.rows(); ++r) {
    line.clear();
    format_double(line, static_cast<double>(r) * dt);
    for (Eigen::Index c = 0; c < series.samples.cols(); ++c) {
      line += ',';
      format_double(line, series.samples(r, c));
    }
    line += '\n';
    os << line;
  }
}

void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& spectrum) {
  os << "omega_rad_per_s,psd_m2_s\n";
  std::string line;
  for (Eigen::Index k = 0; k < spectrum.freq_grid.size(); ++k) {
    line.clear();
    format_double(line, spectrum.freq_grid(k));
    line += ',';
    format_double(line, spectrum.psd(k));
    line += '\n';
    os << line;
  }
}

}  // namespace optotrap

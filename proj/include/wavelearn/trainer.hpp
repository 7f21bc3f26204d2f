#ifndef WAVELEARN_TRAINER_HPP
#define WAVELEARN_TRAINER_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavelearn/autodiff.hpp"
#include "wavelearn/constellation.hpp"
#include "wavelearn/detector.hpp"
#include "wavelearn/envelope.hpp"
#include "wavelearn/rng.hpp"
#include "wavelearn/rrc_baseline.hpp"
#include "wavelearn/sinc_filter.hpp"

// Constrained end-to-end training: an augmented-Lagrangian outer loop around
// Adam minimization of the penalized bit-metric loss, with multiplier updates
// from exact closed-form constraint values and a strictly increasing penalty.

namespace wavelearn {

struct LinkConfig {
  std::size_t block_len = 990;  // N
  int bits_per_symbol = 4;      // K
  double filter_span = 32.0;    // D, integer multiple of the symbol period
  int half_size = 100;          // S
  double snr_db = 10.0;
  int oversampling = 16;
  double bandwidth_hz = 5e6;    // physical bandwidth, display/export only

  double noise_density() const { return from_db(-snr_db); }  // SNR := 1/N0
};

struct TrainConfig {
  LinkConfig link;
  double target_aclr_db = -30.0;
  double target_ped_variance = 1.0;
  int batch_size = 10;
  double learning_rate = 1e-3;
  int inner_steps = 500;
  int outer_iterations = 30;
  double penalty_initial = 1e-2;
  double penalty_growth = 1.2;
  std::uint64_t seed = 1;
  int ped_grid_points = 129;
  DetectorConfig detector;
  bool early_stop = false;
  double early_stop_tol = 1e-4;
  int early_stop_patience = 3;
  int eval_blocks = 100;
  int threads = 1;
  std::string gram_cache_dir;  // empty: no on-disk cache for the in-band Gram

  double target_aclr_linear() const { return from_db(target_aclr_db); }
};

inline void validate(const TrainConfig& cfg) {
  const LinkConfig& l = cfg.link;
  if (l.block_len < 2) throw ConfigError("block_len must be >= 2");
  if (l.bits_per_symbol < 1 || l.bits_per_symbol > 8) throw ConfigError("bits_per_symbol in 1..8");
  if (!(l.filter_span > 0.0) || l.filter_span != std::floor(l.filter_span)) {
    throw ConfigError("filter_span must be a positive integer number of symbol periods");
  }
  if (l.half_size < 1) throw ConfigError("half_size must be >= 1");
  if (l.oversampling < 4) throw ConfigError("oversampling must be >= 4");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.target_aclr_linear() > 0.0)) throw ConfigError("target ACLR must be positive");
  if (cfg.target_ped_variance < 0.0) throw ConfigError("target PED variance must be >= 0");
  if (cfg.inner_steps < 1 || cfg.outer_iterations < 1) throw ConfigError("step counts must be >= 1");
  if (!(cfg.penalty_initial > 0.0) || !(cfg.penalty_growth > 1.0)) {
    throw ConfigError("penalty must start positive and grow strictly");
  }
  if (cfg.ped_grid_points < 3) throw ConfigError("ped_grid_points must be >= 3");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  validate(cfg.detector);
  if (static_cast<int>(l.block_len) < receptive_field(cfg.detector)) {
    throw ConfigError("block_len below the detector receptive field");
  }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct ParamTensor {
  std::string name;
  ad::Tensor value;
  std::vector<double> adam_m, adam_v;

  ParamTensor(std::string n, ad::Tensor t)
      : name(std::move(n)),
        value(std::move(t)),
        adam_m(value.size(), 0.0),
        adam_v(value.size(), 0.0) {}
};

inline void adam_update(ParamTensor& p, std::span<const double> grad, const AdamConfig& cfg,
                        long long t) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
    p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = p.adam_m[i] / bc1;
    const double vhat = p.adam_v[i] / bc2;
    p.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian
//   L_A = L - sum_i lambda_i (c_i - eps_i) + (eta/2) sum_i (c_i - eps_i)^2
// with the dual ascent step lambda_i <- lambda_i - eta (c_i - eps_i).
// ---------------------------------------------------------------------------

inline ad::Var augmented_lagrangian(ad::Var loss, std::span<const ad::Var> residuals,
                                    std::span<const double> multipliers, double penalty) {
  if (residuals.size() != multipliers.size()) {
    throw std::invalid_argument("augmented_lagrangian: residual/multiplier count mismatch");
  }
  ad::Var acc = loss;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    acc = ad::add(acc, ad::scale(residuals[i], -multipliers[i]));
    acc = ad::add(acc, ad::scale(ad::mul(residuals[i], residuals[i]), 0.5 * penalty));
  }
  return acc;
}

inline void update_multipliers(std::span<double> multipliers, std::span<const double> residuals,
                               double penalty) {
  for (std::size_t i = 0; i < multipliers.size(); ++i) {
    multipliers[i] -= penalty * residuals[i];
  }
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct TrainState {
  std::vector<ParamTensor> params;  // tx_coeffs, rx_coeffs, raw_points, det.*
  double mult_aclr = 0.0;
  double mult_ped = 0.0;
  double penalty = 1e-2;
  int outer_iter = 0;
  long long inner_step_count = 0;
};

struct StepMetrics {
  double loss = 0.0;
  double rate = 0.0;
  double aclr = 0.0;     // linear, from the differentiable path
  double ped_var = 0.0;
  double lagrangian = 0.0;
};

struct Batch {
  std::size_t batch_size = 0;
  std::vector<std::uint8_t> bits;  // (M, N, K)
  std::vector<double> noise;       // (M, N, 2), unit-variance circular pairs
};

struct StepGraph {
  ad::Var loss, aclr, ped_var, lagrangian;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg)
      : cfg_(std::move(cfg)),
        bits_rng_(cfg_.seed, CounterRng::kBits),
        noise_rng_(cfg_.seed, CounterRng::kNoise) {
    validate(cfg_);
    build_constants();
    init_params();
    state_.penalty = cfg_.penalty_initial;
  }

  Trainer(TrainConfig cfg, std::vector<ParamTensor> params)
      : cfg_(std::move(cfg)),
        bits_rng_(cfg_.seed, CounterRng::kBits),
        noise_rng_(cfg_.seed, CounterRng::kNoise) {
    validate(cfg_);
    build_constants();
    state_.params = std::move(params);
    state_.penalty = cfg_.penalty_initial;
  }

  const TrainConfig& config() const { return cfg_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }

  std::function<void(long long, const StepMetrics&)> on_step;
  std::function<void(const Trainer&)> on_outer;

  // --- snapshots of the learned system ---

  FilterParams tx_filter() const { return filter_from_param("tx_coeffs", FilterRole::kTx); }
  FilterParams rx_filter() const { return filter_from_param("rx_coeffs", FilterRole::kRx); }

  Constellation constellation() const {
    const ParamTensor& p = find_param("raw_points");
    std::vector<cplx> pts(p.value.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      pts[i] = {p.value.v[2 * i], p.value.v[2 * i + 1]};
    }
    return normalize(std::move(pts));
  }

  double exact_aclr() const {
    const FilterParams tx = tx_filter();
    return aclr_linear(tx.coeffs, *inband_, tx.duration);
  }

  double exact_ped_variance() const {
    return avg_ped_variance(tx_filter(), constellation(), cfg_.ped_grid_points);
  }

  // --- stochastic step machinery ---

  Batch draw_batch(std::size_t batch_size) {
    Batch b;
    b.batch_size = batch_size;
    const std::size_t n = cfg_.link.block_len;
    const std::size_t k = static_cast<std::size_t>(cfg_.link.bits_per_symbol);
    b.bits.resize(batch_size * n * k);
    for (auto& bit : b.bits) bit = bits_rng_.bit() ? 1 : 0;
    b.noise.resize(batch_size * n * 2);
    const double s = 1.0 / std::sqrt(2.0);
    for (auto& v : b.noise) v = s * noise_rng_.gaussian();
    return b;
  }

  // Records the full forward pass of one batch on the tape and returns the
  // loss, constraint and augmented-Lagrangian nodes.
  StepGraph build_step_graph(ad::Tape& tape, const Batch& batch, bool with_grad) {
    namespace a = ad;
    const std::size_t n = cfg_.link.block_len;
    const int k_bits = cfg_.link.bits_per_symbol;
    const double dur = cfg_.link.filter_span;
    const double n0 = cfg_.link.noise_density();

    leaf_cache_.clear();
    for (ParamTensor& p : state_.params) {
      leaf_cache_.emplace(p.name, tape.leaf(p.value, with_grad));
    }
    a::Var theta = leaf_cache_.at("tx_coeffs");
    a::Var psi = leaf_cache_.at("rx_coeffs");
    a::Var raw_pts = leaf_cache_.at("raw_points");

    // Transmit normalization: C = D / theta^H theta.
    a::Var theta_ss = a::sumsq(theta);
    a::Var c_norm = a::div(tape.constant_scalar(dur), theta_ss);
    a::Var sqrt_c = a::sqrt_v(c_norm);

    // ACLR = theta^H theta / (D theta^H E theta) - 1.
    a::Var qf = a::quad_form_paired(theta, inband_);
    a::Var inband_energy = a::scale(a::div(qf, theta_ss), dur);
    a::Var aclr = a::add_scalar(a::div(tape.constant_scalar(1.0), inband_energy), -1.0);

    // Constellation normalization and moments.
    a::Var pts_e = a::mean(a::abs2(raw_pts));
    a::Var pts = a::bmul(raw_pts, a::div(tape.constant_scalar(1.0), a::sqrt_v(pts_e)));
    a::Var a2 = a::abs2(pts);
    a::Var mu2 = a::mean(a2);
    a::Var mu4 = a::mean(a::mul(a2, a2));
    const double npts = static_cast<double>(std::size_t{1} << k_bits);
    a::Var mean_sq = a::scale(a::sum_axis(a::cmul(pts, pts), 0), 1.0 / npts);
    a::Var mu2_tilde = a::abs2(mean_sq);

    // Average PED variance on the midpoint grid.
    const std::size_t grid = static_cast<std::size_t>(cfg_.ped_grid_points);
    const std::size_t lwin = static_cast<std::size_t>(dur) + 1;
    a::Var g = a::bmul(a::cmatvec_const(vbasis_, theta, {grid, lwin, 2}), sqrt_c);
    a::Var ga = a::abs2(g);
    a::Var sum_a = a::sum_axis(ga, 1);
    a::Var sum_a2 = a::sum_axis(a::mul(ga, ga), 1);
    a::Var sum_g2 = a::sum_axis(a::cmul(g, g), 1);
    a::Var mu2sq = a::mul(mu2, mu2);
    a::Var term1 = a::bmul(sum_a2, a::sub(mu4, mu2sq));
    a::Var term2 = a::bmul(a::sub(a::mul(sum_a, sum_a), sum_a2), mu2sq);
    a::Var term3 = a::bmul(a::sub(a::abs2(sum_g2), sum_a2), mu2_tilde);
    a::Var ped_var = a::mean(a::add(term1, a::add(term2, term3)));

    // Discrete channel taps alpha(lT) = (sqrt(C)/D) theta^T A(lT) psi.
    std::vector<a::Var> tap_parts;
    tap_parts.reserve(conv_grams_.size());
    for (const auto& gram : conv_grams_) {
      tap_parts.push_back(a::cdotu(theta, a::cmatvec_const(gram, psi)));
    }
    a::Var taps = a::bmul(a::stack0(tap_parts), a::scale(sqrt_c, 1.0 / dur));

    // Noise covariance lags (N0/D) psi^T A'(lT) conj(psi) -> Toeplitz -> Cholesky.
    a::Var psi_conj = a::conj_c(psi);
    std::vector<a::Var> lag_parts;
    lag_parts.reserve(corr_grams_.size());
    for (const auto& gram : corr_grams_) {
      lag_parts.push_back(a::cdotu(psi, a::cmatvec_const(gram, psi_conj)));
    }
    a::Var lags = a::scale(a::stack0(lag_parts), n0 / dur);
    a::Var sigma = a::toeplitz_lower(lags, n);
    a::Var chol = [&] {
      for (double jitter : kCholJitterSchedule) {
        try {
          return a::cholesky_pairs(sigma, jitter);
        } catch (const NumericalError&) {
        }
      }
      throw NumericalError("noise covariance indefinite after jitter escalation");
    }();

    // Modulate, apply ISI and correlated noise.
    const std::size_t m_batch = batch.batch_size;
    auto indices = std::make_shared<std::vector<std::size_t>>(m_batch * n);
    {
      const std::size_t kb = static_cast<std::size_t>(k_bits);
      for (std::size_t r = 0; r < m_batch * n; ++r) {
        (*indices)[r] = bits_to_index(
            std::span<const std::uint8_t>(batch.bits).subspan(r * kb, kb));
      }
    }
    a::Var symbols = a::gather_pairs(pts, indices, {m_batch, n, 2});
    a::Var isi = a::cconv1d(symbols, taps, static_cast<std::size_t>(dur) - 1);
    a::Var z = tape.constant(ad::Tensor({m_batch, n, 2}, batch.noise));
    a::Var received = a::add(isi, a::cmat_apply_batch(chol, z));

    // Detector + loss.
    a::Var llrs = detect(received, detector_vars(), cfg_.detector);
    a::Var loss = bce_loss(llrs, batch.bits);

    // Augmented Lagrangian with the current multipliers/penalty.
    a::Var res_a = a::add_scalar(aclr, -cfg_.target_aclr_linear());
    a::Var res_v = a::add_scalar(ped_var, -cfg_.target_ped_variance);
    const std::array<a::Var, 2> residuals = {res_a, res_v};
    const std::array<double, 2> mults = {state_.mult_aclr, state_.mult_ped};
    a::Var lagr = augmented_lagrangian(loss, residuals, mults, state_.penalty);
    return StepGraph{loss, aclr, ped_var, lagr};
  }

  // One Adam step on the augmented Lagrangian.
  StepMetrics inner_step() {
    tape_.clear();
    const Batch batch = draw_batch(static_cast<std::size_t>(cfg_.batch_size));
    const StepGraph g = build_step_graph(tape_, batch, /*with_grad=*/true);
    StepMetrics m;
    m.loss = g.loss.val().v[0];
    m.rate = cfg_.link.bits_per_symbol - m.loss;
    m.aclr = g.aclr.val().v[0];
    m.ped_var = g.ped_var.val().v[0];
    m.lagrangian = g.lagrangian.val().v[0];
    if (!std::isfinite(m.lagrangian)) {
      throw NumericalError("non-finite loss at inner step " +
                           std::to_string(state_.inner_step_count));
    }
    tape_.backward(g.lagrangian);
    const AdamConfig adam{cfg_.learning_rate};
    const long long t = ++state_.inner_step_count;
    for (ParamTensor& p : state_.params) {
      adam_update(p, leaf_cache_.at(p.name).grad(), adam, t);
    }
    return m;
  }

  // Dual update with exact closed-form constraint values, then grow the penalty.
  void outer_update() {
    const std::array<double, 2> residuals = {exact_aclr() - cfg_.target_aclr_linear(),
                                             exact_ped_variance() - cfg_.target_ped_variance};
    std::array<double, 2> mults = {state_.mult_aclr, state_.mult_ped};
    update_multipliers(mults, residuals, state_.penalty);
    state_.mult_aclr = mults[0];
    state_.mult_ped = mults[1];
    state_.penalty *= cfg_.penalty_growth;
    state_.outer_iter += 1;
    last_residuals_ = residuals;
  }

  void run() {
    int satisfied = 0;
    for (int u = 0; u < cfg_.outer_iterations; ++u) {
      for (int i = 0; i < cfg_.inner_steps; ++i) {
        const StepMetrics m = inner_step();
        if (on_step) on_step(state_.inner_step_count, m);
      }
      outer_update();
      if (on_outer) on_outer(*this);
      if (cfg_.early_stop) {
        const bool ok = std::abs(last_residuals_[0]) < cfg_.early_stop_tol &&
                        std::abs(last_residuals_[1]) < cfg_.early_stop_tol;
        satisfied = ok ? satisfied + 1 : 0;
        if (satisfied >= cfg_.early_stop_patience) break;
      }
    }
  }

  // Monte-Carlo rate estimate with fresh bits/noise from the eval stream.
  RateEstimate evaluate_rate(int blocks, std::uint64_t stream_salt = 0) {
    CounterRng saved_bits = bits_rng_;
    CounterRng saved_noise = noise_rng_;
    bits_rng_ = CounterRng(cfg_.seed + stream_salt, CounterRng::kEval);
    noise_rng_ = CounterRng(cfg_.seed + stream_salt + 1, CounterRng::kEval);
    RateEstimate est;
    est.blocks = blocks;
    std::vector<double> rates;
    rates.reserve(static_cast<std::size_t>(blocks));
    for (int b = 0; b < blocks; ++b) {
      tape_.clear();
      const Batch batch = draw_batch(1);
      const StepGraph g = build_step_graph(tape_, batch, /*with_grad=*/false);
      rates.push_back(cfg_.link.bits_per_symbol - g.loss.val().v[0]);
    }
    bits_rng_ = saved_bits;
    noise_rng_ = saved_noise;
    for (double r : rates) est.rate += r;
    est.rate /= static_cast<double>(blocks);
    double var = 0.0;
    for (double r : rates) var += sq(r - est.rate);
    if (blocks > 1) {
      var /= static_cast<double>(blocks - 1);
      est.stderr_ = std::sqrt(var / static_cast<double>(blocks));
    }
    return est;
  }

  const std::array<double, 2>& last_residuals() const { return last_residuals_; }
  const std::shared_ptr<const RMat>& inband_gram() const { return inband_; }

 private:
  void build_constants() {
    const int s = cfg_.link.half_size;
    const double dur = cfg_.link.filter_span;
    const int span = static_cast<int>(dur);
    const int dim = 2 * s + 1;

    if (cfg_.gram_cache_dir.empty()) {
      inband_ = std::make_shared<const RMat>(build_inband_gram(s, dur));
    } else {
      inband_ = std::make_shared<const RMat>(
          build_inband_gram_cached(s, dur, cfg_.gram_cache_dir));
    }

    const auto to_tensor = [dim](const CMat& m) {
      ad::Tensor t = ad::Tensor::zeros({static_cast<std::size_t>(dim),
                                        static_cast<std::size_t>(dim), 2});
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          t.v[(static_cast<std::size_t>(i) * dim + j) * 2] = m.at(i, j).real();
          t.v[(static_cast<std::size_t>(i) * dim + j) * 2 + 1] = m.at(i, j).imag();
        }
      }
      return std::make_shared<const ad::Tensor>(std::move(t));
    };
    conv_grams_.clear();
    for (int l = -(span - 1); l <= span - 1; ++l) {
      conv_grams_.push_back(to_tensor(conv_gram(static_cast<double>(l), s, dur)));
    }
    corr_grams_.clear();
    for (int l = 0; l < span; ++l) {
      corr_grams_.push_back(to_tensor(corr_gram(static_cast<double>(l), s, dur)));
    }

    // Basis matrix mapping coefficients to filter values on the PED grid:
    // rows indexed by (grid point, symbol slot), entry e^{j 2 pi s u / D} / D
    // on the filter support, zero off it.
    const std::size_t grid = static_cast<std::size_t>(cfg_.ped_grid_points);
    const std::size_t lwin = static_cast<std::size_t>(span) + 1;
    ad::Tensor vb = ad::Tensor::zeros({grid * lwin, static_cast<std::size_t>(dim), 2});
    for (std::size_t kg = 0; kg < grid; ++kg) {
      const double t = -0.5 + (static_cast<double>(kg) + 0.5) / static_cast<double>(grid);
      for (std::size_t li = 0; li < lwin; ++li) {
        const double u = t - (static_cast<double>(li) - 0.5 * span);
        if (!(std::abs(u) < 0.5 * dur)) continue;
        double* row = vb.v.data() + (kg * lwin + li) * static_cast<std::size_t>(dim) * 2;
        for (int sc = -s; sc <= s; ++sc) {
          const double phase = 2.0 * kPi * sc * u / dur;
          row[2 * static_cast<std::size_t>(sc + s)] = std::cos(phase) / dur;
          row[2 * static_cast<std::size_t>(sc + s) + 1] = std::sin(phase) / dur;
        }
      }
    }
    vbasis_ = std::make_shared<const ad::Tensor>(std::move(vb));
  }

  void init_params() {
    const int s = cfg_.link.half_size;
    const double dur = cfg_.link.filter_span;
    // Filters start at the band-limited interpolant of a moderate-rolloff RRC
    // spectrum; the constellation starts at Gray QAM.
    const double beta0 = 0.25;
    ad::Tensor coeffs = ad::Tensor::zeros({static_cast<std::size_t>(2 * s + 1), 2});
    for (int i = -s; i <= s; ++i) {
      coeffs.v[2 * static_cast<std::size_t>(i + s)] = rrc_spectrum_amplitude(i / dur, beta0);
    }
    state_.params.emplace_back("tx_coeffs", coeffs);
    state_.params.emplace_back("rx_coeffs", coeffs);

    const Constellation qam = gray_qam(cfg_.link.bits_per_symbol);
    ad::Tensor pts = ad::Tensor::zeros({qam.points.size(), 2});
    for (std::size_t i = 0; i < qam.points.size(); ++i) {
      pts.v[2 * i] = qam.points[i].real();
      pts.v[2 * i + 1] = qam.points[i].imag();
    }
    state_.params.emplace_back("raw_points", std::move(pts));

    CounterRng init_rng(cfg_.seed, CounterRng::kInit);
    for (auto& [name, tensor] :
         init_detector_params(cfg_.detector, cfg_.link.bits_per_symbol, init_rng)) {
      state_.params.emplace_back(name, std::move(tensor));
    }
  }

  static double rrc_spectrum_amplitude(double f, double beta) {
    const double af = std::abs(f);
    const double lo = 0.5 * (1.0 - beta);
    const double hi = 0.5 * (1.0 + beta);
    if (af <= lo) return 1.0;
    if (af >= hi) return 0.0;
    return std::sqrt(0.5 * (1.0 + std::cos(kPi / beta * (af - lo))));
  }

  const ParamTensor& find_param(const std::string& name) const {
    for (const ParamTensor& p : state_.params) {
      if (p.name == name) return p;
    }
    throw std::logic_error("unknown parameter: " + name);
  }

  FilterParams filter_from_param(const std::string& name, FilterRole role) const {
    const ParamTensor& p = find_param(name);
    std::vector<cplx> coeffs(p.value.size() / 2);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      coeffs[i] = {p.value.v[2 * i], p.value.v[2 * i + 1]};
    }
    return FilterParams(std::move(coeffs), cfg_.link.filter_span, role);
  }

  DetectorVars detector_vars() {
    DetectorVars v;
    v.in_w = leaf_cache_.at("det.in.w");
    v.in_b = leaf_cache_.at("det.in.b");
    for (int b = 0; b < cfg_.detector.blocks; ++b) {
      const std::string p = "det.block" + std::to_string(b);
      v.blocks.push_back({leaf_cache_.at(p + ".dw"), leaf_cache_.at(p + ".db"),
                          leaf_cache_.at(p + ".pw"), leaf_cache_.at(p + ".pb")});
    }
    v.out_w = leaf_cache_.at("det.out.w");
    v.out_b = leaf_cache_.at("det.out.b");
    return v;
  }

  TrainConfig cfg_;
  TrainState state_;
  CounterRng bits_rng_;
  CounterRng noise_rng_;
  ad::Tape tape_;
  std::map<std::string, ad::Var> leaf_cache_;
  std::shared_ptr<const RMat> inband_;
  std::vector<std::shared_ptr<const ad::Tensor>> conv_grams_;
  std::vector<std::shared_ptr<const ad::Tensor>> corr_grams_;
  std::shared_ptr<const ad::Tensor> vbasis_;
  std::array<double, 2> last_residuals_{0.0, 0.0};
};

}  // namespace wavelearn

#endif  // WAVELEARN_TRAINER_HPP

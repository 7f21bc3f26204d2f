// Command-line front end: train a waveform end to end, benchmark the
// windowed-RRC/QAM baseline, evaluate checkpoints at arbitrary SNR, and
// export plot-ready CSVs. Exit codes: 0 success, 2 config error, 3 numerical
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wavelearn/wavelearn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

wavelearn::RunConfig resolve_config(const CommonOpts& opts) {
  wavelearn::RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = wavelearn::load_run_config(opts.config_path);
  } else {
    wavelearn::validate(cfg.train);
  }
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (opts.threads) cfg.train.threads = std::max(1, *opts.threads);
  return cfg;
}

json envelope_report(const wavelearn::FilterParams& tx, const wavelearn::Constellation& c,
                     std::size_t n_symbols, int oversampling, std::uint64_t seed) {
  using namespace wavelearn;
  CounterRng rng(seed, CounterRng::kEval);
  std::vector<std::uint8_t> bits(n_symbols * static_cast<std::size_t>(c.bits_per_symbol));
  for (auto& b : bits) b = rng.bit() ? 1 : 0;
  const std::vector<cplx> symbols = modulate(bits, c);
  const RenderedSignal sig = render_signal(symbols, tx, oversampling);
  json j;
  j["papr_db"] = papr_db(sig);
  j["papr_symbols"] = n_symbols;
  j["papr_estimator"] = "max-over-mean power, steady-state region";
  return j;
}

int cmd_train(const CommonOpts& opts) {
  using namespace wavelearn;
  const RunConfig cfg = resolve_config(opts);
  set_worker_count(cfg.train.threads);
  const fs::path out = opts.out_dir;
  fs::create_directories(out);
  write_text_file(out / "config.json", run_config_to_json(cfg).dump(2) + "\n");

  Trainer trainer(cfg.train);
  std::ofstream log(out / "training_log.csv", std::ios::binary);
  log << "step,loss,rate,aclr_db,V,lambda_A,lambda_V,eta\n";
  trainer.on_step = [&](long long step, const StepMetrics& m) {
    log << step << "," << format_g(m.loss) << "," << format_g(m.rate) << ","
        << format_g(to_db(std::max(m.aclr, 1e-300))) << "," << format_g(m.ped_var) << ","
        << format_g(trainer.state().mult_aclr) << "," << format_g(trainer.state().mult_ped)
        << "," << format_g(trainer.state().penalty) << "\n";
  };
  trainer.on_outer = [&](const Trainer& tr) {
    const TrainState& st = tr.state();
    CheckpointMeta meta{st.outer_iter, st.inner_step_count, st.mult_aclr, st.mult_ped,
                        st.penalty};
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%03d.bin", st.outer_iter);
    write_checkpoint(out / name, st.params, meta, run_config_to_json(cfg));
    log.flush();
  };
  trainer.run();

  const TrainState& st = trainer.state();
  CheckpointMeta meta{st.outer_iter, st.inner_step_count, st.mult_aclr, st.mult_ped, st.penalty};
  write_checkpoint(out / "checkpoint_final.bin", st.params, meta, run_config_to_json(cfg));

  const RateEstimate rate = trainer.evaluate_rate(cfg.train.eval_blocks);
  const double aclr = trainer.exact_aclr();
  const double ped_var = trainer.exact_ped_variance();
  const FilterParams tx = trainer.tx_filter();
  const Constellation points = trainer.constellation();

  json report = envelope_report(tx, points, cfg.metric_symbols, cfg.train.link.oversampling,
                                cfg.train.seed + 17);
  report["rate"] = rate.rate;
  report["rate_stderr"] = rate.stderr_;
  report["eval_blocks"] = rate.blocks;
  report["aclr_db"] = to_db(aclr);
  report["aclr_linear"] = aclr;
  report["avg_ped_variance"] = ped_var;
  report["aclr_residual"] = aclr - cfg.train.target_aclr_linear();
  report["ped_variance_residual"] = ped_var - cfg.train.target_ped_variance;
  report["outer_iterations_run"] = st.outer_iter;
  report["inner_steps_run"] = st.inner_step_count;
  report["seed"] = cfg.train.seed;
  report["rng"] = CounterRng::name();
  write_text_file(out / "report.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";

  // Optional exports straight from the final state.
  if (cfg.exports.psd) {
    write_psd_csv(out / "psd.csv", psd_sinc_filter(tx), cfg.train.link.bandwidth_hz);
  }
  if (cfg.exports.constellation) {
    write_text_file(out / "constellation.json", constellation_to_json(points).dump(2) + "\n");
  }
  if (cfg.exports.ccdf || cfg.exports.signal) {
    CounterRng rng(cfg.train.seed + 17, CounterRng::kEval);
    std::vector<std::uint8_t> bits(cfg.metric_symbols *
                                   static_cast<std::size_t>(points.bits_per_symbol));
    for (auto& b : bits) b = rng.bit() ? 1 : 0;
    const std::vector<cplx> symbols = modulate(bits, points);
    const RenderedSignal sig = render_signal(symbols, tx, cfg.train.link.oversampling);
    if (cfg.exports.ccdf) {
      write_ccdf_csv(out / "npd_ccdf.csv", ccdf(npd_samples(sig)));
    }
    if (cfg.exports.signal) {
      write_signal_csv(out / "signal.csv", sig, cfg.train.link.bandwidth_hz, 65536);
    }
  }
  return kExitOk;
}

int cmd_baseline(double beta, double snr_db, int blocks, double span, int bits, std::size_t n,
                 const CommonOpts& opts, bool write_outputs) {
  using namespace wavelearn;
  const RrcSpec spec(beta, span, true);
  const BaselineLink link = baseline_link_quantities(spec);
  const Constellation qam = gray_qam(bits);
  const double n0 = from_db(-snr_db);
  const std::uint64_t seed = opts.seed.value_or(1);
  CounterRng rng(seed, CounterRng::kEval);
  const RateEstimate rate = baseline_rate(link, qam, n0, blocks, n, rng);

  // PAPR from a long rendered realization of the same pulse.
  const std::size_t papr_symbols = 100000;
  CounterRng bit_rng(seed, CounterRng::kBits);
  std::vector<std::uint8_t> bits_v(papr_symbols * static_cast<std::size_t>(bits));
  for (auto& b : bits_v) b = bit_rng.bit() ? 1 : 0;
  const std::vector<cplx> symbols = modulate(bits_v, qam);
  const BaselineFilter g(spec);
  const RenderedSignal sig =
      render_signal_pulse_fn(symbols, [&](double t) { return g(t); }, span, 16);

  json report;
  report["rate"] = rate.rate;
  report["stderr"] = rate.stderr_;
  report["aclr_db"] = to_db(link.aclr);
  report["papr_db"] = papr_db(sig);
  report["beta"] = beta;
  report["snr_db"] = snr_db;
  report["blocks"] = blocks;
  report["seed"] = seed;
  std::cout << report.dump(2) << "\n";
  if (write_outputs) {
    fs::create_directories(opts.out_dir);
    write_text_file(fs::path(opts.out_dir) / "baseline_report.json", report.dump(2) + "\n");
    const int ovs = baseline_oversampling();
    const long half_n = static_cast<long>(0.5 * span * ovs);
    std::vector<double> samp(static_cast<std::size_t>(2 * half_n + 1));
    for (long i = -half_n; i <= half_n; ++i) {
      samp[static_cast<std::size_t>(i + half_n)] = g(static_cast<double>(i) / ovs);
    }
    write_psd_csv(fs::path(opts.out_dir) / "baseline_psd.csv",
                  psd_sampled_filter(samp, -0.5 * span, 1.0 / ovs), 5e6);
    write_ccdf_csv(fs::path(opts.out_dir) / "baseline_npd_ccdf.csv", ccdf(npd_samples(sig)));
  }
  return kExitOk;
}

wavelearn::Trainer trainer_from_checkpoint(const std::string& path,
                                           std::optional<double> snr_db) {
  using namespace wavelearn;
  Checkpoint ck = read_checkpoint(path);
  if (ck.extra.is_null() || ck.extra.empty()) {
    throw ConfigError("checkpoint carries no embedded config: " + path);
  }
  RunConfig cfg = parse_run_config(ck.extra);
  if (snr_db) cfg.train.link.snr_db = *snr_db;
  Trainer trainer(cfg.train, std::move(ck.params));
  trainer.state().mult_aclr = ck.meta.mult_aclr;
  trainer.state().mult_ped = ck.meta.mult_ped;
  trainer.state().penalty = ck.meta.penalty;
  trainer.state().outer_iter = ck.meta.outer_iter;
  return trainer;
}

int cmd_eval(const std::string& checkpoint, std::optional<double> snr_db, int blocks,
             const CommonOpts& opts) {
  using namespace wavelearn;
  Trainer trainer = trainer_from_checkpoint(checkpoint, snr_db);
  const RateEstimate rate = trainer.evaluate_rate(blocks);
  json report;
  report["rate"] = rate.rate;
  report["rate_stderr"] = rate.stderr_;
  report["eval_blocks"] = blocks;
  report["snr_db"] = trainer.config().link.snr_db;
  report["aclr_db"] = to_db(trainer.exact_aclr());
  report["avg_ped_variance"] = trainer.exact_ped_variance();
  std::cout << report.dump(2) << "\n";
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_text_file(fs::path(opts.out_dir) / "eval_report.json", report.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_export(const std::string& checkpoint, const std::string& what, const CommonOpts& opts) {
  using namespace wavelearn;
  Trainer trainer = trainer_from_checkpoint(checkpoint, std::nullopt);
  const fs::path out = opts.out_dir;
  fs::create_directories(out);
  const FilterParams tx = trainer.tx_filter();
  const Constellation points = trainer.constellation();
  const TrainConfig& tc = trainer.config();
  if (what == "psd") {
    write_psd_csv(out / "psd.csv", psd_sinc_filter(tx), tc.link.bandwidth_hz);
  } else if (what == "constellation") {
    write_text_file(out / "constellation.json", constellation_to_json(points).dump(2) + "\n");
  } else if (what == "ccdf" || what == "signal") {
    CounterRng rng(tc.seed + 17, CounterRng::kEval);
    const std::size_t n_symbols = 100000;
    std::vector<std::uint8_t> bits(n_symbols * static_cast<std::size_t>(points.bits_per_symbol));
    for (auto& b : bits) b = rng.bit() ? 1 : 0;
    const std::vector<cplx> symbols = modulate(bits, points);
    const RenderedSignal sig = render_signal(symbols, tx, tc.link.oversampling);
    if (what == "ccdf") {
      write_ccdf_csv(out / "npd_ccdf.csv", ccdf(npd_samples(sig)));
    } else {
      write_signal_csv(out / "signal.csv", sig, tc.link.bandwidth_hz, 65536);
    }
  } else {
    throw ConfigError("unknown export target: " + what);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavelearn: constrained end-to-end waveform learning"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* train = app.add_subcommand("train", "train filters/constellation/detector");
  train->add_option("--config", opts.config_path, "JSON config file");
  train->add_option("--out-dir", opts.out_dir, "output directory");
  std::uint64_t seed_opt = 0;
  auto* seed_flag = train->add_option("--seed", seed_opt, "RNG seed override");
  int threads_opt = 1;
  auto* threads_flag = train->add_option("--threads", threads_opt, "worker cap");

  auto* baseline = app.add_subcommand("baseline", "benchmark the windowed-RRC/QAM link");
  double beta = 0.0, snr_db = 10.0, span = 32.0;
  int blocks = 100, bits = 4;
  std::size_t block_len = 990;
  baseline->add_option("--beta", beta, "roll-off factor in [0,1)");
  baseline->add_option("--snr-db", snr_db, "SNR in dB (1/N0)");
  baseline->add_option("--blocks", blocks, "Monte-Carlo blocks");
  baseline->add_option("--span", span, "filter duration in symbol periods");
  baseline->add_option("--bits", bits, "bits per symbol (even)");
  baseline->add_option("--block-len", block_len, "symbols per block");
  bool baseline_write = false;
  baseline->add_flag("--write", baseline_write, "also write report/PSD/CCDF files");
  baseline->add_option("--out-dir", opts.out_dir, "output directory");
  auto* bseed_flag = baseline->add_option("--seed", seed_opt, "RNG seed override");

  auto* eval = app.add_subcommand("eval", "rate of a checkpoint at a given SNR");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint .bin path")->required();
  double eval_snr = 0.0;
  auto* eval_snr_flag = eval->add_option("--snr-db", eval_snr, "SNR override in dB");
  int eval_blocks = 100;
  eval->add_option("--blocks", eval_blocks, "Monte-Carlo blocks");
  eval->add_option("--out-dir", opts.out_dir, "output directory");

  auto* exp = app.add_subcommand("export", "write plot-ready CSV/JSON from a checkpoint");
  std::string what;
  exp->add_option("--checkpoint", checkpoint, "checkpoint .bin path")->required();
  exp->add_option("--what", what, "psd|ccdf|constellation|signal")->required();
  exp->add_option("--out-dir", opts.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) {
      if (*seed_flag) opts.seed = seed_opt;
      if (*threads_flag) opts.threads = threads_opt;
      return cmd_train(opts);
    }
    if (*baseline) {
      if (*bseed_flag) opts.seed = seed_opt;
      if (beta < 0.0 || beta >= 1.0) throw wavelearn::ConfigError("beta must be in [0,1)");
      return cmd_baseline(beta, snr_db, blocks, span, bits, block_len, opts, baseline_write);
    }
    if (*eval) {
      std::optional<double> snr;
      if (*eval_snr_flag) snr = eval_snr;
      return cmd_eval(checkpoint, snr, eval_blocks, opts);
    }
    if (*exp) {
      return cmd_export(checkpoint, what, opts);
    }
  } catch (const wavelearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wavelearn::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

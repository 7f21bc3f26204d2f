#ifndef WAVELEARN_CONFIG_HPP
#define WAVELEARN_CONFIG_HPP

#include <filesystem>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "wavelearn/io.hpp"
#include "wavelearn/trainer.hpp"

// File-backed run configuration. JSON with a strict schema: unknown keys are
// rejected, defaults reproduce the reference scenario (5 MHz single carrier,
// D = 32T, S = 100, N = 990, 16 points, SNR 10 dB, Adam 1e-3, M = 10).

namespace wavelearn {

struct ExportToggles {
  bool psd = true;
  bool ccdf = true;
  bool constellation = true;
  bool signal = true;
};

struct RunConfig {
  TrainConfig train;
  ExportToggles exports;
  std::size_t metric_symbols = 100000;  // symbols for PAPR/NPD estimation
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown config key: " + scope + key);
    }
  }
}

template <typename T>
void load(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key has wrong type: ") + key);
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  detail::reject_unknown(
      j,
      {"bandwidth_hz", "symbols_per_block", "bits_per_symbol", "filter_span_symbols",
       "filter_half_size", "snr_db", "oversampling", "target_aclr_db", "target_ped_variance",
       "batch_size", "learning_rate", "inner_steps", "outer_iterations", "penalty_initial",
       "penalty_growth", "seed", "ped_grid_points", "detector", "early_stop", "early_stop_tol",
       "early_stop_patience", "eval_blocks", "threads", "gram_cache_dir", "export",
       "metric_symbols"},
      "");
  TrainConfig& t = cfg.train;
  detail::load(j, "bandwidth_hz", t.link.bandwidth_hz);
  detail::load(j, "symbols_per_block", t.link.block_len);
  detail::load(j, "bits_per_symbol", t.link.bits_per_symbol);
  detail::load(j, "filter_span_symbols", t.link.filter_span);
  detail::load(j, "filter_half_size", t.link.half_size);
  detail::load(j, "snr_db", t.link.snr_db);
  detail::load(j, "oversampling", t.link.oversampling);
  detail::load(j, "target_aclr_db", t.target_aclr_db);
  detail::load(j, "target_ped_variance", t.target_ped_variance);
  detail::load(j, "batch_size", t.batch_size);
  detail::load(j, "learning_rate", t.learning_rate);
  detail::load(j, "inner_steps", t.inner_steps);
  detail::load(j, "outer_iterations", t.outer_iterations);
  detail::load(j, "penalty_initial", t.penalty_initial);
  detail::load(j, "penalty_growth", t.penalty_growth);
  detail::load(j, "seed", t.seed);
  detail::load(j, "ped_grid_points", t.ped_grid_points);
  detail::load(j, "early_stop", t.early_stop);
  detail::load(j, "early_stop_tol", t.early_stop_tol);
  detail::load(j, "early_stop_patience", t.early_stop_patience);
  detail::load(j, "eval_blocks", t.eval_blocks);
  detail::load(j, "threads", t.threads);
  detail::load(j, "gram_cache_dir", t.gram_cache_dir);
  detail::load(j, "metric_symbols", cfg.metric_symbols);
  if (j.contains("detector")) {
    const nlohmann::json& d = j.at("detector");
    detail::reject_unknown(d, {"channels", "blocks", "kernel_size", "dilations"}, "detector.");
    detail::load(d, "channels", t.detector.channels);
    detail::load(d, "blocks", t.detector.blocks);
    detail::load(d, "kernel_size", t.detector.kernel_size);
    detail::load(d, "dilations", t.detector.dilations);
    if (!d.contains("dilations") && d.contains("blocks")) {
      t.detector.dilations.clear();
      for (int b = 0; b < t.detector.blocks; ++b) t.detector.dilations.push_back(1 << std::min(b, 16));
    }
  }
  if (j.contains("export")) {
    const nlohmann::json& e = j.at("export");
    detail::reject_unknown(e, {"psd", "ccdf", "constellation", "signal"}, "export.");
    detail::load(e, "psd", cfg.exports.psd);
    detail::load(e, "ccdf", cfg.exports.ccdf);
    detail::load(e, "constellation", cfg.exports.constellation);
    detail::load(e, "signal", cfg.exports.signal);
  }
  try {
    validate(cfg.train);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return parse_run_config(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  nlohmann::json j;
  j["bandwidth_hz"] = t.link.bandwidth_hz;
  j["symbols_per_block"] = t.link.block_len;
  j["bits_per_symbol"] = t.link.bits_per_symbol;
  j["filter_span_symbols"] = t.link.filter_span;
  j["filter_half_size"] = t.link.half_size;
  j["snr_db"] = t.link.snr_db;
  j["oversampling"] = t.link.oversampling;
  j["target_aclr_db"] = t.target_aclr_db;
  j["target_ped_variance"] = t.target_ped_variance;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["inner_steps"] = t.inner_steps;
  j["outer_iterations"] = t.outer_iterations;
  j["penalty_initial"] = t.penalty_initial;
  j["penalty_growth"] = t.penalty_growth;
  j["seed"] = t.seed;
  j["ped_grid_points"] = t.ped_grid_points;
  j["detector"] = {{"channels", t.detector.channels},
                   {"blocks", t.detector.blocks},
                   {"kernel_size", t.detector.kernel_size},
                   {"dilations", t.detector.dilations}};
  j["early_stop"] = t.early_stop;
  j["early_stop_tol"] = t.early_stop_tol;
  j["early_stop_patience"] = t.early_stop_patience;
  j["eval_blocks"] = t.eval_blocks;
  j["threads"] = t.threads;
  j["gram_cache_dir"] = t.gram_cache_dir;
  j["metric_symbols"] = cfg.metric_symbols;
  j["export"] = {{"psd", cfg.exports.psd},
                 {"ccdf", cfg.exports.ccdf},
                 {"constellation", cfg.exports.constellation},
                 {"signal", cfg.exports.signal}};
  return j;
}

}  // namespace wavelearn

#endif  // WAVELEARN_CONFIG_HPP

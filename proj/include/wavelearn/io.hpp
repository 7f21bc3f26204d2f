#ifndef WAVELEARN_IO_HPP
#define WAVELEARN_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavelearn/envelope.hpp"
#include "wavelearn/trainer.hpp"

namespace wavelearn {

inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// --- CSV exports -----------------------------------------------------------

inline void write_ccdf_csv(const std::filesystem::path& path,
                           const std::vector<CcdfPoint>& pts) {
  std::ofstream out(path, std::ios::binary);
  out << "threshold,probability\n";
  for (const CcdfPoint& p : pts) {
    out << format_g(p.threshold) << "," << format_g(p.probability) << "\n";
  }
}

// Frequencies are exported in Hz using the physical bandwidth (internal
// frequencies are in units of W = 1/T).
inline void write_psd_csv(const std::filesystem::path& path, const std::vector<PsdPoint>& pts,
                          double bandwidth_hz) {
  std::ofstream out(path, std::ios::binary);
  out << "frequency_hz,power_db\n";
  for (const PsdPoint& p : pts) {
    out << format_g(p.frequency * bandwidth_hz) << "," << format_g(p.power_db) << "\n";
  }
}

inline void write_signal_csv(const std::filesystem::path& path, const RenderedSignal& sig,
                             double bandwidth_hz, std::size_t max_rows = 0) {
  std::ofstream out(path, std::ios::binary);
  out << "time_s,re,im\n";
  const std::size_t n = max_rows ? std::min(max_rows, sig.samples.size()) : sig.samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    out << format_g(sig.time_at(i) / bandwidth_hz) << "," << format_g(sig.samples[i].real())
        << "," << format_g(sig.samples[i].imag()) << "\n";
  }
}

// --- checkpoints -----------------------------------------------------------
// Flat binary of doubles (all parameter tensors back to back) next to a JSON
// sidecar describing the layout and the training state.

struct CheckpointMeta {
  int outer_iter = 0;
  long long inner_step_count = 0;
  double mult_aclr = 0.0;
  double mult_ped = 0.0;
  double penalty = 0.0;
};

inline void write_checkpoint(const std::filesystem::path& bin_path,
                             const std::vector<ParamTensor>& params, const CheckpointMeta& meta,
                             const nlohmann::json& extra = {}) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write checkpoint: " + bin_path.string());
  nlohmann::json layout = nlohmann::json::array();
  std::size_t offset = 0;
  for (const ParamTensor& p : params) {
    bin.write(reinterpret_cast<const char*>(p.value.v.data()),
              static_cast<std::streamsize>(p.value.v.size() * sizeof(double)));
    layout.push_back({{"name", p.name}, {"shape", p.value.shape}, {"offset", offset}});
    offset += p.value.v.size();
  }
  nlohmann::json j;
  j["format"] = "wavelearn-checkpoint-v1";
  j["total_doubles"] = offset;
  j["layout"] = layout;
  j["state"] = {{"outer_iter", meta.outer_iter},
                {"inner_step_count", meta.inner_step_count},
                {"mult_aclr", meta.mult_aclr},
                {"mult_ped", meta.mult_ped},
                {"penalty", meta.penalty}};
  if (!extra.is_null() && !extra.empty()) j["extra"] = extra;
  std::filesystem::path sidecar = bin_path;
  sidecar += ".json";
  write_text_file(sidecar, j.dump(2) + "\n");
}

struct Checkpoint {
  std::vector<ParamTensor> params;
  CheckpointMeta meta;
  nlohmann::json extra;
};

inline Checkpoint read_checkpoint(const std::filesystem::path& bin_path) {
  std::filesystem::path sidecar = bin_path;
  sidecar += ".json";
  nlohmann::json j = nlohmann::json::parse(read_text_file(sidecar));
  if (j.value("format", "") != "wavelearn-checkpoint-v1") {
    throw std::runtime_error("unrecognized checkpoint format: " + sidecar.string());
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read checkpoint: " + bin_path.string());
  Checkpoint ck;
  for (const auto& entry : j.at("layout")) {
    ad::Shape shape = entry.at("shape").get<ad::Shape>();
    ad::Tensor t = ad::Tensor::zeros(shape);
    bin.read(reinterpret_cast<char*>(t.v.data()),
             static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("checkpoint truncated: " + bin_path.string());
    ck.params.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  const auto& st = j.at("state");
  ck.meta.outer_iter = st.at("outer_iter").get<int>();
  ck.meta.inner_step_count = st.at("inner_step_count").get<long long>();
  ck.meta.mult_aclr = st.at("mult_aclr").get<double>();
  ck.meta.mult_ped = st.at("mult_ped").get<double>();
  ck.meta.penalty = st.at("penalty").get<double>();
  if (j.contains("extra")) ck.extra = j["extra"];
  return ck;
}

}  // namespace wavelearn

#endif  // WAVELEARN_IO_HPP

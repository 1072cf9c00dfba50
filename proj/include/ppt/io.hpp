#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppt/montecarlo.hpp"
#include "ppt/signal_model.hpp"

namespace ppt::io {

// Config files are flat "key = value" text: one pair per line, '#' starts a
// comment, keys are case-sensitive. Lists are comma-separated; SNR sweeps
// also accept lo:step:hi range syntax.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Config {
  public:
    Config() = default;
    explicit Config(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key) const;  // comma or lo:step:hi

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);

// Experiment config assembled from file keys (unknown keys are rejected).
ExperimentConfig experiment_from_config(const Config& cfg);

// Signal files: CSV with header "n,x" plus a JSON sidecar (same basename,
// .meta.json) carrying Ts, sigma2, seed, the truth parameters when known,
// the SNR convention string, and — when supplied — the pulse width and
// sub-grid factor the producer used.
void write_signal(const std::string& csv_path, const Measurement& meas,
                  const std::string& snr_definition,
                  std::optional<double> Tp = std::nullopt,
                  std::optional<int> P_R = std::nullopt);
Measurement read_signal(const std::string& csv_path);

// Benchmark results: CSV with header
// snr_db,method,mse,crlb_model1,crlb_mhus,trials,failures. Deterministic
// formatting; reruns of the same config are byte-identical.
std::string results_csv(const MseCurve& curve);
void write_results(const std::string& path, const MseCurve& curve);

// Run manifest: flat key-value echo of the configuration, seed, artifact
// version and completion status. The manifest (not the results CSV) is where
// the wall-clock timestamp lives.
std::string manifest_text(const ExperimentConfig& cfg, const std::string& status,
                          const std::string& timestamp);

std::string format_double(double v);  // shortest round-trip decimal form

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace ppt::io

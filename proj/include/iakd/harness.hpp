#pragma once

// Experiment orchestration: one run per (config, seed), seed sweeps, summaries.
//
// A run directory holds
//   metrics.csv   epoch,lr,p,train_loss,train_acc,test_acc
//   updates.csv   iterations plus one update count per non-shared student block
//   paths.csv     optional path-draw log
//   student.ckpt  (teacher.ckpt for pretraining)

#include "iakd/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iakd {

inline constexpr const char* kMetricsHeader = "epoch,lr,p,train_loss,train_acc,test_acc";

std::string metrics_csv(const RunMetrics& m);
std::string updates_csv(const RunMetrics& m, const NetworkArch& student);
// Last test_acc in a metrics CSV; DataError on malformed input.
double read_final_accuracy(const std::filesystem::path& metrics_file);

struct SummaryStats {
    std::string method;
    std::vector<std::uint64_t> seeds;
    std::vector<double> final_acc;
    double mean = 0.0;
    std::optional<double> std; // sample standard deviation, needs >= 2 runs

    std::string to_json() const;
};

struct RunRecord {
    std::uint64_t seed;
    std::filesystem::path metrics_file;
};

SummaryStats summarize(const std::string& method, const std::vector<RunRecord>& runs);
SummaryStats summarize_accuracies(const std::string& method, const std::vector<std::uint64_t>& seeds,
                                  const std::vector<double>& accuracies);

/// Trains the teacher arch from scratch (plain cross-entropy) into `output`/teacher.ckpt.
RunMetrics run_pretrain(const ExperimentConfig& cfg, std::uint64_t seed);
/// Trains the student with cfg.method into `output`. Deterministic in (cfg, seed).
RunMetrics run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);
/// Every seed into `output`/seed_<s>/, then `output`/summary.json.
SummaryStats run_sweep(const ExperimentConfig& cfg, bool pretrain, unsigned jobs = 1);

// Test accuracy of a checkpoint with the extracted-student evaluation path.
double run_eval(const std::filesystem::path& checkpoint, const NetworkArch& arch, const DataSpec& data,
                std::size_t batch_size);

} // namespace iakd

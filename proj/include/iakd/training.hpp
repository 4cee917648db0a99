#pragma once

// Epoch loop shared by every trainer, plus the interactive (hybrid) trainer.

#include "iakd/data.hpp"
#include "iakd/hybrid.hpp"
#include "iakd/model.hpp"
#include "iakd/optim.hpp"
#include "iakd/schedules.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace iakd {

struct TrainOptions {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int epochs = 60;
    std::vector<int> milestones{30, 45};
    double factor = 0.1;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    bool record_paths = false;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double p = 1.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct RunMetrics {
    std::vector<EpochRecord> epochs;
    double final_test_acc = 0.0;
    std::uint64_t iterations = 0;
    std::vector<std::uint64_t> update_counts; // per non-shared student block
    std::vector<PathDraw> draws;              // only with record_paths
    double wall_seconds = 0.0;
};

// Labelled seed streams of a run.
struct RunSeeds {
    std::uint64_t init;
    std::uint64_t paths;
    std::uint64_t shuffle;

    static RunSeeds from_master(std::uint64_t master);
};

/// Top-1 accuracy over sequential eval batches of `batch_size` (batch statistics).
double evaluate(Network& net, const Dataset& data, std::size_t batch_size);

struct StepOutcome {
    double loss = 0.0;
    std::size_t correct = 0;
};

using StepFn = std::function<StepOutcome(const Batch& batch, const SgdConfig& sgd, int epoch, std::int64_t iteration)>;
using ProbabilityFn = std::function<double(int epoch)>;

/// Runs `opts.epochs` epochs of shuffled drop-last batches through `step`, with a
/// multi-step learning rate. `evaluated` is scored on `test` after every epoch;
/// before the last evaluation its parameters are rounded to checkpoint precision
/// so that the saved checkpoint reproduces the final accuracy exactly.
RunMetrics run_training_loop(Network& evaluated, const Dataset& train, const Dataset& test, const TrainOptions& opts,
                             const ProbabilityFn& p_of_epoch, const StepFn& step);

// Teacher logits and temperature for an added softened-logit term.
struct SoftTargets {
    Network* teacher = nullptr;
    double alpha = 0.9;
    double temperature = 4.0;
};

/// Interactive distillation: per-iteration path draws with p from `schedule`,
/// masked updates, optional softened-logit term.
RunMetrics train_iakd(HybridNetwork& net, const ScheduleSpec& schedule, const Dataset& train, const Dataset& test,
                      const TrainOptions& opts, const SoftTargets* soft = nullptr);

} // namespace iakd

#include "iakd/training.hpp"

#include "iakd/baselines.hpp"
#include "iakd/error.hpp"
#include "iakd/rng.hpp"

#include <chrono>

namespace iakd {

void TrainOptions::validate() const {
    if (epochs < 1) throw ConfigError("optim.epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("optim.lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be non-negative");
    if (!(factor > 0.0)) throw ConfigError("optim.factor must be positive");
    if (batch_size < 2) throw InvalidBatchError("optim.batch_size must be >= 2");
    int prev = 0;
    for (int m : milestones) {
        if (m <= prev || m >= epochs) throw ConfigError("optim.milestones must be strictly increasing inside (0, epochs)");
        prev = m;
    }
}

RunSeeds RunSeeds::from_master(std::uint64_t master) {
    return {derive_seed(master, "init"), derive_seed(master, "paths"), derive_seed(master, "shuffle")};
}

double evaluate(Network& net, const Dataset& data, std::size_t batch_size) {
    std::size_t correct = 0;
    for (const Batch& b : eval_batches(data, batch_size)) {
        const auto pred = argmax_rows(net.predict(b.x));
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == b.y[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

RunMetrics run_training_loop(Network& evaluated, const Dataset& train, const Dataset& test, const TrainOptions& opts,
                             const ProbabilityFn& p_of_epoch, const StepFn& step) {
    opts.validate();
    if (train.size() < opts.batch_size) throw InvalidBatchError("training set smaller than one batch");
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t shuffle_seed = RunSeeds::from_master(opts.seed).shuffle;

    RunMetrics metrics;
    std::int64_t iteration = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        const double lr = multistep_lr(opts.lr, opts.milestones, opts.factor, epoch);
        const SgdConfig sgd{lr, opts.momentum, opts.weight_decay};
        const auto epoch_batches = batches(train, opts.batch_size, derive_seed(shuffle_seed, "epoch" + std::to_string(epoch)));

        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (const Batch& b : epoch_batches) {
            const StepOutcome out = step(b, sgd, epoch, iteration++);
            loss_sum += out.loss;
            correct += out.correct;
            seen += b.y.size();
        }
        if (epoch + 1 == opts.epochs) round_to_checkpoint_precision(evaluated);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.p = p_of_epoch ? p_of_epoch(epoch) : 1.0;
        rec.train_loss = loss_sum / static_cast<double>(epoch_batches.size());
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        rec.test_acc = evaluate(evaluated, test, opts.batch_size);
        metrics.epochs.push_back(rec);
    }
    metrics.iterations = static_cast<std::uint64_t>(iteration);
    metrics.final_test_acc = metrics.epochs.back().test_acc;
    metrics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return metrics;
}

RunMetrics train_iakd(HybridNetwork& net, const ScheduleSpec& schedule, const Dataset& train, const Dataset& test,
                      const TrainOptions& opts, const SoftTargets* soft) {
    ScheduleSpec sched = schedule;
    sched.total_epochs = opts.epochs;
    sched.validate();
    Rng path_rng(RunSeeds::from_master(opts.seed).paths);

    HybridLoss loss_fn;
    if (soft) {
        if (!soft->teacher) throw ConfigError("softened-logit term needs a teacher network");
        loss_fn = [soft](Var logits, const Batch& b) {
            const Tensor teacher_logits = soft->teacher->predict(b.x);
            return hkd_loss(logits, teacher_logits, b.y, soft->temperature, soft->alpha);
        };
    }

    std::vector<std::uint64_t> counts(net.num_blocks(), 0);
    std::vector<PathDraw> draws;
    auto p_of_epoch = [&sched](int epoch) { return p_at_epoch(sched, epoch); };
    auto step = [&](const Batch& b, const SgdConfig& sgd, int epoch, std::int64_t iteration) {
        const IterationResult r = train_iteration(net, b, p_of_epoch(epoch), sgd, path_rng, iteration, loss_fn);
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += r.draw.a[i] ? 1 : 0;
        if (opts.record_paths) draws.push_back(r.draw);
        return StepOutcome{r.loss, r.correct};
    };
    RunMetrics metrics = run_training_loop(net.student(), train, test, opts, p_of_epoch, step);
    metrics.update_counts = std::move(counts);
    metrics.draws = std::move(draws);
    return metrics;
}

} // namespace iakd

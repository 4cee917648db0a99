#include "iakd/baselines.hpp"

#include "iakd/error.hpp"
#include "iakd/rng.hpp"

namespace iakd {

Method parse_method(std::string_view name) {
    if (name == "plain") return Method::plain;
    if (name == "iakd") return Method::iakd;
    if (name == "iakd_group") return Method::iakd_group;
    if (name == "nia") return Method::nia;
    if (name == "hkd") return Method::hkd;
    if (name == "at_block") return Method::at_block;
    if (name == "at_group") return Method::at_group;
    if (name == "iakd_plus_hkd") return Method::iakd_plus_hkd;
    throw ConfigError("unknown method '" + std::string(name) +
                      "' (plain|iakd|iakd_group|nia|hkd|at_block|at_group|iakd_plus_hkd)");
}

std::string_view to_string(Method m) {
    switch (m) {
    case Method::plain: return "plain";
    case Method::iakd: return "iakd";
    case Method::iakd_group: return "iakd_group";
    case Method::nia: return "nia";
    case Method::hkd: return "hkd";
    case Method::at_block: return "at_block";
    case Method::at_group: return "at_group";
    case Method::iakd_plus_hkd: return "iakd_plus_hkd";
    }
    return "?";
}

bool uses_teacher(Method m) { return m != Method::plain; }

bool uses_schedule(Method m) {
    return m == Method::iakd || m == Method::iakd_group || m == Method::iakd_plus_hkd || m == Method::nia;
}

void BaselineConfig::validate() const {
    if (method == Method::hkd || method == Method::iakd_plus_hkd) {
        if (!(temperature > 0.0)) throw ConfigError("distill.temperature must be positive");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distill.alpha must lie in [0, 1]");
    }
    if ((method == Method::at_block || method == Method::at_group) && !(beta >= 0.0)) {
        throw ConfigError("distill.beta must be non-negative");
    }
    if (method == Method::nia) nia_schedule.validate();
}

// ---- losses -------------------------------------------------------------------

Var hkd_loss(Var student_logits, const Tensor& teacher_logits, std::span<const int> labels, double temperature,
             double alpha) {
    Var ce = softmax_cross_entropy(student_logits, labels);
    Var kl = kl_softened(student_logits, teacher_logits, temperature);
    return add(scale(ce, 1.0 - alpha), scale(kl, alpha));
}

Var nia_loss(Var student_logits, std::span<const Var> student_feats, std::span<const Tensor> teacher_feats,
             std::span<const int> labels, const PathMask& gates) {
    if (student_feats.size() != teacher_feats.size() || gates.size() != student_feats.size()) {
        throw ConfigError("nia_loss: " + std::to_string(student_feats.size()) + " student features, " +
                          std::to_string(teacher_feats.size()) + " teacher features, " +
                          std::to_string(gates.size()) + " gates");
    }
    Tape& tape = *student_logits.tape();
    Var loss = softmax_cross_entropy(student_logits, labels);
    for (std::size_t n = 0; n < gates.size(); ++n) {
        if (!gates[n]) continue;
        if (student_feats[n].shape() != teacher_feats[n].shape) {
            throw ConfigError("nia_loss: block " + std::to_string(n) + " width mismatch " +
                              shape_string(student_feats[n].shape()) + " vs " + shape_string(teacher_feats[n].shape));
        }
        loss = add(loss, l2_distance(student_feats[n], tape.constant(teacher_feats[n])));
    }
    return loss;
}

Var at_loss(Var student_logits, std::span<const Var> student_acts, std::span<const Tensor> teacher_acts, double beta,
            std::span<const int> labels) {
    if (student_acts.size() != teacher_acts.size()) {
        throw ConfigError("at_loss: " + std::to_string(student_acts.size()) + " student points vs " +
                          std::to_string(teacher_acts.size()) + " teacher points");
    }
    Tape& tape = *student_logits.tape();
    Var loss = softmax_cross_entropy(student_logits, labels);
    if (student_acts.empty()) return loss;
    Var distill;
    for (std::size_t n = 0; n < student_acts.size(); ++n) {
        Var teacher_att = attention_vector(tape.constant(teacher_acts[n]));
        Var term = l2_distance(attention_vector(student_acts[n]), teacher_att);
        distill = distill.valid() ? add(distill, term) : term;
    }
    return add(loss, scale(distill, beta));
}

std::vector<Tensor> paired_teacher_outputs(Network& teacher, const Tensor& batch, const BlockPairing& pairing) {
    Tape tape(Tape::Mode::inference);
    ForwardTrace trace;
    teacher.forward(tape, tape.constant(batch), &trace);
    const auto& arch = teacher.arch();
    std::vector<Tensor> out;
    for (const auto& pair : pairing) {
        const BlockId& last = pair.teacher.back();
        std::size_t idx = 0;
        for (int g = 0; g < last.group; ++g) idx += arch.non_shared_blocks(static_cast<std::size_t>(g));
        idx += static_cast<std::size_t>(last.position - 1);
        out.push_back(trace.block_outputs.at(idx).value());
    }
    return out;
}

std::vector<Tensor> teacher_group_outputs(Network& teacher, const Tensor& batch) {
    Tape tape(Tape::Mode::inference);
    ForwardTrace trace;
    teacher.forward(tape, tape.constant(batch), &trace);
    std::vector<Tensor> out;
    for (Var v : trace.group_outputs) out.push_back(v.value());
    return out;
}

// ---- trainers -----------------------------------------------------------------

RunMetrics train_baseline(const BaselineConfig& cfg, Network* teacher, Network& student, const Dataset& train,
                          const Dataset& test, const TrainOptions& opts) {
    cfg.validate();
    if (cfg.method == Method::iakd || cfg.method == Method::iakd_group || cfg.method == Method::iakd_plus_hkd) {
        throw ConfigError("train_baseline does not run interactive methods");
    }
    if (uses_teacher(cfg.method) && !teacher) throw ConfigError(std::string(to_string(cfg.method)) + " needs a teacher");

    BlockPairing pairing;
    if (teacher) pairing = pair_blocks(teacher->arch(), student.arch());

    ScheduleSpec nia = cfg.nia_schedule;
    nia.total_epochs = opts.epochs;
    Rng gate_rng(RunSeeds::from_master(opts.seed).paths);
    const std::size_t blocks = student.arch().total_non_shared_blocks();

    ProbabilityFn p_of_epoch;
    if (cfg.method == Method::nia) p_of_epoch = [&nia](int epoch) { return p_at_epoch(nia, epoch); };

    auto step = [&](const Batch& b, const SgdConfig& sgd, int epoch, std::int64_t) {
        Tape tape;
        ForwardTrace trace;
        Var logits = student.forward(tape, tape.constant(b.x), &trace);
        Var loss;
        switch (cfg.method) {
        case Method::plain: loss = softmax_cross_entropy(logits, b.y); break;
        case Method::hkd: loss = hkd_loss(logits, teacher->predict(b.x), b.y, cfg.temperature, cfg.alpha); break;
        case Method::at_block:
            loss = at_loss(logits, trace.block_outputs, paired_teacher_outputs(*teacher, b.x, pairing), cfg.beta, b.y);
            break;
        case Method::at_group:
            loss = at_loss(logits, trace.group_outputs, teacher_group_outputs(*teacher, b.x), cfg.beta, b.y);
            break;
        case Method::nia: {
            // a_n = 1 (loss added) with probability 1 - p_n
            const std::vector<double> keep(blocks, 1.0 - p_at_epoch(nia, epoch));
            const PathMask gates = sample_paths(keep, gate_rng);
            std::vector<Tensor> targets;
            if (std::find(gates.begin(), gates.end(), true) != gates.end()) {
                targets = paired_teacher_outputs(*teacher, b.x, pairing);
            } else {
                targets.resize(blocks);
            }
            loss = nia_loss(logits, trace.block_outputs, targets, b.y, gates);
            break;
        }
        default: throw ConfigError("unsupported baseline method");
        }
        tape.backward(loss);
        sgd_step(student.parameters(), sgd);

        StepOutcome out{loss.value().data[0], 0};
        const auto pred = argmax_rows(logits.value());
        for (std::size_t k = 0; k < pred.size(); ++k) out.correct += pred[k] == b.y[k] ? 1 : 0;
        return out;
    };
    RunMetrics metrics = run_training_loop(student, train, test, opts, p_of_epoch, step);
    metrics.update_counts.assign(blocks, metrics.iterations);
    return metrics;
}

RunMetrics train_iakd_plus_hkd(HybridNetwork& net, Network& teacher, const ScheduleSpec& schedule, double alpha,
                               double temperature, const Dataset& train, const Dataset& test, const TrainOptions& opts) {
    if (!(temperature > 0.0)) throw ConfigError("distill.temperature must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distill.alpha must lie in [0, 1]");
    const SoftTargets soft{&teacher, alpha, temperature};
    return train_iakd(net, schedule, train, test, opts, &soft);
}

} // namespace iakd

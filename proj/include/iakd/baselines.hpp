#pragma once

// Non-interactive comparison trainers: plain student, softened-logit KD (HKD),
// attention transfer at group or block ends, and the no-interaction ablation
// (NIA) with Bernoulli-gated per-block L2 mimicry.

#include "iakd/training.hpp"

#include <span>
#include <string>
#include <string_view>

namespace iakd {

enum class Method { plain, iakd, iakd_group, nia, hkd, at_block, at_group, iakd_plus_hkd };

Method parse_method(std::string_view name);
std::string_view to_string(Method m);
bool uses_teacher(Method m);
bool uses_schedule(Method m);

struct BaselineConfig {
    Method method = Method::plain;
    double temperature = 4.0;
    double alpha = 0.9;
    double beta = 1000.0;
    ScheduleSpec nia_schedule; // drives p_n = P(loss n ignored)

    void validate() const;
};

/// (1 - alpha) * CE(student, labels) + alpha * kl_softened(student, teacher, T)
Var hkd_loss(Var student_logits, const Tensor& teacher_logits, std::span<const int> labels, double temperature,
             double alpha);

/// CE + sum over n with gate[n] = 1 of l2_distance(student_feats[n], teacher_feats[n]).
Var nia_loss(Var student_logits, std::span<const Var> student_feats, std::span<const Tensor> teacher_feats,
             std::span<const int> labels, const PathMask& gates);

/// CE + beta * sum_n l2_distance(attention(student_n), attention(teacher_n)).
Var at_loss(Var student_logits, std::span<const Var> student_acts, std::span<const Tensor> teacher_acts, double beta,
            std::span<const int> labels);

// Teacher activations matched to the student's non-shared blocks: the output
// of the last teacher block of each paired run, in student depth order.
std::vector<Tensor> paired_teacher_outputs(Network& teacher, const Tensor& batch, const BlockPairing& pairing);
// Teacher activations at the end of each group.
std::vector<Tensor> teacher_group_outputs(Network& teacher, const Tensor& batch);

/// Trains `student` with a non-interactive method. `teacher` is forward-only and
/// may be null for Method::plain (which never touches it).
RunMetrics train_baseline(const BaselineConfig& cfg, Network* teacher, Network& student, const Dataset& train,
                          const Dataset& test, const TrainOptions& opts);

/// Interactive distillation with an added softened-logit term against the full teacher.
RunMetrics train_iakd_plus_hkd(HybridNetwork& net, Network& teacher, const ScheduleSpec& schedule, double alpha,
                               double temperature, const Dataset& train, const Dataset& test, const TrainOptions& opts);

} // namespace iakd

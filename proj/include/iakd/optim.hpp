#pragma once

#include "iakd/autodiff.hpp"

#include <span>
#include <vector>

namespace iakd {

struct SgdConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
};

/// Momentum SGD with coupled weight decay:
///   buf <- momentum * buf + (grad + wd * value);  value <- value - lr * buf
/// Frozen parameters are skipped entirely (neither value nor buffer touched).
/// Throws ConfigError if a non-frozen parameter carries no gradient.
void sgd_step(std::span<Parameter* const> params, double lr, double momentum, double weight_decay);
inline void sgd_step(std::span<Parameter* const> params, const SgdConfig& cfg) {
    sgd_step(params, cfg.lr, cfg.momentum, cfg.weight_decay);
}

// initial_lr * factor^(number of milestones <= epoch)
double multistep_lr(double initial_lr, std::span<const int> milestones, double factor, int epoch);

// Clears value.grad on every parameter.
void zero_grad(std::span<Parameter* const> params);

} // namespace iakd

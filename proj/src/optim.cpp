#include "iakd/optim.hpp"

#include "iakd/error.hpp"

#include <cmath>

namespace iakd {

void sgd_step(std::span<Parameter* const> params, double lr, double momentum, double weight_decay) {
    for (Parameter* p : params) {
        if (p->frozen) continue;
        if (!p->value.grad || p->value.grad->size() != p->value.size()) {
            throw ConfigError("sgd_step: missing gradient for parameter '" + p->name + "'");
        }
    }
    for (Parameter* p : params) {
        if (p->frozen) continue;
        auto& value = p->value.data;
        const auto& grad = *p->value.grad;
        auto& buf = p->momentum_buffer;
        if (buf.size() != value.size()) buf.assign(value.size(), 0.0);
        for (std::size_t i = 0; i < value.size(); ++i) {
            buf[i] = momentum * buf[i] + (grad[i] + weight_decay * value[i]);
            value[i] -= lr * buf[i];
        }
    }
}

double multistep_lr(double initial_lr, std::span<const int> milestones, double factor, int epoch) {
    double lr = initial_lr;
    for (int m : milestones) {
        if (m <= epoch) lr *= factor;
    }
    return lr;
}

void zero_grad(std::span<Parameter* const> params) {
    for (Parameter* p : params) p->value.grad.reset();
}

} // namespace iakd

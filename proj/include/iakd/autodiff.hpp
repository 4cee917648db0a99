#pragma once

// Minimal tape-based reverse-mode differentiation over dense 2-D tensors.

#include "iakd/tensor.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace iakd {

struct Parameter {
    std::string name;
    Tensor value;
    bool frozen = false;
    std::vector<double> momentum_buffer;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), momentum_buffer(value.size(), 0.0) {}
};

class Tape;

/// Handle to a tensor recorded on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    std::size_t id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool valid() const { return tape_ != nullptr; }

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    // Reads the node's own grad and accumulates into its inputs' grads.
    using BackwardFn = std::function<void(Tape&, std::size_t)>;

    enum class Mode { training, inference };

    explicit Tape(Mode mode = Mode::training) : mode_(mode) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // A parameter registered twice maps to the same node.
    Var leaf(Parameter& param);
    // Records an op output. `inputs` decides whether the node needs a gradient;
    // in inference mode the backward rule is dropped.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    const Tensor& value(Var v) const { return value(v.id()); }
    bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
    bool needs_grad(Var v) const { return needs_grad(v.id()); }

    // Gradient buffer of a node, zero-initialized on first access.
    std::vector<double>& grad_buffer(std::size_t id);
    // Gradient after backward(); throws if the node was not reached.
    const std::vector<double>& grad(Var v) const;

    Mode mode() const { return mode_; }

    /// Seeds d(loss)/d(loss) = 1, replays the tape in reverse and writes the
    /// gradients of registered parameters into their `value.grad`.
    void backward(Var loss);

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value; // value.grad holds the gradient once reached
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    Mode mode_;
    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> leaves_;
    bool consumed_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// ---- layer operations -------------------------------------------------------

inline constexpr double kBatchNormEpsilon = 1e-5;

Var linear(Var input, Var weight, Var bias);
Var batchnorm(Var input, Var gamma, Var beta, double epsilon = kBatchNormEpsilon);
Var relu(Var input);
Var add(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);

// ---- losses (scalar outputs, shape {1}) ------------------------------------

Var softmax_cross_entropy(Var logits, std::span<const int> labels);
// T^2 * mean_b KL(softmax(teacher/T) || softmax(student/T)); teacher is a constant.
Var kl_softened(Var student_logits, const Tensor& teacher_logits, double temperature);
Var l2_distance(Var a, Var b);
Var attention_vector(Var activation);

// Argmax per row of a 2-D tensor.
std::vector<int> argmax_rows(const Tensor& logits);

} // namespace iakd

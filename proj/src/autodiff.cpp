#include "iakd/autodiff.hpp"

#include "iakd/error.hpp"
#include "iakd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iakd {

namespace {

Tape& tape_of(Var v) {
    if (!v.valid()) throw TapeError("operation on an unbound variable");
    return *v.tape();
}

Tape& common_tape(Var a, Var b) {
    Tape& t = tape_of(a);
    if (&tape_of(b) != &t) throw TapeError("operands recorded on different tapes");
    return t;
}

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw ConfigError(std::string(what) + " must be 2-D, got " + shape_string(t.shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) {
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a.shape) + " vs " +
                          shape_string(b.shape));
    }
}

// Row-wise log-softmax of logits / temperature.
std::vector<double> log_softmax_rows(const Tensor& logits, double temperature) {
    const std::size_t b = logits.rows(), c = logits.cols();
    std::vector<double> out(b * c);
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = &logits.data[i * c];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, row[j] / temperature);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] / temperature - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] / temperature - lse;
    }
    return out;
}

} // namespace

// ---- tape -------------------------------------------------------------------

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr, nullptr, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Parameter& param) {
    if (auto it = leaves_.find(&param); it != leaves_.end()) return Var(this, it->second);
    Tensor copy(param.value.shape, param.value.data);
    nodes_.push_back(Node{std::move(copy), nullptr, &param, mode_ == Mode::training});
    leaves_.emplace(&param, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    if (consumed_) throw TapeError("tape already consumed by backward()");
    bool needs = false;
    if (mode_ == Mode::training) {
        for (const Var& in : inputs) {
            if (in.tape() != this) throw TapeError("operand recorded on a different tape");
            needs = needs || nodes_.at(in.id()).needs_grad;
        }
    }
    nodes_.push_back(Node{std::move(value), needs ? std::move(backward) : nullptr, nullptr, needs});
    return Var(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
    Tensor& v = nodes_.at(id).value;
    if (!v.grad) v.grad.emplace(v.size(), 0.0);
    return *v.grad;
}

const std::vector<double>& Tape::grad(Var v) const {
    const auto& g = nodes_.at(v.id()).value.grad;
    if (!g) throw TapeError("no gradient reached node " + std::to_string(v.id()));
    return *g;
}

void Tape::backward(Var loss) {
    if (consumed_) throw TapeError("tape already consumed by backward()");
    if (loss.tape() != this) throw TapeError("loss was not recorded on this tape");
    if (value(loss).size() != 1) throw TapeError("backward() needs a scalar loss, got " + shape_string(value(loss).shape));
    consumed_ = true;
    grad_buffer(loss.id())[0] = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.value.grad) continue;
        if (node.backward) node.backward(*this, id);
    }
    for (const auto& entry : leaves_) {
        Node& node = nodes_[entry.second];
        const auto& g = node.value.grad;
        Parameter* param = node.param;
        param->value.grad = g ? *g : std::vector<double>(param->value.size(), 0.0);
    }
}

// ---- layer operations -------------------------------------------------------

Var linear(Var input, Var weight, Var bias) {
    Tape& tape = common_tape(input, weight);
    common_tape(input, bias);
    const Tensor& x = input.value();
    const Tensor& w = weight.value();
    const Tensor& bv = bias.value();
    require_matrix(x, "linear input");
    require_matrix(w, "linear weight");
    if (x.cols() != w.rows() || bv.size() != w.cols()) {
        throw ConfigError("linear: input " + shape_string(x.shape) + " incompatible with weight " +
                          shape_string(w.shape) + " and bias " + shape_string(bv.shape));
    }
    const std::size_t b = x.rows(), m = w.rows(), n = w.cols();
    Tensor out({b, n});
    kernels::gemm_nn(x.data, w.data, out.data, b, m, n);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += bv.data[j];

    const std::size_t xi = input.id(), wi = weight.id(), bi = bias.id();
    return tape.record(std::move(out), {input, weight, bias}, [xi, wi, bi, b, m, n](Tape& t, std::size_t self) {
        const auto& dy = t.grad_buffer(self);
        if (t.needs_grad(xi)) kernels::gemm_nt_acc(dy, t.value(wi).data, t.grad_buffer(xi), b, n, m);
        if (t.needs_grad(wi)) kernels::gemm_tn_acc(t.value(xi).data, dy, t.grad_buffer(wi), m, b, n);
        if (t.needs_grad(bi)) kernels::column_sums_acc(dy, t.grad_buffer(bi), b, n);
    });
}

Var batchnorm(Var input, Var gamma, Var beta, double epsilon) {
    Tape& tape = common_tape(input, gamma);
    common_tape(input, beta);
    const Tensor& x = input.value();
    require_matrix(x, "batchnorm input");
    const std::size_t b = x.rows(), n = x.cols();
    if (b < 2) throw InvalidBatchError("batchnorm needs at least 2 rows, got " + std::to_string(b));
    if (gamma.value().size() != n || beta.value().size() != n) {
        throw ConfigError("batchnorm: input " + shape_string(x.shape) + " incompatible with gamma " +
                          shape_string(gamma.value().shape) + " / beta " + shape_string(beta.value().shape));
    }
    if (!(epsilon >= 0.0)) throw ConfigError("batchnorm epsilon must be non-negative");

    std::vector<double> mean(n), var(n), inv_std(n);
    kernels::column_moments(x.data, mean, var, b, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double denom = var[j] + epsilon;
        inv_std[j] = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;
    }
    std::vector<double> xhat(b * n);
    Tensor out({b, n});
    const auto& g = gamma.value().data;
    const auto& be = beta.value().data;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double h = (x.data[i * n + j] - mean[j]) * inv_std[j];
            xhat[i * n + j] = h;
            out.data[i * n + j] = g[j] * h + be[j];
        }
    }

    const std::size_t xi = input.id(), gi = gamma.id(), bi = beta.id();
    return tape.record(std::move(out), {input, gamma, beta},
                       [xi, gi, bi, b, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const auto& dy = t.grad_buffer(self);
        if (t.needs_grad(gi)) {
            auto& dg = t.grad_buffer(gi);
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < n; ++j) dg[j] += dy[i * n + j] * xhat[i * n + j];
        }
        if (t.needs_grad(bi)) kernels::column_sums_acc(dy, t.grad_buffer(bi), b, n);
        if (t.needs_grad(xi)) {
            const auto& gv = t.value(gi).data;
            std::vector<double> sum_d(n, 0.0), sum_dh(n, 0.0);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = dy[i * n + j] * gv[j];
                    sum_d[j] += d;
                    sum_dh[j] += d * xhat[i * n + j];
                }
            }
            auto& dx = t.grad_buffer(xi);
            const double bd = static_cast<double>(b);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = dy[i * n + j] * gv[j];
                    dx[i * n + j] += inv_std[j] / bd * (bd * d - sum_d[j] - xhat[i * n + j] * sum_dh[j]);
                }
            }
        }
    });
}

Var relu(Var input) {
    Tape& tape = tape_of(input);
    const Tensor& x = input.value();
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    const std::size_t xi = input.id();
    return tape.record(std::move(out), {input}, [xi](Tape& t, std::size_t self) {
        const auto& dy = t.grad_buffer(self);
        const auto& xv = t.value(xi).data;
        auto& dx = t.grad_buffer(xi);
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (xv[i] > 0.0) dx[i] += dy[i];
    });
}

Var add(Var a, Var b) {
    Tape& tape = common_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    Tensor out(a.value().shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] + b.value().data[i];
    const std::size_t ai = a.id(), bi = b.id();
    return tape.record(std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
        const auto& dy = t.grad_buffer(self);
        for (std::size_t id : {ai, bi}) {
            if (!t.needs_grad(id)) continue;
            auto& d = t.grad_buffer(id);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
        }
    });
}

Var scale(Var a, double factor) {
    Tape& tape = tape_of(a);
    Tensor out(a.value().shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = factor * a.value().data[i];
    const std::size_t ai = a.id();
    return tape.record(std::move(out), {a}, [ai, factor](Tape& t, std::size_t self) {
        const auto& dy = t.grad_buffer(self);
        auto& d = t.grad_buffer(ai);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * dy[i];
    });
}

Var sum(Var a) {
    Tape& tape = tape_of(a);
    double s = 0.0;
    for (double v : a.value().data) s += v;
    const std::size_t ai = a.id();
    return tape.record(Tensor::scalar(s), {a}, [ai](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0];
        auto& d = t.grad_buffer(ai);
        for (double& v : d) v += g;
    });
}

// ---- losses -----------------------------------------------------------------

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    Tape& tape = tape_of(logits);
    const Tensor& z = logits.value();
    require_matrix(z, "cross-entropy logits");
    const std::size_t b = z.rows(), c = z.cols();
    if (labels.size() != b) {
        throw DataError("cross-entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(b) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw DataError("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) + ")");
        }
    }
    const auto logp = log_softmax_rows(z, 1.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) loss -= logp[i * c + static_cast<std::size_t>(labels[i])];
    loss /= static_cast<double>(b);

    const std::size_t zi = logits.id();
    std::vector<int> y(labels.begin(), labels.end());
    return tape.record(Tensor::scalar(loss), {logits}, [zi, b, c, logp, y = std::move(y)](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0] / static_cast<double>(b);
        auto& dz = t.grad_buffer(zi);
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                const double target = static_cast<std::size_t>(y[i]) == j ? 1.0 : 0.0;
                dz[i * c + j] += g * (std::exp(logp[i * c + j]) - target);
            }
        }
    });
}

Var kl_softened(Var student_logits, const Tensor& teacher_logits, double temperature) {
    Tape& tape = tape_of(student_logits);
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive, got " + std::to_string(temperature));
    const Tensor& s = student_logits.value();
    require_same_shape(s, teacher_logits, "kl_softened");
    require_matrix(s, "kl_softened logits");
    const std::size_t b = s.rows(), c = s.cols();
    const auto log_ps = log_softmax_rows(s, temperature);
    const auto log_pt = log_softmax_rows(teacher_logits, temperature);
    double kl = 0.0;
    for (std::size_t i = 0; i < b * c; ++i) {
        const double pt = std::exp(log_pt[i]);
        if (pt > 0.0) kl += pt * (log_pt[i] - log_ps[i]);
    }
    const double t2 = temperature * temperature;
    const double value = t2 * kl / static_cast<double>(b);

    const std::size_t si = student_logits.id();
    return tape.record(Tensor::scalar(value), {student_logits},
                       [si, b, temperature, log_ps, log_pt](Tape& t, std::size_t self) {
        // d/ds of T^2 * KL / b = T * (p_s - p_t) / b
        const double g = t.grad_buffer(self)[0] * temperature / static_cast<double>(b);
        auto& ds = t.grad_buffer(si);
        for (std::size_t i = 0; i < ds.size(); ++i) ds[i] += g * (std::exp(log_ps[i]) - std::exp(log_pt[i]));
    });
}

Var l2_distance(Var a, Var b) {
    Tape& tape = common_tape(a, b);
    require_same_shape(a.value(), b.value(), "l2_distance");
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    const double count = static_cast<double>(av.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
    const std::size_t ai = a.id(), bi = b.id();
    return tape.record(Tensor::scalar(acc / count), {a, b}, [ai, bi, count](Tape& t, std::size_t self) {
        const double g = t.grad_buffer(self)[0] * 2.0 / count;
        const auto& x = t.value(ai).data;
        const auto& y = t.value(bi).data;
        if (t.needs_grad(ai)) {
            auto& d = t.grad_buffer(ai);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * (x[i] - y[i]);
        }
        if (t.needs_grad(bi)) {
            auto& d = t.grad_buffer(bi);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g * (x[i] - y[i]);
        }
    });
}

Var attention_vector(Var activation) {
    Tape& tape = tape_of(activation);
    const Tensor& x = activation.value();
    require_matrix(x, "attention input");
    const std::size_t b = x.rows(), n = x.cols();
    Tensor out({b, n});
    std::vector<double> norms(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double q = x.data[i * n + j] * x.data[i * n + j];
            s += q * q;
        }
        norms[i] = std::sqrt(s);
        // An all-zero row maps to the zero vector.
        if (norms[i] > 0.0) {
            for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = x.data[i * n + j] * x.data[i * n + j] / norms[i];
        }
    }
    const std::size_t xi = activation.id();
    return tape.record(std::move(out), {activation}, [xi, b, n, norms = std::move(norms)](Tape& t, std::size_t self) {
        const auto& dy = t.grad_buffer(self);
        const auto& y = t.value(self).data;
        const auto& xv = t.value(xi).data;
        auto& dx = t.grad_buffer(xi);
        for (std::size_t i = 0; i < b; ++i) {
            if (norms[i] == 0.0) continue;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * dy[i * n + j];
            for (std::size_t j = 0; j < n; ++j) {
                const double dq = (dy[i * n + j] - y[i * n + j] * dot) / norms[i];
                dx[i * n + j] += dq * 2.0 * xv[i * n + j];
            }
        }
    });
}

std::vector<int> argmax_rows(const Tensor& logits) {
    const std::size_t b = logits.rows(), c = logits.cols();
    std::vector<int> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = &logits.data[i * c];
        out[i] = static_cast<int>(std::max_element(row, row + c) - row);
    }
    return out;
}

} // namespace iakd

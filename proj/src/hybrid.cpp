#include "iakd/hybrid.hpp"

#include "iakd/error.hpp"
#include "iakd/format.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace iakd {

BlockPairing pair_blocks(const NetworkArch& teacher, const NetworkArch& student) {
    check_compatible(teacher, student);
    BlockPairing pairing;
    for (std::size_t g = 0; g < student.groups.size(); ++g) {
        const std::size_t n_student = student.non_shared_blocks(g);
        const std::size_t n_teacher = teacher.non_shared_blocks(g);
        if (n_teacher < n_student) {
            throw PairingError("group " + std::to_string(g) + ": teacher has " + std::to_string(n_teacher) +
                               " non-shared blocks, student " + std::to_string(n_student));
        }
        const int gi = static_cast<int>(g);
        std::size_t next_teacher = 1;
        for (std::size_t s = 0; s < n_student; ++s) {
            // ceil-first: the first (n_teacher % n_student) runs get one extra block
            const std::size_t run = n_teacher / n_student + (s < n_teacher % n_student ? 1 : 0);
            BlockPair pair{{gi, static_cast<int>(s + 1), false}, {}};
            for (std::size_t k = 0; k < run; ++k) {
                pair.teacher.push_back({gi, static_cast<int>(next_teacher++), false});
            }
            pairing.push_back(std::move(pair));
        }
    }
    return pairing;
}

PathMask sample_paths(std::span<const double> p, Rng& rng) {
    PathMask a(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) a[i] = uniform01(rng) < p[i];
    return a;
}

void write_path_log(std::ostream& out, const std::vector<PathDraw>& draws, std::size_t num_blocks) {
    out << "iteration";
    for (std::size_t i = 1; i <= num_blocks; ++i) out << ",a_" << i;
    out << ",p\n";
    for (const auto& d : draws) {
        out << d.iteration;
        for (bool bit : d.a) out << ',' << (bit ? 1 : 0);
        out << ',' << format_double(d.p) << '\n';
    }
}

std::vector<PathDraw> read_path_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("iteration", 0) != 0) throw DataError("path log: missing header");
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 3) throw DataError("path log: header needs iteration, a_1.. and p");
    std::vector<PathDraw> draws;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != columns) throw DataError("path log: row has " + std::to_string(cells.size()) + " cells");
        PathDraw d;
        try {
            d.iteration = std::stoll(cells.front());
            for (std::size_t i = 1; i + 1 < cells.size(); ++i) {
                if (cells[i] != "0" && cells[i] != "1") throw DataError("path log: a_i must be 0 or 1");
                d.a.push_back(cells[i] == "1");
            }
            d.p = std::stod(cells.back());
        } catch (const std::logic_error&) {
            throw DataError("path log: malformed row '" + line + "'");
        }
        draws.push_back(std::move(d));
    }
    return draws;
}

// ---- hybrid network -----------------------------------------------------------

HybridNetwork::HybridNetwork(Network student, const Network& teacher, Interaction mode)
    : student_(std::move(student)), pairing_(pair_blocks(teacher.arch(), student_.arch())), mode_(mode) {
    for (std::size_t i = 0; i < pairing_.size(); ++i) {
        HybridBlock hb{i, pairing_[i].student, {}};
        for (const BlockId& tid : pairing_[i].teacher) {
            ResidualBlock copy = teacher.block(tid);
            for (Parameter* p : copy.parameters()) {
                p->frozen = true;
                p->value.grad.reset();
            }
            hb.teacher_path.push_back(std::move(copy));
        }
        blocks_.push_back(std::move(hb));
    }
}

std::size_t HybridNetwork::num_draws() const {
    return mode_ == Interaction::block ? blocks_.size() : student_.arch().groups.size();
}

PathMask HybridNetwork::sample(std::span<const double> p, Rng& rng) const {
    if (p.size() != num_draws()) {
        throw ConfigError("expected " + std::to_string(num_draws()) + " probabilities, got " + std::to_string(p.size()));
    }
    const PathMask draws = sample_paths(p, rng);
    if (mode_ == Interaction::block) return draws;
    PathMask a(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) a[i] = draws[static_cast<std::size_t>(blocks_[i].student.group)];
    return a;
}

void HybridNetwork::check_mask(const PathMask& a) const {
    if (a.size() != blocks_.size()) {
        throw ConfigError("path mask has " + std::to_string(a.size()) + " entries for " +
                          std::to_string(blocks_.size()) + " hybrid blocks");
    }
}

Var HybridNetwork::forward(Tape& tape, Var input, const PathMask& a, ForwardTrace* trace) {
    check_mask(a);
    const Tensor& x = input.value();
    if (x.rank() != 2 || x.cols() != student_.arch().input_dim) {
        throw ConfigError("hybrid network expects [b x " + std::to_string(student_.arch().input_dim) + "] input, got " +
                          shape_string(x.shape));
    }
    Var h = student_.stem_forward(tape, input);
    std::size_t i = 0;
    for (auto& group : student_.groups) {
        h = group.transition.forward(tape, h);
        for (auto& student_block : group.blocks) {
            if (a[i]) {
                h = student_block.forward(tape, h);
            } else {
                for (auto& tb : blocks_[i].teacher_path) h = tb.forward(tape, h);
            }
            if (trace) trace->block_outputs.push_back(h);
            ++i;
        }
        if (trace) trace->group_outputs.push_back(h);
    }
    return student_.classifier.forward(tape, h);
}

Tensor HybridNetwork::predict(const Tensor& batch, const PathMask& a) {
    Tape tape(Tape::Mode::inference);
    return forward(tape, tape.constant(batch), a).value();
}

std::vector<Parameter*> HybridNetwork::trainable_parameters(const PathMask& a) {
    check_mask(a);
    auto params = student_.shared_parameters();
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (!a[i]) continue;
        for (Parameter* p : student_block_parameters(i)) params.push_back(p);
    }
    return params;
}

std::vector<Parameter*> HybridNetwork::student_block_parameters(std::size_t i) {
    return student_.block(blocks_.at(i).student).parameters();
}

std::vector<Parameter*> HybridNetwork::teacher_parameters() {
    std::vector<Parameter*> out;
    for (auto& hb : blocks_)
        for (auto& tb : hb.teacher_path)
            for (Parameter* p : tb.parameters()) out.push_back(p);
    return out;
}

std::vector<const Parameter*> HybridNetwork::teacher_parameters() const {
    auto ptrs = const_cast<HybridNetwork*>(this)->teacher_parameters();
    return {ptrs.begin(), ptrs.end()};
}

// ---- training -----------------------------------------------------------------

IterationResult train_iteration_with(HybridNetwork& net, const Batch& batch, const PathMask& a, double p,
                                     const SgdConfig& sgd, std::int64_t iteration, const HybridLoss& loss_fn) {
    Tape tape;
    Var logits = net.forward(tape, tape.constant(batch.x), a);
    Var loss = loss_fn ? loss_fn(logits, batch) : softmax_cross_entropy(logits, batch.y);
    tape.backward(loss);
    sgd_step(net.trainable_parameters(a), sgd);

    IterationResult result{loss.value().data[0], 0, PathDraw{iteration, a, p}};
    const auto pred = argmax_rows(logits.value());
    for (std::size_t k = 0; k < pred.size(); ++k) result.correct += pred[k] == batch.y[k] ? 1 : 0;
    return result;
}

IterationResult train_iteration(HybridNetwork& net, const Batch& batch, double p, const SgdConfig& sgd, Rng& rng,
                                std::int64_t iteration, const HybridLoss& loss_fn) {
    const std::vector<double> probs(net.num_draws(), p);
    const PathMask a = net.sample(probs, rng);
    return train_iteration_with(net, batch, a, p, sgd, iteration, loss_fn);
}

} // namespace iakd

#pragma once

// Hybrid network: every non-shared student block is paired with a contiguous
// run of frozen teacher blocks. Each training iteration a Bernoulli draw a_i
// picks one path per hybrid block,
//     H_{i+1} = a_i * f_student(H_i) + (1 - a_i) * f_teacher(H_i),
// and only the shared parts plus the student blocks actually traversed are
// updated. With every a_i = 1 the hybrid network is exactly the student.

#include "iakd/data.hpp"
#include "iakd/model.hpp"
#include "iakd/optim.hpp"
#include "iakd/rng.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace iakd {

struct BlockPair {
    BlockId student;
    std::vector<BlockId> teacher; // contiguous, in depth order
};

using BlockPairing = std::vector<BlockPair>;

/// Within each group the teacher's non-shared blocks are split into contiguous
/// runs, one per student block, sizes as equal as possible with the longer runs
/// first (6 over 3 -> [2,2,2]; 5 over 3 -> [2,2,1]).
BlockPairing pair_blocks(const NetworkArch& teacher, const NetworkArch& student);

// a_i = 1 selects the student path.
using PathMask = std::vector<bool>;

/// Independent draws, a_i = 1 with probability p_i.
PathMask sample_paths(std::span<const double> p, Rng& rng);

struct PathDraw {
    std::int64_t iteration = 0;
    PathMask a;
    double p = 1.0;
};

// CSV: iteration,a_1,...,a_B,p
void write_path_log(std::ostream& out, const std::vector<PathDraw>& draws, std::size_t num_blocks);
std::vector<PathDraw> read_path_log(std::istream& in);

enum class Interaction {
    block, // one draw per hybrid block
    group, // one draw per group, shared by all hybrid blocks of that group
};

struct HybridBlock {
    std::size_t index = 0;
    BlockId student;
    std::vector<ResidualBlock> teacher_path; // frozen copies, applied in order
};

class HybridNetwork {
public:
    /// Takes ownership of the (freshly initialised) student and copies the
    /// paired teacher blocks, freezing them. Teacher shared parts are unused.
    HybridNetwork(Network student, const Network& teacher, Interaction mode = Interaction::block);

    std::size_t num_blocks() const { return blocks_.size(); }
    // Number of independent Bernoulli draws per iteration.
    std::size_t num_draws() const;
    Interaction interaction() const { return mode_; }
    const BlockPairing& pairing() const { return pairing_; }
    const std::vector<HybridBlock>& blocks() const { return blocks_; }

    // Draws one iteration's mask; `p` holds one probability per draw.
    PathMask sample(std::span<const double> p, Rng& rng) const;

    Var forward(Tape& tape, Var input, const PathMask& a, ForwardTrace* trace = nullptr);
    Tensor predict(const Tensor& batch, const PathMask& a);

    // Shared parts plus the student blocks with a_i = 1.
    std::vector<Parameter*> trainable_parameters(const PathMask& a);
    std::vector<Parameter*> teacher_parameters();
    std::vector<const Parameter*> teacher_parameters() const;
    std::vector<Parameter*> student_block_parameters(std::size_t i);

    Network& student() { return student_; }
    const Network& student() const { return student_; }
    // Standalone copy of the student (test phase, p = 1).
    Network extract_student() const { return student_; }

private:
    void check_mask(const PathMask& a) const;

    Network student_;
    BlockPairing pairing_;
    std::vector<HybridBlock> blocks_;
    Interaction mode_;
};

// Task loss over the hybrid logits; defaults to cross-entropy.
using HybridLoss = std::function<Var(Var logits, const Batch& batch)>;

struct IterationResult {
    double loss = 0.0;
    std::size_t correct = 0;
    PathDraw draw;
};

/// One draw, forward, loss, backward and a masked SGD step.
IterationResult train_iteration(HybridNetwork& net, const Batch& batch, double p, const SgdConfig& sgd, Rng& rng,
                                std::int64_t iteration, const HybridLoss& loss = {});
// Same step with a fixed mask (replay, tests).
IterationResult train_iteration_with(HybridNetwork& net, const Batch& batch, const PathMask& a, double p,
                                     const SgdConfig& sgd, std::int64_t iteration, const HybridLoss& loss = {});

} // namespace iakd

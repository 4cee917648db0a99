#pragma once

// Residual multilayer classifiers with a ResNet-style group layout:
//   stem (linear+bn+relu) -> groups [transition, residual blocks...] -> classifier
// Stem, transitions and classifier are the parts a teacher and student share;
// residual blocks are the non-shared parts that hybrid training swaps.

#include "iakd/autodiff.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace iakd {

struct BlockId {
    int group = 0;
    int position = 0; // 0 is the group's transition block
    bool shared = false;

    auto operator<=>(const BlockId&) const = default;
    std::string str() const;
};

struct GroupSpec {
    std::size_t width = 0;
    std::size_t blocks = 1; // including the transition block

    bool operator==(const GroupSpec&) const = default;
};

struct NetworkArch {
    std::size_t input_dim = 0;
    std::size_t stem_width = 0;
    std::vector<GroupSpec> groups;
    std::size_t num_classes = 0;

    bool operator==(const NetworkArch&) const = default;

    void validate() const;
    std::size_t non_shared_blocks(std::size_t group) const { return groups.at(group).blocks - 1; }
    std::size_t total_non_shared_blocks() const;
    std::size_t parameter_count() const;

    // Desk-scale stand-ins for the ResNet-44 / ResNet-26 pair: widths 32/64/128,
    // 1 transition + 6 (teacher) or 3 (student) residual blocks per group.
    static NetworkArch reference_teacher(std::size_t input_dim, std::size_t num_classes);
    static NetworkArch reference_student(std::size_t input_dim, std::size_t num_classes);
};

// Throws ConfigError unless the arches share group count and widths and the
// teacher is at least as deep as the student in every group.
void check_compatible(const NetworkArch& teacher, const NetworkArch& student);

struct LinearLayer {
    Parameter weight; // in x out
    Parameter bias;   // out

    Var forward(Tape& tape, Var x) { return linear(x, tape.leaf(weight), tape.leaf(bias)); }
};

struct NormLayer {
    Parameter gamma;
    Parameter beta;

    Var forward(Tape& tape, Var x) { return batchnorm(x, tape.leaf(gamma), tape.leaf(beta)); }
};

/// relu(bn2(fc2(relu(bn1(fc1(x))))) + x)
struct ResidualBlock {
    BlockId id;
    LinearLayer fc1;
    NormLayer bn1;
    LinearLayer fc2;
    NormLayer bn2;

    Var forward(Tape& tape, Var x);
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
};

/// Width-changing projection: relu(bn(fc(x))).
struct TransitionBlock {
    BlockId id;
    LinearLayer fc;
    NormLayer bn;

    Var forward(Tape& tape, Var x) { return relu(bn.forward(tape, fc.forward(tape, x))); }
    std::vector<Parameter*> parameters() { return {&fc.weight, &fc.bias, &bn.gamma, &bn.beta}; }
};

struct Group {
    TransitionBlock transition;
    std::vector<ResidualBlock> blocks;
};

// Activations collected during a forward pass, in depth order.
struct ForwardTrace {
    std::vector<Var> block_outputs; // every residual block
    std::vector<Var> group_outputs; // last block (or transition) of each group
};

class Network {
public:
    Network() = default;
    explicit Network(NetworkArch arch) : arch_(std::move(arch)) {}

    const NetworkArch& arch() const { return arch_; }

    Var forward(Tape& tape, Var input, ForwardTrace* trace = nullptr);
    // Inference-mode forward on a fresh tape.
    Tensor predict(const Tensor& batch);

    Var stem_forward(Tape& tape, Var input) { return relu(stem_bn.forward(tape, stem_fc.forward(tape, input))); }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::vector<Parameter*> shared_parameters();

    ResidualBlock& block(const BlockId& id);
    const ResidualBlock& block(const BlockId& id) const;
    Parameter* find(const std::string& name);

    LinearLayer stem_fc;
    NormLayer stem_bn;
    std::vector<Group> groups;
    LinearLayer classifier;

private:
    NetworkArch arch_;
};

struct InitOptions {
    // gamma of the last norm in each residual branch; 0 starts every block as identity
    double residual_gamma = 1.0;
};

/// He-normal weights (std sqrt(2/fan_in)), zero biases, unit gamma, zero beta.
/// Deterministic in (arch, seed); nothing frozen.
Network build_network(const NetworkArch& arch, std::uint64_t seed, const InitOptions& init = {});

void save_checkpoint(const Network& net, const std::filesystem::path& path);
// All-or-nothing: throws CheckpointError naming the first missing or mis-shaped parameter.
Network load_checkpoint(const std::filesystem::path& path, const NetworkArch& arch);

// Rounds every parameter value to the nearest float (checkpoint precision).
void round_to_checkpoint_precision(Network& net);

} // namespace iakd

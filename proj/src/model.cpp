#include "iakd/model.hpp"

#include "iakd/checkpoint.hpp"
#include "iakd/rng.hpp"
#include "iakd/error.hpp"

#include <cmath>
#include <map>
#include <random>

namespace iakd {

std::string BlockId::str() const {
    return "g" + std::to_string(group) + ".b" + std::to_string(position);
}

void NetworkArch::validate() const {
    if (input_dim == 0 || stem_width == 0) throw ConfigError("arch: input_dim and stem_width must be positive");
    if (groups.empty()) throw ConfigError("arch: at least one group required");
    for (const auto& g : groups) {
        if (g.width == 0) throw ConfigError("arch: group width must be positive");
        if (g.blocks < 1) throw ConfigError("arch: blocks_per_group must be >= 1");
    }
    if (num_classes < 2) throw ConfigError("arch: num_classes must be >= 2");
}

std::size_t NetworkArch::total_non_shared_blocks() const {
    std::size_t n = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) n += non_shared_blocks(g);
    return n;
}

std::size_t NetworkArch::parameter_count() const {
    auto lin = [](std::size_t m, std::size_t n) { return m * n + n; };
    auto bn = [](std::size_t n) { return 2 * n; };
    std::size_t total = lin(input_dim, stem_width) + bn(stem_width);
    std::size_t prev = stem_width;
    for (const auto& g : groups) {
        total += lin(prev, g.width) + bn(g.width);
        total += (g.blocks - 1) * (2 * lin(g.width, g.width) + 2 * bn(g.width));
        prev = g.width;
    }
    return total + lin(prev, num_classes);
}

NetworkArch NetworkArch::reference_teacher(std::size_t input_dim, std::size_t num_classes) {
    return {input_dim, 32, {{32, 7}, {64, 7}, {128, 7}}, num_classes};
}

NetworkArch NetworkArch::reference_student(std::size_t input_dim, std::size_t num_classes) {
    return {input_dim, 32, {{32, 4}, {64, 4}, {128, 4}}, num_classes};
}

void check_compatible(const NetworkArch& teacher, const NetworkArch& student) {
    teacher.validate();
    student.validate();
    if (teacher.input_dim != student.input_dim || teacher.num_classes != student.num_classes ||
        teacher.stem_width != student.stem_width) {
        throw PairingError("teacher and student disagree on input_dim, stem_width or num_classes");
    }
    if (teacher.groups.size() != student.groups.size()) {
        throw PairingError("teacher has " + std::to_string(teacher.groups.size()) + " groups, student " +
                          std::to_string(student.groups.size()));
    }
    for (std::size_t g = 0; g < teacher.groups.size(); ++g) {
        if (teacher.groups[g].width != student.groups[g].width) {
            throw PairingError("group " + std::to_string(g) + " width differs between teacher and student");
        }
        if (teacher.groups[g].blocks < student.groups[g].blocks) {
            throw PairingError("teacher group " + std::to_string(g) + " is shallower than the student's");
        }
    }
}

// ---- blocks -----------------------------------------------------------------

Var ResidualBlock::forward(Tape& tape, Var x) {
    Var h = relu(bn1.forward(tape, fc1.forward(tape, x)));
    h = bn2.forward(tape, fc2.forward(tape, h));
    return relu(add(h, x));
}

std::vector<Parameter*> ResidualBlock::parameters() {
    return {&fc1.weight, &fc1.bias, &bn1.gamma, &bn1.beta, &fc2.weight, &fc2.bias, &bn2.gamma, &bn2.beta};
}

std::vector<const Parameter*> ResidualBlock::parameters() const {
    return {&fc1.weight, &fc1.bias, &bn1.gamma, &bn1.beta, &fc2.weight, &fc2.bias, &bn2.gamma, &bn2.beta};
}

// ---- network ----------------------------------------------------------------

Var Network::forward(Tape& tape, Var input, ForwardTrace* trace) {
    const Tensor& x = input.value();
    if (x.rank() != 2 || x.cols() != arch_.input_dim) {
        throw ConfigError("network expects [b x " + std::to_string(arch_.input_dim) + "] input, got " +
                          shape_string(x.shape));
    }
    Var h = stem_forward(tape, input);
    for (auto& g : groups) {
        h = g.transition.forward(tape, h);
        for (auto& blk : g.blocks) {
            h = blk.forward(tape, h);
            if (trace) trace->block_outputs.push_back(h);
        }
        if (trace) trace->group_outputs.push_back(h);
    }
    return classifier.forward(tape, h);
}

Tensor Network::predict(const Tensor& batch) {
    Tape tape(Tape::Mode::inference);
    Var out = forward(tape, tape.constant(batch));
    return out.value();
}

std::vector<Parameter*> Network::parameters() {
    std::vector<Parameter*> out{&stem_fc.weight, &stem_fc.bias, &stem_bn.gamma, &stem_bn.beta};
    for (auto& g : groups) {
        for (auto* p : g.transition.parameters()) out.push_back(p);
        for (auto& blk : g.blocks)
            for (auto* p : blk.parameters()) out.push_back(p);
    }
    out.push_back(&classifier.weight);
    out.push_back(&classifier.bias);
    return out;
}

std::vector<const Parameter*> Network::parameters() const {
    auto ptrs = const_cast<Network*>(this)->parameters();
    return {ptrs.begin(), ptrs.end()};
}

std::vector<Parameter*> Network::shared_parameters() {
    std::vector<Parameter*> out{&stem_fc.weight, &stem_fc.bias, &stem_bn.gamma, &stem_bn.beta};
    for (auto& g : groups)
        for (auto* p : g.transition.parameters()) out.push_back(p);
    out.push_back(&classifier.weight);
    out.push_back(&classifier.bias);
    return out;
}

ResidualBlock& Network::block(const BlockId& id) {
    if (id.group < 0 || static_cast<std::size_t>(id.group) >= groups.size() || id.position < 1 ||
        static_cast<std::size_t>(id.position) > groups[static_cast<std::size_t>(id.group)].blocks.size()) {
        throw ConfigError("no residual block " + id.str());
    }
    return groups[static_cast<std::size_t>(id.group)].blocks[static_cast<std::size_t>(id.position - 1)];
}

const ResidualBlock& Network::block(const BlockId& id) const { return const_cast<Network*>(this)->block(id); }

Parameter* Network::find(const std::string& name) {
    for (auto* p : parameters())
        if (p->name == name) return p;
    return nullptr;
}

namespace {

LinearLayer make_linear(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    Tensor w({in, out});
    for (double& v : w.data) v = dist(rng);
    return {Parameter(prefix + ".weight", std::move(w)), Parameter(prefix + ".bias", Tensor({out}))};
}

NormLayer make_norm(const std::string& prefix, std::size_t n, double gamma0 = 1.0) {
    Tensor gamma({n});
    std::fill(gamma.data.begin(), gamma.data.end(), gamma0);
    return {Parameter(prefix + ".gamma", std::move(gamma)), Parameter(prefix + ".beta", Tensor({n}))};
}

} // namespace

Network build_network(const NetworkArch& arch, std::uint64_t seed, const InitOptions& init) {
    arch.validate();
    Rng rng(seed);
    Network net(arch);
    net.stem_fc = make_linear("stem.fc", arch.input_dim, arch.stem_width, rng);
    net.stem_bn = make_norm("stem.bn", arch.stem_width);
    std::size_t prev = arch.stem_width;
    for (std::size_t g = 0; g < arch.groups.size(); ++g) {
        const auto& spec = arch.groups[g];
        const int gi = static_cast<int>(g);
        Group group;
        group.transition.id = {gi, 0, true};
        const std::string tp = group.transition.id.str();
        group.transition.fc = make_linear(tp + ".fc", prev, spec.width, rng);
        group.transition.bn = make_norm(tp + ".bn", spec.width);
        for (std::size_t k = 1; k < spec.blocks; ++k) {
            ResidualBlock blk;
            blk.id = {gi, static_cast<int>(k), false};
            const std::string bp = blk.id.str();
            blk.fc1 = make_linear(bp + ".fc1", spec.width, spec.width, rng);
            blk.bn1 = make_norm(bp + ".bn1", spec.width);
            blk.fc2 = make_linear(bp + ".fc2", spec.width, spec.width, rng);
            blk.bn2 = make_norm(bp + ".bn2", spec.width, init.residual_gamma);
            group.blocks.push_back(std::move(blk));
        }
        net.groups.push_back(std::move(group));
        prev = spec.width;
    }
    net.classifier = make_linear("classifier", prev, arch.num_classes, rng);
    return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    std::vector<NamedTensor> entries;
    for (const Parameter* p : net.parameters()) entries.push_back(to_named(p->name, p->value));
    write_container(path, entries);
}

Network load_checkpoint(const std::filesystem::path& path, const NetworkArch& arch) {
    const auto entries = read_container(path);
    std::map<std::string, const NamedTensor*> by_name;
    for (const auto& e : entries) {
        if (!by_name.emplace(e.name, &e).second) throw CheckpointError("duplicate entry '" + e.name + "'");
    }
    Network net = build_network(arch, 0);
    auto params = net.parameters();
    if (params.size() != entries.size()) {
        throw CheckpointError("checkpoint has " + std::to_string(entries.size()) + " entries, arch expects " +
                              std::to_string(params.size()));
    }
    for (Parameter* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter '" + p->name + "'");
        const NamedTensor& e = *it->second;
        if (e.shape != p->value.shape) {
            throw CheckpointError("shape mismatch for parameter '" + p->name + "': checkpoint " +
                                  shape_string(e.shape) + ", arch " + shape_string(p->value.shape));
        }
        for (std::size_t i = 0; i < e.values.size(); ++i) p->value.data[i] = static_cast<double>(e.values[i]);
    }
    return net;
}

void round_to_checkpoint_precision(Network& net) {
    for (Parameter* p : net.parameters())
        for (double& v : p->value.data) v = static_cast<double>(static_cast<float>(v));
}

} // namespace iakd

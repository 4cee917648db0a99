#include "iakd/checkpoint.hpp"
#include "iakd/error.hpp"
#include "iakd/model.hpp"
#include "iakd/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

using namespace iakd;

namespace {

Tensor random_batch(std::size_t b, std::size_t d, Rng& rng) {
    Tensor t({b, d});
    for (double& v : t.data) v = 2.0 * uniform01(rng) - 1.0;
    return t;
}

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "iakd_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("build_network is deterministic in (arch, seed)") {
    const auto arch = NetworkArch::reference_student(12, 5);
    Network a = build_network(arch, 42), b = build_network(arch, 42), c = build_network(arch, 43);
    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(std::memcmp(pa[i]->value.data.data(), pb[i]->value.data.data(), pa[i]->value.size() * sizeof(double)) == 0);
        CHECK_FALSE(pa[i]->frozen);
        any_diff = any_diff || pa[i]->value.data != pc[i]->value.data;
    }
    CHECK(any_diff);

    std::set<std::string> names;
    for (auto* p : pa) names.insert(p->name);
    CHECK(names.size() == pa.size());
}

TEST_CASE("reference arches have the 2:1 non-shared block ratio") {
    const auto t = NetworkArch::reference_teacher(32, 16);
    const auto s = NetworkArch::reference_student(32, 16);
    CHECK(t.total_non_shared_blocks() == 18);
    CHECK(t.groups.size() == 3); // one shared transition per group
    CHECK(s.total_non_shared_blocks() == 9);
    for (std::size_t g = 0; g < 3; ++g) CHECK(t.non_shared_blocks(g) == 2 * s.non_shared_blocks(g));
    CHECK_NOTHROW(check_compatible(t, s));
    CHECK_THROWS_AS(check_compatible(s, t), PairingError);

    Network net = build_network(t, 1);
    int shared = 0, non_shared = 0;
    for (const auto& g : net.groups) {
        shared += g.transition.id.shared ? 1 : 0;
        for (const auto& b : g.blocks) non_shared += b.id.shared ? 0 : 1;
    }
    CHECK(shared == 3);
    CHECK(non_shared == 18);
}

TEST_CASE("parameter count follows the arch formula") {
    for (const auto& arch : {NetworkArch::reference_teacher(32, 16), NetworkArch::reference_student(2, 3),
                             NetworkArch{5, 4, {{6, 1}, {3, 2}}, 2}}) {
        Network net = build_network(arch, 0);
        std::size_t n = 0;
        for (auto* p : net.parameters()) n += p->value.size();
        CHECK(n == arch.parameter_count());
    }
    // student: stem 32*32+32+64, transitions and 3 blocks per group, classifier
    const auto s = NetworkArch::reference_student(32, 16);
    const std::size_t expected = (32 * 32 + 32 + 64) + (32 * 32 + 32 + 64) + 3 * (2 * (32 * 32 + 32) + 4 * 32) +
                                 (32 * 64 + 64 + 128) + 3 * (2 * (64 * 64 + 64) + 4 * 64) + (64 * 128 + 128 + 256) +
                                 3 * (2 * (128 * 128 + 128) + 4 * 128) + (128 * 16 + 16);
    CHECK(s.parameter_count() == expected);
}

TEST_CASE("forward shape, finiteness and batch determinism") {
    Rng rng(9);
    const auto arch = NetworkArch::reference_student(10, 7);
    Network net = build_network(arch, 3);
    const Tensor x = random_batch(17, 10, rng);
    const Tensor y1 = net.predict(x);
    CHECK(y1.shape == Shape{17, 7});
    CHECK(y1.all_finite());
    CHECK(net.predict(x).data == y1.data);
    CHECK_THROWS_AS(net.predict(random_batch(4, 9, rng)), ConfigError);
}

TEST_CASE("row permutation permutes logits") {
    Rng rng(10);
    Network net = build_network(NetworkArch::reference_student(6, 4), 5);
    const Tensor x = random_batch(12, 6, rng);
    std::vector<std::size_t> perm{3, 0, 11, 5, 7, 1, 2, 10, 9, 4, 8, 6};
    const Tensor y = net.predict(x);
    const Tensor yp = net.predict(gather_rows(x, perm));
    for (std::size_t r = 0; r < perm.size(); ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(yp.at(r, c) == doctest::Approx(y.at(perm[r], c)).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip holds to float precision") {
    const auto arch = NetworkArch::reference_student(8, 3);
    Network net = build_network(arch, 77);
    const auto path = temp_file("roundtrip.ckpt");
    save_checkpoint(net, path);
    Network loaded = load_checkpoint(path, arch);
    auto a = net.parameters();
    auto b = loaded.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < a[i]->value.size(); ++k) {
            const double v = a[i]->value.data[k];
            CHECK(b[i]->value.data[k] == static_cast<double>(static_cast<float>(v)));
            CHECK(std::abs(b[i]->value.data[k] - v) <= std::abs(v) * 0x1.0p-24);
        }
    }
    // a rounded network survives a second round trip bit-exactly
    save_checkpoint(loaded, path);
    Network again = load_checkpoint(path, arch);
    auto c = again.parameters();
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i]->value.data == c[i]->value.data);
}

TEST_CASE("checkpoint byte layout") {
    const std::vector<NamedTensor> entries{{"ab", {2}, {1.0f, -2.0f}}};
    const auto bytes = encode_container(entries);
    const std::vector<std::uint8_t> expected{'I', 'A', 'K', 'D', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 'a', 'b', 1, 2, 0, 0, 0,
                                             0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
    CHECK(bytes == expected);
    const auto back = decode_container(bytes);
    REQUIRE(back.size() == 1);
    CHECK(back[0].name == "ab");
    CHECK(back[0].values == entries[0].values);
}

TEST_CASE("checkpoint errors") {
    const auto arch = NetworkArch::reference_student(8, 3);
    Network net = build_network(arch, 1);
    const auto path = temp_file("errors.ckpt");
    save_checkpoint(net, path);
    const auto size = std::filesystem::file_size(path);

    SUBCASE("truncated file") {
        std::filesystem::resize_file(path, size - 7);
        CHECK_THROWS_AS(load_checkpoint(path, arch), CheckpointError);
    }
    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path, arch), CheckpointError);
    }
    SUBCASE("bad version") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const char v[4] = {2, 0, 0, 0};
        f.write(v, 4);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path, arch), CheckpointError);
    }
    SUBCASE("different widths name the parameter") {
        NetworkArch other = arch;
        other.groups[1].width = 48;
        try {
            load_checkpoint(path, other);
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(std::string(e.what()).find("g1.b0.fc.weight") != std::string::npos);
        }
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_checkpoint(temp_file("nope.ckpt"), arch), CheckpointError); }
}

TEST_CASE("zero residual gamma starts every block as identity on relu features") {
    const auto arch = NetworkArch::reference_student(6, 3);
    Network net = build_network(arch, 4, InitOptions{0.0});
    Network ref = build_network(arch, 4);
    for (const auto& g : net.groups)
        for (const auto& b : g.blocks)
            for (double v : b.bn2.gamma.value.data) CHECK(v == 0.0);
    // every other parameter matches the default init
    auto pa = net.parameters(), pb = ref.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i]->name.find("bn2.gamma") == std::string::npos) CHECK(pa[i]->value.data == pb[i]->value.data);

    Rng rng(2);
    const Tensor x = random_batch(9, 6, rng);
    Tape tape(Tape::Mode::inference);
    ForwardTrace trace;
    net.forward(tape, tape.constant(x), &trace);
    Var h = net.groups[0].transition.forward(tape, net.stem_forward(tape, tape.constant(x)));
    CHECK(trace.block_outputs[0].value().data == h.value().data);
}

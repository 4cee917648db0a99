#include "iakd/error.hpp"
#include "iakd/hybrid.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

using namespace iakd;

namespace {

const NetworkArch kTeacherArch{6, 8, {{8, 7}, {12, 7}}, 5};
const NetworkArch kStudentArch{6, 8, {{8, 4}, {12, 4}}, 5};

Tensor random_batch(std::size_t b, std::size_t d, Rng& rng) {
    Tensor t({b, d});
    for (double& v : t.data) v = 2.0 * uniform01(rng) - 1.0;
    return t;
}

Batch random_labelled(std::size_t b, std::size_t d, int classes, Rng& rng) {
    Batch batch{random_batch(b, d, rng), {}};
    for (std::size_t i = 0; i < b; ++i) batch.y.push_back(static_cast<int>(rng() % static_cast<unsigned>(classes)));
    return batch;
}

std::vector<std::vector<double>> snapshot(const std::vector<Parameter*>& ps) {
    std::vector<std::vector<double>> out;
    for (auto* p : ps) out.push_back(p->value.data);
    return out;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// teacher-arch network whose shared parts are the student's
Network teacher_with_student_shared(const Network& teacher, Network& student) {
    Network net = teacher;
    for (auto* p : student.shared_parameters()) {
        Parameter* q = net.find(p->name);
        REQUIRE(q != nullptr);
        q->value = p->value;
    }
    return net;
}

} // namespace

TEST_CASE("pairing splits teacher runs evenly, longer runs first") {
    const auto pairing = pair_blocks(kTeacherArch, kStudentArch);
    REQUIRE(pairing.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(pairing[i].student.group == i / 3);
        CHECK(pairing[i].student.position == i % 3 + 1);
        REQUIRE(pairing[i].teacher.size() == 2);
        CHECK(pairing[i].teacher[0].position == 2 * (i % 3) + 1);
        CHECK(pairing[i].teacher[1].position == 2 * (i % 3) + 2);
        CHECK(pairing[i].teacher[0].group == i / 3);
    }

    const NetworkArch five{6, 8, {{8, 6}}, 5}, three{6, 8, {{8, 4}}, 5};
    const auto uneven = pair_blocks(five, three);
    REQUIRE(uneven.size() == 3);
    CHECK(uneven[0].teacher.size() == 2);
    CHECK(uneven[1].teacher.size() == 2);
    CHECK(uneven[2].teacher.size() == 1);
    CHECK(uneven[2].teacher[0].position == 5);

    const auto same = pair_blocks(kStudentArch, kStudentArch);
    for (const auto& p : same) {
        REQUIRE(p.teacher.size() == 1);
        CHECK(p.teacher[0] == p.student);
    }

    CHECK_THROWS_AS(pair_blocks(kStudentArch, kTeacherArch), PairingError);
    NetworkArch wide = kStudentArch;
    wide.groups[0].width = 16;
    CHECK_THROWS_AS(pair_blocks(kTeacherArch, wide), PairingError);
    NetworkArch other_classes = kStudentArch;
    other_classes.num_classes = 4;
    CHECK_THROWS_AS(pair_blocks(kTeacherArch, other_classes), PairingError);
}

TEST_CASE("path sampling") {
    Rng rng(3);
    const std::vector<double> ones(9, 1.0), zeros(9, 0.0), half(9, 0.5);
    for (int i = 0; i < 100; ++i) {
        for (bool a : sample_paths(ones, rng)) CHECK(a);
        for (bool a : sample_paths(zeros, rng)) CHECK_FALSE(a);
    }
    std::vector<int> hits(9, 0);
    for (int i = 0; i < 10000; ++i) {
        const auto a = sample_paths(half, rng);
        for (std::size_t k = 0; k < 9; ++k) hits[k] += a[k] ? 1 : 0;
    }
    for (int h : hits) {
        CHECK(h >= 4700);
        CHECK(h <= 5300);
    }
    Rng r1(11), r2(11);
    CHECK(sample_paths(half, r1) == sample_paths(half, r2));
}

TEST_CASE("all-student and all-teacher masks degenerate to plain networks") {
    Rng rng(5);
    const Network teacher = build_network(kTeacherArch, 1);
    HybridNetwork hybrid(build_network(kStudentArch, 2), teacher);
    const Tensor x = random_batch(16, 6, rng);

    Network student = hybrid.extract_student();
    const Tensor s = student.predict(x);
    const Tensor h1 = hybrid.predict(x, PathMask(6, true));
    CHECK(bit_equal(s.data, h1.data));

    Network mixed = teacher_with_student_shared(teacher, hybrid.student());
    const Tensor t = mixed.predict(x);
    const Tensor h0 = hybrid.predict(x, PathMask(6, false));
    CHECK(bit_equal(t.data, h0.data));

    CHECK_THROWS_AS(hybrid.predict(x, PathMask(5, true)), ConfigError);
}

TEST_CASE("mixed mask follows the chosen path block by block") {
    Rng rng(6);
    Network teacher = build_network(kTeacherArch, 1);
    HybridNetwork hybrid(build_network(kStudentArch, 2), teacher);
    Network student = hybrid.extract_student();
    const PathMask a{true, false, false, true, false, true};
    const Tensor x = random_batch(10, 6, rng);

    // oracle: walk the groups by hand using the original networks' blocks
    Tape tape(Tape::Mode::inference);
    Var h = student.stem_forward(tape, tape.constant(x));
    std::size_t k = 0;
    for (std::size_t g = 0; g < 2; ++g) {
        h = student.groups[g].transition.forward(tape, h);
        for (std::size_t b = 0; b < 3; ++b, ++k) {
            if (a[k]) {
                h = student.groups[g].blocks[b].forward(tape, h);
            } else {
                h = teacher.groups[g].blocks[2 * b].forward(tape, h);
                h = teacher.groups[g].blocks[2 * b + 1].forward(tape, h);
            }
        }
    }
    const Tensor expected = student.classifier.forward(tape, h).value();
    CHECK(bit_equal(hybrid.predict(x, a).data, expected.data));
}

TEST_CASE("two-block toy hybrid matches a hand computation") {
    // 1-d widths, identity-ish weights: each residual block adds relu(...) of a known value
    const NetworkArch t_arch{1, 1, {{1, 3}}, 2}, s_arch{1, 1, {{1, 2}}, 2};
    Network teacher = build_network(t_arch, 0);
    Network student = build_network(s_arch, 0);
    // zero the residual branches of the teacher, so every teacher block is relu(x)
    for (auto& b : teacher.groups[0].blocks)
        for (auto* p : b.parameters()) p->value.data.assign(p->value.size(), 0.0);
    // student block: residual branch outputs beta2 = 0.5, so the block is relu(x + 0.5)
    for (auto* p : student.groups[0].blocks[0].parameters())
        p->value.data.assign(p->value.size(), p->name.find("bn2.beta") != std::string::npos ? 0.5 : 0.0);
    HybridNetwork hybrid(std::move(student), teacher);
    REQUIRE(hybrid.num_blocks() == 1);

    Network& s = hybrid.student();
    s.stem_fc.weight.value.data = {1.0};
    s.groups[0].transition.fc.weight.value.data = {1.0};
    s.classifier.weight.value.data = {1.0, -1.0};
    s.classifier.bias.value.data = {0.0, 0.0};

    // batch {-1, 1}: stem bn gives {-1, 1}/sqrt(1+eps), relu {0, c}; transition bn of {0, c} is {-c', c'} -> {0, c''}
    Tensor x({2, 1});
    x.data = {-1.0, 1.0};
    const double c = 1.0 / std::sqrt(1.0 + kBatchNormEpsilon);
    const double h1 = 1.0 * c;                                              // after stem, second row
    const double t = (h1 / 2.0) / std::sqrt(h1 * h1 / 4.0 + kBatchNormEpsilon); // transition, second row
    const Tensor student_path = hybrid.predict(x, {true});
    const Tensor teacher_path = hybrid.predict(x, {false});
    CHECK(student_path.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(student_path.at(1, 0) == doctest::Approx(t + 0.5).epsilon(1e-12));
    CHECK(student_path.at(1, 1) == doctest::Approx(-(t + 0.5)).epsilon(1e-12));
    CHECK(teacher_path.at(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(teacher_path.at(1, 0) == doctest::Approx(t).epsilon(1e-12));
}

TEST_CASE("masked update touches only shared parts and selected student blocks") {
    Rng rng(8);
    HybridNetwork hybrid(build_network(kStudentArch, 2), build_network(kTeacherArch, 1));
    const SgdConfig sgd{0.1, 0.9, 1e-4};
    const auto teacher_before = snapshot(hybrid.teacher_parameters());
    const auto shared_before = snapshot(hybrid.student().shared_parameters());

    for (int it = 0; it < 20; ++it) {
        const Batch batch = random_labelled(12, 6, 5, rng);
        std::vector<std::vector<std::vector<double>>> blocks_before;
        for (std::size_t i = 0; i < 6; ++i) blocks_before.push_back(snapshot(hybrid.student_block_parameters(i)));
        const auto res = train_iteration(hybrid, batch, 0.5, sgd, rng, it);
        CHECK(std::isfinite(res.loss));
        for (std::size_t i = 0; i < 6; ++i) {
            const auto after = snapshot(hybrid.student_block_parameters(i));
            bool same = true;
            for (std::size_t k = 0; k < after.size(); ++k) same = same && bit_equal(after[k], blocks_before[i][k]);
            if (!res.draw.a[i]) CHECK(same);
            // a selected block with momentum always moves (gradient or not, buffer from earlier steps)
            else if (it == 0) CHECK_FALSE(same);
        }
        auto trainable = hybrid.trainable_parameters(res.draw.a);
        const std::size_t selected = static_cast<std::size_t>(std::count(res.draw.a.begin(), res.draw.a.end(), true));
        CHECK(trainable.size() == hybrid.student().shared_parameters().size() + selected * 8);
    }
    const auto teacher_after = snapshot(hybrid.teacher_parameters());
    for (std::size_t k = 0; k < teacher_after.size(); ++k) CHECK(bit_equal(teacher_after[k], teacher_before[k]));
    for (auto* p : hybrid.teacher_parameters()) CHECK(p->frozen);
    const auto shared_after = snapshot(hybrid.student().shared_parameters());
    CHECK_FALSE(bit_equal(shared_after[0], shared_before[0]));
}

TEST_CASE("all-student step equals a plain SGD step on the student") {
    Rng rng(12);
    HybridNetwork hybrid(build_network(kStudentArch, 4), build_network(kTeacherArch, 3));
    Network plain = build_network(kStudentArch, 4);
    const SgdConfig sgd{0.05, 0.9, 5e-4};
    for (int it = 0; it < 3; ++it) {
        const Batch batch = random_labelled(9, 6, 5, rng);
        const auto res = train_iteration_with(hybrid, batch, PathMask(6, true), 1.0, sgd, it);

        Tape tape;
        Var loss = softmax_cross_entropy(plain.forward(tape, tape.constant(batch.x)), batch.y);
        tape.backward(loss);
        sgd_step(plain.parameters(), sgd);
        CHECK(res.loss == loss.value().data[0]);
    }
    auto a = hybrid.student().parameters();
    auto b = plain.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(bit_equal(a[i]->value.data, b[i]->value.data));
}

TEST_CASE("extracted student is self-contained") {
    Rng rng(13);
    HybridNetwork hybrid(build_network(kStudentArch, 4), build_network(kTeacherArch, 3));
    const SgdConfig sgd{0.05, 0.9, 5e-4};
    for (int it = 0; it < 5; ++it) train_iteration(hybrid, random_labelled(9, 6, 5, rng), 0.5, sgd, rng, it);

    Network s = hybrid.extract_student();
    std::size_t count = 0;
    for (auto* p : s.parameters()) count += p->value.size();
    CHECK(count == kStudentArch.parameter_count());

    const Tensor x = random_batch(8, 6, rng);
    CHECK(bit_equal(s.predict(x).data, hybrid.predict(x, PathMask(6, true)).data));

    const auto path = std::filesystem::temp_directory_path() / "iakd_extracted.ckpt";
    save_checkpoint(s, path);
    Network loaded = load_checkpoint(path, kStudentArch);
    round_to_checkpoint_precision(s);
    CHECK(bit_equal(s.predict(x).data, loaded.predict(x).data));
}

TEST_CASE("group interaction shares one draw per group") {
    Rng rng(14);
    HybridNetwork hybrid(build_network(kStudentArch, 4), build_network(kTeacherArch, 3), Interaction::group);
    CHECK(hybrid.num_blocks() == 6);
    CHECK(hybrid.num_draws() == 2);
    const std::vector<double> p(2, 0.5);
    int mixed = 0;
    for (int i = 0; i < 200; ++i) {
        const auto a = hybrid.sample(p, rng);
        REQUIRE(a.size() == 6);
        CHECK(a[0] == a[1]);
        CHECK(a[1] == a[2]);
        CHECK(a[3] == a[4]);
        CHECK(a[4] == a[5]);
        mixed += a[0] != a[3] ? 1 : 0;
    }
    CHECK(mixed > 50);
    HybridNetwork per_block(build_network(kStudentArch, 4), build_network(kTeacherArch, 3));
    CHECK(per_block.num_draws() == 6);
}

TEST_CASE("path log round trip") {
    const std::vector<PathDraw> draws{{0, {true, false, true}, 0.9}, {1, {false, false, false}, 0.1}, {2, {true, true, true}, 1.0}};
    std::stringstream ss;
    write_path_log(ss, draws, 3);
    const std::string text = ss.str();
    CHECK(text.rfind("iteration,a_1,a_2,a_3,p\n0,1,0,1,0.9\n", 0) == 0);
    const auto back = read_path_log(ss);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].iteration == draws[i].iteration);
        CHECK(back[i].a == draws[i].a);
        CHECK(back[i].p == draws[i].p);
    }
    std::stringstream bad("iteration,a_1,p\n0,2,0.5\n");
    CHECK_THROWS_AS(read_path_log(bad), DataError);
}

#include "iakd/data.hpp"
#include "iakd/error.hpp"
#include "iakd/model.hpp"
#include "iakd/training.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <limits>
#include <set>

using namespace iakd;

namespace {

bool same_bytes(const Dataset& a, const Dataset& b) {
    return a.features.shape == b.features.shape &&
           std::memcmp(a.features.data.data(), b.features.data.data(), a.features.size() * sizeof(double)) == 0 &&
           a.labels == b.labels;
}

double nearest_neighbour_accuracy(const Dataset& train, const Dataset& test) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int label = -1;
        for (std::size_t j = 0; j < train.size(); ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < train.dim(); ++k) {
                const double diff = test.features.at(i, k) - train.features.at(j, k);
                d += diff * diff;
            }
            if (d < best) best = d, label = train.labels[j];
        }
        correct += label == test.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

} // namespace

TEST_CASE("gaussian mixture is deterministic and well-formed") {
    auto [tr1, te1] = make_gaussian_mixture(16, 32, 50, 0.4, 5);
    auto [tr2, te2] = make_gaussian_mixture(16, 32, 50, 0.4, 5);
    CHECK(same_bytes(tr1, tr2));
    CHECK(same_bytes(te1, te2));
    CHECK(tr1.size() == 16 * 40);
    CHECK(te1.size() == 16 * 10);
    CHECK(tr1.split == Split::train);
    CHECK(te1.split == Split::test);
    for (int y : tr1.labels) CHECK((y >= 0 && y < 16));
    auto [tr3, te3] = make_gaussian_mixture(16, 32, 50, 0.4, 6);
    CHECK_FALSE(same_bytes(tr1, tr3));
    CHECK_THROWS_AS(make_gaussian_mixture(1, 32, 50, 0.4, 5), ConfigError);
    CHECK_THROWS_AS(make_gaussian_mixture(4, 1, 50, 0.4, 5), ConfigError);
}

TEST_CASE("train and test rows are distinct samples") {
    auto [train, test] = make_gaussian_mixture(4, 6, 40, 0.3, 9, 3);
    std::set<std::vector<double>> rows;
    for (std::size_t i = 0; i < train.size(); ++i)
        rows.insert({train.features.data.begin() + static_cast<std::ptrdiff_t>(i * 6),
                     train.features.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * 6)});
    for (std::size_t i = 0; i < test.size(); ++i)
        CHECK(rows.count({test.features.data.begin() + static_cast<std::ptrdiff_t>(i * 6),
                          test.features.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * 6)}) == 0);
}

TEST_CASE("separable gaussian limit: plain student exceeds 99%") {
    auto [train, test] = make_gaussian_mixture(4, 8, 80, 1e-3, 2);
    Network net = build_network(NetworkArch{8, 8, {{8, 2}, {16, 2}}, 4}, 1);
    TrainOptions opts;
    opts.epochs = 8;
    opts.milestones = {6};
    opts.batch_size = 32;
    const RunMetrics m = run_training_loop(net, train, test, opts, nullptr, [&](const Batch& b, const SgdConfig& sgd, int, std::int64_t) {
        Tape tape;
        Var logits = net.forward(tape, tape.constant(b.x));
        Var loss = softmax_cross_entropy(logits, b.y);
        tape.backward(loss);
        sgd_step(net.parameters(), sgd);
        return StepOutcome{loss.value().data[0], 0};
    });
    CHECK(m.final_test_acc > 0.99);
}

TEST_CASE("noise-free spirals are separable by nearest neighbour") {
    auto [train, test] = make_spirals(2, 200, 0.0, 4);
    CHECK(train.dim() == 2);
    CHECK(nearest_neighbour_accuracy(train, test) == 1.0);
    auto [train2, test2] = make_spirals(2, 200, 0.0, 4);
    CHECK(same_bytes(train, train2));
    CHECK(same_bytes(test, test2));
    CHECK_THROWS_AS(make_spirals(1, 10, 0.0, 1), ConfigError);
}

TEST_CASE("batches drop the tail and never repeat an index") {
    const auto idx = batch_indices(1000, 128, 77);
    CHECK(idx.size() == 7);
    std::set<std::size_t> seen;
    for (const auto& b : idx) {
        CHECK(b.size() == 128);
        for (auto i : b) {
            CHECK(i < 1000);
            CHECK(seen.insert(i).second);
        }
    }
    CHECK(batch_indices(1000, 128, 77) == idx);
    CHECK(batch_indices(1000, 128, 78) != idx);
    CHECK_THROWS_AS(batch_indices(10, 1, 0), InvalidBatchError);

    auto [train, test] = make_gaussian_mixture(3, 4, 20, 0.1, 1);
    const auto bs = batches(train, 5, 3);
    CHECK(bs.size() == train.size() / 5);
    CHECK(bs[0].x.shape == Shape{5, 4});
}

TEST_CASE("eval batches cover the set and never hold a single row") {
    auto [train, test] = make_gaussian_mixture(3, 4, 55, 0.1, 1); // 33 test rows
    REQUIRE(test.size() == 33);
    const auto bs = eval_batches(test, 8);
    std::size_t total = 0;
    for (const auto& b : bs) {
        CHECK(b.y.size() >= 2);
        total += b.y.size();
    }
    CHECK(total == 33);
    CHECK(bs.back().y.size() == 9);
}

TEST_CASE("dataset dump round trip") {
    auto [train, test] = make_gaussian_mixture(3, 4, 20, 0.5, 8);
    const auto path = std::filesystem::temp_directory_path() / "iakd_dataset.bin";
    save_dataset(train, path);
    const Dataset back = load_dataset(path, Split::train);
    CHECK(back.labels == train.labels);
    CHECK(back.num_classes == 3);
    for (std::size_t i = 0; i < train.features.size(); ++i)
        CHECK(back.features.data[i] == static_cast<double>(static_cast<float>(train.features.data[i])));
}

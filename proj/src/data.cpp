#include "iakd/data.hpp"

#include "iakd/checkpoint.hpp"
#include "iakd/error.hpp"
#include "iakd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace iakd {

namespace {

struct RawSample {
    std::vector<double> x;
    int label;
};

std::pair<Dataset, Dataset> split_80_20(const std::vector<std::vector<RawSample>>& per_class, std::size_t classes,
                                        std::size_t dim) {
    // rows interleave the classes so sequential eval batches see every class
    std::vector<const RawSample*> train, test;
    std::size_t longest = 0;
    for (const auto& samples : per_class) longest = std::max(longest, samples.size());
    for (std::size_t i = 0; i < longest; ++i) {
        for (const auto& samples : per_class) {
            if (i >= samples.size()) continue;
            (i < samples.size() * 4 / 5 ? train : test).push_back(&samples[i]);
        }
    }
    auto pack = [&](const std::vector<const RawSample*>& src, Split split) {
        Dataset d;
        d.features = Tensor({src.size(), dim});
        for (std::size_t i = 0; i < src.size(); ++i) {
            std::copy(src[i]->x.begin(), src[i]->x.end(), d.features.data.begin() + static_cast<std::ptrdiff_t>(i * dim));
            d.labels.push_back(src[i]->label);
        }
        d.num_classes = classes;
        d.split = split;
        return d;
    };
    return {pack(train, Split::train), pack(test, Split::test)};
}

} // namespace

std::pair<Dataset, Dataset> make_gaussian_mixture(std::size_t classes, std::size_t dims, std::size_t n_per_class,
                                                  double spread, std::uint64_t seed, std::size_t modes_per_class) {
    if (classes < 2 || dims < 2) throw ConfigError("gaussian mixture needs C >= 2 and D >= 2");
    if (n_per_class < 5) throw ConfigError("gaussian mixture needs at least 5 samples per class");
    if (!(spread >= 0.0)) throw ConfigError("gaussian mixture spread must be non-negative");
    if (modes_per_class < 1) throw ConfigError("gaussian mixture needs at least one mode per class");

    Rng centre_rng(derive_seed(seed, "centres"));
    Rng sample_rng(derive_seed(seed, "samples"));
    std::normal_distribution<double> unit(0.0, 1.0);

    std::vector<std::vector<double>> centres(classes * modes_per_class, std::vector<double>(dims));
    for (auto& c : centres) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& v : c) {
                v = unit(centre_rng);
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& v : c) v /= norm;
    }

    std::vector<std::vector<RawSample>> per_class(classes);
    for (std::size_t k = 0; k < classes; ++k) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            const std::size_t mode = modes_per_class == 1 ? 0 : sample_rng() % modes_per_class;
            const auto& c = centres[k * modes_per_class + mode];
            RawSample s{std::vector<double>(dims), static_cast<int>(k)};
            for (std::size_t d = 0; d < dims; ++d) s.x[d] = c[d] + spread * unit(sample_rng);
            per_class[k].push_back(std::move(s));
        }
    }
    return split_80_20(per_class, classes, dims);
}

std::pair<Dataset, Dataset> make_spirals(std::size_t classes, std::size_t n_per_class, double noise,
                                         std::uint64_t seed) {
    if (classes < 2) throw ConfigError("spirals need C >= 2");
    if (n_per_class < 5) throw ConfigError("spirals need at least 5 samples per class");
    if (!(noise >= 0.0)) throw ConfigError("spiral noise must be non-negative");

    Rng rng(derive_seed(seed, "spirals"));
    std::normal_distribution<double> unit(0.0, 1.0);
    constexpr double turns = 1.5;
    std::vector<std::vector<RawSample>> per_class(classes);
    for (std::size_t k = 0; k < classes; ++k) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(classes);
        for (std::size_t i = 0; i < n_per_class; ++i) {
            // radius in [0.1, 1]
            const double t = 0.1 + 0.9 * uniform01(rng);
            const double angle = phase + 2.0 * std::numbers::pi * turns * t;
            RawSample s{{t * std::cos(angle) + noise * unit(rng), t * std::sin(angle) + noise * unit(rng)},
                        static_cast<int>(k)};
            per_class[k].push_back(std::move(s));
        }
    }
    return split_80_20(per_class, classes, 2);
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
    if (batch_size < 2) throw InvalidBatchError("batch size must be >= 2, got " + std::to_string(batch_size));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(epoch_seed);
    // Fisher-Yates with the portable draw so orders match across standard libraries.
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start + batch_size <= n; start += batch_size) {
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
    }
    return out;
}

std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t epoch_seed) {
    std::vector<Batch> out;
    for (auto& idx : batch_indices(data.size(), batch_size, epoch_seed)) {
        Batch b{gather_rows(data.features, idx), {}};
        for (auto i : idx) b.y.push_back(data.labels[i]);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<Batch> eval_batches(const Dataset& data, std::size_t batch_size) {
    if (batch_size < 2) throw InvalidBatchError("batch size must be >= 2, got " + std::to_string(batch_size));
    if (data.size() < 2) throw InvalidBatchError("evaluation needs at least 2 samples");
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        ranges.emplace_back(start, std::min(start + batch_size, data.size()));
    }
    if (ranges.size() > 1 && ranges.back().second - ranges.back().first == 1) {
        ranges[ranges.size() - 2].second = ranges.back().second;
        ranges.pop_back();
    }
    std::vector<Batch> out;
    for (auto [begin, end] : ranges) {
        std::vector<std::size_t> idx(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        Batch b{gather_rows(data.features, idx), {data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  data.labels.begin() + static_cast<std::ptrdiff_t>(end)}};
        out.push_back(std::move(b));
    }
    return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::vector<NamedTensor> entries;
    entries.push_back(to_named("features", data.features));
    NamedTensor labels{"labels", {data.labels.size()}, {}};
    for (int y : data.labels) labels.values.push_back(static_cast<float>(y));
    entries.push_back(std::move(labels));
    entries.push_back(NamedTensor{"num_classes", {1}, {static_cast<float>(data.num_classes)}});
    write_container(path, entries);
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
    const auto entries = read_container(path);
    const NamedTensor* f = nullptr;
    const NamedTensor* l = nullptr;
    const NamedTensor* c = nullptr;
    for (const auto& e : entries) {
        if (e.name == "features") f = &e;
        else if (e.name == "labels") l = &e;
        else if (e.name == "num_classes") c = &e;
    }
    if (!f || !l || !c) throw CheckpointError("dataset file must hold features, labels and num_classes");
    if (f->shape.size() != 2 || l->shape.size() != 1 || f->shape[0] != l->shape[0]) {
        throw CheckpointError("dataset features/labels shapes disagree");
    }
    Dataset d;
    d.features.shape = f->shape;
    d.features.data.assign(f->values.begin(), f->values.end());
    d.num_classes = static_cast<std::size_t>(c->values.at(0));
    for (float v : l->values) {
        const int y = static_cast<int>(v);
        if (y < 0 || static_cast<std::size_t>(y) >= d.num_classes) throw DataError("dataset label out of range");
        d.labels.push_back(y);
    }
    d.split = split;
    return d;
}

} // namespace iakd

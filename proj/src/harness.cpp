#include "iakd/harness.hpp"

#include "iakd/error.hpp"
#include "iakd/format.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace iakd {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << text;
}

struct RunContext {
    ExperimentConfig cfg;
    std::uint64_t seed;
    TrainOptions opts;
    Dataset train;
    Dataset test;
};

RunContext prepare(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto [train, test] = cfg.data.generate();
    TrainOptions opts = cfg.optim;
    opts.seed = seed;
    opts.record_paths = cfg.log_paths;
    std::filesystem::create_directories(cfg.output);
    return {cfg, seed, opts, std::move(train), std::move(test)};
}

std::string run_label(const ExperimentConfig& cfg, std::uint64_t seed, const char* what) {
    return std::string(what) + " (method " + std::string(to_string(cfg.method)) + ", seed " + std::to_string(seed) + "): ";
}

} // namespace

std::string metrics_csv(const RunMetrics& m) {
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& r : m.epochs) {
        out += std::to_string(r.epoch) + "," + format_double(r.lr) + "," + format_double(r.p) + "," +
               format_double(r.train_loss) + "," + format_double(r.train_acc) + "," + format_double(r.test_acc) + "\n";
    }
    return out;
}

std::string updates_csv(const RunMetrics& m, const NetworkArch& student) {
    std::string header = "iterations", row = std::to_string(m.iterations);
    std::size_t i = 0;
    for (std::size_t g = 0; g < student.groups.size(); ++g) {
        for (std::size_t k = 1; k < student.groups[g].blocks; ++k, ++i) {
            header += "," + BlockId{static_cast<int>(g), static_cast<int>(k), false}.str();
            row += "," + std::to_string(i < m.update_counts.size() ? m.update_counts[i] : 0);
        }
    }
    return header + "\n" + row + "\n";
}

double read_final_accuracy(const std::filesystem::path& metrics_file) {
    std::ifstream f(metrics_file);
    if (!f) throw DataError("cannot open metrics file '" + metrics_file.string() + "'");
    std::string line;
    if (!std::getline(f, line) || line != kMetricsHeader) throw DataError("metrics file '" + metrics_file.string() + "' has a bad header");
    std::optional<double> last;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw DataError("malformed metrics row '" + line + "'");
        double acc = 0.0;
        try {
            std::size_t used = 0;
            acc = std::stod(cells[5], &used);
            if (used != cells[5].size()) throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
            throw DataError("malformed test_acc in row '" + line + "'");
        }
        if (!(acc >= 0.0 && acc <= 1.0)) throw DataError("test_acc outside [0, 1] in row '" + line + "'");
        last = acc;
    }
    if (!last) throw DataError("metrics file '" + metrics_file.string() + "' has no rows");
    return *last;
}

std::string SummaryStats::to_json() const {
    nlohmann::json j;
    j["method"] = method;
    j["seeds"] = seeds;
    j["final_acc"] = final_acc;
    j["mean"] = mean;
    j["std"] = std ? nlohmann::json(*std) : nlohmann::json(nullptr);
    return j.dump(2) + "\n";
}

SummaryStats summarize_accuracies(const std::string& method, const std::vector<std::uint64_t>& seeds,
                                  const std::vector<double>& accuracies) {
    if (accuracies.empty()) throw DataError("summarize needs at least one run");
    SummaryStats s{method, seeds, accuracies, 0.0, std::nullopt};
    const double n = static_cast<double>(accuracies.size());
    s.mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / n;
    if (accuracies.size() >= 2) {
        double ss = 0.0;
        for (double a : accuracies) ss += (a - s.mean) * (a - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

SummaryStats summarize(const std::string& method, const std::vector<RunRecord>& runs) {
    std::vector<std::uint64_t> seeds;
    std::vector<double> acc;
    for (const auto& r : runs) {
        seeds.push_back(r.seed);
        acc.push_back(read_final_accuracy(r.metrics_file));
    }
    return summarize_accuracies(method, seeds, acc);
}

RunMetrics run_pretrain(const ExperimentConfig& cfg, std::uint64_t seed) {
    try {
        ExperimentConfig plain = cfg;
        plain.method = Method::plain;
        plain.optim = cfg.pretrain_options();
        RunContext ctx = prepare(plain, seed);
        Network teacher = build_network(cfg.teacher(), RunSeeds::from_master(seed).init, cfg.init);
        RunMetrics m = train_baseline(BaselineConfig{Method::plain, 4.0, 0.9, 1000.0, {}}, nullptr, teacher, ctx.train, ctx.test, ctx.opts);
        write_text(cfg.output / "metrics.csv", metrics_csv(m));
        write_text(cfg.output / "updates.csv", updates_csv(m, cfg.teacher()));
        save_checkpoint(teacher, cfg.output / "teacher.ckpt");
        return m;
    } catch (const Error& e) {
        throw Error(run_label(cfg, seed, "pretrain") + e.what());
    }
}

RunMetrics run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
    try {
        RunContext ctx = prepare(cfg, seed);
        const NetworkArch student_arch = cfg.student();
        Network student = build_network(student_arch, RunSeeds::from_master(seed).init, cfg.init);

        std::optional<Network> teacher;
        if (uses_teacher(cfg.method)) {
            const auto path = cfg.teacher_path(seed);
            if (path.empty()) throw ConfigError("run.teacher must name a teacher checkpoint");
            if (!std::filesystem::exists(path)) throw ConfigError("teacher checkpoint '" + path.string() + "' not found");
            teacher = load_checkpoint(path, cfg.teacher());
        }

        RunMetrics m;
        Network* trained = &student;
        std::optional<HybridNetwork> hybrid;
        const ScheduleSpec schedule = cfg.effective_schedule();
        switch (cfg.method) {
        case Method::iakd:
        case Method::iakd_group:
        case Method::iakd_plus_hkd: {
            const Interaction mode = cfg.method == Method::iakd_group ? Interaction::group : Interaction::block;
            hybrid.emplace(std::move(student), *teacher, mode);
            m = cfg.method == Method::iakd_plus_hkd
                    ? train_iakd_plus_hkd(*hybrid, *teacher, schedule, cfg.alpha, cfg.temperature, ctx.train, ctx.test, ctx.opts)
                    : train_iakd(*hybrid, schedule, ctx.train, ctx.test, ctx.opts);
            trained = &hybrid->student();
            break;
        }
        default: {
            BaselineConfig b{cfg.method, cfg.temperature, cfg.alpha, cfg.beta, schedule};
            m = train_baseline(b, teacher ? &*teacher : nullptr, student, ctx.train, ctx.test, ctx.opts);
        }
        }

        write_text(cfg.output / "metrics.csv", metrics_csv(m));
        write_text(cfg.output / "updates.csv", updates_csv(m, student_arch));
        if (cfg.log_paths) {
            std::ostringstream log;
            write_path_log(log, m.draws, student_arch.total_non_shared_blocks());
            write_text(cfg.output / "paths.csv", log.str());
        }
        save_checkpoint(*trained, cfg.output / "student.ckpt");
        return m;
    } catch (const Error& e) {
        throw Error(run_label(cfg, seed, "run") + e.what());
    }
}

SummaryStats run_sweep(const ExperimentConfig& cfg, bool pretrain, unsigned jobs) {
    const auto& seeds = cfg.seeds;
    std::vector<double> acc(seeds.size(), 0.0);
    std::vector<std::string> errors(seeds.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            ExperimentConfig run = cfg;
            run.output = cfg.output / ("seed_" + std::to_string(seeds[i]));
            try {
                acc[i] = (pretrain ? run_pretrain(run, seeds[i]) : run_experiment(run, seeds[i])).final_test_acc;
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (!e.empty()) throw Error(e);

    const std::string method = pretrain ? "teacher" : std::string(to_string(cfg.method));
    SummaryStats s = summarize_accuracies(method, seeds, acc);
    std::filesystem::create_directories(cfg.output);
    write_text(cfg.output / "summary.json", s.to_json());
    return s;
}

double run_eval(const std::filesystem::path& checkpoint, const NetworkArch& arch, const DataSpec& data,
                std::size_t batch_size) {
    Network net = load_checkpoint(checkpoint, arch);
    const auto split = data.generate();
    return evaluate(net, split.second, batch_size);
}

} // namespace iakd

// iakd: command-line front end for the distillation laboratory.
//
//   iakd pretrain --config configs/hard16.conf --seed 0 --output runs/teacher
//   iakd distill  --config configs/hard16.conf --method iakd --teacher runs/teacher/teacher.ckpt
//   iakd sweep    --config configs/hard16.conf --method plain --seeds 0,1,2,3,4
//   iakd eval     --config configs/hard16.conf --checkpoint runs/out/student.ckpt
//   iakd schedule --kind review --p-start 0.1 --epochs 200 --milestones 100,150
//   iakd expect   --kind review --p-start 0.9 --epochs 200 --milestones 100,150

#include "iakd/error.hpp"
#include "iakd/format.hpp"
#include "iakd/harness.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <map>

namespace {

// Options shared by every subcommand that builds an ExperimentConfig.
struct ConfigOptions {
    std::string config_file;
    std::vector<std::string> overrides;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App& app) {
        app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
        app.add_option("--set", overrides, "KEY=VALUE override (repeatable)");
        for (const auto& key : iakd::ExperimentConfig::keys()) {
            options[key] = app.add_option("--" + key, values[key], "config key " + key);
        }
        alias(app, "--schedule", "schedule.kind");
        alias(app, "--p-start", "schedule.p_start");
        alias(app, "--epochs", "optim.epochs");
        alias(app, "--milestones", "optim.milestones");
        alias(app, "--batch-size", "optim.batch_size");
        alias(app, "--lr", "optim.lr");
        alias(app, "--seed", "run.seeds");
        alias(app, "--seeds", "run.seeds");
        alias(app, "--output", "run.output");
        alias(app, "--teacher", "run.teacher");
        alias(app, "--log-paths", "run.log_paths");
    }

    void alias(CLI::App& app, const std::string& flag, const std::string& key) {
        alias_values[flag];
        aliases.emplace_back(app.add_option(flag, alias_values[flag], "alias for --" + key), key);
    }

    iakd::ExperimentConfig build() const {
        iakd::ExperimentConfig cfg;
        if (!config_file.empty()) cfg.apply(iakd::parse_config_file(config_file));
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) cfg.set(key, values.at(key));
        for (const auto& [opt, key] : aliases)
            if (opt->count() > 0) cfg.set(key, alias_values.at(opt->get_name()));
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw iakd::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        return cfg;
    }

    std::map<std::string, std::string> alias_values;
    std::vector<std::pair<CLI::Option*, std::string>> aliases;
};

struct ScheduleOptions {
    std::string kind = "review";
    double p_start = 0.5;
    int epochs = 200;
    std::string milestones = "100,150";
    double lr = 0.1;
    double factor = 0.1;

    void attach(CLI::App& app, bool with_lr) {
        app.add_option("--kind", kind, "uniform | linear | review")->capture_default_str();
        app.add_option("--p-start", p_start, "first-epoch student-path probability")->capture_default_str();
        app.add_option("--epochs", epochs, "total epochs")->capture_default_str();
        app.add_option("--milestones", milestones, "comma-separated LR drop epochs")->capture_default_str();
        if (with_lr) {
            app.add_option("--lr", lr, "initial learning rate")->capture_default_str();
            app.add_option("--factor", factor, "LR multiplier at each milestone")->capture_default_str();
        }
    }

    iakd::ScheduleSpec spec() const {
        iakd::ScheduleSpec s{iakd::parse_schedule_kind(kind), p_start, epochs, iakd::parse_int_list(milestones)};
        s.validate();
        return s;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive knowledge distillation laboratory"};
    app.require_subcommand(1);

    auto* pretrain = app.add_subcommand("pretrain", "train a teacher from scratch and checkpoint it");
    ConfigOptions pretrain_opts;
    pretrain_opts.attach(*pretrain);

    auto* distill = app.add_subcommand("distill", "train one student with one method and one seed");
    ConfigOptions distill_opts;
    distill_opts.attach(*distill);

    auto* sweep = app.add_subcommand("sweep", "run every seed and write summary.json");
    ConfigOptions sweep_opts;
    sweep_opts.attach(*sweep);
    bool sweep_pretrain = false;
    unsigned jobs = 1;
    sweep->add_flag("--pretrain", sweep_pretrain, "sweep teacher pretraining instead of distillation");
    sweep->add_option("--jobs", jobs, "seeds run concurrently")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "report test accuracy of a checkpoint");
    ConfigOptions eval_opts;
    eval_opts.attach(*eval);
    std::string checkpoint;
    std::string arch_role = "student";
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--arch", arch_role, "student | teacher (which model.* arch the checkpoint holds)")
        ->check(CLI::IsMember({"student", "teacher"}))
        ->capture_default_str();

    auto* schedule = app.add_subcommand("schedule", "print epoch,p,lr CSV of a probability schedule");
    ScheduleOptions schedule_opts;
    schedule_opts.attach(*schedule, true);

    auto* expect = app.add_subcommand("expect", "print the expected fraction of epochs on the student path");
    ScheduleOptions expect_opts;
    expect_opts.attach(*expect, false);

    auto* summarize = app.add_subcommand("summarize", "summary JSON over metrics.csv files");
    std::string method_name = "unknown";
    std::vector<std::string> files;
    summarize->add_option("--method", method_name, "method id for the summary");
    summarize->add_option("files", files, "metrics.csv files (seed = position)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pretrain) {
            const auto cfg = pretrain_opts.build();
            const auto m = iakd::run_pretrain(cfg, cfg.seeds.front());
            std::cout << "teacher test accuracy " << iakd::format_double(m.final_test_acc) << "\n";
        } else if (*distill) {
            const auto cfg = distill_opts.build();
            const auto m = iakd::run_experiment(cfg, cfg.seeds.front());
            std::cout << "student test accuracy " << iakd::format_double(m.final_test_acc) << "\n";
        } else if (*sweep) {
            const auto cfg = sweep_opts.build();
            std::cout << iakd::run_sweep(cfg, sweep_pretrain, jobs).to_json();
        } else if (*eval) {
            const auto cfg = eval_opts.build();
            const auto arch = arch_role == "teacher" ? cfg.teacher() : cfg.student();
            std::cout << iakd::format_double(iakd::run_eval(checkpoint, arch, cfg.data, cfg.optim.batch_size)) << "\n";
        } else if (*schedule) {
            const auto spec = schedule_opts.spec();
            std::cout << "epoch,p,lr\n";
            for (int e = 0; e < spec.total_epochs; ++e) {
                std::cout << e << ',' << iakd::format_double(iakd::p_at_epoch(spec, e)) << ','
                          << iakd::format_double(iakd::multistep_lr(schedule_opts.lr, spec.lr_milestones,
                                                                    schedule_opts.factor, e))
                          << '\n';
            }
        } else if (*expect) {
            const auto spec = expect_opts.spec();
            std::cout << std::setprecision(12) << iakd::expected_update_fraction(spec) << "\n";
        } else if (*summarize) {
            std::vector<iakd::RunRecord> runs;
            for (std::size_t i = 0; i < files.size(); ++i) runs.push_back({i, files[i]});
            std::cout << iakd::summarize(method_name, runs).to_json();
        }
    } catch (const iakd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

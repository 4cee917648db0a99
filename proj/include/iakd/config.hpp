#pragma once

// Line-oriented `key = value` experiment configuration. `#` starts a comment;
// keys are namespaced (data.*, model.*, schedule.*, optim.*, distill.*, run.*).

#include "iakd/baselines.hpp"
#include "iakd/data.hpp"
#include "iakd/schedules.hpp"
#include "iakd/training.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iakd {

using ConfigMap = std::map<std::string, std::string>;

// Throws ConfigError (with the line number) on malformed lines.
ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::filesystem::path& path);

struct DataSpec {
    std::string kind = "gaussian"; // gaussian | spirals
    std::size_t classes = 16;
    std::size_t dims = 32;
    std::size_t n_per_class = 200;
    std::size_t modes = 1;
    double spread = 0.35;
    double noise = 0.1;
    std::uint64_t seed = 7;

    std::pair<Dataset, Dataset> generate() const;
    std::size_t input_dim() const { return kind == "spirals" ? 2 : dims; }
};

struct ExperimentConfig {
    DataSpec data;
    std::string teacher_arch = "reference-teacher";
    std::string student_arch = "reference-student";
    InitOptions init;
    Method method = Method::iakd;
    ScheduleSpec schedule{ScheduleKind::review, 0.5, 60, {30, 45}};
    TrainOptions optim;
    // teacher pretraining budget; falls back to optim.epochs / optim.milestones
    std::optional<int> pretrain_epochs;
    std::optional<std::vector<int>> pretrain_milestones;
    double temperature = 4.0;
    double alpha = 0.9;
    double beta = 1000.0;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output = "runs/out";
    std::string teacher_checkpoint; // "{seed}" is replaced by the run seed
    bool log_paths = false;

    // Every key this config understands.
    static const std::vector<std::string>& keys();

    // Unknown keys and unparsable values throw ConfigError.
    void set(const std::string& key, const std::string& value);
    void apply(const ConfigMap& map);
    // Cross-field checks (method/schedule compatibility, p_start range, ...).
    void validate() const;

    NetworkArch teacher() const;
    NetworkArch student() const;
    // Schedule with epochs and LR milestones taken from the optimizer section.
    ScheduleSpec effective_schedule() const;
    std::filesystem::path teacher_path(std::uint64_t seed) const;
    TrainOptions pretrain_options() const;
};

NetworkArch named_arch(const std::string& name, std::size_t input_dim, std::size_t num_classes);

std::vector<int> parse_int_list(const std::string& text);

} // namespace iakd

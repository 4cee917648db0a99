#include "iakd/config.hpp"

#include "iakd/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace iakd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T out{};
    ss >> out;
    if (ss.fail() || !ss.eof()) throw ConfigError("bad value '" + value + "' for key " + key);
    if constexpr (std::is_unsigned_v<T>) {
        if (value.find('-') != std::string::npos) throw ConfigError("key " + key + " must be non-negative");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("bad boolean '" + value + "' for key " + key);
}

} // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        map[key] = trim(line.substr(eq + 1));
    }
    return map;
}

ConfigMap parse_config_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_number<int>("list", item));
    }
    return out;
}

std::pair<Dataset, Dataset> DataSpec::generate() const {
    if (kind == "gaussian") return make_gaussian_mixture(classes, dims, n_per_class, spread, seed, modes);
    if (kind == "spirals") return make_spirals(classes, n_per_class, noise, seed);
    throw ConfigError("unknown data.kind '" + kind + "' (gaussian|spirals)");
}

NetworkArch named_arch(const std::string& name, std::size_t input_dim, std::size_t num_classes) {
    if (name == "reference-teacher") return NetworkArch::reference_teacher(input_dim, num_classes);
    if (name == "reference-student") return NetworkArch::reference_student(input_dim, num_classes);
    // Small pair for fast tests: 2 vs 1 non-shared blocks per group.
    if (name == "small-teacher") return {input_dim, 8, {{8, 3}, {16, 3}}, num_classes};
    if (name == "small-student") return {input_dim, 8, {{8, 2}, {16, 2}}, num_classes};
    throw ConfigError("unknown arch '" + name + "' (reference-teacher|reference-student|small-teacher|small-student)");
}

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> k{
        "data.kind",      "data.classes",    "data.dims",           "data.n_per_class",  "data.modes",
        "data.spread",    "data.noise",      "data.seed",           "model.teacher",     "model.student",
        "model.residual_gamma",
        "method",         "schedule.kind",   "schedule.p_start",    "optim.lr",          "optim.momentum",
        "optim.weight_decay", "optim.epochs", "optim.milestones",   "optim.factor",      "optim.batch_size",
        "distill.temperature", "distill.alpha", "distill.beta",     "run.seeds",         "run.output",
        "run.teacher",    "run.log_paths",   "pretrain.epochs",     "pretrain.milestones"};
    return k;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "data.kind") data.kind = value;
    else if (key == "data.classes") data.classes = parse_number<std::size_t>(key, value);
    else if (key == "data.dims") data.dims = parse_number<std::size_t>(key, value);
    else if (key == "data.n_per_class") data.n_per_class = parse_number<std::size_t>(key, value);
    else if (key == "data.modes") data.modes = parse_number<std::size_t>(key, value);
    else if (key == "data.spread") data.spread = parse_number<double>(key, value);
    else if (key == "data.noise") data.noise = parse_number<double>(key, value);
    else if (key == "data.seed") data.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "model.teacher") teacher_arch = value;
    else if (key == "model.student") student_arch = value;
    else if (key == "model.residual_gamma") init.residual_gamma = parse_number<double>(key, value);
    else if (key == "method") method = parse_method(value);
    else if (key == "schedule.kind") schedule.kind = parse_schedule_kind(value);
    else if (key == "schedule.p_start") schedule.p_start = parse_number<double>(key, value);
    else if (key == "optim.lr") optim.lr = parse_number<double>(key, value);
    else if (key == "optim.momentum") optim.momentum = parse_number<double>(key, value);
    else if (key == "optim.weight_decay") optim.weight_decay = parse_number<double>(key, value);
    else if (key == "optim.epochs") optim.epochs = parse_number<int>(key, value);
    else if (key == "optim.milestones") optim.milestones = parse_int_list(value);
    else if (key == "optim.factor") optim.factor = parse_number<double>(key, value);
    else if (key == "optim.batch_size") optim.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "distill.temperature") temperature = parse_number<double>(key, value);
    else if (key == "distill.alpha") alpha = parse_number<double>(key, value);
    else if (key == "distill.beta") beta = parse_number<double>(key, value);
    else if (key == "run.seeds") {
        seeds.clear();
        for (int s : parse_int_list(value)) {
            if (s < 0) throw ConfigError("run.seeds must be non-negative");
            seeds.push_back(static_cast<std::uint64_t>(s));
        }
        if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
    } else if (key == "run.output") output = value;
    else if (key == "run.teacher") teacher_checkpoint = value;
    else if (key == "run.log_paths") log_paths = parse_bool(key, value);
    else if (key == "pretrain.epochs") pretrain_epochs = parse_number<int>(key, value);
    else if (key == "pretrain.milestones") pretrain_milestones = parse_int_list(value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentConfig::apply(const ConfigMap& map) {
    for (const auto& [k, v] : map) set(k, v);
}

ScheduleSpec ExperimentConfig::effective_schedule() const {
    ScheduleSpec s = schedule;
    s.total_epochs = optim.epochs;
    s.lr_milestones = optim.milestones;
    return s;
}

TrainOptions ExperimentConfig::pretrain_options() const {
    TrainOptions o = optim;
    if (pretrain_epochs) o.epochs = *pretrain_epochs;
    if (pretrain_milestones) o.milestones = *pretrain_milestones;
    return o;
}

void ExperimentConfig::validate() const {
    optim.validate();
    pretrain_options().validate();
    if (!std::isfinite(init.residual_gamma)) throw ConfigError("model.residual_gamma must be finite");
    check_compatible(teacher(), student());
    if (method == Method::nia) {
        effective_schedule().validate();
    } else if (uses_schedule(method)) {
        effective_schedule().validate_for_interaction();
    }
    BaselineConfig b{method, temperature, alpha, beta, effective_schedule()};
    b.validate();
    if (method == Method::iakd_plus_hkd) {
        if (!(temperature > 0.0)) throw ConfigError("distill.temperature must be positive");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distill.alpha must lie in [0, 1]");
    }
}

NetworkArch ExperimentConfig::teacher() const { return named_arch(teacher_arch, data.input_dim(), data.classes); }
NetworkArch ExperimentConfig::student() const { return named_arch(student_arch, data.input_dim(), data.classes); }

std::filesystem::path ExperimentConfig::teacher_path(std::uint64_t seed) const {
    std::string p = teacher_checkpoint;
    const std::string token = "{seed}";
    for (auto pos = p.find(token); pos != std::string::npos; pos = p.find(token)) p.replace(pos, token.size(), std::to_string(seed));
    return p;
}

} // namespace iakd

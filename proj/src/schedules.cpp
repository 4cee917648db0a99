#include "iakd/schedules.hpp"

#include "iakd/error.hpp"

namespace iakd {

ScheduleKind parse_schedule_kind(std::string_view name) {
    if (name == "uniform") return ScheduleKind::uniform;
    if (name == "linear") return ScheduleKind::linear;
    if (name == "review") return ScheduleKind::review;
    throw ConfigError("unknown schedule kind '" + std::string(name) + "' (uniform|linear|review)");
}

std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
    case ScheduleKind::uniform: return "uniform";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::review: return "review";
    }
    return "?";
}

void ScheduleSpec::validate() const {
    if (total_epochs < 1) throw ConfigError("schedule: total epochs must be >= 1");
    if (!(p_start >= 0.0 && p_start <= 1.0)) throw ConfigError("schedule: p_start must lie in [0, 1]");
    int prev = 0;
    for (int m : lr_milestones) {
        if (m <= prev || m >= total_epochs) {
            throw ConfigError("schedule: milestones must be strictly increasing inside (0, " +
                              std::to_string(total_epochs) + ")");
        }
        prev = m;
    }
}

void ScheduleSpec::validate_for_interaction() const {
    validate();
    if (!(p_start > 0.0 && p_start < 1.0)) {
        throw ConfigError("schedule: p_start must lie in (0, 1), got " + std::to_string(p_start));
    }
}

std::vector<std::pair<int, int>> lr_intervals(int total_epochs, std::span<const int> milestones) {
    std::vector<std::pair<int, int>> out;
    int begin = 0;
    for (int m : milestones) {
        out.emplace_back(begin, m);
        begin = m;
    }
    out.emplace_back(begin, total_epochs);
    return out;
}

namespace {

double ramp(double p_start, int local, int length) {
    // pin the endpoint, the sum below can round one ulp above 1
    if (length <= 1 || local >= length - 1) return 1.0;
    return p_start + (1.0 - p_start) * static_cast<double>(local) / static_cast<double>(length - 1);
}

} // namespace

double p_at_epoch(const ScheduleSpec& spec, int epoch) {
    if (epoch < 0 || epoch >= spec.total_epochs) {
        throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(spec.total_epochs) + ")");
    }
    switch (spec.kind) {
    case ScheduleKind::uniform: return spec.p_start;
    case ScheduleKind::linear: return ramp(spec.p_start, epoch, spec.total_epochs);
    case ScheduleKind::review:
        for (auto [begin, end] : lr_intervals(spec.total_epochs, spec.lr_milestones)) {
            if (epoch < end) return ramp(spec.p_start, epoch - begin, end - begin);
        }
    }
    throw ConfigError("unreachable schedule state");
}

double expected_update_fraction(const ScheduleSpec& spec) {
    spec.validate();
    double total = 0.0;
    for (int e = 0; e < spec.total_epochs; ++e) total += p_at_epoch(spec, e);
    return total / static_cast<double>(spec.total_epochs);
}

} // namespace iakd

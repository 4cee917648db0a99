#pragma once

// Per-epoch probability p of taking the student path in every hybrid block.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iakd {

enum class ScheduleKind { uniform, linear, review };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view to_string(ScheduleKind kind);

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::review;
    double p_start = 0.5;
    int total_epochs = 1;
    std::vector<int> lr_milestones; // only consulted by review

    // Structural checks: epochs >= 1, p_start in [0, 1], milestones strictly
    // increasing inside (0, E).
    void validate() const;
    // Additionally requires p_start in the open interval (0, 1); p_start of 0 or 1
    // degenerates hybrid training into pure teacher or pure student.
    void validate_for_interaction() const;
};

/// uniform: p_start.
/// linear:  p_start + (1 - p_start) * e / (E - 1).
/// review:  the linear ramp restarted on each interval between LR milestones;
///          an interval of length 1 holds p = 1.
double p_at_epoch(const ScheduleSpec& spec, int epoch);

// Mean of p over all epochs, i.e. the expected fraction of epochs a student
// block spends on its own path.
double expected_update_fraction(const ScheduleSpec& spec);

// Half-open [begin, end) epoch intervals of constant learning rate.
std::vector<std::pair<int, int>> lr_intervals(int total_epochs, std::span<const int> milestones);

} // namespace iakd

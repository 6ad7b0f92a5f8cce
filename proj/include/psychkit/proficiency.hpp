#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psychkit/irt.hpp"

namespace psychkit::proficiency {

constexpr double kLevelWidth = 0.8;
constexpr double kTargetP = 0.62;
constexpr double kLowerTargetP = 0.52;
constexpr double kUpperTargetP = 0.70;

/// Ability at which the 2PL gives `target_p`: b + ln(p / (1 - p)) / a.
double adjusted_difficulty(double a, double b, double target_p = kTargetP);

struct Level {
    int index = 0;
    std::optional<double> lower;  // absent: open below
    std::optional<double> upper;  // absent: open above
    std::vector<std::string> items;  // sorted by adjusted difficulty
    std::optional<std::string> anchor;
    bool sparse = false;

    bool contains(double theta) const {
        return (!lower || theta >= *lower) && (!upper || theta < *upper);
    }
};

struct ProfileOptions {
    double origin = 0.0;
    /// A 0.8-logit band needs this many items to count as dense.
    Index min_items = 3;
    double target_p = kTargetP;
};

struct ProficiencyProfile {
    double origin = 0.0;
    Index min_items = 3;
    double target_p = kTargetP;
    std::string ability_estimator = "EAP";
    std::vector<Level> levels;
    std::vector<std::string> items;
    std::vector<double> adjusted;  // per item, model order
    std::map<std::string, int> item_assignment;
    /// group -> percentage of students per level.
    std::map<std::string, std::vector<double>> student_distribution;
    std::map<std::string, Index> group_sizes;

    int level_of(double theta) const;
};

ProficiencyProfile build_profile(const irt::IrtModel& model,
                                 const std::map<std::string, Vector>& abilities = {},
                                 const ProfileOptions& options = {});

struct LevelSemantics {
    int index = 0;
    std::optional<double> p_lower;
    std::optional<double> p_upper;
    std::optional<double> lower_deviation;  // p_lower - 0.52
    std::optional<double> upper_deviation;  // p_upper - 0.70
    std::string note;
};

std::vector<LevelSemantics> verify_level_semantics(const ProficiencyProfile& profile,
                                                   const irt::IrtModel& model);

}  // namespace psychkit::proficiency

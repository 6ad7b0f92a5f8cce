#pragma once

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "psychkit/dataset.hpp"
#include "psychkit/irt.hpp"

namespace psychkit::dif {

enum class Method { mantel_haenszel, logistic, lord };
enum class EffectClass { negligible, moderate, large };

/// Two-group split on a grouping column. Empty sets mean "the column has
/// exactly two levels; the first in sorted order is the reference".
struct GroupSplit {
    std::string column = "gender";
    std::set<std::string> reference;
    std::set<std::string> focal;
};

/// Membership per student: 0 reference, 1 focal, -1 in neither group.
struct Groups {
    std::vector<int> membership;
    std::string reference_label;
    std::string focal_label;
};

Groups resolve_groups(const ResponseMatrix& matrix, const GroupSplit& split);

struct DifOptions {
    double alpha = 0.05;
    /// Matching score includes the studied item.
    bool include_studied_item = true;
    irt::ModelKind lord_model = irt::ModelKind::two_pl;
    Index lord_min_group_size = 200;
    int max_rounds = 10;
    irt::FitOptions fit;
    Index quadrature_nodes = 61;
};

struct ItemDif {
    std::string item;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double df = 0.0;
    double p_value = std::numeric_limits<double>::quiet_NaN();
    double p_adjusted = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> effect_size;
    std::optional<EffectClass> effect_class;
    /// Common odds ratio (Mantel-Haenszel only).
    std::optional<double> odds_ratio;
    bool flagged = false;
    /// Why an item has no statistic (separation, degenerate strata, ...).
    std::string note;
};

struct DifResult {
    Method method = Method::mantel_haenszel;
    std::vector<ItemDif> items;
    /// Non-empty when the method could not run at all.
    std::string error;
    std::string equating;  // Lord only
};

EffectClass ets_delta_class(double delta);
EffectClass jodoin_gierl_class(double delta_r2);

/// BH-adjusts the valid p-values in place and sets `flagged`.
void adjust_and_flag(DifResult& result, double alpha);

// Detectors on raw data. `group` is 0/1 per row (rows with -1 are ignored),
// `anchors` marks the items forming the matching set.
DifResult mantel_haenszel(const Matrix& y, const std::vector<int>& group,
                          const std::vector<bool>& anchors, const std::vector<std::string>& items,
                          const DifOptions& options = {});
DifResult logistic_dif(const Matrix& y, const std::vector<int>& group,
                       const std::vector<bool>& anchors, const std::vector<std::string>& items,
                       const DifOptions& options = {});

/// Separate per-group IRT calibrations shared across purification rounds.
struct LordCalibration {
    irt::IrtModel reference;
    irt::IrtModel focal;
    std::vector<Matrix> reference_cov;
    std::vector<Matrix> focal_cov;
};

LordCalibration calibrate_groups(const Matrix& y, const std::vector<int>& group,
                                 const std::vector<std::string>& items, const DifOptions& options = {});
DifResult lords_chi2(const LordCalibration& calibration, const std::vector<bool>& anchors,
                     const DifOptions& options = {});

// Matrix-level entry points; `anchor_items` empty means every item.
DifResult mantel_haenszel(const ResponseMatrix& matrix, const GroupSplit& split,
                          const std::vector<std::string>& anchor_items = {},
                          const DifOptions& options = {});
DifResult logistic_dif(const ResponseMatrix& matrix, const GroupSplit& split,
                       const std::vector<std::string>& anchor_items = {},
                       const DifOptions& options = {});
DifResult lords_chi2(const ResponseMatrix& matrix, const GroupSplit& split,
                     const std::vector<std::string>& anchor_items = {},
                     const DifOptions& options = {});

struct PurificationTrace {
    Method method = Method::mantel_haenszel;
    std::vector<std::vector<std::string>> flagged_per_round;
    bool stabilized = false;
    bool cycled = false;
    bool anchors_exhausted = false;
};

struct SynthesisRow {
    std::string item;
    int votes = 0;
    bool dif = false;
};

struct DifAnalysis {
    std::string reference_label;
    std::string focal_label;
    std::vector<DifResult> results;
    std::vector<PurificationTrace> traces;
    std::vector<SynthesisRow> synthesis;
};

DifAnalysis purify_and_synthesize(const Matrix& y, const std::vector<int>& group,
                                  const std::vector<std::string>& items,
                                  const std::vector<Method>& methods, const DifOptions& options = {});
DifAnalysis purify_and_synthesize(const ResponseMatrix& matrix, const GroupSplit& split,
                                  const std::vector<Method>& methods, const DifOptions& options = {});

std::string to_string(Method m);
std::string to_string(EffectClass c);
Method parse_method(const std::string& s);

}  // namespace psychkit::dif

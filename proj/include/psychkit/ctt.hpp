#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psychkit/dataset.hpp"

namespace psychkit::ctt {

// Item screening thresholds.
inline constexpr double kTooEasy = 0.85;
inline constexpr double kTooHard = 0.25;
inline constexpr double kMinPointBiserial = 0.2;

enum class ItemFlag { ok, too_easy, too_hard, low_discrimination };
enum class Reliability { high, moderate, low };

struct ItemStatistics {
    std::string item;
    double difficulty_index = 0.0;
    /// Correlation with the total including the item. Reported as 0 for
    /// constant columns, with `zero_variance` set.
    double point_biserial = 0.0;
    /// Correlation with the total of the remaining items.
    double point_biserial_corrected = 0.0;
    /// Alpha of the scale without this item; empty when fewer than two
    /// items would remain or the reduced total is constant.
    std::optional<double> drop_alpha;
    ItemFlag flag = ItemFlag::ok;
    bool zero_variance = false;
};

struct ScaleReliability {
    double alpha = 0.0;
    Index n_items = 0;
    Reliability interpretation = Reliability::low;
};

struct ItemAnalysis {
    std::vector<ItemStatistics> items;
    ScaleReliability reliability;
};

/// Coefficient alpha with population variances.
double cronbach_alpha(const Matrix& scores);
ItemFlag classify_item(double difficulty_index, double point_biserial);
Reliability interpret_alpha(double alpha);

ItemAnalysis item_analysis(const ResponseMatrix& matrix);

/// Skewness/kurtosis estimators.
///  moment:   g1 = m3/m2^1.5, g2 = m4/m2^2 - 3
///  adjusted: G1, G2 (the bias-adjusted sample estimators)
///  scaled:   b1 = g1((n-1)/n)^1.5, b2 = (g2+3)(1-1/n)^2 - 3
enum class MomentEstimator { moment, adjusted, scaled };

struct Descriptives {
    Index n = 0;
    double mean = 0.0;
    double sem = 0.0;
    double sd = 0.0;
    double skew = 0.0;
    double kurtosis = 0.0;
    double min = 0.0;
    double max = 0.0;
};

Descriptives descriptives(std::span<const double> scores,
                          MomentEstimator estimator = MomentEstimator::scaled);

struct NormRow {
    int score = 0;
    double z = 0.0;
    int percentile = 0;
};

struct NormTable {
    double mean = 0.0;
    double sd = 0.0;
    std::vector<NormRow> rows;
};

/// z uses the sample standard deviation; percentile is round(100 P(X <= s)).
NormTable norm_table(std::span<const double> scores, int max_score);

std::string to_string(ItemFlag flag);
std::string to_string(Reliability r);
std::string to_string(MomentEstimator e);

}  // namespace psychkit::ctt

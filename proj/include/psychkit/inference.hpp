#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psychkit::inference {

using Sample = std::vector<double>;

struct TestResult {
    std::string label;
    double statistic = 0.0;
    double df1 = 0.0;
    std::optional<double> df2;
    double p_value = 1.0;
    std::optional<double> p_adjusted;
    /// Mean difference (first minus second) for pairwise comparisons.
    std::optional<double> difference;
    std::optional<double> effect_size;
    std::string effect_label;
};

TestResult one_way_anova(std::span<const Sample> groups);

/// Sequential (type I) sums of squares: A, then B given A, then A x B.
std::vector<TestResult> two_way_anova(std::span<const double> scores,
                                      std::span<const std::string> factor_a,
                                      std::span<const std::string> factor_b);

/// Pairwise Dunn z tests on pooled mid-ranks with the tie-corrected variance.
/// Pairs are (i, j) for i < j in input order; p-values are two-sided and BH
/// adjusted across all pairs. `labels` names the groups in the result labels.
std::vector<TestResult> dunn_test(std::span<const Sample> groups,
                                  std::span<const std::string> labels = {});

std::vector<double> benjamini_hochberg(std::span<const double> p_values);

double cohens_d(std::span<const double> a, std::span<const double> b);
double cohens_d(double mean_a, double sd_a, double n_a, double mean_b, double sd_b, double n_b);

struct MinimumDetectableEffect {
    /// (z_{1-alpha/2} + z_power) sqrt(1/n1 + 1/n2); present for two groups.
    std::optional<double> two_group_d;
    /// 2f where f solves the noncentral-F power equation for k groups.
    double anova_d = 0.0;
    double anova_f = 0.0;
};

MinimumDetectableEffect min_detectable_effect(std::span<const double> group_sizes,
                                              double alpha = 0.05, double power = 0.8);
/// Power of the one-way ANOVA F test at effect size f.
double anova_power(double f, double k, double n_total, double alpha);

}  // namespace psychkit::inference

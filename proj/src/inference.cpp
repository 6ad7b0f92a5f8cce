#include "psychkit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "psychkit/distributions.hpp"
#include "psychkit/error.hpp"
#include "psychkit/linalg.hpp"

namespace psychkit::inference {
namespace {

constexpr const char* kModule = "inference";

double sum(std::span<const double> xs) { return std::accumulate(xs.begin(), xs.end(), 0.0); }

double sample_mean(std::span<const double> xs) { return sum(xs) / static_cast<double>(xs.size()); }

double sample_var(std::span<const double> xs) {
    const double m = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

double residual_ss(const Matrix& design, const Vector& y) {
    const Eigen::ColPivHouseholderQR<Matrix> qr(design);
    const Vector beta = qr.solve(y);
    return (y - design * beta).squaredNorm();
}

std::vector<std::string> sorted_levels(std::span<const std::string> factor) {
    std::vector<std::string> levels(factor.begin(), factor.end());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

}  // namespace

TestResult one_way_anova(std::span<const Sample> groups) {
    if (groups.size() < 2) throw Error(kModule, "ANOVA needs at least two groups");
    double grand = 0.0;
    double n_total = 0.0;
    for (const auto& g : groups) {
        if (g.empty()) throw Error(kModule, "ANOVA group of size zero");
        if (g.size() < 2) throw Error(kModule, "ANOVA groups need at least two observations");
        grand += sum(g);
        n_total += static_cast<double>(g.size());
    }
    grand /= n_total;
    double ssb = 0.0;
    double ssw = 0.0;
    for (const auto& g : groups) {
        const double m = sample_mean(g);
        ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double x : g) ssw += (x - m) * (x - m);
    }
    const double k = static_cast<double>(groups.size());
    TestResult r;
    r.label = "one-way ANOVA";
    r.df1 = k - 1.0;
    r.df2 = n_total - k;
    const double scale = std::max(1.0, ssb + ssw);
    if (ssw <= 1e-14 * scale) {
        if (ssb <= 1e-14 * scale) throw Error(kModule, "all observations identical; F undefined");
        r.statistic = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
    } else {
        r.statistic = (ssb / r.df1) / (ssw / *r.df2);
        r.p_value = dist::f_sf(r.statistic, r.df1, *r.df2);
    }
    r.effect_size = ssb / (ssb + ssw);
    r.effect_label = "eta_squared";
    return r;
}

std::vector<TestResult> two_way_anova(std::span<const double> scores,
                                      std::span<const std::string> factor_a,
                                      std::span<const std::string> factor_b) {
    const std::size_t n = scores.size();
    if (factor_a.size() != n || factor_b.size() != n)
        throw Error(kModule, "two-way ANOVA inputs differ in length");
    const auto levels_a = sorted_levels(factor_a);
    const auto levels_b = sorted_levels(factor_b);
    const Index na = static_cast<Index>(levels_a.size());
    const Index nb = static_cast<Index>(levels_b.size());
    if (na < 2 || nb < 2) throw Error(kModule, "both factors need at least two levels");

    std::vector<Index> ia(n), ib(n);
    std::map<std::pair<Index, Index>, std::size_t> cell_counts;
    for (std::size_t i = 0; i < n; ++i) {
        ia[i] = std::lower_bound(levels_a.begin(), levels_a.end(), factor_a[i]) - levels_a.begin();
        ib[i] = std::lower_bound(levels_b.begin(), levels_b.end(), factor_b[i]) - levels_b.begin();
        ++cell_counts[{ia[i], ib[i]}];
    }
    for (Index a = 0; a < na; ++a)
        for (Index b = 0; b < nb; ++b)
            if (!cell_counts.count({a, b}))
                throw Error(kModule, "empty cell " + levels_a[static_cast<std::size_t>(a)] + " x " +
                                         levels_b[static_cast<std::size_t>(b)]);

    // Treatment-coded design: intercept | A | B | A x B.
    const Index pa = na - 1;
    const Index pb = nb - 1;
    const Index p_full = 1 + pa + pb + pa * pb;
    Matrix design = Matrix::Zero(static_cast<Index>(n), p_full);
    Vector y(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Index r = static_cast<Index>(i);
        y(r) = scores[i];
        design(r, 0) = 1.0;
        if (ia[i] > 0) design(r, ia[i]) = 1.0;
        if (ib[i] > 0) design(r, pa + ib[i]) = 1.0;
        if (ia[i] > 0 && ib[i] > 0) design(r, 1 + pa + pb + (ia[i] - 1) * pb + (ib[i] - 1)) = 1.0;
    }
    const double rss0 = residual_ss(design.leftCols(1), y);
    const double rss_a = residual_ss(design.leftCols(1 + pa), y);
    const double rss_ab = residual_ss(design.leftCols(1 + pa + pb), y);
    const double rss_full = residual_ss(design, y);
    const double df_resid = static_cast<double>(n) - static_cast<double>(na * nb);
    if (df_resid <= 0.0) throw Error(kModule, "no residual degrees of freedom");
    if (rss_full <= 1e-14 * std::max(1.0, rss0))
        throw Error(kModule, "zero residual variance; F undefined");
    const double mse = rss_full / df_resid;

    auto term = [&](std::string label, double ss, double df) {
        TestResult r;
        r.label = std::move(label);
        r.statistic = std::max(0.0, ss) / df / mse;
        r.df1 = df;
        r.df2 = df_resid;
        r.p_value = dist::f_sf(r.statistic, df, df_resid);
        r.effect_size = std::max(0.0, ss) / (std::max(0.0, ss) + rss_full);
        r.effect_label = "partial_eta_squared (type I SS)";
        return r;
    };
    return {term("A", rss0 - rss_a, static_cast<double>(pa)),
            term("B", rss_a - rss_ab, static_cast<double>(pb)),
            term("A:B", rss_ab - rss_full, static_cast<double>(pa * pb))};
}

std::vector<TestResult> dunn_test(std::span<const Sample> groups,
                                  std::span<const std::string> labels) {
    if (groups.size() < 2) throw Error(kModule, "Dunn's test needs at least two groups");
    if (!labels.empty() && labels.size() != groups.size())
        throw Error(kModule, "one label per group is required");
    struct Obs {
        double value;
        std::size_t group;
    };
    std::vector<Obs> pooled;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw Error(kModule, "Dunn's test group of size zero");
        for (double x : groups[g]) pooled.push_back({x, g});
    }
    std::sort(pooled.begin(), pooled.end(),
              [](const Obs& a, const Obs& b) { return a.value < b.value; });
    const double n = static_cast<double>(pooled.size());
    std::vector<double> rank_sum(groups.size(), 0.0);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].value == pooled[i].value) ++j;
        const double t = static_cast<double>(j - i);
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank_sum[pooled[k].group] += mid_rank;
        tie_term += t * t * t - t;
        i = j;
    }
    const double variance_unit = n * (n + 1.0) / 12.0 - tie_term / (12.0 * (n - 1.0));

    std::vector<TestResult> out;
    std::vector<double> pvals;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            const double ni = static_cast<double>(groups[i].size());
            const double nj = static_cast<double>(groups[j].size());
            TestResult r;
            r.label = labels.empty() ? std::to_string(i) + " vs " + std::to_string(j)
                                     : labels[i] + " vs " + labels[j];
            const double se = std::sqrt(variance_unit * (1.0 / ni + 1.0 / nj));
            const double diff = rank_sum[i] / ni - rank_sum[j] / nj;
            r.statistic = se > 0.0 ? diff / se : 0.0;
            r.p_value = std::min(1.0, 2.0 * dist::normal_sf(std::fabs(r.statistic)));
            r.df1 = 0.0;
            r.difference = sample_mean(groups[i]) - sample_mean(groups[j]);
            if (groups[i].size() >= 2 && groups[j].size() >= 2) {
                try {
                    r.effect_size = cohens_d(groups[i], groups[j]);
                    r.effect_label = "cohens_d";
                } catch (const Error&) {
                }
            }
            pvals.push_back(r.p_value);
            out.push_back(std::move(r));
        }
    }
    const auto adjusted = benjamini_hochberg(pvals);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].p_adjusted = adjusted[i];
    return out;
}

std::vector<double> benjamini_hochberg(std::span<const double> p_values) {
    const std::size_t m = p_values.size();
    for (double p : p_values)
        if (!(p >= 0.0 && p <= 1.0)) throw Error(kModule, "p-values must lie in [0, 1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t idx = order[r];
        running = std::min(running, p_values[idx] * static_cast<double>(m) / static_cast<double>(r + 1));
        adjusted[idx] = std::min(1.0, running);
    }
    return adjusted;
}

double cohens_d(double mean_a, double sd_a, double n_a, double mean_b, double sd_b, double n_b) {
    if (n_a < 2.0 || n_b < 2.0) throw Error(kModule, "Cohen's d needs two observations per group");
    const double pooled =
        ((n_a - 1.0) * sd_a * sd_a + (n_b - 1.0) * sd_b * sd_b) / (n_a + n_b - 2.0);
    if (pooled <= 0.0) throw Error(kModule, "zero pooled variance; Cohen's d undefined");
    return (mean_a - mean_b) / std::sqrt(pooled);
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw Error(kModule, "Cohen's d needs two observations per group");
    return cohens_d(sample_mean(a), std::sqrt(sample_var(a)), static_cast<double>(a.size()),
                    sample_mean(b), std::sqrt(sample_var(b)), static_cast<double>(b.size()));
}

double anova_power(double f, double k, double n_total, double alpha) {
    const double df1 = k - 1.0;
    const double df2 = n_total - k;
    const double critical = dist::f_isf(alpha, df1, df2);
    return 1.0 - dist::noncentral_f_cdf(critical, df1, df2, f * f * n_total);
}

MinimumDetectableEffect min_detectable_effect(std::span<const double> group_sizes, double alpha,
                                              double power) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(kModule, "alpha must lie in (0, 1)");
    if (!(power > 0.0 && power < 1.0)) throw Error(kModule, "power must lie in (0, 1)");
    if (group_sizes.size() < 2) throw Error(kModule, "need at least two groups");
    for (double n : group_sizes)
        if (n < 2.0) throw Error(kModule, "group size below 2");
    MinimumDetectableEffect out;
    if (group_sizes.size() == 2) {
        const double z = dist::normal_quantile(1.0 - alpha / 2.0) + dist::normal_quantile(power);
        out.two_group_d = z * std::sqrt(1.0 / group_sizes[0] + 1.0 / group_sizes[1]);
    }
    const double k = static_cast<double>(group_sizes.size());
    const double n_total = sum(group_sizes);
    double lo = 0.0;
    double hi = 1.0;
    while (anova_power(hi, k, n_total, alpha) < power) hi *= 2.0;
    for (int i = 0; i < 100 && hi - lo > 1e-10; ++i) {
        const double mid = 0.5 * (lo + hi);
        (anova_power(mid, k, n_total, alpha) < power ? lo : hi) = mid;
    }
    out.anova_f = 0.5 * (lo + hi);
    out.anova_d = 2.0 * out.anova_f;
    return out;
}

}  // namespace psychkit::inference

#include "psychkit/ctt.hpp"

#include <algorithm>
#include <cmath>

#include "psychkit/error.hpp"

namespace psychkit::ctt {
namespace {

constexpr const char* kModule = "ctt";

Vector as_vector(std::span<const double> xs) {
    return Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
}

}  // namespace

double cronbach_alpha(const Matrix& scores) {
    const Index k = scores.cols();
    if (k < 2) throw Error(kModule, "alpha needs at least two items");
    const Vector total = scores.rowwise().sum();
    const double total_var = variance(total);
    if (total_var <= 0.0) throw Error(kModule, "total score has zero variance; alpha undefined");
    double item_var = 0.0;
    for (Index j = 0; j < k; ++j) item_var += variance(scores.col(j));
    const double kd = static_cast<double>(k);
    return kd / (kd - 1.0) * (1.0 - item_var / total_var);
}

ItemFlag classify_item(double difficulty_index, double point_biserial) {
    if (difficulty_index > kTooEasy) return ItemFlag::too_easy;
    if (difficulty_index < kTooHard) return ItemFlag::too_hard;
    if (point_biserial < kMinPointBiserial) return ItemFlag::low_discrimination;
    return ItemFlag::ok;
}

Reliability interpret_alpha(double alpha) {
    if (alpha > 0.7) return Reliability::high;
    if (alpha > 0.5) return Reliability::moderate;
    return Reliability::low;
}

ItemAnalysis item_analysis(const ResponseMatrix& matrix) {
    const Index n = matrix.n_students();
    const Index k = matrix.n_items();
    if (k < 2) throw Error(kModule, "item analysis needs at least two items");
    if (n < 2) throw Error(kModule, "item analysis needs at least two students");
    const Matrix& x = matrix.scores();

    ItemAnalysis out;
    out.reliability.alpha = cronbach_alpha(x);
    out.reliability.n_items = k;
    out.reliability.interpretation = interpret_alpha(out.reliability.alpha);

    const Vector total = x.rowwise().sum();
    for (Index j = 0; j < k; ++j) {
        ItemStatistics s;
        s.item = matrix.items()[static_cast<std::size_t>(j)];
        s.difficulty_index = x.col(j).sum() / static_cast<double>(n);
        const Vector rest = total - x.col(j);
        const double r = pearson(x.col(j), total);
        const double rc = pearson(x.col(j), rest);
        s.zero_variance = std::isnan(r);
        s.point_biserial = std::isnan(r) ? 0.0 : r;
        s.point_biserial_corrected = std::isnan(rc) ? 0.0 : rc;
        if (k - 1 >= 2 && variance(rest) > 0.0) {
            Matrix reduced(n, k - 1);
            reduced << x.leftCols(j), x.rightCols(k - j - 1);
            s.drop_alpha = cronbach_alpha(reduced);
        }
        s.flag = classify_item(s.difficulty_index, s.point_biserial);
        out.items.push_back(std::move(s));
    }
    return out;
}

Descriptives descriptives(std::span<const double> scores, MomentEstimator estimator) {
    if (scores.size() < 2) throw Error(kModule, "descriptives need at least two scores");
    const Vector x = as_vector(scores);
    Descriptives d;
    d.n = x.size();
    const double n = static_cast<double>(d.n);
    d.mean = mean(x);
    d.sd = std::sqrt(variance(x, 1));
    d.sem = d.sd / std::sqrt(n);
    d.min = x.minCoeff();
    d.max = x.maxCoeff();
    const Eigen::ArrayXd dev = x.array() - d.mean;
    const double m2 = dev.square().mean();
    const double m3 = dev.cube().mean();
    const double m4 = dev.square().square().mean();
    if (m2 <= 0.0) throw Error(kModule, "zero variance; skew and kurtosis undefined");
    const double g1 = m3 / std::pow(m2, 1.5);
    const double g2 = m4 / (m2 * m2) - 3.0;
    switch (estimator) {
        case MomentEstimator::moment:
            d.skew = g1;
            d.kurtosis = g2;
            break;
        case MomentEstimator::adjusted:
            if (d.n < 4) throw Error(kModule, "adjusted kurtosis needs n >= 4");
            d.skew = g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
            d.kurtosis = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
            break;
        case MomentEstimator::scaled:
            d.skew = g1 * std::pow((n - 1.0) / n, 1.5);
            d.kurtosis = (g2 + 3.0) * std::pow(1.0 - 1.0 / n, 2) - 3.0;
            break;
    }
    return d;
}

NormTable norm_table(std::span<const double> scores, int max_score) {
    if (scores.size() < 2) throw Error(kModule, "norm table needs at least two scores");
    if (max_score < 0) throw Error(kModule, "max_score must be non-negative");
    const Vector x = as_vector(scores);
    NormTable t;
    t.mean = mean(x);
    t.sd = std::sqrt(variance(x, 1));
    if (t.sd <= 0.0) throw Error(kModule, "zero variance; norm table undefined");
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    for (int s = 0; s <= max_score; ++s) {
        const auto at_or_below =
            std::upper_bound(sorted.begin(), sorted.end(), static_cast<double>(s)) - sorted.begin();
        NormRow row;
        row.score = s;
        row.z = (s - t.mean) / t.sd;
        row.percentile = static_cast<int>(std::lround(100.0 * static_cast<double>(at_or_below) / n));
        t.rows.push_back(row);
    }
    return t;
}

std::string to_string(ItemFlag flag) {
    switch (flag) {
        case ItemFlag::ok: return "ok";
        case ItemFlag::too_easy: return "too_easy";
        case ItemFlag::too_hard: return "too_hard";
        case ItemFlag::low_discrimination: return "low_discrimination";
    }
    return "?";
}

std::string to_string(Reliability r) {
    switch (r) {
        case Reliability::high: return "high";
        case Reliability::moderate: return "moderate";
        case Reliability::low: return "low";
    }
    return "?";
}

std::string to_string(MomentEstimator e) {
    switch (e) {
        case MomentEstimator::moment: return "moment";
        case MomentEstimator::adjusted: return "adjusted";
        case MomentEstimator::scaled: return "scaled";
    }
    return "?";
}

}  // namespace psychkit::ctt

#include "psychkit/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "psychkit/error.hpp"

namespace psychkit::dist {
namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

double gamma_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_continued_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_continued_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw Error("distributions", "invalid incomplete gamma arguments");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_series(a, x);
    return 1.0 - gamma_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw Error("distributions", "invalid incomplete gamma arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_series(a, x);
    return gamma_continued_fraction(a, x);
}

double regularized_beta(double x, double a, double b) {
    if (a <= 0.0 || b <= 0.0 || x < 0.0 || x > 1.0)
        throw Error("distributions", "invalid incomplete beta arguments");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
    return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_sf(double x) {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw Error("distributions", "normal quantile needs p in [0, 1]");
    }
    // Acklam's rational approximation, then one Halley step.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int i = 0; i < 2; ++i) {
        const double e = (p < 0.5) ? normal_cdf(x) - p : -(normal_sf(x) - (1.0 - p));
        const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double chi2_sf(double x, double df) {
    if (df <= 0.0) throw Error("distributions", "chi-square needs df > 0");
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(0.5 * df, 0.5 * x);
}

double f_cdf(double x, double df1, double df2) {
    if (df1 <= 0.0 || df2 <= 0.0) throw Error("distributions", "F needs positive df");
    if (x <= 0.0) return 0.0;
    return regularized_beta(df1 * x / (df1 * x + df2), 0.5 * df1, 0.5 * df2);
}

double f_sf(double x, double df1, double df2) {
    if (df1 <= 0.0 || df2 <= 0.0) throw Error("distributions", "F needs positive df");
    if (x <= 0.0) return 1.0;
    return regularized_beta(df2 / (df2 + df1 * x), 0.5 * df2, 0.5 * df1);
}

double noncentral_f_cdf(double x, double df1, double df2, double lambda) {
    if (lambda < 0.0) throw Error("distributions", "noncentrality must be non-negative");
    if (lambda == 0.0) return f_cdf(x, df1, df2);
    if (x <= 0.0) return 0.0;
    const double y = df1 * x / (df1 * x + df2);
    const double half = 0.5 * lambda;
    // Poisson mixture of central beta terms, summed outward from the mode.
    const int mode = static_cast<int>(std::floor(half));
    auto weight = [&](int j) {
        return std::exp(-half + j * std::log(half) - std::lgamma(j + 1.0));
    };
    double total = 0.0;
    for (int j = mode; j < mode + 100000; ++j) {
        const double w = weight(j);
        total += w * regularized_beta(y, 0.5 * df1 + j, 0.5 * df2);
        if (j > mode && w < 1e-17) break;
    }
    for (int j = mode - 1; j >= 0; --j) {
        const double w = weight(j);
        total += w * regularized_beta(y, 0.5 * df1 + j, 0.5 * df2);
        if (w < 1e-17) break;
    }
    return std::min(1.0, total);
}

double f_isf(double p, double df1, double df2) {
    if (!(p > 0.0 && p < 1.0)) throw Error("distributions", "F quantile needs p in (0, 1)");
    double lo = 0.0;
    double hi = 1.0;
    while (f_sf(hi, df1, df2) > p) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f_sf(mid, df1, df2) > p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace psychkit::dist

#include "psychkit/dif.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "psychkit/distributions.hpp"
#include "psychkit/error.hpp"
#include "psychkit/inference.hpp"

namespace psychkit::dif {
namespace {

constexpr const char* kModule = "dif";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::set<std::string>& values) {
    std::string out;
    for (const auto& v : values) {
        if (!out.empty()) out += "+";
        out += v;
    }
    return out;
}

void check_groups(const std::vector<int>& group, Index n_rows) {
    if (static_cast<Index>(group.size()) != n_rows)
        throw Error(kModule, "group vector length does not match the response rows");
    const auto n_ref = std::count(group.begin(), group.end(), 0);
    const auto n_foc = std::count(group.begin(), group.end(), 1);
    if (n_ref == 0 || n_foc == 0) throw Error(kModule, "both groups must have at least one student");
}

void check_anchors(const std::vector<bool>& anchors, Index k) {
    if (static_cast<Index>(anchors.size()) != k) throw Error(kModule, "anchor mask length mismatch");
    if (std::none_of(anchors.begin(), anchors.end(), [](bool b) { return b; }))
        throw Error(kModule, "anchor set is empty");
}

// Matching score for the studied item: anchor total, with the studied item
// added or removed according to the options.
Vector matching_score(const Matrix& y, const std::vector<bool>& anchors, Index item,
                      bool include_studied) {
    Vector s = Vector::Zero(y.rows());
    for (Index j = 0; j < y.cols(); ++j)
        if (anchors[j] && j != item) s += y.col(j);
    if (include_studied) s += y.col(item);
    return s;
}

std::vector<bool> anchor_mask(const std::vector<std::string>& items,
                              const std::vector<std::string>& anchor_items) {
    if (anchor_items.empty()) return std::vector<bool>(items.size(), true);
    std::vector<bool> mask(items.size(), false);
    for (const auto& name : anchor_items) {
        const auto it = std::find(items.begin(), items.end(), name);
        if (it == items.end()) throw Error(kModule, "unknown anchor item " + name);
        mask[it - items.begin()] = true;
    }
    return mask;
}

struct LogitFit {
    double log_likelihood = 0.0;
    bool ok = false;
};

// Binary logistic regression by IRLS with step halving.
LogitFit fit_logit(const Matrix& x, const Vector& y) {
    const Index p = x.cols();
    Vector beta = Vector::Zero(p);
    auto loglik = [&](const Vector& b) {
        const Eigen::ArrayXd eta = (x * b).array();
        double ll = 0.0;
        for (Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
        return ll;
    };
    double ll = loglik(beta);
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::ArrayXd mu = psychkit::logistic((x * beta).array()).eval();
        const Eigen::ArrayXd w = (mu * (1.0 - mu)).max(1e-12);
        const Matrix info = x.transpose() * (x.array().colwise() * w).matrix();
        const Vector score = x.transpose() * (y.array() - mu).matrix();
        const Eigen::LDLT<Matrix> ldlt(info);
        if (ldlt.info() != Eigen::Success) return {ll, false};
        const Vector step = ldlt.solve(score);
        double t = 1.0;
        Vector next = beta + step;
        double ll_next = loglik(next);
        while (ll_next < ll - 1e-12 && t > 1e-6) {
            t *= 0.5;
            next = beta + t * step;
            ll_next = loglik(next);
        }
        const double change = ll_next - ll;
        beta = next;
        ll = ll_next;
        if (beta.cwiseAbs().maxCoeff() > 30.0) return {ll, false};
        if (std::abs(change) < 1e-10 * (1.0 + std::abs(ll)) && step.cwiseAbs().maxCoeff() < 1e-6)
            return {ll, true};
    }
    return {ll, false};
}

double nagelkerke(double ll_null, double ll_model, double n) {
    const double num = 1.0 - std::exp((2.0 / n) * (ll_null - ll_model));
    const double den = 1.0 - std::exp((2.0 / n) * ll_null);
    return num / den;
}

struct GroupRows {
    std::vector<Index> reference;
    std::vector<Index> focal;
};

GroupRows split_rows(const std::vector<int>& group) {
    GroupRows rows;
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (group[i] == 0) rows.reference.push_back(static_cast<Index>(i));
        if (group[i] == 1) rows.focal.push_back(static_cast<Index>(i));
    }
    return rows;
}

Matrix take_rows(const Matrix& y, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), y.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = y.row(rows[i]);
    return out;
}

struct MatrixInputs {
    Groups groups;
    std::vector<bool> anchors;
};

MatrixInputs prepare(const ResponseMatrix& matrix, const GroupSplit& split,
                     const std::vector<std::string>& anchor_items) {
    MatrixInputs in{resolve_groups(matrix, split), anchor_mask(matrix.items(), anchor_items)};
    return in;
}

}  // namespace

Groups resolve_groups(const ResponseMatrix& matrix, const GroupSplit& split) {
    if (!matrix.has_column(split.column)) throw Error(kModule, "unknown group column " + split.column);
    std::set<std::string> reference = split.reference;
    std::set<std::string> focal = split.focal;
    const auto levels = matrix.group_levels(split.column);
    if (reference.empty() && focal.empty()) {
        if (levels.size() != 2)
            throw Error(kModule, "column " + split.column + " has " + std::to_string(levels.size()) +
                                     " levels; DIF needs exactly two groups");
        reference = {levels[0]};
        focal = {levels[1]};
    } else if (reference.empty()) {
        for (const auto& l : levels)
            if (!focal.count(l)) reference.insert(l);
    } else if (focal.empty()) {
        for (const auto& l : levels)
            if (!reference.count(l)) focal.insert(l);
    }
    for (const auto& v : reference)
        if (focal.count(v)) throw Error(kModule, "value " + v + " is in both groups");

    Groups g;
    g.reference_label = join(reference);
    g.focal_label = join(focal);
    g.membership.resize(static_cast<std::size_t>(matrix.n_students()), -1);
    for (Index i = 0; i < matrix.n_students(); ++i) {
        const auto v = matrix.group_value(i, split.column);
        if (reference.count(v)) g.membership[i] = 0;
        else if (focal.count(v)) g.membership[i] = 1;
    }
    check_groups(g.membership, matrix.n_students());
    return g;
}

EffectClass ets_delta_class(double delta) {
    const double d = std::abs(delta);
    if (d <= 1.0) return EffectClass::negligible;
    if (d < 1.5) return EffectClass::moderate;
    return EffectClass::large;
}

EffectClass jodoin_gierl_class(double delta_r2) {
    if (delta_r2 < 0.035) return EffectClass::negligible;
    if (delta_r2 < 0.07) return EffectClass::moderate;
    return EffectClass::large;
}

void adjust_and_flag(DifResult& result, double alpha) {
    std::vector<double> p;
    std::vector<std::size_t> where;
    for (std::size_t j = 0; j < result.items.size(); ++j) {
        if (std::isfinite(result.items[j].p_value)) {
            p.push_back(result.items[j].p_value);
            where.push_back(j);
        }
        result.items[j].p_adjusted = kNaN;
        result.items[j].flagged = false;
    }
    if (p.empty()) return;
    const auto adj = inference::benjamini_hochberg(p);
    for (std::size_t i = 0; i < where.size(); ++i) {
        auto& item = result.items[where[i]];
        item.p_adjusted = adj[i];
        item.flagged = adj[i] < alpha;
    }
}

DifResult mantel_haenszel(const Matrix& y, const std::vector<int>& group,
                          const std::vector<bool>& anchors, const std::vector<std::string>& items,
                          const DifOptions& options) {
    check_groups(group, y.rows());
    check_anchors(anchors, y.cols());
    DifResult result;
    result.method = Method::mantel_haenszel;
    for (Index j = 0; j < y.cols(); ++j) {
        ItemDif out;
        out.item = items[j];
        out.df = 1.0;
        const Vector s = matching_score(y, anchors, j, options.include_studied_item);
        // stratum -> {A, B, C, D}: reference right/wrong, focal right/wrong
        std::map<long, std::array<double, 4>> strata;
        for (Index i = 0; i < y.rows(); ++i) {
            if (group[i] < 0) continue;
            auto& cell = strata[std::lround(s(i))];
            const bool right = y(i, j) > 0.5;
            cell[(group[i] == 0 ? 0 : 2) + (right ? 0 : 1)] += 1.0;
        }
        double num = 0.0, den = 0.0, sum_a = 0.0, sum_e = 0.0, sum_v = 0.0;
        for (const auto& [score, c] : strata) {
            const double a = c[0], b = c[1], cc = c[2], d = c[3];
            const double t = a + b + cc + d;
            const double n_r = a + b, n_f = cc + d, m1 = a + cc, m0 = b + d;
            if (t < 2.0 || n_r == 0.0 || n_f == 0.0) continue;
            num += a * d / t;
            den += b * cc / t;
            if (m1 == 0.0 || m0 == 0.0) continue;
            sum_a += a;
            sum_e += n_r * m1 / t;
            sum_v += n_r * n_f * m1 * m0 / (t * t * (t - 1.0));
        }
        if (sum_v > 0.0) {
            const double dev = std::max(0.0, std::abs(sum_a - sum_e) - 0.5);
            out.statistic = dev * dev / sum_v;
            out.p_value = dist::chi2_sf(out.statistic, 1.0);
        } else {
            out.note = "all strata degenerate";
        }
        if (num > 0.0 && den > 0.0) {
            out.odds_ratio = num / den;
            out.effect_size = -2.35 * std::log(*out.odds_ratio);
            out.effect_class = ets_delta_class(*out.effect_size);
        } else if (out.note.empty()) {
            out.note = "common odds ratio undefined";
        }
        result.items.push_back(std::move(out));
    }
    adjust_and_flag(result, options.alpha);
    return result;
}

DifResult logistic_dif(const Matrix& y, const std::vector<int>& group,
                       const std::vector<bool>& anchors, const std::vector<std::string>& items,
                       const DifOptions& options) {
    check_groups(group, y.rows());
    check_anchors(anchors, y.cols());
    DifResult result;
    result.method = Method::logistic;

    std::vector<Index> rows;
    for (std::size_t i = 0; i < group.size(); ++i)
        if (group[i] >= 0) rows.push_back(static_cast<Index>(i));
    const Index n = static_cast<Index>(rows.size());
    Vector g(n);
    for (Index r = 0; r < n; ++r) g(r) = group[rows[r]];

    for (Index j = 0; j < y.cols(); ++j) {
        ItemDif out;
        out.item = items[j];
        out.df = 2.0;
        Vector resp(n);
        for (Index r = 0; r < n; ++r) resp(r) = y(rows[r], j);

        std::string zero_var;
        for (int grp = 0; grp < 2; ++grp) {
            double count = 0.0, right = 0.0;
            for (Index r = 0; r < n; ++r)
                if (g(r) == grp) {
                    count += 1.0;
                    right += resp(r);
                }
            if (right == 0.0 || right == count)
                zero_var = grp == 0 ? "reference" : "focal";
        }
        if (!zero_var.empty()) {
            out.note = "zero variance in the " + zero_var + " group";
            result.items.push_back(std::move(out));
            continue;
        }

        const Vector full = matching_score(y, anchors, j, options.include_studied_item);
        Vector s(n);
        for (Index r = 0; r < n; ++r) s(r) = full(rows[r]);
        const double sd = std::sqrt(variance(s));
        s = (s.array() - mean(s)).matrix();
        if (sd > 0.0) s /= sd;

        Matrix x1(n, 4);
        x1.col(0).setOnes();
        x1.col(1) = s;
        x1.col(2) = g;
        x1.col(3) = g.cwiseProduct(s);
        const LogitFit m0 = fit_logit(x1.leftCols(2), resp);
        const LogitFit m1 = fit_logit(x1, resp);
        if (!m0.ok || !m1.ok) {
            out.note = "separation: logistic fit diverged";
            result.items.push_back(std::move(out));
            continue;
        }
        const double p = mean(resp);
        const double ll_null = static_cast<double>(n) * (p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
        out.statistic = std::max(0.0, 2.0 * (m1.log_likelihood - m0.log_likelihood));
        out.p_value = dist::chi2_sf(out.statistic, 2.0);
        const double nn = static_cast<double>(n);
        out.effect_size = nagelkerke(ll_null, m1.log_likelihood, nn) -
                          nagelkerke(ll_null, m0.log_likelihood, nn);
        out.effect_class = jodoin_gierl_class(*out.effect_size);
        result.items.push_back(std::move(out));
    }
    adjust_and_flag(result, options.alpha);
    return result;
}

LordCalibration calibrate_groups(const Matrix& y, const std::vector<int>& group,
                                 const std::vector<std::string>& items, const DifOptions& options) {
    check_groups(group, y.rows());
    const GroupRows rows = split_rows(group);
    const auto min_n = static_cast<std::size_t>(options.lord_min_group_size);
    if (rows.reference.size() < min_n || rows.focal.size() < min_n)
        throw Error(kModule, "Lord's method needs at least " + std::to_string(min_n) +
                                 " students per group (have " + std::to_string(rows.reference.size()) +
                                 " and " + std::to_string(rows.focal.size()) + ")");
    const auto grid = irt::normal_grid(options.quadrature_nodes);
    LordCalibration cal;
    const Matrix y_ref = take_rows(y, rows.reference);
    const Matrix y_foc = take_rows(y, rows.focal);
    cal.reference = irt::fit(y_ref, items, options.lord_model, grid, options.fit);
    if (!cal.reference.converged) throw Error(kModule, "reference-group IRT fit did not converge");
    cal.focal = irt::fit(y_foc, items, options.lord_model, grid, options.fit);
    if (!cal.focal.converged) throw Error(kModule, "focal-group IRT fit did not converge");
    cal.reference_cov = irt::item_covariances(irt::parameter_covariance(y_ref, cal.reference, grid), cal.reference);
    cal.focal_cov = irt::item_covariances(irt::parameter_covariance(y_foc, cal.focal, grid), cal.focal);
    return cal;
}

DifResult lords_chi2(const LordCalibration& cal, const std::vector<bool>& anchors,
                     const DifOptions& options) {
    const Index k = cal.reference.n_items();
    check_anchors(anchors, k);
    DifResult result;
    result.method = Method::lord;

    std::vector<double> b_ref, b_foc;
    for (Index j = 0; j < k; ++j)
        if (anchors[j]) {
            b_ref.push_back(cal.reference.b(j));
            b_foc.push_back(cal.focal.b(j));
        }
    const Eigen::Map<const Vector> br(b_ref.data(), static_cast<Index>(b_ref.size()));
    const Eigen::Map<const Vector> bf(b_foc.data(), static_cast<Index>(b_foc.size()));
    double slope = 1.0;
    if (br.size() >= 2 && variance(bf) > 0.0) slope = std::sqrt(variance(br) / variance(bf));
    const double shift = mean(br) - slope * mean(bf);
    result.equating = "mean/sigma on anchor difficulties: A=" + std::to_string(slope) +
                      " B=" + std::to_string(shift);

    const bool two_pl = cal.reference.kind == irt::ModelKind::two_pl;
    for (Index j = 0; j < k; ++j) {
        ItemDif out;
        out.item = cal.reference.items[j];
        out.df = two_pl ? 2.0 : 1.0;
        Vector diff;
        Matrix sigma;
        if (two_pl) {
            diff = Vector(2);
            diff << cal.reference.a(j) - cal.focal.a(j) / slope,
                cal.reference.b(j) - (slope * cal.focal.b(j) + shift);
            Matrix jac = Matrix::Zero(2, 2);
            jac(0, 0) = 1.0 / slope;
            jac(1, 1) = slope;
            sigma = cal.reference_cov[j] + jac * cal.focal_cov[j] * jac;
        } else {
            diff = Vector::Constant(1, cal.reference.b(j) - (slope * cal.focal.b(j) + shift));
            sigma = cal.reference_cov[j] + slope * slope * cal.focal_cov[j];
        }
        const Eigen::FullPivLU<Matrix> lu(sigma);
        if (!sigma.allFinite() || !lu.isInvertible()) {
            out.note = "singular combined covariance";
            result.items.push_back(std::move(out));
            continue;
        }
        out.statistic = std::max(0.0, diff.dot(lu.solve(diff)));
        out.p_value = dist::chi2_sf(out.statistic, out.df);
        result.items.push_back(std::move(out));
    }
    adjust_and_flag(result, options.alpha);
    return result;
}

DifResult mantel_haenszel(const ResponseMatrix& matrix, const GroupSplit& split,
                          const std::vector<std::string>& anchor_items, const DifOptions& options) {
    const auto in = prepare(matrix, split, anchor_items);
    return mantel_haenszel(matrix.scores(), in.groups.membership, in.anchors, matrix.items(), options);
}

DifResult logistic_dif(const ResponseMatrix& matrix, const GroupSplit& split,
                       const std::vector<std::string>& anchor_items, const DifOptions& options) {
    const auto in = prepare(matrix, split, anchor_items);
    return logistic_dif(matrix.scores(), in.groups.membership, in.anchors, matrix.items(), options);
}

DifResult lords_chi2(const ResponseMatrix& matrix, const GroupSplit& split,
                     const std::vector<std::string>& anchor_items, const DifOptions& options) {
    const auto in = prepare(matrix, split, anchor_items);
    const auto cal = calibrate_groups(matrix.scores(), in.groups.membership, matrix.items(), options);
    return lords_chi2(cal, in.anchors, options);
}

DifAnalysis purify_and_synthesize(const Matrix& y, const std::vector<int>& group,
                                  const std::vector<std::string>& items,
                                  const std::vector<Method>& methods, const DifOptions& options) {
    check_groups(group, y.rows());
    const Index k = y.cols();
    DifAnalysis analysis;
    for (const Method method : methods) {
        PurificationTrace trace;
        trace.method = method;
        DifResult result;
        result.method = method;
        try {
            std::optional<LordCalibration> cal;
            if (method == Method::lord) cal = calibrate_groups(y, group, items, options);
            auto detect = [&](const std::vector<bool>& anchors) {
                switch (method) {
                    case Method::mantel_haenszel: return mantel_haenszel(y, group, anchors, items, options);
                    case Method::logistic: return logistic_dif(y, group, anchors, items, options);
                    case Method::lord: return lords_chi2(*cal, anchors, options);
                }
                throw Error(kModule, "unknown method");
            };
            std::vector<bool> anchors(static_cast<std::size_t>(k), true);
            std::vector<std::string> removed;  // flag set that defined the current anchors
            for (int round = 0; round < options.max_rounds; ++round) {
                result = detect(anchors);
                std::vector<std::string> flagged;
                for (const auto& it : result.items)
                    if (it.flagged) flagged.push_back(it.item);
                trace.flagged_per_round.push_back(flagged);
                if (flagged == removed) {
                    trace.stabilized = true;
                    break;
                }
                const auto& seen = trace.flagged_per_round;
                if (std::find(seen.begin(), seen.end() - 1, flagged) != seen.end() - 1) {
                    trace.cycled = true;
                    break;
                }
                if (static_cast<Index>(flagged.size()) == k) {
                    trace.anchors_exhausted = true;
                    break;
                }
                for (Index j = 0; j < k; ++j)
                    anchors[j] = std::find(flagged.begin(), flagged.end(), items[j]) == flagged.end();
                removed = flagged;
            }
        } catch (const Error& e) {
            result.items.clear();
            result.error = e.what();
        }
        analysis.results.push_back(std::move(result));
        analysis.traces.push_back(std::move(trace));
    }
    for (Index j = 0; j < k; ++j) {
        SynthesisRow row;
        row.item = items[j];
        for (const auto& r : analysis.results)
            if (!r.items.empty() && r.items[j].flagged) ++row.votes;
        row.dif = row.votes >= 2;
        analysis.synthesis.push_back(row);
    }
    return analysis;
}

DifAnalysis purify_and_synthesize(const ResponseMatrix& matrix, const GroupSplit& split,
                                  const std::vector<Method>& methods, const DifOptions& options) {
    const Groups groups = resolve_groups(matrix, split);
    auto analysis = purify_and_synthesize(matrix.scores(), groups.membership, matrix.items(), methods, options);
    analysis.reference_label = groups.reference_label;
    analysis.focal_label = groups.focal_label;
    return analysis;
}

std::string to_string(Method m) {
    switch (m) {
        case Method::mantel_haenszel: return "mh";
        case Method::logistic: return "logistic";
        case Method::lord: return "lord";
    }
    return "?";
}

std::string to_string(EffectClass c) {
    switch (c) {
        case EffectClass::negligible: return "negligible";
        case EffectClass::moderate: return "moderate";
        case EffectClass::large: return "large";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "mh" || s == "mantel_haenszel") return Method::mantel_haenszel;
    if (s == "logistic" || s == "lr") return Method::logistic;
    if (s == "lord") return Method::lord;
    throw Error(kModule, "unknown DIF method " + s);
}

}  // namespace psychkit::dif

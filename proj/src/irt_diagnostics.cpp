#include <algorithm>
#include <cmath>

#include "psychkit/error.hpp"
#include "psychkit/irt.hpp"

namespace psychkit::irt {
namespace {

constexpr const char* kModule = "irt";

Matrix aligned_responses(const ResponseMatrix& matrix, const IrtModel& model) {
    if (model.items.empty()) throw Error(kModule, "model has no items to score students with");
    Matrix y(matrix.n_students(), model.n_items());
    for (Index j = 0; j < model.n_items(); ++j) {
        const auto& item = model.items[static_cast<std::size_t>(j)];
        if (!matrix.has_item(item))
            throw Error(kModule, "model item " + item + " is not present in the response data");
        y.col(j) = matrix.scores().col(matrix.item_index(item));
    }
    return y;
}

}  // namespace

CurveTable curves(const IrtModel& model, const GridSpec& spec) {
    if (!(spec.step > 0.0) || spec.max < spec.min) throw Error(kModule, "empty theta grid");
    const Index points = static_cast<Index>(std::floor((spec.max - spec.min) / spec.step + 1e-9)) + 1;
    const Index k = model.n_items();
    CurveTable t;
    t.items = model.items;
    t.theta = Vector::LinSpaced(points, spec.min, spec.min + spec.step * static_cast<double>(points - 1));
    t.probability.resize(points, k);
    t.information.resize(points, k);
    for (Index j = 0; j < k; ++j) {
        const Eigen::ArrayXd p = response_probability(t.theta.array(), model.a(j), model.b(j));
        t.probability.col(j) = p.matrix();
        t.information.col(j) = (model.a(j) * model.a(j) * p * (1.0 - p)).matrix();
    }
    t.test_information = t.information.rowwise().sum();
    t.sem = t.test_information.array().rsqrt().matrix();
    t.reliability = (1.0 - t.sem.array().square()).matrix();
    return t;
}

AbilityEstimates eap(const ResponseMatrix& matrix, const IrtModel& model, const QuadratureGrid& grid) {
    AbilityEstimates est = eap(aligned_responses(matrix, model), model, grid);
    for (const auto& rec : matrix.rows()) est.student_ids.push_back(rec.student_id);
    return est;
}

AbilityEstimates eap(const Matrix& y, const IrtModel& model, const QuadratureGrid& grid) {
    if (model.n_items() == 0) throw Error(kModule, "model has no items to score students with");
    if (y.cols() != model.n_items()) throw Error(kModule, "data and model differ in item count");
    Matrix z = model.a * grid.nodes.transpose();
    z.colwise() -= (model.a.array() * model.b.array()).matrix();
    const Eigen::RowVectorXd base =
        (-z.unaryExpr([](double v) { return softplus(v); })).colwise().sum() +
        grid.weights.array().log().matrix().transpose();
    Matrix log_post = y * z;
    log_post.rowwise() += base;

    AbilityEstimates est;
    const Index n = y.rows();
    est.eap.resize(n);
    est.posterior_sd.resize(n);
    for (Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd w = (log_post.row(i).array() - log_post.row(i).maxCoeff()).exp().matrix();
        const double total = w.sum();
        const double m = w.dot(grid.nodes) / total;
        const double m2 = w.dot(grid.nodes.cwiseProduct(grid.nodes)) / total;
        est.eap(i) = m;
        est.posterior_sd(i) = std::sqrt(std::max(0.0, m2 - m * m));
    }
    if (n >= 2) {
        const double v = variance(est.eap);
        est.eap_reliability = v / (v + est.posterior_sd.array().square().mean());
    }
    return est;
}

Q3Result yen_q3(const ResponseMatrix& matrix, const IrtModel& model, const AbilityEstimates& abilities) {
    if (abilities.eap.size() != matrix.n_students())
        throw Error(kModule, "abilities do not match the response data");
    return yen_q3(aligned_responses(matrix, model), model, abilities.eap);
}

Q3Result yen_q3(const Matrix& y, const IrtModel& model, const Vector& theta) {
    const Index k = model.n_items();
    if (y.cols() != k || y.rows() != theta.size())
        throw Error(kModule, "Q3 inputs have inconsistent shapes");
    Matrix resid(y.rows(), k);
    for (Index j = 0; j < k; ++j)
        resid.col(j) = y.col(j) - response_probability(theta.array(), model.a(j), model.b(j)).matrix();
    const Eigen::RowVectorXd centre = resid.colwise().mean();
    resid.rowwise() -= centre;
    const Vector norms = resid.colwise().norm().transpose();
    for (Index j = 0; j < k; ++j)
        if (!(norms(j) > 0.0))
            throw Error(kModule, "residuals of item " + model.items[static_cast<std::size_t>(j)] +
                                     " have zero variance");

    Q3Result out;
    out.items = model.items;
    out.q3 = (resid.transpose() * resid).array() / (norms * norms.transpose()).array();
    for (Index i = 0; i < k; ++i) {
        for (Index j = i + 1; j < k; ++j) {
            const double v = out.q3(i, j);
            out.max_abs = std::max(out.max_abs, std::fabs(v));
            if (std::fabs(v) >= kQ3Good) {
                out.flagged.push_back({model.items[static_cast<std::size_t>(i)],
                                       model.items[static_cast<std::size_t>(j)], v});
                ++(std::fabs(v) < kQ3Acceptable ? out.acceptable : out.poor);
            }
        }
    }
    std::stable_sort(out.flagged.begin(), out.flagged.end(), [](const Q3Pair& l, const Q3Pair& r) {
        return std::fabs(l.q3) > std::fabs(r.q3);
    });
    return out;
}

// Bands are closed on the left.
std::string discrimination_band(double a) {
    if (a < 0.35) return "very low";
    if (a < 0.65) return "low";
    if (a < 1.35) return "moderate";
    if (a < 1.70) return "high";
    return "very high";
}

std::string difficulty_band(double b) {
    if (b < -2.0) return "very easy";
    if (b < -0.5) return "easy";
    if (b < 0.5) return "medium";
    if (b < 2.0) return "hard";
    return "very hard";
}

std::vector<ItemClassification> classify_items(const IrtModel& model) {
    std::vector<ItemClassification> out;
    for (Index j = 0; j < model.n_items(); ++j)
        out.push_back({model.items[static_cast<std::size_t>(j)], discrimination_band(model.a(j)),
                       difficulty_band(model.b(j))});
    return out;
}

WrightMap wright_map_data(const IrtModel& model, const Vector& abilities, double bin_width) {
    if (!(bin_width > 0.0)) throw Error(kModule, "bin width must be positive");
    WrightMap map;
    map.bin_width = bin_width;
    if (abilities.size() > 0) {
        const auto first = static_cast<long>(std::floor(abilities.minCoeff() / bin_width));
        const auto last = static_cast<long>(std::floor(abilities.maxCoeff() / bin_width));
        for (long bin = first; bin <= last; ++bin)
            map.persons.push_back({static_cast<double>(bin) * bin_width,
                                   static_cast<double>(bin + 1) * bin_width, 0});
        for (Index i = 0; i < abilities.size(); ++i) {
            const auto bin = static_cast<long>(std::floor(abilities(i) / bin_width));
            ++map.persons[static_cast<std::size_t>(bin - first)].count;
        }
    }
    for (Index j = 0; j < model.n_items(); ++j)
        map.items.push_back({model.items[static_cast<std::size_t>(j)], model.b(j), model.a(j)});
    return map;
}

UnidimensionalityScreen unidimensionality_screen(const ResponseMatrix& matrix) {
    return unidimensionality_screen(matrix.scores(), matrix.items());
}

UnidimensionalityScreen unidimensionality_screen(const Matrix& y, const std::vector<std::string>& items) {
    const Index k = y.cols();
    if (k < 3) throw Error(kModule, "unidimensionality screen needs at least three items");
    UnidimensionalityScreen out;
    out.correlation = Matrix::Identity(k, k);
    for (Index i = 0; i < k; ++i) {
        for (Index j = i + 1; j < k; ++j) {
            double both = y.col(i).dot(y.col(j));
            double only_i = y.col(i).sum() - both;
            double only_j = y.col(j).sum() - both;
            double neither = static_cast<double>(y.rows()) - both - only_i - only_j;
            if (both == 0.0 || only_i == 0.0 || only_j == 0.0 || neither == 0.0) {
                both += 0.5;
                only_i += 0.5;
                only_j += 0.5;
                neither += 0.5;
                out.clamped_pairs.emplace_back(items[static_cast<std::size_t>(i)],
                                               items[static_cast<std::size_t>(j)]);
            }
            const double r = std::cos(M_PI / (1.0 + std::sqrt(both * neither / (only_i * only_j))));
            out.correlation(i, j) = out.correlation(j, i) = r;
        }
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> solver(out.correlation, Eigen::EigenvaluesOnly);
    out.eigenvalues = solver.eigenvalues().reverse();
    out.ratio = out.eigenvalues(0) / out.eigenvalues(1);
    out.plausibly_unidimensional = out.ratio > 3.0;
    return out;
}

}  // namespace psychkit::irt

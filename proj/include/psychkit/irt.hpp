#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "psychkit/dataset.hpp"
#include "psychkit/linalg.hpp"

namespace psychkit::irt {

enum class ModelKind { one_pl, two_pl };

/// 2PL item characteristic curve a(theta - b) through the logistic.
template <std::floating_point Scalar>
Scalar response_probability(Scalar theta, Scalar a, Scalar b) {
    return psychkit::logistic(a * (theta - b));
}

template <typename Derived>
auto response_probability(const Eigen::ArrayBase<Derived>& theta, typename Derived::Scalar a,
                          typename Derived::Scalar b) {
    return psychkit::logistic((a * (theta - b)).eval()).eval();
}

/// Item information a^2 P (1 - P).
template <std::floating_point Scalar>
Scalar item_information(Scalar theta, Scalar a, Scalar b) {
    const Scalar p = response_probability(theta, a, b);
    return a * a * p * (Scalar(1) - p);
}

/// Discrete standard-normal prior over an equally spaced theta grid.
struct QuadratureGrid {
    Vector nodes;
    Vector weights;
};

QuadratureGrid normal_grid(Index n_nodes = 61, double lo = -6.0, double hi = 6.0);

struct FitOptions {
    double tol = 1e-4;
    int max_iter = 500;
    double min_slope = 0.05;
    double max_slope = 10.0;
    /// Gaussian penalty on slope-intercept parameters; 0 is plain ML.
    double ridge = 0.0;
};

struct IrtModel {
    ModelKind kind = ModelKind::two_pl;
    std::vector<std::string> items;
    Vector a;
    Vector b;
    double log_likelihood = 0.0;
    Index n_params = 0;
    Index n_students = 0;
    bool converged = false;
    int n_iterations = 0;
    /// Marginal log-likelihood at the start of every EM iteration, followed
    /// by the value at the returned parameters.
    std::vector<double> log_likelihood_trace;

    Index n_items() const { return a.size(); }
};

Index parameter_count(ModelKind kind, Index n_items);

/// Bock-Aitkin EM for marginal maximum likelihood.
IrtModel fit(const ResponseMatrix& matrix, ModelKind kind,
             const QuadratureGrid& grid = normal_grid(), const FitOptions& options = {});
IrtModel fit(const Matrix& responses, const std::vector<std::string>& items, ModelKind kind,
             const QuadratureGrid& grid = normal_grid(), const FitOptions& options = {});

/// Marginal log-likelihood of `responses` under the model's parameters.
double marginal_log_likelihood(const Matrix& responses, const IrtModel& model,
                               const QuadratureGrid& grid = normal_grid());

/// Inverse observed information of the marginal likelihood, by central
/// differences of the analytic score. Parameter order is (a_1, b_1, ...,
/// a_k, b_k) for 2PL and (a, b_1, ..., b_k) for 1PL.
Matrix parameter_covariance(const Matrix& responses, const IrtModel& model,
                            const QuadratureGrid& grid = normal_grid());

/// Per-item covariance of the item's own parameters: 2x2 over (a, b) for
/// 2PL, 1x1 over b for 1PL.
std::vector<Matrix> item_covariances(const Matrix& full_covariance, const IrtModel& model);

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
};

InformationCriteria information_criteria(double log_likelihood, Index n_params, Index n_students);

struct FitComparison {
    InformationCriteria small;
    InformationCriteria large;
    double lrt = 0.0;
    Index df = 0;
    double p_value = 1.0;
};

FitComparison compare(const IrtModel& small, const IrtModel& large, Index n_students);
FitComparison compare(double ll_small, Index p_small, double ll_large, Index p_large,
                      Index n_students);

struct GridSpec {
    double min = -6.0;
    double max = 6.0;
    double step = 0.01;
};

struct CurveTable {
    std::vector<std::string> items;
    Vector theta;
    Matrix probability;  // theta x items
    Matrix information;  // theta x items
    Vector test_information;
    Vector sem;
    Vector reliability;
};

CurveTable curves(const IrtModel& model, const GridSpec& spec = {});

struct AbilityEstimates {
    std::vector<std::string> student_ids;
    Vector eap;
    Vector posterior_sd;
    double eap_reliability = 0.0;
};

AbilityEstimates eap(const ResponseMatrix& matrix, const IrtModel& model,
                     const QuadratureGrid& grid = normal_grid());
AbilityEstimates eap(const Matrix& responses, const IrtModel& model,
                     const QuadratureGrid& grid = normal_grid());

struct Q3Pair {
    std::string item_a;
    std::string item_b;
    double q3 = 0.0;
};

struct Q3Result {
    std::vector<std::string> items;
    Matrix q3;
    double max_abs = 0.0;
    /// Pairs with |Q3| >= 0.2, largest first.
    std::vector<Q3Pair> flagged;
    Index acceptable = 0;  // 0.2 <= |Q3| < 0.3
    Index poor = 0;        // |Q3| >= 0.3
};

inline constexpr double kQ3Good = 0.2;
inline constexpr double kQ3Acceptable = 0.3;

Q3Result yen_q3(const ResponseMatrix& matrix, const IrtModel& model,
                const AbilityEstimates& abilities);
Q3Result yen_q3(const Matrix& responses, const IrtModel& model, const Vector& theta);

struct ItemClassification {
    std::string item;
    std::string discrimination;
    std::string difficulty;
};

std::string discrimination_band(double a);
std::string difficulty_band(double b);
std::vector<ItemClassification> classify_items(const IrtModel& model);

struct WrightBin {
    double lower = 0.0;
    double upper = 0.0;
    Index count = 0;
};

struct WrightItem {
    std::string item;
    double difficulty = 0.0;
    double discrimination = 0.0;
};

struct WrightMap {
    double bin_width = 0.0;
    std::vector<WrightBin> persons;
    std::vector<WrightItem> items;
};

WrightMap wright_map_data(const IrtModel& model, const Vector& abilities, double bin_width = 0.25);

struct UnidimensionalityScreen {
    Matrix correlation;
    Vector eigenvalues;  // descending
    double ratio = 0.0;
    bool plausibly_unidimensional = false;
    /// Item pairs whose 2x2 table had an empty cell (0.5 added to each cell).
    std::vector<std::pair<std::string, std::string>> clamped_pairs;
};

/// Approximate tetrachoric correlations r = cos(pi / (1 + sqrt(AD/BC))) and
/// the first-to-second eigenvalue ratio; verdict when the ratio exceeds 3.
UnidimensionalityScreen unidimensionality_screen(const ResponseMatrix& matrix);
UnidimensionalityScreen unidimensionality_screen(const Matrix& responses,
                                                 const std::vector<std::string>& items);

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

}  // namespace psychkit::irt

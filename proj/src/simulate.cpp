#include "psychkit/simulate.hpp"

#include "psychkit/error.hpp"
#include "psychkit/irt.hpp"

namespace psychkit::sim {

Vector normal_draws(Index n, double mean, double sd, Rng& rng) {
    std::normal_distribution<double> dist(mean, sd);
    Vector out(n);
    for (Index i = 0; i < n; ++i) out(i) = dist(rng);
    return out;
}

Vector uniform_draws(Index n, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Vector out(n);
    for (Index i = 0; i < n; ++i) out(i) = dist(rng);
    return out;
}

Matrix simulate_2pl(const Vector& a, const Vector& b, const Vector& theta, Rng& rng) {
    if (a.size() != b.size()) throw Error("simulate", "a and b differ in length");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix y(theta.size(), a.size());
    for (Index i = 0; i < theta.size(); ++i)
        for (Index j = 0; j < a.size(); ++j)
            y(i, j) = u(rng) < irt::response_probability(theta(i), a(j), b(j)) ? 1.0 : 0.0;
    return y;
}

std::vector<std::string> item_labels(Index n_items, const std::string& prefix) {
    std::vector<std::string> out;
    for (Index j = 0; j < n_items; ++j) out.push_back(prefix + std::to_string(j + 1));
    return out;
}

ResponseMatrix to_response_matrix(const Matrix& y, const std::vector<std::string>& groups, int grade) {
    if (!groups.empty() && static_cast<Index>(groups.size()) != y.rows())
        throw Error("simulate", "one group label per student is required");
    std::vector<StudentRecord> rows;
    rows.reserve(static_cast<std::size_t>(y.rows()));
    for (Index i = 0; i < y.rows(); ++i) {
        StudentRecord rec;
        rec.student_id = "S" + std::to_string(i + 1);
        rec.grade = grade;
        rec.gender = groups.empty() ? "na" : groups[static_cast<std::size_t>(i)];
        rec.responses.reserve(static_cast<std::size_t>(y.cols()));
        for (Index j = 0; j < y.cols(); ++j) rec.responses.push_back(y(i, j) > 0.5 ? 1 : 0);
        rows.push_back(std::move(rec));
    }
    return ResponseMatrix(item_labels(y.cols()), std::move(rows));
}

}  // namespace psychkit::sim

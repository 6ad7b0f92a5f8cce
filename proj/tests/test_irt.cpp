#include <doctest.h>

#include <cmath>

#include "psychkit/error.hpp"
#include "psychkit/irt.hpp"
#include "psychkit/simulate.hpp"
#include "support.hpp"

using namespace psychkit;
using doctest::Approx;

TEST_SUITE("irt") {
TEST_CASE("response function and information") {
    CHECK(irt::response_probability(0.7, 1.3, 0.7) == Approx(0.5));
    CHECK(irt::item_information(0.7, 1.3, 0.7) == Approx(1.3 * 1.3 / 4));
    CHECK(irt::item_information(-1.0, 2.0, -1.0) == Approx(1.0));
}

TEST_CASE("parameter counts and information criteria") {
    CHECK(irt::parameter_count(irt::ModelKind::one_pl, 24) == 25);
    CHECK(irt::parameter_count(irt::ModelKind::two_pl, 24) == 48);
    const auto ic = irt::information_criteria(-9248.23, 48, 711);
    CHECK(ic.aic == Approx(18592.46).epsilon(1e-7));
    CHECK(ic.bic == Approx(18811.66).epsilon(1e-6));
    const auto c = irt::compare(-5829.31, 25, -5764.18, 48, 585);
    CHECK(c.lrt == Approx(130.26));
    CHECK(c.df == 23);
    const auto same = irt::compare(-100.0, 25, -100.0, 48, 585);
    CHECK(same.lrt == 0.0);
    CHECK(same.p_value == Approx(1.0));
}

TEST_CASE("1PL on a half-correct item is centred") {
    sim::Rng rng(3);
    const Index n = 4000;
    Matrix y = Matrix::Zero(n, 3);
    for (Index i = 0; i < n; ++i) y(i, 0) = i % 2;
    const Vector theta = sim::normal_draws(n, 0, 1, rng);
    Vector a(2), b(2);
    a << 1, 1;
    b << -0.5, 0.5;
    y.rightCols(2) = sim::simulate_2pl(a, b, theta, rng);
    const auto m = irt::fit(y, sim::item_labels(3), irt::ModelKind::one_pl);
    CHECK(m.converged);
    CHECK(std::abs(m.b(0)) < 0.02);
}

TEST_CASE("EM is monotone and the covariance is positive definite") {
    sim::Rng rng(11);
    const auto t = testing::draw_items(10, 0.7, 2.0, -1.5, 1.5, rng);
    const Vector theta = sim::normal_draws(800, 0, 1, rng);
    const Matrix y = sim::simulate_2pl(t.a, t.b, theta, rng);
    const auto m = irt::fit(y, sim::item_labels(10), irt::ModelKind::two_pl);
    REQUIRE(m.converged);
    for (std::size_t i = 1; i < m.log_likelihood_trace.size(); ++i)
        CHECK(m.log_likelihood_trace[i] >= m.log_likelihood_trace[i - 1] - 1e-8);
    CHECK(m.log_likelihood == Approx(irt::marginal_log_likelihood(y, m)).epsilon(1e-10));
    const Matrix cov = irt::parameter_covariance(y, m);
    CHECK(cov.rows() == 20);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    const auto per_item = irt::item_covariances(cov, m);
    CHECK(per_item.size() == 10);
    CHECK(per_item[0].rows() == 2);
}

TEST_CASE("curves") {
    irt::IrtModel m;
    m.kind = irt::ModelKind::two_pl;
    m.items = {"A", "B"};
    m.a = Vector(2);
    m.b = Vector(2);
    m.a << 2.0, 0.8;
    m.b << 0.0, 1.0;
    const auto c = irt::curves(m, {-2.0, 2.0, 0.5});
    REQUIRE(c.theta.size() == 9);
    CHECK(c.probability(4, 0) == Approx(0.5));
    CHECK(c.information(4, 0) == Approx(1.0));
    for (Index t = 0; t < c.theta.size(); ++t) {
        const double tif = irt::item_information(c.theta(t), 2.0, 0.0) + irt::item_information(c.theta(t), 0.8, 1.0);
        CHECK(c.test_information(t) == Approx(tif));
        CHECK(c.sem(t) == Approx(1.0 / std::sqrt(tif)));
    }
}

TEST_CASE("EAP") {
    sim::Rng rng(5);
    const auto t = testing::draw_items(8, 0.8, 1.8, -1, 1, rng);
    irt::IrtModel m;
    m.items = sim::item_labels(8);
    m.a = t.a;
    m.b = t.b;
    Matrix y = sim::simulate_2pl(t.a, t.b, sim::normal_draws(50, 0, 1, rng), rng);
    y.row(1) = y.row(0);
    const auto est = irt::eap(y, m);
    CHECK(est.eap(0) == est.eap(1));
    irt::IrtModel empty;
    CHECK_THROWS_AS(irt::eap(y, empty), Error);
    // All-correct scores above all-wrong.
    Matrix ext(2, 8);
    ext.row(0).setOnes();
    ext.row(1).setZero();
    const auto e2 = irt::eap(ext, m);
    CHECK(e2.eap(0) > 1.0);
    CHECK(e2.eap(1) < -1.0);
}

TEST_CASE("Q3") {
    sim::Rng rng(9);
    const auto t = testing::draw_items(6, 0.8, 1.8, -1, 1, rng);
    const Vector theta = sim::normal_draws(1000, 0, 1, rng);
    Matrix y = sim::simulate_2pl(t.a, t.b, theta, rng);
    y.col(5) = y.col(4);
    irt::IrtModel m;
    m.items = sim::item_labels(6);
    m.a = t.a;
    m.b = t.b;
    m.a(5) = m.a(4);
    m.b(5) = m.b(4);
    const auto q = irt::yen_q3(y, m, theta);
    CHECK(q.q3(4, 5) == Approx(1.0));
    CHECK(q.max_abs == Approx(1.0));
    REQUIRE(!q.flagged.empty());
    CHECK(q.flagged[0].item_a == "Q5");
}

TEST_CASE("classification bands") {
    CHECK(irt::discrimination_band(1.8) == "very high");
    CHECK(irt::discrimination_band(0.01) == "very low");
    CHECK(irt::discrimination_band(1.0) == "moderate");
    CHECK(irt::difficulty_band(0.0) == "medium");
    CHECK(irt::difficulty_band(-0.5) == "medium");
    CHECK(irt::difficulty_band(-2.5) == "very easy");
    CHECK(irt::difficulty_band(2.5) == "very hard");
}

TEST_CASE("Wright map data") {
    irt::IrtModel m;
    m.items = {"A", "B", "C"};
    m.a = Vector::Ones(3);
    m.b = Vector(3);
    m.b << -1, 0, 1;
    const auto w = irt::wright_map_data(m, Vector::Constant(1, 0.3), 0.5);
    REQUIRE(w.persons.size() == 1);
    CHECK(w.persons[0].lower == Approx(0.0));
    CHECK(w.persons[0].upper == Approx(0.5));
    CHECK(w.persons[0].count == 1);
    REQUIRE(w.items.size() == 3);
    CHECK(w.items[0].difficulty == -1.0);
    CHECK(w.items[2].difficulty == 1.0);
}

TEST_CASE("unidimensionality screen") {
    sim::Rng rng(21);
    const Index n = 3000;
    const auto t = testing::draw_items(24, 1.2, 2.0, -1, 1, rng);
    const Vector theta = sim::normal_draws(n, 0, 1, rng);
    const Matrix one = sim::simulate_2pl(t.a, t.b, theta, rng);
    const auto u1 = irt::unidimensionality_screen(one, sim::item_labels(24));
    CHECK(u1.ratio > 3.0);
    CHECK(u1.plausibly_unidimensional);

    const Vector theta2 = sim::normal_draws(n, 0, 1, rng);
    Matrix two(n, 24);
    two.leftCols(12) = sim::simulate_2pl(t.a.head(12), t.b.head(12), theta, rng);
    two.rightCols(12) = sim::simulate_2pl(t.a.tail(12), t.b.tail(12), theta2, rng);
    const auto u2 = irt::unidimensionality_screen(two, sim::item_labels(24));
    CHECK(u2.ratio < 2.0);
    CHECK_FALSE(u2.plausibly_unidimensional);

    const Matrix indep = sim::simulate_2pl(Vector::Constant(24, 1e-6), t.b, theta, rng);
    CHECK(irt::unidimensionality_screen(indep, sim::item_labels(24)).ratio < 1.5);
}
}

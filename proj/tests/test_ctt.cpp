#include <doctest.h>

#include <cmath>

#include <vector>

#include "oracle_values.hpp"
#include "psychkit/ctt.hpp"
#include "psychkit/error.hpp"
#include "support.hpp"

using namespace psychkit;
using doctest::Approx;

TEST_SUITE("ctt") {
TEST_CASE("alpha and item statistics against numpy") {
    const Matrix x = testing::from_ints(oracle::kCttMatrix, oracle::kCttRows, oracle::kCttCols);
    CHECK(ctt::cronbach_alpha(x) == Approx(oracle::kCttAlpha).epsilon(1e-12));
    const auto m = sim::to_response_matrix(x);
    const auto analysis = ctt::item_analysis(m);
    CHECK(analysis.reliability.alpha == Approx(oracle::kCttAlpha).epsilon(1e-12));
    for (int j = 0; j < oracle::kCttCols; ++j) {
        const auto& it = analysis.items[j];
        CHECK(it.point_biserial == Approx(oracle::kCttPointBiserial[j]).epsilon(1e-12));
        CHECK(it.point_biserial_corrected == Approx(oracle::kCttPointBiserialCorrected[j]).epsilon(1e-12));
        REQUIRE(it.drop_alpha);
        CHECK(*it.drop_alpha == Approx(oracle::kCttDropAlpha[j]).epsilon(1e-12));
        CHECK(it.difficulty_index == Approx(x.col(j).mean()));
    }
}

TEST_CASE("degenerate items and alpha limits") {
    Matrix x(4, 3);
    x << 1, 0, 0,
         1, 1, 1,
         1, 0, 0,
         1, 1, 1;
    const auto analysis = ctt::item_analysis(sim::to_response_matrix(x));
    CHECK(analysis.items[0].difficulty_index == 1.0);
    CHECK(analysis.items[0].point_biserial == 0.0);
    CHECK(analysis.items[0].zero_variance);
    CHECK(ctt::cronbach_alpha(x.rightCols(2)) == Approx(1.0));
}

TEST_CASE("flags and interpretation") {
    CHECK(ctt::classify_item(0.9, 0.5) == ctt::ItemFlag::too_easy);
    CHECK(ctt::classify_item(0.2, 0.5) == ctt::ItemFlag::too_hard);
    CHECK(ctt::classify_item(0.5, 0.1) == ctt::ItemFlag::low_discrimination);
    CHECK(ctt::classify_item(0.5, 0.3) == ctt::ItemFlag::ok);
    CHECK(ctt::interpret_alpha(0.84) == ctt::Reliability::high);
    CHECK(ctt::interpret_alpha(0.95) == ctt::Reliability::high);
    CHECK(ctt::interpret_alpha(0.6) == ctt::Reliability::moderate);
    CHECK(ctt::interpret_alpha(0.4) == ctt::Reliability::low);
}

TEST_CASE("descriptives against scipy") {
    const std::vector<double> s(std::begin(oracle::kScores), std::end(oracle::kScores));
    const auto m = ctt::descriptives(s, ctt::MomentEstimator::moment);
    CHECK(m.skew == Approx(oracle::kSkewMoment).epsilon(1e-12));
    CHECK(m.kurtosis == Approx(oracle::kKurtMoment).epsilon(1e-12));
    const auto a = ctt::descriptives(s, ctt::MomentEstimator::adjusted);
    CHECK(a.skew == Approx(oracle::kSkewAdjusted).epsilon(1e-12));
    CHECK(a.kurtosis == Approx(oracle::kKurtAdjusted).epsilon(1e-12));
    const auto d = ctt::descriptives(s);
    CHECK(d.skew == Approx(oracle::kSkewScaled).epsilon(1e-12));
    CHECK(d.kurtosis == Approx(oracle::kKurtScaled).epsilon(1e-12));
    CHECK(d.sd == Approx(oracle::kScoresSd).epsilon(1e-12));
    CHECK(d.sem == Approx(oracle::kScoresSd / std::sqrt(20.0)));
    CHECK(d.min == 3.0);
    CHECK(d.max == 22.0);

    const std::vector<double> sym{0, 1, 2, 3, 4};
    CHECK(ctt::descriptives(sym).skew == Approx(0.0));
    const std::vector<double> flat{5, 5, 5, 5};
    CHECK_THROWS_AS(ctt::descriptives(flat), Error);
}

TEST_CASE("norm table") {
    const std::vector<double> s(std::begin(oracle::kScores), std::end(oracle::kScores));
    const auto t = ctt::norm_table(s, 25);
    REQUIRE(t.rows.size() == 26);
    for (int i = 0; i <= 25; ++i) {
        CHECK(t.rows[i].z == Approx(oracle::kNormZ[i]).epsilon(1e-12));
        CHECK(t.rows[i].percentile == oracle::kNormPct[i]);
    }
    const std::vector<double> centred{1, 2, 3};
    CHECK(ctt::norm_table(centred, 3).rows[2].z == 0.0);
}
}

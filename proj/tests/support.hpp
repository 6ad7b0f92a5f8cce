#pragma once

#include <sstream>
#include <string>

#include "psychkit/dataset.hpp"
#include "psychkit/simulate.hpp"

namespace testing {

inline psychkit::ResponseMatrix parse(const std::string& csv, const psychkit::AnalysisConfig& cfg = {}) {
    std::istringstream in(csv);
    return psychkit::read_csv(in, cfg);
}

template <typename T>
psychkit::Matrix from_ints(const T* data, int rows, int cols) {
    psychkit::Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = data[i * cols + j];
    return m;
}

struct Truth {
    psychkit::Vector a;
    psychkit::Vector b;
};

inline Truth draw_items(psychkit::Index k, double a_lo, double a_hi, double b_lo, double b_hi,
                        psychkit::sim::Rng& rng) {
    Truth t;
    t.a = psychkit::sim::uniform_draws(k, a_lo, a_hi, rng);
    t.b = psychkit::sim::uniform_draws(k, b_lo, b_hi, rng);
    return t;
}

}  // namespace testing

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "akash/errors.hpp"

namespace akash {

// Row-major dense matrix of doubles. Small on purpose.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Parameters are stored on disk as float32; rounding through float keeps the
// in-memory model bit-identical to its serialized form.
inline double round_f32(double v) { return double(float(v)); }

inline void round_f32(std::vector<double>& v) {
    for (double& x : v) x = round_f32(x);
}

inline std::vector<double> column_means(const Matrix& m) {
    std::vector<double> mu(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) mu[c] += m(r, c);
    for (double& v : mu) v /= double(m.rows);
    return mu;
}

}  // namespace akash

#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dac {

/// Dense row-major matrix of doubles. Just enough linear algebra for the
/// small MLPs used here.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// out = a * b, a: (m x k), b: (k x n).
inline void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols == b.rows);
    out.rows = a.rows;
    out.cols = b.cols;
    out.data.assign(static_cast<std::size_t>(a.rows) * b.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        double* oi = out.row(i);
        const double* ai = a.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            const double* bk = b.row(k);
            for (int j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
        }
    }
}

/// out = a^T * b, a: (m x k), b: (m x n) -> out: (k x n). Used for weight grads.
inline void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.rows == b.rows);
    out.rows = a.cols;
    out.cols = b.cols;
    out.data.assign(static_cast<std::size_t>(a.cols) * b.cols, 0.0);
    for (int m = 0; m < a.rows; ++m) {
        const double* am = a.row(m);
        const double* bm = b.row(m);
        for (int k = 0; k < a.cols; ++k) {
            const double amk = am[k];
            double* ok = out.row(k);
            for (int j = 0; j < b.cols; ++j) ok[j] += amk * bm[j];
        }
    }
}

/// out = a * b^T, a: (m x k), b: (n x k) -> out: (m x n). Used for input grads.
inline void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols == b.cols);
    out.rows = a.rows;
    out.cols = b.rows;
    out.data.assign(static_cast<std::size_t>(a.rows) * b.rows, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
            oi[j] = s;
        }
    }
}

inline void add_row_vector(Matrix& m, const std::vector<double>& v) {
    assert(static_cast<std::size_t>(m.cols) == v.size());
    for (int i = 0; i < m.rows; ++i) {
        double* mi = m.row(i);
        for (int j = 0; j < m.cols; ++j) mi[j] += v[j];
    }
}

inline void column_sums(const Matrix& m, std::vector<double>& out) {
    out.assign(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double* mi = m.row(i);
        for (int j = 0; j < m.cols; ++j) out[j] += mi[j];
    }
}

inline void relu_inplace(Matrix& m) {
    for (double& x : m.data) x = x > 0.0 ? x : 0.0;
}

/// grad <- grad where pre-activation was positive, else 0.
inline void relu_backward_inplace(Matrix& grad, const Matrix& preact) {
    assert(grad.same_shape(preact));
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (preact.data[i] <= 0.0) grad.data[i] = 0.0;
}

} // namespace dac

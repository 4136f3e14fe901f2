#pragma once

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "biome/common.hpp"

namespace biome {

// Dense row-major double matrix. Vectors are 1xN or Nx1 as convenient.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, double fill) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat full(int r, int c, double x) { return Mat(r, c, x); }
    static Mat gaussian(int r, int c, Rng& rng, double stddev, double mean = 0.0) {
        Mat m(r, c);
        for (auto& x : m.v) x = rng.normal(mean, stddev);
        return m;
    }
    static Mat row(const std::vector<double>& xs) {
        Mat m(1, static_cast<int>(xs.size()));
        m.v = xs;
        return m;
    }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row_ptr(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }

    double sum() const {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
};

inline std::string shape_str(const Mat& m) {
    return "[" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + "]";
}

namespace detail {
// Parallelism threshold: below this many multiply-adds a single thread wins.
constexpr long long kParallelFlops = 1 << 18;
}  // namespace detail

// C (+)= A * B
inline void mm_nn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    require_shape(A.cols == B.rows, "mm_nn: inner dims " + shape_str(A) + " vs " + shape_str(B));
    if (!accumulate) {
        C.rows = A.rows;
        C.cols = B.cols;
        C.v.assign(static_cast<size_t>(A.rows) * B.cols, 0.0);
    } else {
        require_shape(C.rows == A.rows && C.cols == B.cols, "mm_nn: bad accumulator");
    }
    const int I = A.rows, K = A.cols, J = B.cols;
    const long long work = 1ll * I * K * J;
#pragma omp parallel for schedule(static) if (work > detail::kParallelFlops)
    for (int i = 0; i < I; ++i) {
        double* crow = C.row_ptr(i);
        const double* arow = A.row_ptr(i);
        for (int k = 0; k < K; ++k) {
            const double a = arow[k];
            const double* brow = B.row_ptr(k);
            for (int j = 0; j < J; ++j) crow[j] += a * brow[j];
        }
    }
}

// C (+)= A * B^T
inline void mm_nt(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    require_shape(A.cols == B.cols, "mm_nt: inner dims " + shape_str(A) + " vs " + shape_str(B));
    if (!accumulate) {
        C.rows = A.rows;
        C.cols = B.rows;
        C.v.assign(static_cast<size_t>(A.rows) * B.rows, 0.0);
    } else {
        require_shape(C.rows == A.rows && C.cols == B.rows, "mm_nt: bad accumulator");
    }
    const int I = A.rows, K = A.cols, J = B.rows;
    const long long work = 1ll * I * K * J;
#pragma omp parallel for schedule(static) if (work > detail::kParallelFlops)
    for (int i = 0; i < I; ++i) {
        const double* arow = A.row_ptr(i);
        double* crow = C.row_ptr(i);
        for (int j = 0; j < J; ++j) {
            const double* brow = B.row_ptr(j);
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += arow[k] * brow[k];
            crow[j] += s;
        }
    }
}

// C (+)= A^T * B
inline void mm_tn(const Mat& A, const Mat& B, Mat& C, bool accumulate) {
    require_shape(A.rows == B.rows, "mm_tn: inner dims " + shape_str(A) + " vs " + shape_str(B));
    if (!accumulate) {
        C.rows = A.cols;
        C.cols = B.cols;
        C.v.assign(static_cast<size_t>(A.cols) * B.cols, 0.0);
    } else {
        require_shape(C.rows == A.cols && C.cols == B.cols, "mm_tn: bad accumulator");
    }
    const int I = A.rows, K = A.cols, J = B.cols;
    const long long work = 1ll * I * K * J;
#pragma omp parallel for schedule(static) if (work > detail::kParallelFlops)
    for (int k = 0; k < K; ++k) {
        double* crow = C.row_ptr(k);
        for (int i = 0; i < I; ++i) {
            const double a = A.at(i, k);
            const double* brow = B.row_ptr(i);
            for (int j = 0; j < J; ++j) crow[j] += a * brow[j];
        }
    }
}

inline Mat matmul(const Mat& A, const Mat& B) {
    Mat C;
    mm_nn(A, B, C, false);
    return C;
}

inline Mat transpose(const Mat& A) {
    Mat T(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) T.at(j, i) = A.at(i, j);
    return T;
}

}  // namespace biome

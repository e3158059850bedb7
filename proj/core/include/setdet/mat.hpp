// Dense row-major matrix of doubles. The only numeric container used by the
// autodiff tape and the model; kept deliberately small.
#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace setdet {

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, std::vector<double> values) : rows(r), cols(c), d(std::move(values)) {
        assert(static_cast<size_t>(rows) * cols == d.size());
    }

    double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return d.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return d.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return d.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    void zero() { std::fill(d.begin(), d.end(), 0.0); }

    // c += a * b   (a: m x k, b: k x n)
    static void matmul_acc(const Mat& a, const Mat& b, Mat& c) {
        assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
        const int m = a.rows, k = a.cols, n = b.cols;
        for (int i = 0; i < m; ++i) {
            const double* ai = a.row(i);
            double* ci = c.row(i);
            for (int p = 0; p < k; ++p) {
                const double av = ai[p];
                if (av == 0.0) continue;
                const double* bp = b.row(p);
                for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    }

    // c += a * b^T   (a: m x k, b: n x k)
    static void matmul_nt_acc(const Mat& a, const Mat& b, Mat& c) {
        assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
        const int m = a.rows, k = a.cols, n = b.rows;
        for (int i = 0; i < m; ++i) {
            const double* ai = a.row(i);
            double* ci = c.row(i);
            for (int j = 0; j < n; ++j) {
                const double* bj = b.row(j);
                double s = 0.0;
                for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
                ci[j] += s;
            }
        }
    }

    // c += a^T * b   (a: k x m, b: k x n)
    static void matmul_tn_acc(const Mat& a, const Mat& b, Mat& c) {
        assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
        const int k = a.rows, m = a.cols, n = b.cols;
        for (int p = 0; p < k; ++p) {
            const double* ap = a.row(p);
            const double* bp = b.row(p);
            for (int i = 0; i < m; ++i) {
                const double av = ap[i];
                if (av == 0.0) continue;
                double* ci = c.row(i);
                for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    }
};

}  // namespace setdet

#include "sparsed/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparsed {

Matrix::Matrix(int rows_, int cols_, double fill)
    : rows(rows_), cols(cols_) {
    if (rows_ < 0 || cols_ < 0) {
        throw std::invalid_argument("negative matrix dimension");
    }
    data.assign(static_cast<std::size_t>(rows_) * cols_, fill);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw std::invalid_argument("matmul shape mismatch");
    }
    Matrix out(a.rows, b.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix stable_softmax_rows(const Matrix& scores) {
    if (scores.rows < 1 || scores.cols < 1) {
        throw std::invalid_argument("softmax on empty matrix");
    }
    Matrix out(scores.rows, scores.cols, 0.0);
    for (int i = 0; i < scores.rows; ++i) {
        const double* src = scores.row(i);
        double* dst = out.row(i);

        double row_max = kMaskedScore;
        for (int j = 0; j < scores.cols; ++j) {
            if (src[j] != kMaskedScore && src[j] > row_max) {
                row_max = src[j];
            }
        }
        if (row_max == kMaskedScore) {
            throw std::invalid_argument("fully masked row");
        }

        double sum = 0.0;
        for (int j = 0; j < scores.cols; ++j) {
            if (src[j] == kMaskedScore) {
                dst[j] = 0.0;
            } else {
                const double w = std::exp(src[j] - row_max);
                dst[j] = w;
                sum += w;
            }
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < scores.cols; ++j) {
            dst[j] *= inv;
        }
    }
    return out;
}

Matrix block_avg_pool(const Matrix& m, int block_size) {
    if (block_size < 1) {
        throw std::invalid_argument("invalid block size");
    }
    const int out_rows = ceil_div(m.rows, block_size);
    const int out_cols = ceil_div(m.cols, block_size);
    Matrix out(out_rows, out_cols, 0.0);
    for (int bi = 0; bi < out_rows; ++bi) {
        const int r0 = bi * block_size;
        const int r1 = std::min(r0 + block_size, m.rows);
        for (int bj = 0; bj < out_cols; ++bj) {
            const int c0 = bj * block_size;
            const int c1 = std::min(c0 + block_size, m.cols);
            double sum = 0.0;
            for (int r = r0; r < r1; ++r) {
                const double* row = m.row(r);
                for (int c = c0; c < c1; ++c) {
                    sum += row[c];
                }
            }
            out(bi, bj) = sum / (static_cast<double>(r1 - r0) * (c1 - c0));
        }
    }
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("cosine similarity length mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("undefined similarity");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace sparsed

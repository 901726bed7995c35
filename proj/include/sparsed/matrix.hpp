#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace sparsed {

// Additive score sentinel for masked entries. It is only ever assigned, never
// the result of arithmetic; the softmax treats it as "excluded".
inline constexpr double kMaskedScore = -std::numeric_limits<double>::infinity();

// Dense row-major matrix of doubles. Minimal on purpose: the project needs a
// carrier for Q/K/V, score grids and logits, not a linear-algebra library.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(int rows_, int cols_, double fill = 0.0);

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// C = A * B, accumulated left to right over A's columns so the result does not
// depend on how callers thread around it.
Matrix matmul(const Matrix& a, const Matrix& b);

// Row softmax with row-max subtraction. Entries equal to kMaskedScore come out
// as exact zeros. Throws std::invalid_argument("fully masked row") when a row
// has no unmasked entry, and on empty input.
Matrix stable_softmax_rows(const Matrix& scores);

// Mean over block_size x block_size tiles. The output has ceil() block counts;
// ragged edge tiles average only the entries that exist, so short blocks are
// not deflated by padding. Throws std::invalid_argument("invalid block size")
// when block_size < 1.
Matrix block_avg_pool(const Matrix& m, int block_size);

// Standard cosine similarity. Throws std::invalid_argument on length mismatch
// and std::invalid_argument("undefined similarity") when either vector is all
// zeros.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace sparsed

#pragma once

#include "sparsed/block_mask.hpp"
#include "sparsed/matrix.hpp"

#include <cstdint>
#include <vector>

namespace sparsed {

// Q, K, V for a single attention head, each seq_len x head_dim.
struct HeadInputs {
    Matrix q;
    Matrix k;
    Matrix v;

    int seq_len() const { return q.rows; }
    int head_dim() const { return q.cols; }
    void validate() const;
};

// Multiply-add counts for the two quadratic stages of attention. A dense head
// call charges 2*l^2*d to each side; a block-sparse call charges per kept
// tile, which sums to the kept fraction of the dense cost. Softmax and
// pooling arithmetic are deliberately not counted.
struct FlopCounter {
    std::int64_t score_flops = 0;
    std::int64_t weighted_sum_flops = 0;

    std::int64_t total() const { return score_flops + weighted_sum_flops; }

    FlopCounter& operator+=(const FlopCounter& other) {
        score_flops += other.score_flops;
        weighted_sum_flops += other.weighted_sum_flops;
        return *this;
    }
};

// softmax(Q K^T / sqrt(d)) V, computed in query tiles so K and V stream
// through cache once per tile instead of once per row. Per-row accumulation
// order is ascending over keys, identical to the naive two-pass form.
Matrix dense_attention(const HeadInputs& h, FlopCounter* fc = nullptr);

// softmax(Q K^T / sqrt(d) + bias) V with an additive bias of zeros and
// kMaskedScore sentinels. Reference executor for the sparse kernel; charges
// full dense FLOPs. Throws on a fully masked row.
Matrix masked_dense_attention(const HeadInputs& h, const Matrix& bias,
                              FlopCounter* fc = nullptr);

// Block-sparse executor: touches only kept tiles, normalizing each query row
// with a running (max, sum) across its kept tiles, so dropped tiles are never
// materialized. FLOPs are charged per kept tile.
Matrix block_sparse_attention(const HeadInputs& h, const BlockMask& mask,
                              FlopCounter* fc = nullptr);

// The attention probability map softmax(Q K^T / sqrt(d)) on its own, for
// pattern selection oracles, mass accounting and heatmap dumps.
Matrix attention_probabilities(const Matrix& q, const Matrix& k);

// Dispatches every head to the dense executor (masks empty) or the
// block-sparse executor (one mask per head). Heads may fan out across
// n_threads workers; outputs keep head order and counters merge in head
// order, so the result is independent of the worker count.
std::vector<Matrix> multi_head_attention(const std::vector<HeadInputs>& heads,
                                         const std::vector<const BlockMask*>& masks,
                                         FlopCounter& fc, int n_threads = 1);

}  // namespace sparsed

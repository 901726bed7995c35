#pragma once

#include "sparsed/matrix.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sparsed {

// Block-granular attention pattern over (query block x key block) tiles.
// Queries and keys share the sequence length, so the grid is square. Treated
// as immutable once built; every constructor guarantees each query-block row
// keeps at least one block, so expansion can never produce a fully masked
// softmax row.
struct BlockMask {
    int n_query_blocks = 0;
    int n_key_blocks = 0;
    int block_size = 0;
    int seq_len = 0;
    int prefill_len = 0;
    std::vector<std::uint8_t> keep;  // n_query_blocks * n_key_blocks, row-major

    bool kept(int qb, int kb) const {
        return keep[static_cast<std::size_t>(qb) * n_key_blocks + kb] != 0;
    }
    int kept_in_row(int qb) const;

    // Token range [start, end) covered by a block index.
    int block_start(int b) const { return b * block_size; }
    int block_end(int b) const {
        const int e = (b + 1) * block_size;
        return e < seq_len ? e : seq_len;
    }

    bool operator==(const BlockMask& other) const = default;
};

// Constructs a mask from an explicit keep grid, checking all invariants.
BlockMask make_block_mask(int seq_len, int block_size, int prefill_len,
                          std::vector<std::uint8_t> keep);

// All blocks kept.
BlockMask full_mask(int seq_len, int block_size, int prefill_len);

// Bidirectional sliding window: tile (i, j) is kept iff it contains some
// token pair (q, k) with |q - k| < window_size. Throws
// std::invalid_argument("empty window") when window_size == 0.
BlockMask sliding_window_mask(int seq_len, int block_size, int prefill_len,
                              int window_size);

// Sliding window plus sink columns: additionally keeps every key block that
// overlaps the first ceil(sink_fraction * seq_len) token columns.
BlockMask streaming_mask(int seq_len, int block_size, int prefill_len,
                         int window_size, double sink_fraction);

// Expands the block decisions to a seq_len x seq_len additive bias: 0 inside
// kept tiles, kMaskedScore elsewhere. Ragged edge tokens inherit their
// block's decision.
Matrix mask_to_dense_bias(const BlockMask& mask);

// Kept blocks / total blocks.
double density(const BlockMask& mask);

// CSV grid of 0/1, one line per query block, comma-separated.
void write_mask_csv(std::ostream& os, const BlockMask& mask);
std::string mask_to_csv(const BlockMask& mask);

}  // namespace sparsed

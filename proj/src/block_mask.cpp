#include "sparsed/block_mask.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sparsed {

namespace {

void check_geometry(int seq_len, int block_size, int prefill_len) {
    if (seq_len < 1) {
        throw std::invalid_argument("empty sequence");
    }
    if (block_size < 1) {
        throw std::invalid_argument("invalid block size");
    }
    if (prefill_len < 0 || prefill_len > seq_len) {
        throw std::invalid_argument("prefill length out of range");
    }
}

BlockMask empty_grid(int seq_len, int block_size, int prefill_len) {
    check_geometry(seq_len, block_size, prefill_len);
    BlockMask m;
    m.seq_len = seq_len;
    m.block_size = block_size;
    m.prefill_len = prefill_len;
    m.n_query_blocks = ceil_div(seq_len, block_size);
    m.n_key_blocks = m.n_query_blocks;
    m.keep.assign(static_cast<std::size_t>(m.n_query_blocks) * m.n_key_blocks, 0);
    return m;
}

}  // namespace

int BlockMask::kept_in_row(int qb) const {
    const std::uint8_t* row = keep.data() + static_cast<std::size_t>(qb) * n_key_blocks;
    int n = 0;
    for (int j = 0; j < n_key_blocks; ++j) {
        n += row[j] != 0;
    }
    return n;
}

BlockMask make_block_mask(int seq_len, int block_size, int prefill_len,
                          std::vector<std::uint8_t> keep) {
    BlockMask m = empty_grid(seq_len, block_size, prefill_len);
    if (keep.size() != m.keep.size()) {
        throw std::invalid_argument("keep grid size mismatch");
    }
    m.keep = std::move(keep);
    for (int i = 0; i < m.n_query_blocks; ++i) {
        if (m.kept_in_row(i) == 0) {
            throw std::invalid_argument("fully masked query-block row");
        }
    }
    return m;
}

BlockMask full_mask(int seq_len, int block_size, int prefill_len) {
    BlockMask m = empty_grid(seq_len, block_size, prefill_len);
    std::fill(m.keep.begin(), m.keep.end(), std::uint8_t{1});
    return m;
}

BlockMask sliding_window_mask(int seq_len, int block_size, int prefill_len,
                              int window_size) {
    if (window_size == 0) {
        throw std::invalid_argument("empty window");
    }
    if (window_size < 0) {
        throw std::invalid_argument("negative window");
    }
    BlockMask m = empty_grid(seq_len, block_size, prefill_len);
    for (int i = 0; i < m.n_query_blocks; ++i) {
        const int q0 = m.block_start(i), q1 = m.block_end(i) - 1;
        for (int j = 0; j < m.n_key_blocks; ++j) {
            const int k0 = m.block_start(j), k1 = m.block_end(j) - 1;
            // Minimum |q - k| over the tile: 0 when the intervals overlap.
            int gap = 0;
            if (k0 > q1) {
                gap = k0 - q1;
            } else if (q0 > k1) {
                gap = q0 - k1;
            }
            if (gap < window_size) {
                m.keep[static_cast<std::size_t>(i) * m.n_key_blocks + j] = 1;
            }
        }
    }
    return m;
}

BlockMask streaming_mask(int seq_len, int block_size, int prefill_len,
                         int window_size, double sink_fraction) {
    if (sink_fraction < 0.0 || sink_fraction > 1.0) {
        throw std::invalid_argument("sink fraction out of range");
    }
    BlockMask m = sliding_window_mask(seq_len, block_size, prefill_len, window_size);
    const int sink_tokens =
        static_cast<int>(std::ceil(sink_fraction * static_cast<double>(seq_len)));
    for (int j = 0; j < m.n_key_blocks; ++j) {
        if (m.block_start(j) < sink_tokens) {
            for (int i = 0; i < m.n_query_blocks; ++i) {
                m.keep[static_cast<std::size_t>(i) * m.n_key_blocks + j] = 1;
            }
        }
    }
    return m;
}

Matrix mask_to_dense_bias(const BlockMask& mask) {
    Matrix bias(mask.seq_len, mask.seq_len, kMaskedScore);
    for (int i = 0; i < mask.n_query_blocks; ++i) {
        for (int j = 0; j < mask.n_key_blocks; ++j) {
            if (!mask.kept(i, j)) {
                continue;
            }
            for (int r = mask.block_start(i); r < mask.block_end(i); ++r) {
                double* row = bias.row(r);
                for (int c = mask.block_start(j); c < mask.block_end(j); ++c) {
                    row[c] = 0.0;
                }
            }
        }
    }
    return bias;
}

double density(const BlockMask& mask) {
    std::size_t kept = 0;
    for (std::uint8_t v : mask.keep) {
        kept += v != 0;
    }
    return static_cast<double>(kept) / static_cast<double>(mask.keep.size());
}

void write_mask_csv(std::ostream& os, const BlockMask& mask) {
    for (int i = 0; i < mask.n_query_blocks; ++i) {
        for (int j = 0; j < mask.n_key_blocks; ++j) {
            if (j > 0) {
                os << ',';
            }
            os << (mask.kept(i, j) ? '1' : '0');
        }
        os << '\n';
    }
}

std::string mask_to_csv(const BlockMask& mask) {
    std::ostringstream os;
    write_mask_csv(os, mask);
    return os.str();
}

}  // namespace sparsed

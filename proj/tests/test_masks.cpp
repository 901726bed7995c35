#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "sparsed/block_mask.hpp"
#include "sparsed/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

using namespace sparsed;

namespace {

// Reference decision for one sliding-window tile: enumerate all token pairs.
bool window_tile_kept(int seq_len, int block_size, int i, int j, int ws) {
    for (int q = i * block_size; q < std::min((i + 1) * block_size, seq_len); ++q) {
        for (int k = j * block_size; k < std::min((j + 1) * block_size, seq_len); ++k) {
            if (std::abs(q - k) < ws) {
                return true;
            }
        }
    }
    return false;
}

}  // namespace

TEST_CASE("full mask keeps everything, ragged edges included") {
    const BlockMask even = full_mask(8, 4, 0);
    CHECK(even.n_query_blocks == 2);
    CHECK(even.n_key_blocks == 2);
    CHECK(density(even) == 1.0);

    const BlockMask ragged = full_mask(10, 4, 0);
    CHECK(ragged.n_query_blocks == 3);
    CHECK(density(ragged) == 1.0);
}

TEST_CASE("sliding window with a huge window equals the full mask") {
    const BlockMask w = sliding_window_mask(20, 4, 8, 20);
    CHECK(w == full_mask(20, 4, 8));
}

TEST_CASE("sliding window produces the enumerated tridiagonal pattern") {
    const BlockMask m = sliding_window_mask(8, 2, 0, 2);
    for (int i = 0; i < m.n_query_blocks; ++i) {
        for (int j = 0; j < m.n_key_blocks; ++j) {
            CHECK(m.kept(i, j) == window_tile_kept(8, 2, i, j, 2));
            CHECK(m.kept(i, j) == (std::abs(i - j) <= 1));
        }
    }
}

TEST_CASE("sliding window agrees with pair enumeration on random geometries") {
    Rng rng(21);
    for (int it = 0; it < 50; ++it) {
        const int seq_len = 2 + rng.next_int(40);
        const int bs = 1 + rng.next_int(7);
        const int ws = 1 + rng.next_int(seq_len + 3);
        const BlockMask m = sliding_window_mask(seq_len, bs, 0, ws);
        for (int i = 0; i < m.n_query_blocks; ++i) {
            for (int j = 0; j < m.n_key_blocks; ++j) {
                CHECK(m.kept(i, j) == window_tile_kept(seq_len, bs, i, j, ws));
            }
        }
    }
}

TEST_CASE("diagonal blocks are always kept") {
    Rng rng(22);
    for (int it = 0; it < 20; ++it) {
        const int seq_len = 2 + rng.next_int(40);
        const int bs = 1 + rng.next_int(7);
        const BlockMask m = sliding_window_mask(seq_len, bs, 0, 1);
        for (int i = 0; i < m.n_query_blocks; ++i) {
            CHECK(m.kept(i, i));
        }
    }
}

TEST_CASE("empty window is rejected") {
    CHECK_THROWS_WITH_AS(sliding_window_mask(8, 2, 0, 0), "empty window",
                         std::invalid_argument);
}

TEST_CASE("streaming with no sink equals the sliding window") {
    const BlockMask s = streaming_mask(16, 4, 8, 4, 0.0);
    CHECK(s == sliding_window_mask(16, 4, 8, 4));
}

TEST_CASE("streaming with sink fraction one equals the full mask") {
    const BlockMask s = streaming_mask(16, 4, 8, 4, 1.0);
    CHECK(s == full_mask(16, 4, 8));
}

TEST_CASE("streaming keeps sink key blocks in every row") {
    // 10% of 16 tokens -> 2 sink tokens -> key block 0 everywhere.
    const BlockMask s = streaming_mask(16, 4, 8, 4, 0.1);
    const BlockMask w = sliding_window_mask(16, 4, 8, 4);
    for (int i = 0; i < s.n_query_blocks; ++i) {
        CHECK(s.kept(i, 0));
        for (int j = 0; j < s.n_key_blocks; ++j) {
            const bool expected = w.kept(i, j) || j == 0;
            CHECK(s.kept(i, j) == expected);
        }
    }
}

TEST_CASE("streaming is a superset of the sliding window") {
    Rng rng(23);
    for (int it = 0; it < 30; ++it) {
        const int seq_len = 2 + rng.next_int(60);
        const int bs = 1 + rng.next_int(7);
        const int ws = 1 + rng.next_int(seq_len);
        const double sink = rng.next_double();
        const BlockMask s = streaming_mask(seq_len, bs, 0, ws, sink);
        const BlockMask w = sliding_window_mask(seq_len, bs, 0, ws);
        for (std::size_t idx = 0; idx < s.keep.size(); ++idx) {
            CHECK(s.keep[idx] >= w.keep[idx]);
        }
    }
}

TEST_CASE("every constructor leaves no empty query-block row") {
    Rng rng(24);
    for (int it = 0; it < 30; ++it) {
        const int seq_len = 2 + rng.next_int(60);
        const int bs = 1 + rng.next_int(7);
        const int p = rng.next_int(seq_len + 1);
        const int ws = 1 + rng.next_int(seq_len);
        for (const BlockMask& m :
             {full_mask(seq_len, bs, p), sliding_window_mask(seq_len, bs, p, ws),
              streaming_mask(seq_len, bs, p, ws, rng.next_double())}) {
            for (int i = 0; i < m.n_query_blocks; ++i) {
                CHECK(m.kept_in_row(i) >= 1);
            }
        }
    }
}

TEST_CASE("dense bias expansion of single kept blocks per row") {
    const BlockMask m = make_block_mask(4, 2, 0, {1, 0, 0, 1});
    const Matrix bias = mask_to_dense_bias(m);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            const bool inside = (r < 2 && c < 2) || (r >= 2 && c >= 2);
            CHECK(bias(r, c) == (inside ? 0.0 : kMaskedScore));
        }
    }
}

TEST_CASE("full mask expands to an all-zero bias") {
    const Matrix bias = mask_to_dense_bias(full_mask(10, 4, 0));
    for (double v : bias.data) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("bias round-trips back to the keep grid") {
    Rng rng(25);
    for (int it = 0; it < 20; ++it) {
        const int seq_len = 2 + rng.next_int(40);
        const int bs = 1 + rng.next_int(7);
        const BlockMask m = testutil::random_mask(seq_len, bs, 0, rng);
        const Matrix bias = mask_to_dense_bias(m);
        for (int i = 0; i < m.n_query_blocks; ++i) {
            for (int j = 0; j < m.n_key_blocks; ++j) {
                bool any_zero = false;
                for (int r = m.block_start(i); r < m.block_end(i); ++r) {
                    for (int c = m.block_start(j); c < m.block_end(j); ++c) {
                        any_zero |= bias(r, c) == 0.0;
                    }
                }
                CHECK(any_zero == m.kept(i, j));
            }
        }
    }
}

TEST_CASE("density counts kept blocks") {
    const BlockMask m = make_block_mask(4, 2, 0, {1, 0, 1, 0});
    CHECK(density(m) == doctest::Approx(0.5));
    const BlockMask one = make_block_mask(4, 2, 0, {1, 0, 0, 1});
    CHECK(density(one) == doctest::Approx(0.5));
}

TEST_CASE("isolated selection density follows the ceiling rule") {
    // 16 key blocks, 8 prefill and 8 generation, rho 50% -> 4 + 4 kept.
    std::vector<std::uint8_t> row(16, 0);
    for (int j = 0; j < 4; ++j) {
        row[j] = 1;
        row[8 + j] = 1;
    }
    std::vector<std::uint8_t> keep;
    for (int i = 0; i < 16; ++i) {
        keep.insert(keep.end(), row.begin(), row.end());
    }
    const BlockMask m = make_block_mask(32, 2, 16, keep);
    CHECK(density(m) == doctest::Approx(0.5));
}

TEST_CASE("masks reject an empty query-block row") {
    CHECK_THROWS_WITH_AS(make_block_mask(4, 2, 0, {1, 1, 0, 0}),
                         "fully masked query-block row", std::invalid_argument);
}

TEST_CASE("mask CSV serialization is a 0/1 grid") {
    const BlockMask m = make_block_mask(4, 2, 2, {1, 0, 0, 1});
    CHECK(mask_to_csv(m) == "1,0\n0,1\n");
}

#pragma once

#include "sparsed/attention.hpp"
#include "sparsed/block_mask.hpp"
#include "sparsed/matrix.hpp"
#include "sparsed/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

// Test-side reference implementations. Written in the most literal form
// possible and kept independent of the library's execution paths: plain
// per-row softmax, full score materialization, no tiling, no chunking.
namespace testutil {

inline sparsed::Matrix random_matrix(int rows, int cols, sparsed::Rng& rng,
                                     double lo = -1.0, double hi = 1.0) {
    sparsed::Matrix m(rows, cols, 0.0);
    for (double& v : m.data) {
        v = rng.next_double(lo, hi);
    }
    return m;
}

inline sparsed::HeadInputs random_head(int seq_len, int head_dim, sparsed::Rng& rng) {
    sparsed::HeadInputs h;
    h.q = random_matrix(seq_len, head_dim, rng);
    h.k = random_matrix(seq_len, head_dim, rng);
    h.v = random_matrix(seq_len, head_dim, rng);
    return h;
}

// softmax(q k^T / sqrt(d) + bias) v, one row at a time. bias may be null.
inline sparsed::Matrix oracle_attention(const sparsed::Matrix& q,
                                        const sparsed::Matrix& k,
                                        const sparsed::Matrix& v,
                                        const sparsed::Matrix* bias = nullptr) {
    const int l = q.rows;
    const int d = q.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    sparsed::Matrix out(l, d, 0.0);
    for (int i = 0; i < l; ++i) {
        std::vector<double> logits(l);
        double row_max = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < l; ++j) {
            double s = 0.0;
            for (int c = 0; c < d; ++c) {
                s += q(i, c) * k(j, c);
            }
            s *= scale;
            if (bias != nullptr) {
                s = (*bias)(i, j) == sparsed::kMaskedScore ? sparsed::kMaskedScore
                                                           : s + (*bias)(i, j);
            }
            logits[j] = s;
            if (s != sparsed::kMaskedScore && s > row_max) {
                row_max = s;
            }
        }
        double denom = 0.0;
        std::vector<double> w(l, 0.0);
        for (int j = 0; j < l; ++j) {
            if (logits[j] == sparsed::kMaskedScore) {
                continue;
            }
            w[j] = std::exp(logits[j] - row_max);
            denom += w[j];
        }
        for (int j = 0; j < l; ++j) {
            for (int c = 0; c < d; ++c) {
                out(i, c) += w[j] / denom * v(j, c);
            }
        }
    }
    return out;
}

// softmax(q k^T / sqrt(d)) materialized in full.
inline sparsed::Matrix oracle_probabilities(const sparsed::Matrix& q,
                                            const sparsed::Matrix& k) {
    const int l = q.rows;
    const int d = q.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    sparsed::Matrix probs(l, l, 0.0);
    for (int i = 0; i < l; ++i) {
        std::vector<double> logits(l);
        double row_max = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < l; ++j) {
            double s = 0.0;
            for (int c = 0; c < d; ++c) {
                s += q(i, c) * k(j, c);
            }
            logits[j] = s * scale;
            row_max = std::max(row_max, logits[j]);
        }
        double denom = 0.0;
        for (int j = 0; j < l; ++j) {
            logits[j] = std::exp(logits[j] - row_max);
            denom += logits[j];
        }
        for (int j = 0; j < l; ++j) {
            probs(i, j) = logits[j] / denom;
        }
    }
    return probs;
}

// Mean over each tile's valid entries, double loop.
inline sparsed::Matrix oracle_pool(const sparsed::Matrix& m, int block_size) {
    const int out_rows = (m.rows + block_size - 1) / block_size;
    const int out_cols = (m.cols + block_size - 1) / block_size;
    sparsed::Matrix out(out_rows, out_cols, 0.0);
    for (int bi = 0; bi < out_rows; ++bi) {
        for (int bj = 0; bj < out_cols; ++bj) {
            double sum = 0.0;
            int count = 0;
            for (int r = bi * block_size; r < std::min((bi + 1) * block_size, m.rows); ++r) {
                for (int c = bj * block_size; c < std::min((bj + 1) * block_size, m.cols); ++c) {
                    sum += m(r, c);
                    ++count;
                }
            }
            out(bi, bj) = sum / count;
        }
    }
    return out;
}

// Top-k by repeated scan: each round takes the highest remaining value,
// breaking ties toward the lower index.
inline std::vector<int> oracle_topk(const std::vector<double>& values, int first,
                                    int last, int k) {
    std::vector<int> kept;
    std::vector<bool> used(values.size(), false);
    for (int round = 0; round < k && round < last - first; ++round) {
        int best = -1;
        for (int j = first; j < last; ++j) {
            if (used[j]) {
                continue;
            }
            if (best < 0 || values[j] > values[best]) {
                best = j;
            }
        }
        used[best] = true;
        kept.push_back(best);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

inline int oracle_quota(double rho, int region) {
    if (region <= 0) {
        return 0;
    }
    const int q = static_cast<int>(std::ceil(rho * region));
    return std::max(1, std::min(q, region));
}

// Random keep grid with at least one block per row.
inline sparsed::BlockMask random_mask(int seq_len, int block_size, int prefill_len,
                                      sparsed::Rng& rng, double keep_prob = 0.4) {
    const int nb = (seq_len + block_size - 1) / block_size;
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(nb) * nb, 0);
    for (int i = 0; i < nb; ++i) {
        int row_kept = 0;
        for (int j = 0; j < nb; ++j) {
            if (rng.next_double() < keep_prob) {
                keep[static_cast<std::size_t>(i) * nb + j] = 1;
                ++row_kept;
            }
        }
        if (row_kept == 0) {
            keep[static_cast<std::size_t>(i) * nb + rng.next_int(nb)] = 1;
        }
    }
    return sparsed::make_block_mask(seq_len, block_size, prefill_len, std::move(keep));
}

inline double max_abs_diff(const sparsed::Matrix& a, const sparsed::Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

inline double rel_frobenius(const sparsed::Matrix& a, const sparsed::Matrix& b) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        diff += d * d;
        ref += b.data[i] * b.data[i];
    }
    return std::sqrt(diff / ref);
}

}  // namespace testutil

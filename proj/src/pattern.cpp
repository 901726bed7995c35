#include "sparsed/pattern.hpp"

#include "sparsed/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sparsed {

namespace {

// Indices of the k largest entries of values[first, last), ranked by value
// and then by lower index. k is clamped to the region size.
void topk_region(std::span<const double> values, int first, int last, int k,
                 std::vector<int>& out) {
    const int n = last - first;
    if (n <= 0 || k <= 0) {
        return;
    }
    k = std::min(k, n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), first);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) {
                          if (values[a] != values[b]) {
                              return values[a] > values[b];
                          }
                          return a < b;
                      });
    out.insert(out.end(), order.begin(), order.begin() + k);
}

int region_quota(double rho, int region_blocks) {
    if (region_blocks <= 0) {
        return 0;
    }
    const int quota = static_cast<int>(std::ceil(rho * static_cast<double>(region_blocks)));
    return std::clamp(quota, 1, region_blocks);
}

}  // namespace

void SparseDConfig::validate() const {
    if (rho <= 0.0 || rho > 1.0) {
        throw std::invalid_argument("rho out of range (0, 1]");
    }
    if (skip < 0.0 || skip >= 1.0) {
        throw std::invalid_argument("skip out of range [0, 1)");
    }
    if (block_size < 1) {
        throw std::invalid_argument("invalid block size");
    }
    if (total_steps < 1) {
        throw std::invalid_argument("invalid step count");
    }
}

int prefill_boundary_block(int prefill_len, int block_size) {
    return ceil_div(prefill_len, block_size);
}

PooledScores pooled_scores_chunked(const Matrix& q, const Matrix& k, int block_size,
                                   int chunk_blocks, int prefill_len, FlopCounter* fc) {
    if (q.cols != k.cols) {
        throw std::invalid_argument("inconsistent head shapes");
    }
    if (q.cols < 1) {
        throw std::invalid_argument("empty head dimension");
    }
    if (q.rows != k.rows) {
        throw std::invalid_argument("inconsistent sequence lengths");
    }
    if (block_size < 1) {
        throw std::invalid_argument("invalid block size");
    }
    if (chunk_blocks < 1) {
        throw std::invalid_argument("invalid chunk size");
    }

    const int l = q.rows;
    const int d = q.cols;
    const int n_blocks = ceil_div(l, block_size);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    PooledScores pooled;
    pooled.block_size = block_size;
    pooled.prefill_boundary_block = prefill_boundary_block(prefill_len, block_size);
    pooled.grid = Matrix(n_blocks, n_blocks, 0.0);

    // Transient storage: scores for at most chunk_blocks query blocks.
    Matrix chunk_scores(std::min(chunk_blocks * block_size, l), l, 0.0);

    for (int qb0 = 0; qb0 < n_blocks; qb0 += chunk_blocks) {
        const int qb1 = std::min(qb0 + chunk_blocks, n_blocks);
        const int r0 = qb0 * block_size;
        const int r1 = std::min(qb1 * block_size, l);
        const int nr = r1 - r0;

        for (int r = 0; r < nr; ++r) {
            const double* qrow = q.row(r0 + r);
            double* srow = chunk_scores.row(r);
            for (int t = 0; t < l; ++t) {
                const double* krow = k.row(t);
                double acc = 0.0;
                for (int c = 0; c < d; ++c) {
                    acc += qrow[c] * krow[c];
                }
                srow[t] = acc * scale;
            }
        }

        // Softmax over the full key axis makes each row self-contained, so
        // pooling chunk by chunk is exact.
        for (int r = 0; r < nr; ++r) {
            double* srow = chunk_scores.row(r);
            double row_max = srow[0];
            for (int t = 1; t < l; ++t) {
                row_max = std::max(row_max, srow[t]);
            }
            double sum = 0.0;
            for (int t = 0; t < l; ++t) {
                srow[t] = std::exp(srow[t] - row_max);
                sum += srow[t];
            }
            const double inv = 1.0 / sum;
            for (int t = 0; t < l; ++t) {
                srow[t] *= inv;
            }
        }

        for (int qb = qb0; qb < qb1; ++qb) {
            const int br0 = qb * block_size - r0;
            const int br1 = std::min((qb + 1) * block_size, l) - r0;
            for (int kb = 0; kb < n_blocks; ++kb) {
                const int c0 = kb * block_size;
                const int c1 = std::min(c0 + block_size, l);
                double sum = 0.0;
                for (int r = br0; r < br1; ++r) {
                    const double* srow = chunk_scores.row(r);
                    for (int c = c0; c < c1; ++c) {
                        sum += srow[c];
                    }
                }
                pooled.grid(qb, kb) =
                    sum / (static_cast<double>(br1 - br0) * (c1 - c0));
            }
        }
    }

    if (fc != nullptr) {
        fc->score_flops += 2ll * l * l * d;
    }
    return pooled;
}

std::vector<int> isolated_topk_row(std::span<const double> pooled_row,
                                   int boundary_block, double rho) {
    if (rho <= 0.0) {
        throw std::invalid_argument("empty selection");
    }
    const int n = static_cast<int>(pooled_row.size());
    if (boundary_block < 0 || boundary_block > n) {
        throw std::invalid_argument("boundary out of range");
    }
    std::vector<int> kept;
    topk_region(pooled_row, 0, boundary_block, region_quota(rho, boundary_block), kept);
    topk_region(pooled_row, boundary_block, n, region_quota(rho, n - boundary_block), kept);
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<int> joint_topk_row(std::span<const double> pooled_row, double rho) {
    if (rho <= 0.0) {
        throw std::invalid_argument("empty selection");
    }
    const int n = static_cast<int>(pooled_row.size());
    std::vector<int> kept;
    topk_region(pooled_row, 0, n, region_quota(rho, n), kept);
    std::sort(kept.begin(), kept.end());
    return kept;
}

BlockMask build_pattern(const Matrix& q, const Matrix& k, int prefill_len,
                        const SparseDConfig& config, int chunk_blocks,
                        SelectionPolicy policy, FlopCounter* fc) {
    config.validate();
    if (prefill_len < 0 || prefill_len > q.rows) {
        throw std::invalid_argument("prefill length out of range");
    }

    const PooledScores pooled =
        pooled_scores_chunked(q, k, config.block_size, chunk_blocks, prefill_len, fc);
    const int n_blocks = pooled.grid.rows;

    std::vector<std::uint8_t> keep(static_cast<std::size_t>(n_blocks) * n_blocks, 0);
    for (int i = 0; i < n_blocks; ++i) {
        std::span<const double> row(pooled.grid.row(i), static_cast<std::size_t>(n_blocks));
        const std::vector<int> kept =
            policy == SelectionPolicy::kIsolated
                ? isolated_topk_row(row, pooled.prefill_boundary_block, config.rho)
                : joint_topk_row(row, config.rho);
        for (int j : kept) {
            keep[static_cast<std::size_t>(i) * n_blocks + j] = 1;
        }
    }
    return make_block_mask(q.rows, config.block_size, prefill_len, std::move(keep));
}

void PatternCache::put(int layer, int head, BlockMask mask) {
    if (sealed()) {
        throw std::logic_error("pattern already captured");
    }
    const auto key = std::make_pair(layer, head);
    if (entries_.contains(key)) {
        throw std::logic_error("duplicate pattern entry");
    }
    entries_.emplace(key, std::move(mask));
}

void PatternCache::seal(int step, int n_layers, int n_heads) {
    if (sealed()) {
        throw std::logic_error("pattern already captured");
    }
    if (entries_.size() != static_cast<std::size_t>(n_layers) * n_heads) {
        throw std::logic_error("incomplete pattern capture");
    }
    captured_at_step_ = step;
}

const BlockMask& PatternCache::get(int layer, int head) const {
    const auto it = entries_.find(std::make_pair(layer, head));
    if (it == entries_.end()) {
        throw std::out_of_range("no pattern for layer/head");
    }
    return it->second;
}

void capture(PatternCache& cache,
             const std::vector<std::vector<HeadProjections>>& projections,
             int prefill_len, const SparseDConfig& config, int step, int chunk_blocks,
             SelectionPolicy policy, FlopCounter* fc, int n_threads) {
    if (!cache.empty() || cache.sealed()) {
        throw std::logic_error("pattern already captured");
    }
    const int n_layers = static_cast<int>(projections.size());
    if (n_layers == 0) {
        throw std::invalid_argument("no layers to capture");
    }
    const int n_heads = static_cast<int>(projections.front().size());
    if (n_heads == 0) {
        throw std::invalid_argument("no heads to capture");
    }
    for (const auto& layer : projections) {
        if (static_cast<int>(layer.size()) != n_heads) {
            throw std::invalid_argument("ragged head counts across layers");
        }
    }

    std::vector<BlockMask> masks(static_cast<std::size_t>(n_layers) * n_heads);
    std::vector<FlopCounter> locals(masks.size());
    parallel_for(static_cast<int>(masks.size()), n_threads, [&](int idx) {
        const int layer = idx / n_heads;
        const int head = idx % n_heads;
        const HeadProjections& p = projections[layer][head];
        masks[idx] = build_pattern(p.q, p.k, prefill_len, config, chunk_blocks, policy,
                                   &locals[idx]);
    });

    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (fc != nullptr) {
            *fc += locals[i];
        }
        cache.put(static_cast<int>(i) / n_heads, static_cast<int>(i) % n_heads,
                  std::move(masks[i]));
    }
    cache.seal(step, n_layers, n_heads);
}

}  // namespace sparsed

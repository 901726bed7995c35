#include "sparsed/attention.hpp"

#include "sparsed/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sparsed {

namespace {

// Query rows processed per tile. Keeps the live output slab plus one score
// panel inside L2 for typical head dims.
constexpr int kQueryTile = 64;

inline double dot(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline void axpy(double* y, const double* x, double a, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

}  // namespace

void HeadInputs::validate() const {
    if (q.cols < 1) {
        throw std::invalid_argument("empty head dimension");
    }
    if (q.rows < 1) {
        throw std::invalid_argument("empty sequence");
    }
    if (!q.same_shape(k) || !q.same_shape(v)) {
        throw std::invalid_argument("inconsistent head shapes");
    }
}

Matrix dense_attention(const HeadInputs& h, FlopCounter* fc) {
    h.validate();
    const int l = h.seq_len();
    const int d = h.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Matrix out(l, d, 0.0);
    // Score panel for one query tile, keyed [key * nr + local_row] so both
    // passes write and read contiguously.
    std::vector<double> panel(static_cast<std::size_t>(kQueryTile) * l);
    std::vector<double> row_max(kQueryTile);
    std::vector<double> denom(kQueryTile);

    for (int r0 = 0; r0 < l; r0 += kQueryTile) {
        const int nr = std::min(kQueryTile, l - r0);

        for (int t = 0; t < l; ++t) {
            const double* krow = h.k.row(t);
            double* slot = panel.data() + static_cast<std::size_t>(t) * nr;
            for (int r = 0; r < nr; ++r) {
                slot[r] = dot(h.q.row(r0 + r), krow, d) * scale;
            }
        }

        std::fill(row_max.begin(), row_max.begin() + nr, kMaskedScore);
        for (int t = 0; t < l; ++t) {
            const double* slot = panel.data() + static_cast<std::size_t>(t) * nr;
            for (int r = 0; r < nr; ++r) {
                if (slot[r] > row_max[r]) {
                    row_max[r] = slot[r];
                }
            }
        }

        std::fill(denom.begin(), denom.begin() + nr, 0.0);
        for (int t = 0; t < l; ++t) {
            const double* vrow = h.v.row(t);
            const double* slot = panel.data() + static_cast<std::size_t>(t) * nr;
            for (int r = 0; r < nr; ++r) {
                const double w = std::exp(slot[r] - row_max[r]);
                denom[r] += w;
                axpy(out.row(r0 + r), vrow, w, d);
            }
        }
        for (int r = 0; r < nr; ++r) {
            const double inv = 1.0 / denom[r];
            double* orow = out.row(r0 + r);
            for (int c = 0; c < d; ++c) {
                orow[c] *= inv;
            }
        }
    }

    if (fc != nullptr) {
        const std::int64_t quad = 2ll * l * l * d;
        fc->score_flops += quad;
        fc->weighted_sum_flops += quad;
    }
    return out;
}

Matrix masked_dense_attention(const HeadInputs& h, const Matrix& bias, FlopCounter* fc) {
    h.validate();
    const int l = h.seq_len();
    const int d = h.head_dim();
    if (bias.rows != l || bias.cols != l) {
        throw std::invalid_argument("bias shape mismatch");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Matrix out(l, d, 0.0);
    std::vector<double> panel(static_cast<std::size_t>(kQueryTile) * l);
    std::vector<double> row_max(kQueryTile);
    std::vector<double> denom(kQueryTile);

    for (int r0 = 0; r0 < l; r0 += kQueryTile) {
        const int nr = std::min(kQueryTile, l - r0);

        for (int t = 0; t < l; ++t) {
            const double* krow = h.k.row(t);
            double* slot = panel.data() + static_cast<std::size_t>(t) * nr;
            for (int r = 0; r < nr; ++r) {
                const double b = bias(r0 + r, t);
                slot[r] = (b == kMaskedScore) ? kMaskedScore
                                              : dot(h.q.row(r0 + r), krow, d) * scale + b;
            }
        }

        std::fill(row_max.begin(), row_max.begin() + nr, kMaskedScore);
        for (int t = 0; t < l; ++t) {
            const double* slot = panel.data() + static_cast<std::size_t>(t) * nr;
            for (int r = 0; r < nr; ++r) {
                if (slot[r] != kMaskedScore && slot[r] > row_max[r]) {
                    row_max[r] = slot[r];
                }
            }
        }
        for (int r = 0; r < nr; ++r) {
            if (row_max[r] == kMaskedScore) {
                throw std::invalid_argument("fully masked row");
            }
        }

        std::fill(denom.begin(), denom.begin() + nr, 0.0);
        for (int t = 0; t < l; ++t) {
            const double* vrow = h.v.row(t);
            const double* slot = panel.data() + static_cast<std::size_t>(t) * nr;
            for (int r = 0; r < nr; ++r) {
                if (slot[r] == kMaskedScore) {
                    continue;
                }
                const double w = std::exp(slot[r] - row_max[r]);
                denom[r] += w;
                axpy(out.row(r0 + r), vrow, w, d);
            }
        }
        for (int r = 0; r < nr; ++r) {
            const double inv = 1.0 / denom[r];
            double* orow = out.row(r0 + r);
            for (int c = 0; c < d; ++c) {
                orow[c] *= inv;
            }
        }
    }

    if (fc != nullptr) {
        const std::int64_t quad = 2ll * l * l * d;
        fc->score_flops += quad;
        fc->weighted_sum_flops += quad;
    }
    return out;
}

Matrix block_sparse_attention(const HeadInputs& h, const BlockMask& mask, FlopCounter* fc) {
    h.validate();
    const int l = h.seq_len();
    const int d = h.head_dim();
    if (mask.seq_len != l || mask.n_query_blocks != ceil_div(l, mask.block_size)) {
        throw std::invalid_argument("mask shape mismatch");
    }
    const int bs = mask.block_size;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Matrix out(l, d, 0.0);
    std::vector<double> panel(static_cast<std::size_t>(bs) * bs);
    std::vector<double> run_max(bs);
    std::vector<double> run_sum(bs);
    std::vector<double> tile_max(bs);
    std::int64_t kept_area = 0;

    for (int qb = 0; qb < mask.n_query_blocks; ++qb) {
        const int r0 = mask.block_start(qb);
        const int nr = mask.block_end(qb) - r0;

        std::fill(run_max.begin(), run_max.begin() + nr, kMaskedScore);
        std::fill(run_sum.begin(), run_sum.begin() + nr, 0.0);

        for (int kb = 0; kb < mask.n_key_blocks; ++kb) {
            if (!mask.kept(qb, kb)) {
                continue;
            }
            const int c0 = mask.block_start(kb);
            const int nc = mask.block_end(kb) - c0;
            kept_area += static_cast<std::int64_t>(nr) * nc;

            for (int tc = 0; tc < nc; ++tc) {
                const double* krow = h.k.row(c0 + tc);
                double* slot = panel.data() + static_cast<std::size_t>(tc) * nr;
                for (int r = 0; r < nr; ++r) {
                    slot[r] = dot(h.q.row(r0 + r), krow, d) * scale;
                }
            }

            std::fill(tile_max.begin(), tile_max.begin() + nr, kMaskedScore);
            for (int tc = 0; tc < nc; ++tc) {
                const double* slot = panel.data() + static_cast<std::size_t>(tc) * nr;
                for (int r = 0; r < nr; ++r) {
                    if (slot[r] > tile_max[r]) {
                        tile_max[r] = slot[r];
                    }
                }
            }

            // Fold this tile into the running softmax state: when the row max
            // moves, previously accumulated sum and output are rescaled once.
            for (int r = 0; r < nr; ++r) {
                if (tile_max[r] <= run_max[r]) {
                    continue;
                }
                if (run_max[r] != kMaskedScore) {
                    const double factor = std::exp(run_max[r] - tile_max[r]);
                    run_sum[r] *= factor;
                    double* orow = out.row(r0 + r);
                    for (int c = 0; c < d; ++c) {
                        orow[c] *= factor;
                    }
                }
                run_max[r] = tile_max[r];
            }

            for (int tc = 0; tc < nc; ++tc) {
                const double* vrow = h.v.row(c0 + tc);
                const double* slot = panel.data() + static_cast<std::size_t>(tc) * nr;
                for (int r = 0; r < nr; ++r) {
                    const double w = std::exp(slot[r] - run_max[r]);
                    run_sum[r] += w;
                    axpy(out.row(r0 + r), vrow, w, d);
                }
            }
        }

        for (int r = 0; r < nr; ++r) {
            const double inv = 1.0 / run_sum[r];
            double* orow = out.row(r0 + r);
            for (int c = 0; c < d; ++c) {
                orow[c] *= inv;
            }
        }
    }

    if (fc != nullptr) {
        const std::int64_t quad = 2ll * kept_area * d;
        fc->score_flops += quad;
        fc->weighted_sum_flops += quad;
    }
    return out;
}

Matrix attention_probabilities(const Matrix& q, const Matrix& k) {
    if (q.cols != k.cols || q.cols < 1) {
        throw std::invalid_argument("inconsistent head shapes");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    Matrix scores(q.rows, k.rows, 0.0);
    for (int i = 0; i < q.rows; ++i) {
        const double* qrow = q.row(i);
        double* srow = scores.row(i);
        for (int j = 0; j < k.rows; ++j) {
            srow[j] = dot(qrow, k.row(j), q.cols) * scale;
        }
    }
    return stable_softmax_rows(scores);
}

std::vector<Matrix> multi_head_attention(const std::vector<HeadInputs>& heads,
                                         const std::vector<const BlockMask*>& masks,
                                         FlopCounter& fc, int n_threads) {
    if (!masks.empty() && masks.size() != heads.size()) {
        throw std::invalid_argument("mask count does not match head count");
    }
    for (const BlockMask* m : masks) {
        if (m == nullptr) {
            throw std::invalid_argument("null head mask");
        }
    }

    const int n = static_cast<int>(heads.size());
    std::vector<Matrix> outputs(n);
    std::vector<FlopCounter> locals(n);
    parallel_for(n, n_threads, [&](int i) {
        outputs[i] = masks.empty() ? dense_attention(heads[i], &locals[i])
                                   : block_sparse_attention(heads[i], *masks[i], &locals[i]);
    });
    // Merge per-head counters in head order so totals are thread-invariant.
    for (int i = 0; i < n; ++i) {
        fc += locals[i];
    }
    return outputs;
}

}  // namespace sparsed

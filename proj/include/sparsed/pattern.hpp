#pragma once

#include "sparsed/attention.hpp"
#include "sparsed/block_mask.hpp"
#include "sparsed/matrix.hpp"

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace sparsed {

// Hyperparameters of the sparse schedule: selection ratio rho, fraction of
// early steps that stay dense (skip), tile granularity and the step budget.
struct SparseDConfig {
    double rho = 0.5;
    double skip = 0.2;
    int block_size = 32;
    int total_steps = 1;

    void validate() const;
};

// Block-averaged attention probabilities for one head, plus the block index
// where the key axis switches from prefill to generation. A key block belongs
// to the prefill region iff its first token index is below prefill_len, so
// the boundary is ceil(prefill_len / block_size).
struct PooledScores {
    Matrix grid;  // n_query_blocks x n_key_blocks, entries in [0, 1]
    int block_size = 0;
    int prefill_boundary_block = 0;
};

int prefill_boundary_block(int prefill_len, int block_size);

// Computes avgpool(softmax(Q K^T / sqrt(d)), block_size) without ever holding
// more than chunk_blocks query blocks of scores: queries are processed in
// chunks, and because softmax normalizes each row over the full key axis, the
// result is independent of the chunking. Charges 2*l^2*d score FLOPs (one
// Q K^T pass) when a counter is given.
PooledScores pooled_scores_chunked(const Matrix& q, const Matrix& k, int block_size,
                                   int chunk_blocks, int prefill_len,
                                   FlopCounter* fc = nullptr);

// Top-k key blocks of one pooled row, selected separately inside the prefill
// and generation regions: each non-empty region keeps its ceil(rho * region
// size) best blocks. Ties break toward the lower block index. Returns kept
// indices in ascending order.
std::vector<int> isolated_topk_row(std::span<const double> pooled_row,
                                   int boundary_block, double rho);

// Ablation variant: one top-ceil(rho * n) selection over the whole row, same
// ranking and tie rule, no region split.
std::vector<int> joint_topk_row(std::span<const double> pooled_row, double rho);

enum class SelectionPolicy { kIsolated, kJoint };

// Full pattern for one head: pooled scores, then per-row top-k with the given
// policy. The result keeps at least one block per row whenever rho > 0.
BlockMask build_pattern(const Matrix& q, const Matrix& k, int prefill_len,
                        const SparseDConfig& config, int chunk_blocks,
                        SelectionPolicy policy = SelectionPolicy::kIsolated,
                        FlopCounter* fc = nullptr);

// Captured masks keyed by (layer, head). Filled during a single capture
// event and sealed; afterwards it only serves lookups, so any number of
// readers can share it.
class PatternCache {
public:
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    bool sealed() const { return captured_at_step_.has_value(); }
    std::optional<int> captured_at_step() const { return captured_at_step_; }

    // Capture-phase insertion. Throws "pattern already captured" once sealed.
    void put(int layer, int head, BlockMask mask);

    // Ends the capture event; verifies one entry per (layer, head).
    void seal(int step, int n_layers, int n_heads);

    const BlockMask& get(int layer, int head) const;

private:
    std::map<std::pair<int, int>, BlockMask> entries_;
    std::optional<int> captured_at_step_;
};

// Per-head query/key projections at the capture step, indexed
// [layer][head].
struct HeadProjections {
    Matrix q;
    Matrix k;
};

// One-shot capture: builds a pattern for every (layer, head) and seals the
// cache. Head patterns are independent, so they may be built on n_threads
// workers; the outcome is identical for any worker count.
void capture(PatternCache& cache,
             const std::vector<std::vector<HeadProjections>>& projections,
             int prefill_len, const SparseDConfig& config, int step,
             int chunk_blocks = 1,
             SelectionPolicy policy = SelectionPolicy::kIsolated,
             FlopCounter* fc = nullptr, int n_threads = 1);

}  // namespace sparsed

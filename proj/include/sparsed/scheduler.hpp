#pragma once

#include "sparsed/attention.hpp"
#include "sparsed/pattern.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sparsed {

// What a denoising step does with attention: plain full attention, full
// attention plus the one-time pattern capture, or masked execution.
enum class Phase { kFull, kFullAndCapture, kSparse };

const char* phase_name(Phase phase);

struct StepPlan {
    int step = 0;  // 1-based, ascending
    Phase phase = Phase::kFull;
};

// The capture step s = max(1, round(total_steps * skip)), round half up. The
// first s steps run full attention; the pattern is captured at step s and
// reused afterwards.
int capture_step(const SparseDConfig& config);

// Phase of one step under the standard schedule. Throws when step is outside
// [1, total_steps].
Phase plan_step(int step, const SparseDConfig& config);

std::vector<StepPlan> full_schedule(const SparseDConfig& config);

enum class ScheduleKind {
    kDense,              // full attention everywhere (baseline)
    kSparseD,            // skip window, one capture, reuse
    kAlwaysSparse,       // capture at step 1, no dense warmup
    kRecomputeEveryStep, // fresh pattern before every sparse step
    kJointSelection,     // no prefill/generation split in selection
    kSlidingWindow,      // fixed window baseline
    kStreaming,          // window + sink-column baseline
};

struct ScheduleMode {
    ScheduleKind kind = ScheduleKind::kDense;
    int window_size = 0;
    double sink_fraction = 0.0;

    static ScheduleMode dense() { return {ScheduleKind::kDense}; }
    static ScheduleMode sparse_d() { return {ScheduleKind::kSparseD}; }
    static ScheduleMode always_sparse() { return {ScheduleKind::kAlwaysSparse}; }
    static ScheduleMode recompute_every_step() { return {ScheduleKind::kRecomputeEveryStep}; }
    static ScheduleMode joint_selection() { return {ScheduleKind::kJointSelection}; }
    static ScheduleMode sliding_window(int window_size);
    static ScheduleMode streaming(int window_size, double sink_fraction);
};

const char* mode_name(ScheduleKind kind);

// Per-step record: phase, attention FLOPs split by stage, wall time of the
// attention dispatch (model setup and observers excluded), and pattern-cache
// reads.
struct StepTrace {
    int step = 0;
    Phase phase = Phase::kFull;
    std::int64_t flops_score = 0;
    std::int64_t flops_av = 0;
    std::int64_t wall_ns = 0;
    std::int64_t cache_hits = 0;
};

// CSV with header step,phase,flops_score,flops_av,wall_ns,cache_hits.
void write_trace_csv(std::ostream& os, std::span<const StepTrace> traces);
std::string trace_to_csv(std::span<const StepTrace> traces);

struct RunDims {
    int n_layers = 1;
    int n_heads = 1;
    int seq_len = 0;
    int prefill_len = 0;
};

// Executes attention for one layer; supplied to the model's forward pass by
// the schedule runner.
using LayerAttention =
    std::function<std::vector<Matrix>(int layer, const std::vector<HeadInputs>& heads)>;

// Model-side callbacks. `forward` must run one full pass, routing every
// attention call through the given dispatcher (once per layer, heads
// assembled in head order), and return the step's logits. The observers are
// optional and run outside the timed region.
struct ScheduleHooks {
    std::function<Matrix(const LayerAttention& attn)> forward;
    std::function<void(int step, const Matrix& logits)> on_logits;
    std::function<void(int step, int layer, int head, const BlockMask& mask)> on_sparse_mask;
    std::function<void(int step, int layer, const std::vector<HeadInputs>& heads)> on_head_inputs;
};

struct ScheduleResult {
    std::vector<StepTrace> traces;
    PatternCache cache;
    int pattern_builds = 0;  // step-level selection events
    FlopCounter flops;
};

// Drives the full denoising schedule: decides each step's phase, builds or
// reuses patterns as the mode dictates, dispatches attention, and records a
// StepTrace per step. Tokens, logits and unmasking stay on the model side.
ScheduleResult run_schedule(const ScheduleHooks& hooks, const ScheduleMode& mode,
                            const SparseDConfig& config, const RunDims& dims,
                            int n_threads = 1);

}  // namespace sparsed

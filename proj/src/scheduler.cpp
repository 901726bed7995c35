#include "sparsed/scheduler.hpp"

#include "sparsed/parallel.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sparsed {

namespace {

using Clock = std::chrono::steady_clock;

bool uses_pattern_cache(ScheduleKind kind) {
    return kind == ScheduleKind::kSparseD || kind == ScheduleKind::kAlwaysSparse ||
           kind == ScheduleKind::kJointSelection;
}

bool builds_patterns(ScheduleKind kind) {
    return uses_pattern_cache(kind) || kind == ScheduleKind::kRecomputeEveryStep;
}

SelectionPolicy policy_for(ScheduleKind kind) {
    return kind == ScheduleKind::kJointSelection ? SelectionPolicy::kJoint
                                                 : SelectionPolicy::kIsolated;
}

}  // namespace

const char* phase_name(Phase phase) {
    switch (phase) {
        case Phase::kFull: return "full";
        case Phase::kFullAndCapture: return "full_and_capture";
        case Phase::kSparse: return "sparse";
    }
    return "unknown";
}

int capture_step(const SparseDConfig& config) {
    const int s = static_cast<int>(
        std::floor(config.total_steps * config.skip + 0.5));
    return s < 1 ? 1 : s;
}

Phase plan_step(int step, const SparseDConfig& config) {
    if (step < 1 || step > config.total_steps) {
        throw std::invalid_argument("step out of range");
    }
    const int s = capture_step(config);
    if (step < s) {
        return Phase::kFull;
    }
    return step == s ? Phase::kFullAndCapture : Phase::kSparse;
}

std::vector<StepPlan> full_schedule(const SparseDConfig& config) {
    std::vector<StepPlan> plan;
    plan.reserve(config.total_steps);
    for (int step = 1; step <= config.total_steps; ++step) {
        plan.push_back({step, plan_step(step, config)});
    }
    return plan;
}

ScheduleMode ScheduleMode::sliding_window(int window_size) {
    if (window_size < 1) {
        throw std::invalid_argument("empty window");
    }
    ScheduleMode m{ScheduleKind::kSlidingWindow};
    m.window_size = window_size;
    return m;
}

ScheduleMode ScheduleMode::streaming(int window_size, double sink_fraction) {
    if (window_size < 1) {
        throw std::invalid_argument("empty window");
    }
    if (sink_fraction < 0.0 || sink_fraction > 1.0) {
        throw std::invalid_argument("sink fraction out of range");
    }
    ScheduleMode m{ScheduleKind::kStreaming};
    m.window_size = window_size;
    m.sink_fraction = sink_fraction;
    return m;
}

const char* mode_name(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::kDense: return "dense";
        case ScheduleKind::kSparseD: return "sparsed";
        case ScheduleKind::kAlwaysSparse: return "always-sparse";
        case ScheduleKind::kRecomputeEveryStep: return "recompute";
        case ScheduleKind::kJointSelection: return "joint";
        case ScheduleKind::kSlidingWindow: return "window";
        case ScheduleKind::kStreaming: return "streaming";
    }
    return "unknown";
}

void write_trace_csv(std::ostream& os, std::span<const StepTrace> traces) {
    os << "step,phase,flops_score,flops_av,wall_ns,cache_hits\n";
    for (const StepTrace& t : traces) {
        os << t.step << ',' << phase_name(t.phase) << ',' << t.flops_score << ','
           << t.flops_av << ',' << t.wall_ns << ',' << t.cache_hits << '\n';
    }
}

std::string trace_to_csv(std::span<const StepTrace> traces) {
    std::ostringstream ss;
    write_trace_csv(ss, traces);
    return ss.str();
}

ScheduleResult run_schedule(const ScheduleHooks& hooks, const ScheduleMode& mode,
                            const SparseDConfig& config, const RunDims& dims,
                            int n_threads) {
    config.validate();
    if (!hooks.forward) {
        throw std::invalid_argument("missing forward hook");
    }
    if (dims.n_layers < 1 || dims.n_heads < 1 || dims.seq_len < 1) {
        throw std::invalid_argument("invalid run dimensions");
    }
    if (dims.prefill_len < 0 || dims.prefill_len > dims.seq_len) {
        throw std::invalid_argument("prefill length out of range");
    }

    ScheduleResult result;
    const int total_steps = config.total_steps;

    // Fixed-pattern baselines share one mask across heads, layers and steps.
    BlockMask fixed_mask;
    if (mode.kind == ScheduleKind::kSlidingWindow) {
        fixed_mask = sliding_window_mask(dims.seq_len, config.block_size,
                                         dims.prefill_len, mode.window_size);
    } else if (mode.kind == ScheduleKind::kStreaming) {
        fixed_mask = streaming_mask(dims.seq_len, config.block_size, dims.prefill_len,
                                    mode.window_size, mode.sink_fraction);
    }

    int capture_at = 0;
    if (mode.kind == ScheduleKind::kAlwaysSparse) {
        capture_at = 1;
    } else if (builds_patterns(mode.kind)) {
        capture_at = capture_step(config);
    }

    for (int step = 1; step <= total_steps; ++step) {
        Phase phase = Phase::kFull;
        switch (mode.kind) {
            case ScheduleKind::kDense:
                phase = Phase::kFull;
                break;
            case ScheduleKind::kSlidingWindow:
            case ScheduleKind::kStreaming:
                phase = Phase::kSparse;
                break;
            default:
                phase = step < capture_at    ? Phase::kFull
                        : step == capture_at ? Phase::kFullAndCapture
                                             : Phase::kSparse;
                break;
        }

        StepTrace trace;
        trace.step = step;
        trace.phase = phase;

        const FlopCounter before = result.flops;
        std::int64_t wall_ns = 0;
        std::int64_t cache_hits = 0;

        const LayerAttention attn = [&](int layer,
                                        const std::vector<HeadInputs>& heads)
            -> std::vector<Matrix> {
            const int n_heads = static_cast<int>(heads.size());
            std::vector<Matrix> outputs;
            std::vector<const BlockMask*> mask_ptrs;
            std::vector<BlockMask> fresh;  // recompute mode only

            const auto t0 = Clock::now();
            switch (phase) {
                case Phase::kFull:
                    outputs = multi_head_attention(heads, {}, result.flops, n_threads);
                    break;
                case Phase::kFullAndCapture: {
                    // Build this layer's patterns from the current q/k, then
                    // produce the step's output with full attention.
                    std::vector<BlockMask> built(n_heads);
                    std::vector<FlopCounter> locals(n_heads);
                    parallel_for(n_heads, n_threads, [&](int hd) {
                        built[hd] = build_pattern(heads[hd].q, heads[hd].k,
                                                  dims.prefill_len, config,
                                                  /*chunk_blocks=*/1,
                                                  policy_for(mode.kind), &locals[hd]);
                    });
                    for (int hd = 0; hd < n_heads; ++hd) {
                        result.flops += locals[hd];
                        result.cache.put(layer, hd, std::move(built[hd]));
                    }
                    outputs = multi_head_attention(heads, {}, result.flops, n_threads);
                    break;
                }
                case Phase::kSparse: {
                    if (mode.kind == ScheduleKind::kSlidingWindow ||
                        mode.kind == ScheduleKind::kStreaming) {
                        mask_ptrs.assign(heads.size(), &fixed_mask);
                    } else if (mode.kind == ScheduleKind::kRecomputeEveryStep) {
                        fresh.resize(n_heads);
                        std::vector<FlopCounter> locals(n_heads);
                        parallel_for(n_heads, n_threads, [&](int hd) {
                            fresh[hd] = build_pattern(heads[hd].q, heads[hd].k,
                                                      dims.prefill_len, config,
                                                      /*chunk_blocks=*/1,
                                                      policy_for(mode.kind),
                                                      &locals[hd]);
                        });
                        for (int hd = 0; hd < n_heads; ++hd) {
                            result.flops += locals[hd];
                            mask_ptrs.push_back(&fresh[hd]);
                        }
                    } else {
                        for (int hd = 0; hd < n_heads; ++hd) {
                            mask_ptrs.push_back(&result.cache.get(layer, hd));
                        }
                        cache_hits += n_heads;
                    }
                    outputs = multi_head_attention(heads, mask_ptrs, result.flops,
                                                   n_threads);
                    break;
                }
            }
            wall_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(
                           Clock::now() - t0)
                           .count();

            if (hooks.on_sparse_mask && phase == Phase::kSparse) {
                for (int hd = 0; hd < n_heads; ++hd) {
                    hooks.on_sparse_mask(step, layer, hd, *mask_ptrs[hd]);
                }
            }
            if (hooks.on_head_inputs) {
                hooks.on_head_inputs(step, layer, heads);
            }
            return outputs;
        };

        const Matrix logits = hooks.forward(attn);

        if (phase == Phase::kFullAndCapture) {
            result.cache.seal(step, dims.n_layers, dims.n_heads);
            result.pattern_builds += 1;
        } else if (phase == Phase::kSparse &&
                   mode.kind == ScheduleKind::kRecomputeEveryStep) {
            result.pattern_builds += 1;
        }

        trace.flops_score = result.flops.score_flops - before.score_flops;
        trace.flops_av = result.flops.weighted_sum_flops - before.weighted_sum_flops;
        trace.wall_ns = wall_ns;
        trace.cache_hits = cache_hits;
        result.traces.push_back(trace);

        if (hooks.on_logits) {
            hooks.on_logits(step, logits);
        }
    }

    return result;
}

}  // namespace sparsed

#pragma once

#include "sparsed/attention.hpp"
#include "sparsed/matrix.hpp"
#include "sparsed/scheduler.hpp"

#include <cstdint>
#include <vector>

namespace sparsed {

// A deliberately small, untrained, fully deterministic masked-diffusion
// transformer. It exists to drive the attention schedules end to end on real
// token streams, not to model language.
//
// Architecture (pre-norm, bidirectional, no biases on linear maps):
//   x = token_embedding[token] + pos_embedding[position]
//   per layer: x += Wo * MHA(LN1(x));  x += W2 * relu(W1 * LN2(x))
//   logits = unembedding^T * LN_final(x)
//
// Every weight tensor is filled from a single Rng(seed) stream in the fixed
// order: token embedding, position embedding, then per layer Wq, Wk, Wv, Wo,
// W1, W2, then the unembedding. Embeddings draw uniform [-1, 1), projection
// and FFN weights uniform [-0.5, 0.5). LayerNorm gains start at 1 and shifts
// at 0. The last vocabulary id is the reserved mask token.
struct ToyModelConfig {
    int n_layers = 2;
    int n_heads = 2;
    int head_dim = 8;
    int vocab_size = 64;
    int max_len = 256;
    std::uint64_t seed = 42;

    int d_model() const { return n_heads * head_dim; }
    int ffn_dim() const { return 4 * d_model(); }
    int mask_token() const { return vocab_size - 1; }
    void validate() const;
};

struct LayerParams {
    std::vector<double> ln1_gamma, ln1_beta;
    std::vector<double> ln2_gamma, ln2_beta;
    Matrix wq, wk, wv, wo;  // d_model x d_model
    Matrix w_ff1;           // d_model x ffn_dim
    Matrix w_ff2;           // ffn_dim x d_model
};

struct ToyModel {
    ToyModelConfig config;
    Matrix token_embedding;  // vocab_size x d_model
    Matrix pos_embedding;    // max_len x d_model
    std::vector<LayerParams> layers;
    std::vector<double> final_ln_gamma, final_ln_beta;
    Matrix unembedding;  // d_model x vocab_size

    std::int64_t parameter_count() const;
};

ToyModel init_model(const ToyModelConfig& config);

// One forward pass; every attention call goes through `attn` so the schedule
// runner can decide the executor and account for it. Returns length x vocab
// logits. Throws on unknown token ids and on sequences longer than max_len.
Matrix forward(const ToyModel& model, const std::vector<int>& tokens,
               const LayerAttention& attn);

// Forward with plain dense attention everywhere.
Matrix forward_dense(const ToyModel& model, const std::vector<int>& tokens,
                     FlopCounter* fc = nullptr, int n_threads = 1);

// Token sequence mid-denoising: prompt positions are fixed, generation
// positions start as the mask token and get filled monotonically.
struct SequenceState {
    std::vector<int> tokens;
    int prefill_len = 0;
    int mask_token = 0;
    int steps_done = 0;
    std::vector<std::uint8_t> unmasked;  // per position

    int seq_len() const { return static_cast<int>(tokens.size()); }
    int masked_remaining() const;
};

SequenceState make_initial_state(const std::vector<int>& prompt, int gen_len,
                                 int mask_token);

// Fills the k still-masked generation positions with the highest max-logit
// confidence (ties: lower position) with their argmax token (ties: lower id;
// the mask token is never produced). k larger than the remaining masked
// count, as on a final step, unmasks everything left.
void unmask_step(SequenceState& state, const Matrix& logits, int k);

struct GenerateHooks {
    std::function<void(int step, const Matrix& logits)> on_logits;
    std::function<void(int step, int layer, int head, const BlockMask& mask)> on_sparse_mask;
    std::function<void(int step, int layer, const std::vector<HeadInputs>& heads)> on_head_inputs;
};

struct GenerateResult {
    std::vector<int> tokens;
    std::vector<StepTrace> traces;
    PatternCache cache;
    int pattern_builds = 0;
    FlopCounter flops;
};

// Runs the full denoising loop: total_steps scheduled forward passes, each
// followed by one unmasking decision. Per-step unmask counts split gen_len
// evenly with the remainder going to the earliest steps. Deterministic for
// fixed seeds, configs and mode.
GenerateResult generate(const ToyModel& model, const std::vector<int>& prompt,
                        int gen_len, const ScheduleMode& mode,
                        const SparseDConfig& config, int n_threads = 1,
                        const GenerateHooks& hooks = {});

// Seeded synthetic prompt: ids uniform over the non-mask vocabulary.
std::vector<int> synthetic_prompt(int length, int vocab_size, std::uint64_t seed);

}  // namespace sparsed

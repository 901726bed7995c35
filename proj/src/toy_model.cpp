#include "sparsed/toy_model.hpp"

#include "sparsed/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sparsed {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kEmbedScale = 1.0;
constexpr double kWeightScale = 0.5;

void fill_uniform(Matrix& m, Rng& rng, double scale) {
    for (double& v : m.data) {
        v = rng.next_double(-scale, scale);
    }
}

Matrix layer_norm(const Matrix& x, const std::vector<double>& gamma,
                  const std::vector<double>& beta) {
    Matrix out(x.rows, x.cols, 0.0);
    for (int i = 0; i < x.rows; ++i) {
        const double* src = x.row(i);
        double* dst = out.row(i);
        double mean = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            mean += src[c];
        }
        mean /= x.cols;
        double var = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            const double d = src[c] - mean;
            var += d * d;
        }
        var /= x.cols;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (int c = 0; c < x.cols; ++c) {
            dst[c] = (src[c] - mean) * inv * gamma[c] + beta[c];
        }
    }
    return out;
}

void add_inplace(Matrix& x, const Matrix& y) {
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        x.data[i] += y.data[i];
    }
}

Matrix slice_cols(const Matrix& m, int c0, int width) {
    Matrix out(m.rows, width, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double* src = m.row(i) + c0;
        std::copy(src, src + width, out.row(i));
    }
    return out;
}

}  // namespace

void ToyModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || head_dim < 1 || max_len < 1) {
        throw std::invalid_argument("invalid model dimensions");
    }
    if (vocab_size < 2) {
        throw std::invalid_argument("vocab too small");
    }
}

std::int64_t ToyModel::parameter_count() const {
    const std::int64_t d = config.d_model();
    const std::int64_t f = config.ffn_dim();
    std::int64_t count = 0;
    count += static_cast<std::int64_t>(config.vocab_size) * d;  // token embedding
    count += static_cast<std::int64_t>(config.max_len) * d;     // position embedding
    count += config.n_layers * (4 * d * d + 2 * d * f + 4 * d);
    count += 2 * d;                                             // final layer norm
    count += d * static_cast<std::int64_t>(config.vocab_size);  // unembedding
    return count;
}

ToyModel init_model(const ToyModelConfig& config) {
    config.validate();
    const int d = config.d_model();

    ToyModel model;
    model.config = config;
    Rng rng(config.seed);

    model.token_embedding = Matrix(config.vocab_size, d);
    fill_uniform(model.token_embedding, rng, kEmbedScale);
    model.pos_embedding = Matrix(config.max_len, d);
    fill_uniform(model.pos_embedding, rng, kEmbedScale);

    model.layers.resize(config.n_layers);
    for (LayerParams& layer : model.layers) {
        layer.ln1_gamma.assign(d, 1.0);
        layer.ln1_beta.assign(d, 0.0);
        layer.ln2_gamma.assign(d, 1.0);
        layer.ln2_beta.assign(d, 0.0);
        layer.wq = Matrix(d, d);
        layer.wk = Matrix(d, d);
        layer.wv = Matrix(d, d);
        layer.wo = Matrix(d, d);
        layer.w_ff1 = Matrix(d, config.ffn_dim());
        layer.w_ff2 = Matrix(config.ffn_dim(), d);
        fill_uniform(layer.wq, rng, kWeightScale);
        fill_uniform(layer.wk, rng, kWeightScale);
        fill_uniform(layer.wv, rng, kWeightScale);
        fill_uniform(layer.wo, rng, kWeightScale);
        fill_uniform(layer.w_ff1, rng, kWeightScale);
        fill_uniform(layer.w_ff2, rng, kWeightScale);
    }

    model.final_ln_gamma.assign(d, 1.0);
    model.final_ln_beta.assign(d, 0.0);
    model.unembedding = Matrix(d, config.vocab_size);
    fill_uniform(model.unembedding, rng, kWeightScale);
    return model;
}

Matrix forward(const ToyModel& model, const std::vector<int>& tokens,
               const LayerAttention& attn) {
    const ToyModelConfig& cfg = model.config;
    const int l = static_cast<int>(tokens.size());
    const int d = cfg.d_model();
    if (l < 1 || l > cfg.max_len) {
        throw std::invalid_argument("sequence length out of range");
    }

    Matrix x(l, d, 0.0);
    for (int i = 0; i < l; ++i) {
        const int id = tokens[i];
        if (id < 0 || id >= cfg.vocab_size) {
            throw std::invalid_argument("unknown token id");
        }
        const double* emb = model.token_embedding.row(id);
        const double* pos = model.pos_embedding.row(i);
        double* dst = x.row(i);
        for (int c = 0; c < d; ++c) {
            dst[c] = emb[c] + pos[c];
        }
    }

    for (int li = 0; li < cfg.n_layers; ++li) {
        const LayerParams& layer = model.layers[li];
        const Matrix h = layer_norm(x, layer.ln1_gamma, layer.ln1_beta);
        const Matrix qf = matmul(h, layer.wq);
        const Matrix kf = matmul(h, layer.wk);
        const Matrix vf = matmul(h, layer.wv);

        std::vector<HeadInputs> heads(cfg.n_heads);
        for (int hd = 0; hd < cfg.n_heads; ++hd) {
            const int c0 = hd * cfg.head_dim;
            heads[hd].q = slice_cols(qf, c0, cfg.head_dim);
            heads[hd].k = slice_cols(kf, c0, cfg.head_dim);
            heads[hd].v = slice_cols(vf, c0, cfg.head_dim);
        }

        const std::vector<Matrix> outs = attn(li, heads);
        if (outs.size() != static_cast<std::size_t>(cfg.n_heads)) {
            throw std::runtime_error("attention returned wrong head count");
        }
        Matrix cat(l, d, 0.0);
        for (int hd = 0; hd < cfg.n_heads; ++hd) {
            for (int i = 0; i < l; ++i) {
                std::copy(outs[hd].row(i), outs[hd].row(i) + cfg.head_dim,
                          cat.row(i) + hd * cfg.head_dim);
            }
        }
        add_inplace(x, matmul(cat, layer.wo));

        Matrix h2 = layer_norm(x, layer.ln2_gamma, layer.ln2_beta);
        Matrix mid = matmul(h2, layer.w_ff1);
        for (double& v : mid.data) {
            v = v > 0.0 ? v : 0.0;
        }
        add_inplace(x, matmul(mid, layer.w_ff2));
    }

    return matmul(layer_norm(x, model.final_ln_gamma, model.final_ln_beta),
                  model.unembedding);
}

Matrix forward_dense(const ToyModel& model, const std::vector<int>& tokens,
                     FlopCounter* fc, int n_threads) {
    FlopCounter scratch;
    FlopCounter& counter = fc != nullptr ? *fc : scratch;
    return forward(model, tokens,
                   [&](int, const std::vector<HeadInputs>& heads) {
                       return multi_head_attention(heads, {}, counter, n_threads);
                   });
}

int SequenceState::masked_remaining() const {
    int n = 0;
    for (int i = prefill_len; i < seq_len(); ++i) {
        n += unmasked[i] == 0;
    }
    return n;
}

SequenceState make_initial_state(const std::vector<int>& prompt, int gen_len,
                                 int mask_token) {
    if (gen_len < 1) {
        throw std::invalid_argument("empty generation region");
    }
    for (int id : prompt) {
        if (id == mask_token) {
            throw std::invalid_argument("prompt contains the mask token");
        }
    }
    SequenceState state;
    state.prefill_len = static_cast<int>(prompt.size());
    state.mask_token = mask_token;
    state.tokens = prompt;
    state.tokens.resize(prompt.size() + gen_len, mask_token);
    state.unmasked.assign(state.tokens.size(), 0);
    std::fill(state.unmasked.begin(), state.unmasked.begin() + prompt.size(),
              std::uint8_t{1});
    return state;
}

void unmask_step(SequenceState& state, const Matrix& logits, int k) {
    if (logits.rows != state.seq_len()) {
        throw std::invalid_argument("logits shape mismatch");
    }

    struct Candidate {
        double confidence;
        int position;
        int token;
    };
    std::vector<Candidate> candidates;
    for (int i = state.prefill_len; i < state.seq_len(); ++i) {
        if (state.unmasked[i]) {
            continue;
        }
        const double* row = logits.row(i);
        int best = -1;
        double best_logit = 0.0;
        for (int t = 0; t < logits.cols; ++t) {
            if (t == state.mask_token) {
                continue;  // never fill with the mask id
            }
            if (best < 0 || row[t] > best_logit) {
                best = t;
                best_logit = row[t];
            }
        }
        candidates.push_back({best_logit, i, best});
    }

    const int take = std::min<int>(k, static_cast<int>(candidates.size()));
    std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                          if (a.confidence != b.confidence) {
                              return a.confidence > b.confidence;
                          }
                          return a.position < b.position;
                      });
    for (int i = 0; i < take; ++i) {
        state.tokens[candidates[i].position] = candidates[i].token;
        state.unmasked[candidates[i].position] = 1;
    }
    state.steps_done += 1;
}

GenerateResult generate(const ToyModel& model, const std::vector<int>& prompt,
                        int gen_len, const ScheduleMode& mode,
                        const SparseDConfig& config, int n_threads,
                        const GenerateHooks& hooks) {
    const ToyModelConfig& cfg = model.config;
    const int l = static_cast<int>(prompt.size()) + gen_len;
    if (l > cfg.max_len) {
        throw std::invalid_argument("sequence length out of range");
    }
    config.validate();

    SequenceState state = make_initial_state(prompt, gen_len, cfg.mask_token());
    const int total_steps = config.total_steps;
    const int base = gen_len / total_steps;
    const int extra = gen_len % total_steps;

    ScheduleHooks sched;
    sched.forward = [&](const LayerAttention& attn) {
        return forward(model, state.tokens, attn);
    };
    sched.on_logits = [&](int step, const Matrix& logits) {
        if (hooks.on_logits) {
            hooks.on_logits(step, logits);
        }
        int k = base + (step <= extra ? 1 : 0);
        if (step == total_steps) {
            k = state.masked_remaining();
        }
        unmask_step(state, logits, k);
    };
    sched.on_sparse_mask = hooks.on_sparse_mask;
    sched.on_head_inputs = hooks.on_head_inputs;

    RunDims dims{cfg.n_layers, cfg.n_heads, l, static_cast<int>(prompt.size())};
    ScheduleResult run = run_schedule(sched, mode, config, dims, n_threads);

    GenerateResult result;
    result.tokens = state.tokens;
    result.traces = std::move(run.traces);
    result.cache = std::move(run.cache);
    result.pattern_builds = run.pattern_builds;
    result.flops = run.flops;
    return result;
}

std::vector<int> synthetic_prompt(int length, int vocab_size, std::uint64_t seed) {
    if (length < 0 || vocab_size < 2) {
        throw std::invalid_argument("invalid prompt request");
    }
    Rng rng(seed);
    std::vector<int> tokens(length);
    for (int& t : tokens) {
        t = rng.next_int(vocab_size - 1);  // mask id excluded
    }
    return tokens;
}

}  // namespace sparsed

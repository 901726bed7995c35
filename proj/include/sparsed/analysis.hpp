#pragma once

#include "sparsed/block_mask.hpp"
#include "sparsed/matrix.hpp"
#include "sparsed/pattern.hpp"

#include <string>
#include <vector>

namespace sparsed {

// || sparse - dense ||_F / || dense ||_F. Throws on shape mismatch and on an
// all-zero reference.
double output_error(const Matrix& sparse_out, const Matrix& dense_out);

// Fraction of each query row's attention probability that falls inside the
// kept key blocks of its row, averaged per query block and globally over all
// rows.
struct RetainedMass {
    std::vector<double> per_query_block;
    double global = 0.0;
};
RetainedMass retained_mass(const Matrix& attention_probs, const BlockMask& mask);

// Cosine similarity between flattened attention maps for every step pair.
// Input maps must share a shape; needs at least two steps. The result is
// symmetric with unit diagonal.
Matrix step_similarity(const std::vector<Matrix>& maps_over_steps);

// Predicted sparse/dense attention-FLOP ratio of a full schedule:
// (s + (T - s) * density + 0.5) / T with s the capture step. The 0.5 charges
// the capture step's extra score-only pass, half of a full step's attention
// cost; pooling arithmetic is not part of the model.
double flop_ratio_model(const SparseDConfig& config, double density);

// 8-bit binary PGM, max-normalized per map. divider_col, when inside the
// width, is overdrawn as a 1-pixel white line (used for the prefill/
// generation boundary on attention maps).
void write_pgm(const Matrix& map, const std::string& path, int divider_col = -1);
std::vector<unsigned char> render_pgm(const Matrix& map, int divider_col = -1);

}  // namespace sparsed

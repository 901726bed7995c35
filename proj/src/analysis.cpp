#include "sparsed/analysis.hpp"

#include "sparsed/io.hpp"
#include "sparsed/scheduler.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace sparsed {

double output_error(const Matrix& sparse_out, const Matrix& dense_out) {
    if (!sparse_out.same_shape(dense_out)) {
        throw std::invalid_argument("output shape mismatch");
    }
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < dense_out.data.size(); ++i) {
        const double d = sparse_out.data[i] - dense_out.data[i];
        diff += d * d;
        ref += dense_out.data[i] * dense_out.data[i];
    }
    if (ref == 0.0) {
        throw std::invalid_argument("zero reference output");
    }
    return std::sqrt(diff / ref);
}

RetainedMass retained_mass(const Matrix& attention_probs, const BlockMask& mask) {
    if (attention_probs.rows != mask.seq_len || attention_probs.cols != mask.seq_len) {
        throw std::invalid_argument("probability map shape mismatch");
    }

    RetainedMass result;
    result.per_query_block.assign(mask.n_query_blocks, 0.0);
    double total = 0.0;
    for (int qb = 0; qb < mask.n_query_blocks; ++qb) {
        const int r0 = mask.block_start(qb);
        const int r1 = mask.block_end(qb);
        double block_sum = 0.0;
        for (int r = r0; r < r1; ++r) {
            const double* row = attention_probs.row(r);
            double kept = 0.0;
            for (int kb = 0; kb < mask.n_key_blocks; ++kb) {
                if (!mask.kept(qb, kb)) {
                    continue;
                }
                for (int c = mask.block_start(kb); c < mask.block_end(kb); ++c) {
                    kept += row[c];
                }
            }
            block_sum += kept;
        }
        result.per_query_block[qb] = block_sum / (r1 - r0);
        total += block_sum;
    }
    result.global = total / attention_probs.rows;
    return result;
}

Matrix step_similarity(const std::vector<Matrix>& maps_over_steps) {
    const int n = static_cast<int>(maps_over_steps.size());
    if (n < 2) {
        throw std::invalid_argument("need at least two steps");
    }
    for (const Matrix& m : maps_over_steps) {
        if (!m.same_shape(maps_over_steps.front())) {
            throw std::invalid_argument("map shape mismatch");
        }
    }

    Matrix sim(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
        sim(i, i) = 1.0;
        std::span<const double> a(maps_over_steps[i].data);
        for (int j = i + 1; j < n; ++j) {
            const double s = cosine_similarity(a, maps_over_steps[j].data);
            sim(i, j) = s;
            sim(j, i) = s;
        }
    }
    return sim;
}

double flop_ratio_model(const SparseDConfig& config, double density) {
    config.validate();
    if (density <= 0.0 || density > 1.0) {
        throw std::invalid_argument("density out of range");
    }
    const double s = capture_step(config);
    const double t = config.total_steps;
    return (s + (t - s) * density + 0.5) / t;
}

std::vector<unsigned char> render_pgm(const Matrix& map, int divider_col) {
    if (map.rows < 1 || map.cols < 1) {
        throw std::invalid_argument("empty map");
    }
    double max_v = 0.0;
    for (double v : map.data) {
        if (v > max_v) {
            max_v = v;
        }
    }

    std::string header = "P5\n" + std::to_string(map.cols) + " " +
                         std::to_string(map.rows) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + map.data.size());
    for (int r = 0; r < map.rows; ++r) {
        const double* row = map.row(r);
        for (int c = 0; c < map.cols; ++c) {
            unsigned char pix = 0;
            if (c == divider_col) {
                pix = 255;
            } else if (max_v > 0.0) {
                const double v = row[c] > 0.0 ? row[c] : 0.0;
                pix = static_cast<unsigned char>(std::lround(255.0 * v / max_v));
            }
            bytes.push_back(pix);
        }
    }
    return bytes;
}

void write_pgm(const Matrix& map, const std::string& path, int divider_col) {
    const std::vector<unsigned char> bytes = render_pgm(map, divider_col);
    write_binary_file(path, bytes);
}

}  // namespace sparsed

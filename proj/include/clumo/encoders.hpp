#pragma once

#include <cstdint>

#include "clumo/tensor.hpp"

namespace clumo {

struct ModelDims {
    std::size_t feature_dim = 32;    // D, shared hidden width
    std::size_t raw_dim = 16;        // input feature width per token
    std::size_t visual_tokens = 8;   // L_v
    std::size_t textual_tokens = 8;  // L_t
    std::size_t num_answers = 16;
};

// Frozen linear-tanh token encoder. Weights are fixed at construction; the
// trainer never touches them (verified by checksum in the tests).
struct FrozenEncoder {
    Tensor2D projection;       // raw_dim x D
    Tensor2D bias;             // 1 x D
    std::size_t token_count = 0;
};

// tanh(raw * projection + bias) applied row-wise; output has one row per
// input token row, so variable-length inputs are fine.
Tensor2D encode(const FrozenEncoder& enc, const Tensor2D& raw);

// Pooled modality feature: mean over token rows of encode(enc, raw) -> 1 x D.
Tensor2D pooled_feature(const FrozenEncoder& enc, const Tensor2D& raw);

// Frozen per-token transform; the model mean-pools its tanh output over the
// sequence axis, so prompt prepending changes values but never output shape.
struct FusionEncoder {
    Tensor2D transform;        // D x D
};

// The only backbone parameters that receive gradient updates.
struct ClassifierHead {
    Tensor2D weights;          // D x num_answers
    Tensor2D bias;             // 1 x num_answers
};

// Frozen weights drawn from uniform(-1/sqrt(D), 1/sqrt(D)).
FrozenEncoder make_frozen_encoder(std::size_t raw_dim, std::size_t feature_dim,
                                  std::size_t token_count, Rng rng);
FusionEncoder make_fusion_encoder(std::size_t feature_dim, Rng rng);
ClassifierHead make_classifier(std::size_t feature_dim, std::size_t num_answers, Rng rng);

}  // namespace clumo

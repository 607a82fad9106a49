#include "clumo/encoders.hpp"

#include <cmath>
#include <string>

#include "clumo/errors.hpp"
#include "clumo/numerics.hpp"

namespace clumo {

Tensor2D encode(const FrozenEncoder& enc, const Tensor2D& raw) {
    if (raw.cols != enc.projection.rows) {
        throw ShapeError("encode: raw width " + std::to_string(raw.cols) +
                         " does not match encoder raw_dim " +
                         std::to_string(enc.projection.rows));
    }
    Tensor2D out = matmul(raw, enc.projection);
    for (std::size_t i = 0; i < out.rows; ++i) {
        for (std::size_t j = 0; j < out.cols; ++j) {
            out.at(i, j) = std::tanh(out.at(i, j) + enc.bias.at(0, j));
        }
    }
    return out;
}

Tensor2D pooled_feature(const FrozenEncoder& enc, const Tensor2D& raw) {
    return mean_rows(encode(enc, raw));
}

namespace {

double init_scale(std::size_t feature_dim) {
    return 1.0 / std::sqrt(static_cast<double>(feature_dim));
}

}  // namespace

FrozenEncoder make_frozen_encoder(std::size_t raw_dim, std::size_t feature_dim,
                                  std::size_t token_count, Rng rng) {
    const double s = init_scale(feature_dim);
    FrozenEncoder enc;
    enc.projection = random_uniform(rng, raw_dim, feature_dim, -s, s);
    enc.bias = random_uniform(rng, 1, feature_dim, -s, s);
    enc.token_count = token_count;
    return enc;
}

FusionEncoder make_fusion_encoder(std::size_t feature_dim, Rng rng) {
    const double s = init_scale(feature_dim);
    return FusionEncoder{random_uniform(rng, feature_dim, feature_dim, -s, s)};
}

ClassifierHead make_classifier(std::size_t feature_dim, std::size_t num_answers, Rng rng) {
    const double s = init_scale(feature_dim);
    ClassifierHead head;
    head.weights = random_uniform(rng, feature_dim, num_answers, -s, s);
    head.bias = random_uniform(rng, 1, num_answers, -s, s);
    return head;
}

}  // namespace clumo

#include "clumo/model.hpp"

#include <cmath>
#include <ostream>

#include "clumo/errors.hpp"
#include "clumo/numerics.hpp"
#include "clumo/serialize.hpp"

namespace clumo {

Variant variant_from_string(const std::string& name) {
    if (name == "clumo") return Variant::clumo;
    if (name == "finetune") return Variant::finetune;
    if (name == "single_key") return Variant::single_key;
    if (name == "no_cluster") return Variant::no_cluster;
    if (name == "no_kd") return Variant::no_kd;
    if (name == "visual_only") return Variant::visual_only;
    if (name == "textual_only") return Variant::textual_only;
    throw ConfigError("unknown variant '" + name + "'");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::clumo: return "clumo";
        case Variant::finetune: return "finetune";
        case Variant::single_key: return "single_key";
        case Variant::no_cluster: return "no_cluster";
        case Variant::no_kd: return "no_kd";
        case Variant::visual_only: return "visual_only";
        case Variant::textual_only: return "textual_only";
    }
    throw ConfigError("unknown variant value");
}

std::vector<Variant> all_variants() {
    return {Variant::clumo,       Variant::no_kd,        Variant::no_cluster,
            Variant::visual_only, Variant::textual_only, Variant::finetune,
            Variant::single_key};
}

ModelState make_model(const ModelDims& dims, std::uint64_t seed, Variant variant) {
    if (dims.feature_dim < 1 || dims.raw_dim < 1 || dims.num_answers < 2) {
        throw ConfigError("make_model: bad dimensions");
    }
    Rng rng(seed);
    ModelState m;
    m.dims = dims;
    m.visual = make_frozen_encoder(dims.raw_dim, dims.feature_dim, dims.visual_tokens, rng.fork(1));
    m.textual = make_frozen_encoder(dims.raw_dim, dims.feature_dim, dims.textual_tokens, rng.fork(2));
    m.fusion = make_fusion_encoder(dims.feature_dim, rng.fork(3));
    m.classifier = make_classifier(dims.feature_dim, dims.num_answers, rng.fork(4));
    m.variant = variant;
    m.seed = seed;
    return m;
}

ModelState snapshot(const ModelState& model) {
    return model;
}

namespace {

Tensor2D concat_rows(const Tensor2D* prompt, const Tensor2D& v_tokens, const Tensor2D& t_tokens,
                     std::size_t feature_dim) {
    if (v_tokens.cols != feature_dim || t_tokens.cols != feature_dim) {
        throw ShapeError("forward: token width does not match feature_dim");
    }
    if (prompt && prompt->cols != feature_dim) {
        throw ShapeError("forward: prompt width does not match feature_dim");
    }
    const std::size_t prompt_rows = prompt ? prompt->rows : 0;
    Tensor2D seq(prompt_rows + v_tokens.rows + t_tokens.rows, feature_dim);
    double* dst = seq.data.data();
    if (prompt) {
        std::copy(prompt->data.begin(), prompt->data.end(), dst);
        dst += prompt->data.size();
    }
    std::copy(v_tokens.data.begin(), v_tokens.data.end(), dst);
    dst += v_tokens.data.size();
    std::copy(t_tokens.data.begin(), t_tokens.data.end(), dst);
    return seq;
}

}  // namespace

ForwardTrace forward_traced(const ModelState& model, const Tensor2D* prompt,
                            const Tensor2D& v_tokens, const Tensor2D& t_tokens) {
    ForwardTrace trace;
    trace.prompt_rows = prompt ? prompt->rows : 0;
    trace.sequence = concat_rows(prompt, v_tokens, t_tokens, model.dims.feature_dim);
    trace.hidden = matmul(trace.sequence, model.fusion.transform);
    for (double& v : trace.hidden.data) v = std::tanh(v);
    trace.pooled = mean_rows(trace.hidden);
    trace.logits = matmul(trace.pooled, model.classifier.weights);
    for (std::size_t j = 0; j < trace.logits.cols; ++j) {
        trace.logits.at(0, j) += model.classifier.bias.at(0, j);
    }
    trace.valid = true;
    return trace;
}

Tensor2D forward(const ModelState& model, const Tensor2D* prompt,
                 const Tensor2D& v_tokens, const Tensor2D& t_tokens) {
    return forward_traced(model, prompt, v_tokens, t_tokens).logits;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    auto add = [](Tensor2D& a, const Tensor2D& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
    };
    add(classifier_weights, other.classifier_weights);
    add(classifier_bias, other.classifier_bias);
    if (!prompt.empty() && !other.prompt.empty()) add(prompt, other.prompt);
    return *this;
}

void Gradients::scale(double s) {
    for (double& v : classifier_weights.data) v *= s;
    for (double& v : classifier_bias.data) v *= s;
    for (double& v : prompt.data) v *= s;
}

Gradients zero_gradients(const ModelState& model, std::size_t prompt_rows) {
    Gradients g;
    g.classifier_weights = Tensor2D(model.dims.feature_dim, model.dims.num_answers);
    g.classifier_bias = Tensor2D(1, model.dims.num_answers);
    if (prompt_rows > 0) g.prompt = Tensor2D(prompt_rows, model.dims.feature_dim);
    return g;
}

Gradients backward_trainables(const ModelState& model, const ForwardTrace& trace,
                              const Tensor2D& upstream) {
    if (!trace.valid) throw UsageError("backward_trainables: no forward trace");
    if (upstream.rows != 1 || upstream.cols != model.dims.num_answers) {
        throw ShapeError("backward_trainables: upstream must be 1 x num_answers");
    }

    Gradients g = zero_gradients(model, trace.prompt_rows);

    // logits = pooled * W + b
    g.classifier_bias = upstream;
    for (std::size_t i = 0; i < model.dims.feature_dim; ++i) {
        for (std::size_t j = 0; j < model.dims.num_answers; ++j) {
            g.classifier_weights.at(i, j) = trace.pooled.at(0, i) * upstream.at(0, j);
        }
    }
    if (trace.prompt_rows == 0) return g;

    // pooled = mean over rows of hidden; hidden = tanh(sequence * F)
    Tensor2D d_pooled(1, model.dims.feature_dim);
    for (std::size_t i = 0; i < model.dims.feature_dim; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < model.dims.num_answers; ++j) {
            acc += upstream.at(0, j) * model.classifier.weights.at(i, j);
        }
        d_pooled.at(0, i) = acc;
    }

    const double inv_rows = 1.0 / static_cast<double>(trace.hidden.rows);
    const Tensor2D& fusion = model.fusion.transform;
    // Only the prompt rows of the sequence are trainable; stop after them.
    for (std::size_t r = 0; r < trace.prompt_rows; ++r) {
        for (std::size_t c = 0; c < model.dims.feature_dim; ++c) {
            const double h = trace.hidden.at(r, c);
            const double d_pre = d_pooled.at(0, c) * inv_rows * (1.0 - h * h);
            for (std::size_t s = 0; s < model.dims.feature_dim; ++s) {
                g.prompt.at(r, s) += d_pre * fusion.at(s, c);
            }
        }
    }
    return g;
}

void save_checkpoint(std::ostream& os, const ModelState& model) {
    write_meta(os, "format", "clumo-checkpoint-1");
    write_meta(os, "variant", to_string(model.variant));
    write_meta(os, "seed", std::to_string(model.seed));
    write_meta(os, "tasks_trained", std::to_string(model.tasks_trained));
    write_meta(os, "feature_dim", std::to_string(model.dims.feature_dim));
    write_meta(os, "raw_dim", std::to_string(model.dims.raw_dim));
    write_meta(os, "visual_tokens", std::to_string(model.dims.visual_tokens));
    write_meta(os, "textual_tokens", std::to_string(model.dims.textual_tokens));
    write_meta(os, "num_answers", std::to_string(model.dims.num_answers));
    write_tensor(os, "visual.projection", model.visual.projection);
    write_tensor(os, "visual.bias", model.visual.bias);
    write_tensor(os, "textual.projection", model.textual.projection);
    write_tensor(os, "textual.bias", model.textual.bias);
    write_tensor(os, "fusion.transform", model.fusion.transform);
    write_tensor(os, "classifier.weights", model.classifier.weights);
    write_tensor(os, "classifier.bias", model.classifier.bias);
    save_pools(os, model.pools);
}

ModelState load_checkpoint(std::istream& is) {
    TextDocument doc = read_document(is);
    if (doc.meta_value("format") != "clumo-checkpoint-1") {
        throw IoError("load_checkpoint: unrecognized format");
    }
    ModelState m;
    m.variant = variant_from_string(doc.meta_value("variant"));
    m.seed = std::stoull(doc.meta_value("seed"));
    m.tasks_trained = std::stoi(doc.meta_value("tasks_trained"));
    m.dims.feature_dim = std::stoul(doc.meta_value("feature_dim"));
    m.dims.raw_dim = std::stoul(doc.meta_value("raw_dim"));
    m.dims.visual_tokens = std::stoul(doc.meta_value("visual_tokens"));
    m.dims.textual_tokens = std::stoul(doc.meta_value("textual_tokens"));
    m.dims.num_answers = std::stoul(doc.meta_value("num_answers"));
    m.visual.projection = doc.tensor("visual.projection");
    m.visual.bias = doc.tensor("visual.bias");
    m.visual.token_count = m.dims.visual_tokens;
    m.textual.projection = doc.tensor("textual.projection");
    m.textual.bias = doc.tensor("textual.bias");
    m.textual.token_count = m.dims.textual_tokens;
    m.fusion.transform = doc.tensor("fusion.transform");
    m.classifier.weights = doc.tensor("classifier.weights");
    m.classifier.bias = doc.tensor("classifier.bias");
    m.pools = pools_from_document(doc);
    return m;
}

}  // namespace clumo

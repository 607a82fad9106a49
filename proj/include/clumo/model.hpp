#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clumo/encoders.hpp"
#include "clumo/pool.hpp"
#include "clumo/tensor.hpp"

namespace clumo {

// Training/inference variants. clumo is the full method; the rest are the
// baselines and ablations the experiment commands compare against.
enum class Variant {
    clumo,         // clustered keys, both modalities, knowledge distillation
    finetune,      // classifier-only training, no pools, no prompts
    single_key,    // one gradient-trained key per prompt, matched on the
                   // first visual token
    no_cluster,    // keys stay at random init; stage 1 skipped
    no_kd,         // full method without the distillation term
    visual_only,   // visual keys only; textual key count folded in
    textual_only,  // textual keys only; visual key count folded in
};

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);
std::vector<Variant> all_variants();  // ablation-table row order

// The whole learner: frozen backbone, trainable classifier, one pool per
// learned task. Copying gives a fully independent deep snapshot.
struct ModelState {
    ModelDims dims;
    FrozenEncoder visual;
    FrozenEncoder textual;
    FusionEncoder fusion;
    ClassifierHead classifier;
    std::vector<KeyKeyPromptPool> pools;
    Variant variant = Variant::clumo;
    std::uint64_t seed = 0;
    int tasks_trained = 0;
};

ModelState make_model(const ModelDims& dims, std::uint64_t seed,
                      Variant variant = Variant::clumo);

// Deep value copy; training the original never changes the snapshot.
ModelState snapshot(const ModelState& model);

// [prompt; v_tokens; t_tokens] -> per-token fusion tanh -> mean pool ->
// classifier. Pass prompt = nullptr for the plain no-prompt pipeline.
Tensor2D forward(const ModelState& model, const Tensor2D* prompt,
                 const Tensor2D& v_tokens, const Tensor2D& t_tokens);

// Intermediate activations kept for the backward pass.
struct ForwardTrace {
    Tensor2D sequence;          // (prompt_rows + L_v + L_t) x D
    Tensor2D hidden;            // tanh(sequence * fusion.transform)
    Tensor2D pooled;            // 1 x D
    Tensor2D logits;            // 1 x num_answers
    std::size_t prompt_rows = 0;
    bool valid = false;
};

ForwardTrace forward_traced(const ModelState& model, const Tensor2D* prompt,
                            const Tensor2D& v_tokens, const Tensor2D& t_tokens);

// Gradients of the trainable parameters. Frozen weights have zero gradient
// by definition and are not represented. prompt is empty when the traced
// forward ran without one.
struct Gradients {
    Tensor2D classifier_weights;
    Tensor2D classifier_bias;
    Tensor2D prompt;

    Gradients& operator+=(const Gradients& other);
    void scale(double s);
};

Gradients zero_gradients(const ModelState& model, std::size_t prompt_rows);

// Exact gradients of a scalar loss with upstream dLoss/dlogits (1 x A).
// Requires a valid trace from forward_traced with the same inputs.
Gradients backward_trainables(const ModelState& model, const ForwardTrace& trace,
                              const Tensor2D& upstream);

// Whole-model checkpoint in the text-record format: dims and variant as meta
// lines, every weight tensor and pool as named records. Round trips are
// value-exact.
void save_checkpoint(std::ostream& os, const ModelState& model);
ModelState load_checkpoint(std::istream& is);

}  // namespace clumo

#include "clumo/continual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>

#include "clumo/errors.hpp"
#include "clumo/numerics.hpp"

namespace clumo {

void TrainConfig::validate() const {
    if (visual_key_count < 1 || textual_key_count < 1) {
        throw ConfigError("train: key counts must be >= 1");
    }
    if (prompt_length < 1) throw ConfigError("train: prompt_length must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
    if (kd_weight < 0.0) throw ConfigError("train: kd_weight must be >= 0");
    if (cluster_batch_size < visual_key_count || cluster_batch_size < textual_key_count) {
        throw ConfigError("train: cluster_batch_size must be >= each key count");
    }
}

std::pair<std::size_t, std::size_t> TrainConfig::effective_key_grid() const {
    const std::size_t pool_size = visual_key_count * textual_key_count;
    switch (variant) {
        case Variant::visual_only: return {pool_size, 1};
        case Variant::textual_only: return {1, pool_size};
        case Variant::single_key: return {pool_size, 1};
        default: return {visual_key_count, textual_key_count};
    }
}

AccuracyMatrix::AccuracyMatrix(std::size_t tasks) : tasks_(tasks) {
    cells_.resize(tasks);
    known_.resize(tasks);
    for (std::size_t i = 0; i < tasks; ++i) {
        cells_[i].assign(tasks - i, 0.0);
        known_[i].assign(tasks - i, false);
    }
}

bool AccuracyMatrix::filled(std::size_t i, std::size_t j) const {
    return i < tasks_ && j >= i && j < tasks_ && known_[i][j - i];
}

double AccuracyMatrix::at(std::size_t i, std::size_t j) const {
    if (i >= tasks_ || j < i || j >= tasks_) {
        throw UsageError("accuracy matrix: entry (" + std::to_string(i) + ", " +
                         std::to_string(j) + ") is outside the defined j >= i region");
    }
    if (!known_[i][j - i]) {
        throw UsageError("accuracy matrix: entry (" + std::to_string(i) + ", " +
                         std::to_string(j) + ") not filled yet");
    }
    return cells_[i][j - i];
}

void AccuracyMatrix::set(std::size_t i, std::size_t j, double value) {
    if (i >= tasks_ || j < i || j >= tasks_) {
        throw UsageError("accuracy matrix: cannot set entry outside the j >= i region");
    }
    if (value < 0.0 || value > 1.0 || !std::isfinite(value)) {
        throw ValueError("accuracy matrix: accuracy must lie in [0, 1]");
    }
    cells_[i][j - i] = value;
    known_[i][j - i] = true;
}

std::vector<std::vector<double>> AccuracyMatrix::triangle() const {
    for (std::size_t i = 0; i < tasks_; ++i) {
        for (std::size_t j = i; j < tasks_; ++j) {
            if (!known_[i][j - i]) throw UsageError("accuracy matrix: incomplete");
        }
    }
    return cells_;
}

AccuracyMatrix AccuracyMatrix::from_triangle(const std::vector<std::vector<double>>& rows) {
    AccuracyMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size() - i) {
            throw ValueError("accuracy matrix: row " + std::to_string(i) + " has wrong length");
        }
        for (std::size_t j = i; j < rows.size(); ++j) m.set(i, j, rows[i][j - i]);
    }
    return m;
}

bool operator==(const AccuracyMatrix& a, const AccuracyMatrix& b) {
    return a.tasks_ == b.tasks_ && a.known_ == b.known_ && a.cells_ == b.cells_;
}

namespace {

#ifdef CLUMO_PROMPT_SCALE_OVERRIDE
constexpr double kPromptStepScale = CLUMO_PROMPT_SCALE_OVERRIDE;
#else
constexpr double kPromptStepScale = 0.25;
#endif

bool uses_pools(Variant v) { return v != Variant::finetune; }

bool uses_stage1_clustering(Variant v) {
    return v == Variant::clumo || v == Variant::no_kd || v == Variant::visual_only ||
           v == Variant::textual_only;
}

bool uses_kd(Variant v) {
    return v == Variant::clumo || v == Variant::no_cluster || v == Variant::visual_only ||
           v == Variant::textual_only;
}

struct Routed {
    std::size_t visual_key = 0;
    std::size_t textual_key = 0;
    std::size_t prompt_id = 0;
    double distance = 0.0;
};

// Per-pool prompt choice. The single-key baseline matches the first visual
// token against its flat key list; everything else mean-pools both modalities
// and picks the nearest key per modality.
Routed route_in_pool(const KeyKeyPromptPool& pool, Variant variant, const Tensor2D& v_tokens,
                     const Tensor2D& t_tokens) {
    Routed r;
    if (variant == Variant::single_key) {
        KeyMatch m = select_key(v_tokens.row(0), pool.visual_keys);
        r.visual_key = m.key;
        r.textual_key = 0;
        r.prompt_id = m.key;
        r.distance = m.distance;
        return r;
    }
    PromptSelection sel = select_prompt(pool, v_tokens, t_tokens);
    r.visual_key = sel.visual_key;
    r.textual_key = sel.textual_key;
    r.prompt_id = sel.prompt_id;
    r.distance = sel.distance;
    return r;
}

int argmax_row(const Tensor2D& logits) {
    int best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j) {
        if (logits.at(0, j) > logits.at(0, best)) best = static_cast<int>(j);
    }
    return best;
}

// Inference-path logits: route across the model's own pools, or run the
// plain no-prompt pipeline when there are none.
Tensor2D inference_logits(const ModelState& model, const Tensor2D& v_tokens,
                          const Tensor2D& t_tokens) {
    if (model.pools.empty()) return forward(model, nullptr, v_tokens, t_tokens);
    InferResult r = infer(model, v_tokens, t_tokens);
    const Tensor2D& prompt = model.pools[r.task].prompts[r.prompt];
    return forward(model, &prompt, v_tokens, t_tokens);
}

}  // namespace

InferResult infer(const ModelState& model, const Tensor2D& v_tokens, const Tensor2D& t_tokens) {
    if (model.pools.empty()) throw UsageError("infer: no learned tasks");
    std::size_t best_task = 0;
    Routed best;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < model.pools.size(); ++t) {
        Routed r = route_in_pool(model.pools[t], model.variant, v_tokens, t_tokens);
        if (r.distance < best_distance) {
            best_distance = r.distance;
            best_task = t;
            best = r;
        }
    }
    const Tensor2D& prompt = model.pools[best_task].prompts[best.prompt_id];
    Tensor2D logits = forward(model, &prompt, v_tokens, t_tokens);
    InferResult res;
    res.answer = argmax_row(logits);
    res.task = static_cast<int>(best_task);
    res.prompt = static_cast<int>(best.prompt_id);
    res.visual_key = best.visual_key;
    res.textual_key = best.textual_key;
    res.distance = best.distance;
    return res;
}

InferResult infer_with_task(const ModelState& model, std::size_t task,
                            const Tensor2D& v_tokens, const Tensor2D& t_tokens) {
    if (task >= model.pools.size()) throw UsageError("infer_with_task: no such task pool");
    Routed r = route_in_pool(model.pools[task], model.variant, v_tokens, t_tokens);
    const Tensor2D& prompt = model.pools[task].prompts[r.prompt_id];
    Tensor2D logits = forward(model, &prompt, v_tokens, t_tokens);
    InferResult res;
    res.answer = argmax_row(logits);
    res.task = static_cast<int>(task);
    res.prompt = static_cast<int>(r.prompt_id);
    res.visual_key = r.visual_key;
    res.textual_key = r.textual_key;
    res.distance = r.distance;
    return res;
}

KdResult kd_loss(const ModelState& current, const ModelState* previous,
                 const Tensor2D& v_tokens, const Tensor2D& t_tokens) {
    KdResult res;
    if (previous == nullptr) {
        res.grads = zero_gradients(current, 0);
        return res;
    }
    Tensor2D teacher = inference_logits(*previous, v_tokens, t_tokens);

    const Tensor2D* prompt = nullptr;
    Routed routed;
    if (!current.pools.empty()) {
        InferResult r = infer(current, v_tokens, t_tokens);
        routed.prompt_id = static_cast<std::size_t>(r.prompt);
        prompt = &current.pools[r.task].prompts[routed.prompt_id];
    }
    ForwardTrace trace = forward_traced(current, prompt, v_tokens, t_tokens);
    MseResult m = mse(trace.logits, teacher);
    res.loss = m.loss;
    res.grads = backward_trainables(current, trace, m.grad_a);
    return res;
}

double evaluate_accuracy(const ModelState& model, const std::vector<Instance>& split) {
    if (split.empty()) throw UsageError("evaluate_accuracy: empty split");
    std::size_t correct = 0;
    for (const Instance& inst : split) {
        Tensor2D v = encode(model.visual, inst.visual);
        Tensor2D t = encode(model.textual, inst.textual);
        int predicted;
        if (model.pools.empty()) {
            predicted = argmax_row(forward(model, nullptr, v, t));
        } else {
            predicted = infer(model, v, t).answer;
        }
        if (predicted == inst.answer) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

double evaluate_accuracy_with_task(const ModelState& model, std::size_t task,
                                   const std::vector<Instance>& split) {
    if (split.empty()) throw UsageError("evaluate_accuracy_with_task: empty split");
    std::size_t correct = 0;
    for (const Instance& inst : split) {
        Tensor2D v = encode(model.visual, inst.visual);
        Tensor2D t = encode(model.textual, inst.textual);
        if (infer_with_task(model, task, v, t).answer == inst.answer) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

namespace {

struct EncodedInstance {
    Tensor2D v_tokens;
    Tensor2D t_tokens;
    int answer = 0;
};

std::vector<EncodedInstance> encode_split(const ModelState& model,
                                          const std::vector<Instance>& split) {
    std::vector<EncodedInstance> out;
    out.reserve(split.size());
    for (const Instance& inst : split) {
        out.push_back({encode(model.visual, inst.visual), encode(model.textual, inst.textual),
                       inst.answer});
    }
    return out;
}

}  // namespace

ClusterStats learn_task(ModelState& model, const TaskDataset& task, const TrainConfig& config) {
    if (task.task_id != model.tasks_trained) {
        throw UsageError("learn_task: expected task " + std::to_string(model.tasks_trained) +
                         ", got " + std::to_string(task.task_id));
    }
    if (model.variant != config.variant) {
        throw UsageError("learn_task: model was built for variant " + to_string(model.variant) +
                         ", config says " + to_string(config.variant));
    }
    if (task.train.empty()) throw UsageError("learn_task: empty training split");

    const Variant variant = config.variant;
    Rng task_rng = Rng(config.seed).fork(0xc1u + static_cast<std::uint64_t>(task.task_id));

    // The distillation teacher is the model as it stood when the previous
    // task finished, captured before this task adds anything.
    std::optional<ModelState> teacher;
    const bool kd_active =
        uses_kd(variant) && config.kd_weight > 0.0 && model.tasks_trained > 0;
    if (kd_active) teacher = snapshot(model);

    // Stage 1: new pool; cluster and freeze its keys.
    ClusterStats stats;
    if (uses_pools(variant)) {
        auto [s_v, s_t] = config.effective_key_grid();
        KeyKeyPromptPool pool = make_pool(task.task_id, s_v, s_t, config.prompt_length,
                                          model.dims.feature_dim, task_rng.fork(1));
        if (uses_stage1_clustering(variant)) {
            stats = train_keys(pool, task, model.visual, model.textual,
                               config.cluster_batch_size, config.cluster_max_iters,
                               config.cluster_tol, task_rng.fork(2));
        }
        if (variant != Variant::single_key) freeze_keys(pool);
        model.pools.push_back(std::move(pool));
    }

    // Stage 2: gradient training of the classifier and the selected prompts.
    std::vector<EncodedInstance> train = encode_split(model, task.train);
    std::vector<Tensor2D> teacher_logits;
    if (kd_active) {
        teacher_logits.reserve(train.size());
        for (const EncodedInstance& e : train) {
            teacher_logits.push_back(inference_logits(*teacher, e.v_tokens, e.t_tokens));
        }
    }

    KeyKeyPromptPool* pool = uses_pools(variant) ? &model.pools.back() : nullptr;
    if (pool && variant != Variant::single_key && !pool->keys_frozen) {
        throw UsageError("learn_task: keys must be frozen before stage 2");
    }

    Rng order_rng = task_rng.fork(3);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_indices(order, order_rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);

            Gradients acc = zero_gradients(model, 0);
            std::unordered_map<std::size_t, Tensor2D> prompt_grads;
            std::unordered_map<std::size_t, Tensor2D> key_grads;  // single_key only

            for (std::size_t pos = start; pos < stop; ++pos) {
                const EncodedInstance& e = train[order[pos]];
                const Tensor2D* prompt = nullptr;
                Routed routed;
                if (pool) {
                    routed = route_in_pool(*pool, variant, e.v_tokens, e.t_tokens);
                    prompt = &pool->prompts[routed.prompt_id];
                }
                ForwardTrace trace = forward_traced(model, prompt, e.v_tokens, e.t_tokens);
                CrossEntropyResult ce = softmax_cross_entropy(trace.logits, {e.answer});
                Tensor2D upstream = ce.grad;
                if (kd_active) {
                    MseResult kd = mse(trace.logits, teacher_logits[order[pos]]);
                    for (std::size_t j = 0; j < upstream.cols; ++j) {
                        upstream.at(0, j) += config.kd_weight * kd.grad_a.at(0, j);
                    }
                }
                for (double& u : upstream.data) u *= inv_batch;

                Gradients g = backward_trainables(model, trace, upstream);
                for (std::size_t i = 0; i < acc.classifier_weights.size(); ++i) {
                    acc.classifier_weights.data[i] += g.classifier_weights.data[i];
                }
                for (std::size_t i = 0; i < acc.classifier_bias.size(); ++i) {
                    acc.classifier_bias.data[i] += g.classifier_bias.data[i];
                }
                if (prompt) {
                    auto [it, fresh] = prompt_grads.try_emplace(
                        routed.prompt_id, Tensor2D(prompt->rows, prompt->cols));
                    for (std::size_t i = 0; i < it->second.size(); ++i) {
                        it->second.data[i] += g.prompt.data[i];
                    }
                }
                if (variant == Variant::single_key) {
                    // Gradient of 0.5 * ||v0 - K||^2 pulls the matched key
                    // toward the first visual token.
                    auto [it, fresh] = key_grads.try_emplace(
                        routed.visual_key, Tensor2D(1, model.dims.feature_dim));
                    auto first_token = e.v_tokens.row(0);
                    for (std::size_t i = 0; i < model.dims.feature_dim; ++i) {
                        it->second.at(0, i) += inv_batch * (pool->visual_keys.at(routed.visual_key, i) -
                                                            first_token[i]);
                    }
                }
            }

            model.classifier.weights =
                sgd_step(model.classifier.weights, acc.classifier_weights, config.lr);
            model.classifier.bias = sgd_step(model.classifier.bias, acc.classifier_bias, config.lr);
            if (pool) {
                // Prompt gradients carry the mean-pool 1/N attenuation, so a
                // shared step size would leave prompts practically frozen
                // next to the classifier. Scaling their step partially undoes
                // that attenuation (a per-group learning rate, standing in
                // for the adaptivity of a per-parameter optimizer).
                const double seq_rows = static_cast<double>(
                    config.prompt_length + model.dims.visual_tokens + model.dims.textual_tokens);
                const double prompt_lr = config.lr * kPromptStepScale * seq_rows;
                for (auto& [prompt_id, grad] : prompt_grads) {
                    pool->prompts[prompt_id] =
                        sgd_step(pool->prompts[prompt_id], grad, prompt_lr);
                }
                // Keys use their own step size: the pull update is a convex
                // move toward the batch-mean feature, so a rate above 1
                // would oscillate regardless of the classifier's lr.
                const double key_rate = std::min(config.lr, 0.5);
                for (auto& [key_id, grad] : key_grads) {
                    for (std::size_t i = 0; i < model.dims.feature_dim; ++i) {
                        pool->visual_keys.at(key_id, i) -= key_rate * grad.at(0, i);
                    }
                }
            }
        }
    }

    if (pool && variant == Variant::single_key) freeze_keys(*pool);
    model.tasks_trained += 1;
    return stats;
}

ModelDims dims_for_stream(const TaskStream& stream, std::size_t feature_dim) {
    if (stream.tasks.empty()) throw UsageError("dims_for_stream: empty stream");
    const Instance* probe = nullptr;
    int max_answer = 1;
    for (const TaskDataset& ds : stream.tasks) {
        for (const auto* split : {&ds.train, &ds.test}) {
            for (const Instance& inst : *split) {
                if (!probe) probe = &inst;
                max_answer = std::max(max_answer, inst.answer);
            }
        }
    }
    if (!probe) throw UsageError("dims_for_stream: stream has no instances");
    ModelDims dims;
    dims.feature_dim = feature_dim;
    dims.raw_dim = probe->visual.cols;
    dims.visual_tokens = probe->visual.rows;
    dims.textual_tokens = probe->textual.rows;
    dims.num_answers = static_cast<std::size_t>(max_answer) + 1;
    return dims;
}

StreamResult run_stream(const TaskStream& stream, const TrainConfig& config,
                        const ModelDims& dims) {
    config.validate();
    if (stream.tasks.empty()) throw UsageError("run_stream: empty stream");
    for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
        if (stream.tasks[t].task_id != static_cast<int>(t)) {
            throw UsageError("run_stream: task ids must be 0..n-1 in order");
        }
    }

    StreamResult result;
    result.model = make_model(dims, config.seed, config.variant);
    result.accuracy = AccuracyMatrix(stream.size());

    for (std::size_t j = 0; j < stream.size(); ++j) {
        TaskOutcome outcome;
        outcome.cluster = learn_task(result.model, stream.tasks[j], config);
        outcome.snapshot = snapshot(result.model);
        result.tasks.push_back(std::move(outcome));
        for (std::size_t i = 0; i <= j; ++i) {
            result.accuracy.set(i, j, evaluate_accuracy(result.model, stream.tasks[i].test));
        }
    }
    return result;
}

}  // namespace clumo

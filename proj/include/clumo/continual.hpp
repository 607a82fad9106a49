#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "clumo/datagen.hpp"
#include "clumo/model.hpp"

namespace clumo {

struct TrainConfig {
    std::size_t visual_key_count = 3;   // S_v
    std::size_t textual_key_count = 3;  // S_t
    std::size_t prompt_length = 10;     // L_p
    double lr = 0.5;
    std::size_t epochs = 5;
    std::size_t batch_size = 16;
    double kd_weight = 1.0;
    Variant variant = Variant::clumo;
    std::uint64_t seed = 1;
    // Stage-1 clustering knobs.
    std::size_t cluster_batch_size = 64;
    std::size_t cluster_max_iters = 200;
    double cluster_tol = 1e-5;

    void validate() const;  // throws ConfigError

    // Pool grid after folding for the single-modality variants, which move
    // the other modality's key count into the remaining one so the prompt
    // pool size stays S_v * S_t.
    std::pair<std::size_t, std::size_t> effective_key_grid() const;
};

// A[i][j]: accuracy on task i's test split after training task j; defined
// for j >= i only. Entries are fractions in [0, 1].
class AccuracyMatrix {
public:
    AccuracyMatrix() = default;
    explicit AccuracyMatrix(std::size_t tasks);

    std::size_t task_count() const { return tasks_; }
    bool empty() const { return tasks_ == 0; }
    bool filled(std::size_t i, std::size_t j) const;
    double at(std::size_t i, std::size_t j) const;
    void set(std::size_t i, std::size_t j, double value);

    // Row i as the entries j = i .. last; requires a fully filled matrix.
    std::vector<std::vector<double>> triangle() const;
    static AccuracyMatrix from_triangle(const std::vector<std::vector<double>>& rows);

    friend bool operator==(const AccuracyMatrix& a, const AccuracyMatrix& b);

private:
    std::size_t tasks_ = 0;
    std::vector<std::vector<double>> cells_;  // cells_[i][j - i]
    std::vector<std::vector<bool>> known_;
};

struct InferResult {
    int answer = -1;
    int task = -1;            // pool chosen by minimal combined key distance
    int prompt = -1;          // prompt id within that pool
    std::size_t visual_key = 0;
    std::size_t textual_key = 0;
    double distance = 0.0;
};

// Cross-task routing: every pool proposes its best prompt, the pool with the
// smallest combined key distance wins (ties to the lowest task id), and the
// winner's prompt drives the forward pass.
InferResult infer(const ModelState& model, const Tensor2D& v_tokens, const Tensor2D& t_tokens);

// Oracle-routing variant used to separate routing errors from classifier
// drift: the pool is chosen by the caller.
InferResult infer_with_task(const ModelState& model, std::size_t task,
                            const Tensor2D& v_tokens, const Tensor2D& t_tokens);

struct KdResult {
    double loss = 0.0;
    Gradients grads;  // gradients for the current model's trainables only
};

// MSE between the two models' logits on one input; each model routes through
// its own pools. previous == nullptr (first task) gives loss 0, zero grads.
KdResult kd_loss(const ModelState& current, const ModelState* previous,
                 const Tensor2D& v_tokens, const Tensor2D& t_tokens);

// One task of the two-stage procedure: stage 1 clusters and freezes the new
// pool's keys, stage 2 trains the classifier and the selected prompts with
// cross-entropy plus the distillation term. Earlier pools are never touched.
ClusterStats learn_task(ModelState& model, const TaskDataset& task, const TrainConfig& config);

// Test accuracy of the model on a split, routed per the model's variant.
double evaluate_accuracy(const ModelState& model, const std::vector<Instance>& split);
double evaluate_accuracy_with_task(const ModelState& model, std::size_t task,
                                   const std::vector<Instance>& split);

struct TaskOutcome {
    ClusterStats cluster;   // stage-1 stats (default for variants without stage 1)
    ModelState snapshot;    // deep copy of the model right after this task
};

struct StreamResult {
    ModelState model;
    AccuracyMatrix accuracy;
    std::vector<TaskOutcome> tasks;
};

// Model dimensions implied by a stream's instances; num_answers covers the
// largest answer id present.
ModelDims dims_for_stream(const TaskStream& stream, std::size_t feature_dim = 32);

// Learns the tasks in order and fills A[i][j] for every i <= j after each
// task j. Bit-identical across runs for a fixed config and stream.
StreamResult run_stream(const TaskStream& stream, const TrainConfig& config,
                        const ModelDims& dims);

}  // namespace clumo

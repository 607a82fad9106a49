#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "clumo/datagen.hpp"
#include "clumo/encoders.hpp"
#include "clumo/tensor.hpp"

namespace clumo {

// One task's prompt pool: S_v visual keys, S_t textual keys, and one prompt
// per (visual key, textual key) pair, so the pool holds S_v * S_t prompts.
// Keys act as cluster centers in the pooled feature space; the nearest key
// per modality picks the prompt. Once frozen, keys never move again.
struct KeyKeyPromptPool {
    int task_id = 0;
    Tensor2D visual_keys;           // S_v x D
    Tensor2D textual_keys;          // S_t x D
    Tensor2D initial_visual_keys;   // random init, kept for before/after views
    Tensor2D initial_textual_keys;
    std::vector<Tensor2D> prompts;  // S_v * S_t prompts, each L_p x D
    bool keys_frozen = false;

    std::size_t visual_key_count() const { return visual_keys.rows; }
    std::size_t textual_key_count() const { return textual_keys.rows; }
    std::size_t prompt_count() const { return prompts.size(); }
};

// Keys start at seeded uniform(-0.5, 0.5), prompts at uniform(-0.1, 0.1).
KeyKeyPromptPool make_pool(int task_id, std::size_t visual_keys, std::size_t textual_keys,
                           std::size_t prompt_length, std::size_t feature_dim, Rng rng);

// (m, n) -> m * S_t + n; bijective onto [0, S_v * S_t).
std::size_t prompt_index(std::size_t m, std::size_t n, std::size_t s_v, std::size_t s_t);

struct KeyMatch {
    std::size_t key = 0;
    double distance = 0.0;
};

// Nearest key row by Euclidean distance; ties go to the lowest key id.
KeyMatch select_key(std::span<const double> feature, const Tensor2D& keys);

// ---------------------------------------------------------------------------
// Mini-batch k-means. Each iteration draws a batch (the whole dataset when
// batch_size >= point count, a without-replacement sample otherwise), assigns
// batch points to their nearest center, and replaces each center with the
// plain mean of its assigned points. A center with no assignments keeps its
// previous value. Stops when the max center displacement drops below tol.
// ---------------------------------------------------------------------------

struct KMeansOptions {
    std::size_t batch_size = 0;     // 0 or >= N means full batch
    std::size_t max_iters = 200;
    double tol = 1e-5;
};

struct KMeansStats {
    std::vector<std::size_t> counts;    // last-pass assignments per center
    std::vector<double> mean_distance;  // last-pass mean assignment distance per center
    std::size_t iterations = 0;
    bool converged = false;
};

KMeansStats minibatch_kmeans(const Tensor2D& points, Tensor2D& centers,
                             const KMeansOptions& opts, Rng& rng);

// k distinct rows sampled uniformly from points; the k-means initializer.
Tensor2D init_centers_from_points(const Tensor2D& points, std::size_t k, Rng& rng);

// Stage-1 result for one pool: both modalities, clustered independently.
struct ClusterStats {
    KMeansStats visual;
    KMeansStats textual;
    bool converged() const { return visual.converged && textual.converged; }
};

// Runs mini-batch k-means over the pooled per-instance features of the
// training split, one run per modality, writing the final centers into the
// pool's keys. Rejected once the keys are frozen.
ClusterStats train_keys(KeyKeyPromptPool& pool, const TaskDataset& dataset,
                        const FrozenEncoder& visual_encoder,
                        const FrozenEncoder& textual_encoder,
                        std::size_t batch_size, std::size_t max_iters, double tol,
                        Rng rng);

// Idempotent; after this, train_keys on the pool is a usage error.
void freeze_keys(KeyKeyPromptPool& pool);

struct PromptSelection {
    Tensor2D prompt;                // copy of the selected L_p x D prompt
    std::size_t visual_key = 0;
    std::size_t textual_key = 0;
    std::size_t prompt_id = 0;
    double distance = 0.0;          // visual + textual key distance
};

// Mean-pools each modality's tokens, picks the nearest key per modality
// independently, and returns the prompt at prompt_index(m, n).
PromptSelection select_prompt(const KeyKeyPromptPool& pool, const Tensor2D& v_tokens,
                              const Tensor2D& t_tokens);

struct ClusteringError {
    double visual = 0.0;
    double textual = 0.0;
    double combined() const { return 0.5 * (visual + textual); }
};

// Mean distance from each training instance's pooled feature to its assigned
// key, averaged per task and then over tasks; one value per modality.
ClusteringError clustering_error(std::span<const KeyKeyPromptPool> pools,
                                 std::span<const TaskDataset> datasets,
                                 const FrozenEncoder& visual_encoder,
                                 const FrozenEncoder& textual_encoder);

// Text-record serialization of a pool list (see serialize.hpp for the format).
void save_pools(std::ostream& os, std::span<const KeyKeyPromptPool> pools);
std::vector<KeyKeyPromptPool> load_pools(std::istream& is);

struct TextDocument;
std::vector<KeyKeyPromptPool> pools_from_document(const TextDocument& doc);

}  // namespace clumo

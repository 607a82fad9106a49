#include "clumo/pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "clumo/errors.hpp"
#include "clumo/numerics.hpp"
#include "clumo/serialize.hpp"

namespace clumo {

namespace {
#ifdef CLUMO_PROMPT_BASE_OVERRIDE
constexpr double kPromptBaseScale = CLUMO_PROMPT_BASE_OVERRIDE;
#else
constexpr double kPromptBaseScale = 0.5;
#endif
}  // namespace

KeyKeyPromptPool make_pool(int task_id, std::size_t visual_keys, std::size_t textual_keys,
                           std::size_t prompt_length, std::size_t feature_dim, Rng rng) {
    if (visual_keys < 1 || textual_keys < 1 || prompt_length < 1 || feature_dim < 1) {
        throw ConfigError("make_pool: key counts, prompt length and width must be >= 1");
    }
    KeyKeyPromptPool pool;
    pool.task_id = task_id;
    pool.visual_keys = random_uniform(rng, visual_keys, feature_dim, -0.5, 0.5);
    pool.textual_keys = random_uniform(rng, textual_keys, feature_dim, -0.5, 0.5);
    pool.initial_visual_keys = pool.visual_keys;
    pool.initial_textual_keys = pool.textual_keys;
    // All prompts of a pool start around a shared task-level base, so the
    // pool shifts the fused representation into its own region regardless of
    // how many prompts it holds; the small per-prompt noise is what stage-2
    // training differentiates.
    Tensor2D base = random_uniform(rng, prompt_length, feature_dim, -kPromptBaseScale,
                                   kPromptBaseScale);
    pool.prompts.reserve(visual_keys * textual_keys);
    for (std::size_t p = 0; p < visual_keys * textual_keys; ++p) {
        Tensor2D prompt = random_uniform(rng, prompt_length, feature_dim, -0.1, 0.1);
        for (std::size_t i = 0; i < prompt.size(); ++i) prompt.data[i] += base.data[i];
        pool.prompts.push_back(std::move(prompt));
    }
    return pool;
}

std::size_t prompt_index(std::size_t m, std::size_t n, std::size_t s_v, std::size_t s_t) {
    if (m >= s_v || n >= s_t) {
        throw IndexError("prompt_index: key pair (" + std::to_string(m) + ", " +
                         std::to_string(n) + ") outside grid " + std::to_string(s_v) + "x" +
                         std::to_string(s_t));
    }
    return m * s_t + n;
}

KeyMatch select_key(std::span<const double> feature, const Tensor2D& keys) {
    if (keys.rows == 0) throw UsageError("select_key: empty key set");
    KeyMatch best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < keys.rows; ++k) {
        double d = l2_distance(feature, keys.row(k));
        if (d < best.distance) best = {k, d};
    }
    return best;
}

namespace {

std::vector<std::size_t> sample_batch(std::size_t n, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (batch_size == 0 || batch_size >= n) return idx;
    // Partial Fisher-Yates: the first batch_size entries are a uniform
    // without-replacement sample.
    for (std::size_t i = 0; i < batch_size; ++i) {
        std::size_t j = i + rng.index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(batch_size);
    return idx;
}

}  // namespace

Tensor2D init_centers_from_points(const Tensor2D& points, std::size_t k, Rng& rng) {
    if (points.rows < k) throw UsageError("init_centers_from_points: fewer points than centers");
    std::vector<std::size_t> idx(points.rows);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle_indices(idx, rng);
    Tensor2D centers(k, points.cols);
    std::size_t taken = 0;
    for (std::size_t cursor = 0; cursor < idx.size() && taken < k; ++cursor) {
        auto candidate = points.row(idx[cursor]);
        bool duplicate = false;
        for (std::size_t c = 0; c < taken && !duplicate; ++c) {
            duplicate = std::equal(candidate.begin(), candidate.end(), centers.row(c).begin());
        }
        if (duplicate) continue;
        std::copy(candidate.begin(), candidate.end(), centers.row(taken).begin());
        ++taken;
    }
    // Degenerate data with fewer distinct rows than centers: reuse rows.
    for (; taken < k; ++taken) {
        auto candidate = points.row(idx[taken % idx.size()]);
        std::copy(candidate.begin(), candidate.end(), centers.row(taken).begin());
    }
    return centers;
}

KMeansStats minibatch_kmeans(const Tensor2D& points, Tensor2D& centers,
                             const KMeansOptions& opts, Rng& rng) {
    if (points.rows == 0) throw UsageError("minibatch_kmeans: no points");
    if (centers.rows == 0) throw UsageError("minibatch_kmeans: no centers");
    if (points.cols != centers.cols) throw ShapeError("minibatch_kmeans: width mismatch");

    const std::size_t k = centers.rows;
    KMeansStats stats;
    stats.counts.assign(k, 0);
    stats.mean_distance.assign(k, 0.0);

    for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
        auto batch = sample_batch(points.rows, opts.batch_size, rng);

        std::vector<std::size_t> counts(k, 0);
        std::vector<double> dist_sum(k, 0.0);
        Tensor2D sums(k, points.cols);
        for (std::size_t idx : batch) {
            KeyMatch m = select_key(points.row(idx), centers);
            counts[m.key] += 1;
            dist_sum[m.key] += m.distance;
            auto row = points.row(idx);
            for (std::size_t j = 0; j < points.cols; ++j) sums.at(m.key, j) += row[j];
        }

        double displacement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its center
            double moved = 0.0;
            for (std::size_t j = 0; j < points.cols; ++j) {
                double next = sums.at(c, j) / static_cast<double>(counts[c]);
                double d = next - centers.at(c, j);
                moved += d * d;
                centers.at(c, j) = next;
            }
            displacement = std::max(displacement, std::sqrt(moved));
        }

        stats.counts = counts;
        for (std::size_t c = 0; c < k; ++c) {
            stats.mean_distance[c] = counts[c] ? dist_sum[c] / static_cast<double>(counts[c]) : 0.0;
        }
        stats.iterations = iter + 1;
        if (displacement < opts.tol) {
            stats.converged = true;
            break;
        }
    }
    return stats;
}

namespace {

Tensor2D stack_pooled_features(const FrozenEncoder& enc, const std::vector<Instance>& instances,
                               bool visual) {
    Tensor2D out(instances.size(), enc.projection.cols);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        Tensor2D pooled = pooled_feature(enc, visual ? instances[i].visual : instances[i].textual);
        std::copy(pooled.data.begin(), pooled.data.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace

ClusterStats train_keys(KeyKeyPromptPool& pool, const TaskDataset& dataset,
                        const FrozenEncoder& visual_encoder,
                        const FrozenEncoder& textual_encoder,
                        std::size_t batch_size, std::size_t max_iters, double tol,
                        Rng rng) {
    if (pool.keys_frozen) throw UsageError("train_keys: keys are frozen");
    if (dataset.train.empty()) throw UsageError("train_keys: empty dataset");
    if (batch_size < pool.visual_key_count() || batch_size < pool.textual_key_count()) {
        throw UsageError("train_keys: batch_size must be >= each key count");
    }

    Tensor2D visual_feats = stack_pooled_features(visual_encoder, dataset.train, true);
    Tensor2D textual_feats = stack_pooled_features(textual_encoder, dataset.train, false);

    KMeansOptions opts{batch_size, max_iters, tol};
    ClusterStats stats;

    auto run = [&](const Tensor2D& feats, Tensor2D& keys, Rng r) {
        auto first_batch = sample_batch(feats.rows, batch_size, r);
        Tensor2D batch_points(first_batch.size(), feats.cols);
        for (std::size_t i = 0; i < first_batch.size(); ++i) {
            auto src = feats.row(first_batch[i]);
            std::copy(src.begin(), src.end(), batch_points.row(i).begin());
        }
        keys = init_centers_from_points(batch_points, keys.rows, r);
        return minibatch_kmeans(feats, keys, opts, r);
    };

    stats.visual = run(visual_feats, pool.visual_keys, rng.fork(1));
    stats.textual = run(textual_feats, pool.textual_keys, rng.fork(2));
    return stats;
}

void freeze_keys(KeyKeyPromptPool& pool) {
    pool.keys_frozen = true;
}

PromptSelection select_prompt(const KeyKeyPromptPool& pool, const Tensor2D& v_tokens,
                              const Tensor2D& t_tokens) {
    Tensor2D pooled_v = mean_rows(v_tokens);
    Tensor2D pooled_t = mean_rows(t_tokens);
    KeyMatch mv = select_key(pooled_v.row(0), pool.visual_keys);
    KeyMatch mt = select_key(pooled_t.row(0), pool.textual_keys);
    PromptSelection sel;
    sel.visual_key = mv.key;
    sel.textual_key = mt.key;
    sel.prompt_id = prompt_index(mv.key, mt.key, pool.visual_key_count(), pool.textual_key_count());
    sel.prompt = pool.prompts[sel.prompt_id];
    sel.distance = mv.distance + mt.distance;
    return sel;
}

ClusteringError clustering_error(std::span<const KeyKeyPromptPool> pools,
                                 std::span<const TaskDataset> datasets,
                                 const FrozenEncoder& visual_encoder,
                                 const FrozenEncoder& textual_encoder) {
    if (pools.size() != datasets.size() || pools.empty()) {
        throw UsageError("clustering_error: need one dataset per pool");
    }
    ClusteringError err;
    for (std::size_t t = 0; t < pools.size(); ++t) {
        if (pools[t].task_id != datasets[t].task_id) {
            throw UsageError("clustering_error: task id mismatch at position " + std::to_string(t));
        }
        if (datasets[t].train.empty()) throw UsageError("clustering_error: empty training split");
        double visual_sum = 0.0, textual_sum = 0.0;
        for (const Instance& inst : datasets[t].train) {
            Tensor2D pv = pooled_feature(visual_encoder, inst.visual);
            Tensor2D pt = pooled_feature(textual_encoder, inst.textual);
            visual_sum += select_key(pv.row(0), pools[t].visual_keys).distance;
            textual_sum += select_key(pt.row(0), pools[t].textual_keys).distance;
        }
        const double n = static_cast<double>(datasets[t].train.size());
        err.visual += visual_sum / n;
        err.textual += textual_sum / n;
    }
    err.visual /= static_cast<double>(pools.size());
    err.textual /= static_cast<double>(pools.size());
    return err;
}

void save_pools(std::ostream& os, std::span<const KeyKeyPromptPool> pools) {
    write_meta(os, "pool_count", std::to_string(pools.size()));
    for (std::size_t i = 0; i < pools.size(); ++i) {
        const std::string prefix = "pool" + std::to_string(i) + ".";
        const KeyKeyPromptPool& p = pools[i];
        write_meta(os, prefix + "task_id", std::to_string(p.task_id));
        write_meta(os, prefix + "keys_frozen", p.keys_frozen ? "1" : "0");
        write_meta(os, prefix + "prompt_count", std::to_string(p.prompt_count()));
        write_tensor(os, prefix + "visual_keys", p.visual_keys);
        write_tensor(os, prefix + "textual_keys", p.textual_keys);
        write_tensor(os, prefix + "initial_visual_keys", p.initial_visual_keys);
        write_tensor(os, prefix + "initial_textual_keys", p.initial_textual_keys);
        for (std::size_t j = 0; j < p.prompts.size(); ++j) {
            write_tensor(os, prefix + "prompt" + std::to_string(j), p.prompts[j]);
        }
    }
}

std::vector<KeyKeyPromptPool> load_pools(std::istream& is) {
    return pools_from_document(read_document(is));
}

std::vector<KeyKeyPromptPool> pools_from_document(const TextDocument& doc) {
    std::size_t count = std::stoul(doc.meta_value("pool_count"));
    std::vector<KeyKeyPromptPool> pools;
    pools.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string prefix = "pool" + std::to_string(i) + ".";
        KeyKeyPromptPool p;
        p.task_id = std::stoi(doc.meta_value(prefix + "task_id"));
        p.keys_frozen = doc.meta_value(prefix + "keys_frozen") == "1";
        p.visual_keys = doc.tensor(prefix + "visual_keys");
        p.textual_keys = doc.tensor(prefix + "textual_keys");
        p.initial_visual_keys = doc.tensor(prefix + "initial_visual_keys");
        p.initial_textual_keys = doc.tensor(prefix + "initial_textual_keys");
        std::size_t prompt_count = std::stoul(doc.meta_value(prefix + "prompt_count"));
        for (std::size_t j = 0; j < prompt_count; ++j) {
            p.prompts.push_back(doc.tensor(prefix + "prompt" + std::to_string(j)));
        }
        pools.push_back(std::move(p));
    }
    return pools;
}

}  // namespace clumo

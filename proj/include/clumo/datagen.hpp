#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "clumo/tensor.hpp"

namespace clumo {

// One labeled multimodal example. The answer is a function of the hidden
// (visual group, textual group) pair, so neither modality alone determines it.
struct Instance {
    Tensor2D visual;        // L_v x raw_dim token rows
    Tensor2D textual;       // L_t x raw_dim token rows
    int answer = 0;
    int visual_group = -1;  // hidden ground truth, never shown to the learner
    int textual_group = -1;
};

struct TaskSpec {
    int task_id = 0;
    Tensor2D visual_centers;      // G_v x raw_dim sub-domain centers
    Tensor2D textual_centers;     // G_t x raw_dim
    double sigma = 0.15;          // within-cluster token noise
    std::vector<int> label_table; // (gv * G_t + gt) -> answer id
    std::size_t train_count = 512;
    std::size_t test_count = 128;
    std::size_t visual_tokens = 8;
    std::size_t textual_tokens = 8;

    void validate() const;  // throws ConfigError
};

struct TaskDataset {
    int task_id = 0;
    std::vector<Instance> train;
    std::vector<Instance> test;
};

struct TaskStream {
    std::vector<TaskDataset> tasks;
    std::size_t size() const { return tasks.size(); }
};

struct StreamConfig {
    std::size_t num_tasks = 4;
    std::size_t visual_groups = 3;   // G_v
    std::size_t textual_groups = 3;  // G_t
    std::size_t train_per_task = 512;
    std::size_t test_per_task = 128;
    double sigma = 0.15;
    // Minimum raw-space distance between any sub-domain center of one task
    // and any center of another task.
    double task_separation = 4.0;
    // Scale of within-task sub-domain center placement around the task anchor.
    double subdomain_spread = 1.5;
    double min_subdomain_separation = 1.0;
    std::size_t raw_dim = 16;
    std::size_t visual_tokens = 8;
    std::size_t textual_tokens = 8;
    // true: each task owns a disjoint answer-id range; false: tasks share the
    // same range with a per-task permutation of the (group pair -> answer) map.
    bool disjoint_answers = true;

    std::size_t answers_per_task() const { return visual_groups * textual_groups; }
    std::size_t answer_vocabulary() const {
        return disjoint_answers ? num_tasks * answers_per_task() : answers_per_task();
    }
    void validate() const;
};

// Deterministic under (spec, seed): identical inputs give bit-identical data.
TaskDataset make_task(const TaskSpec& spec, std::uint64_t seed);

TaskStream make_stream(const StreamConfig& cfg, std::uint64_t seed);

// Reorders tasks per an "abdc"-style order string (letter i = original task i)
// and renumbers task ids by visit position. Dataset contents are untouched.
TaskStream permute_stream(const TaskStream& stream, const std::string& order);

std::string natural_order(std::size_t num_tasks);  // "abc..."

// Line-delimited export: one instance per line,
//   <task> <train|test> <answer> <gv> <gt> <visual values> <textual values>
// after a header carrying the dimensions. Round trips are value-exact.
void save_stream(std::ostream& os, const TaskStream& stream);
TaskStream load_stream(std::istream& is);

}  // namespace clumo

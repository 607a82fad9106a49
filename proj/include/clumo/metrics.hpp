#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clumo/continual.hpp"
#include "clumo/pool.hpp"
#include "clumo/tensor.hpp"
#include "json.hpp"

namespace clumo {

// Fraction of exact matches between predictions and labels.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// F_i = (A[i][i] - A[i][last]) / A[i][i], averaged over all tasks before the
// last one. Negative values mean backward transfer. Tasks whose diagonal
// accuracy is zero are excluded from the average and listed in `excluded`
// (their per_task slot is left at 0). With fewer than two tasks the rate is
// undefined and `defined` stays false.
struct ForgettingResult {
    std::vector<double> per_task;
    double average = 0.0;
    bool defined = false;
    std::vector<std::size_t> excluded;
};

ForgettingResult forgetting(const AccuracyMatrix& a);

// [A[0][0], A[0][1], ..., A[0][last]]: first-task accuracy over the stream.
std::vector<double> first_task_curve(const AccuracyMatrix& a);

struct PcaResult {
    Tensor2D projected;                  // N x k
    std::vector<double> explained_ratio; // eigenvalue share of total variance
    bool degenerate = false;             // all-zero variance input
};

// Top-k principal directions of the centered points via power iteration with
// deflation. The sign convention (largest-magnitude coordinate positive)
// makes the output reproducible.
PcaResult pca_project(const Tensor2D& points, std::size_t k = 2);

struct RunReport {
    nlohmann::json config_echo;
    std::string task_order;
    std::string variant;
    std::uint64_t seed = 0;
    AccuracyMatrix accuracy;
    double average_accuracy = 0.0;   // mean of A[i][last]
    ForgettingResult forgetting;
    std::optional<ClusteringError> clustering;
    std::vector<double> first_task_curve;
    double wall_seconds = 0.0;
};

RunReport build_report(nlohmann::json config_echo, std::string task_order, std::string variant,
                       std::uint64_t seed, const AccuracyMatrix& accuracy,
                       std::optional<ClusteringError> clustering, double wall_seconds);

// The deterministic numeric section of the report document. Timing lives in
// a separate "timing" section so reruns of the same config are byte-identical
// here.
nlohmann::json report_results_json(const RunReport& report);

// Writes the JSON document to `path` and a human-readable table (percentages,
// six decimals) next to it with the extension replaced by .txt. An empty run
// is a validation error and writes nothing.
void emit_report(const RunReport& report, const std::filesystem::path& path);

RunReport load_report(const std::filesystem::path& path);

}  // namespace clumo

#include "clumo/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "clumo/errors.hpp"
#include "clumo/numerics.hpp"

namespace clumo {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw UsageError("accuracy: prediction and label lists must have equal nonzero length");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

ForgettingResult forgetting(const AccuracyMatrix& a) {
    ForgettingResult res;
    const std::size_t tasks = a.task_count();
    if (tasks < 2) return res;
    const std::size_t last = tasks - 1;
    res.per_task.assign(last, 0.0);
    double sum = 0.0;
    std::size_t included = 0;
    for (std::size_t i = 0; i < last; ++i) {
        const double own = a.at(i, i);
        if (own == 0.0) {
            res.excluded.push_back(i);
            continue;
        }
        res.per_task[i] = (own - a.at(i, last)) / own;
        sum += res.per_task[i];
        ++included;
    }
    if (included > 0) {
        res.average = sum / static_cast<double>(included);
        res.defined = true;
    }
    return res;
}

std::vector<double> first_task_curve(const AccuracyMatrix& a) {
    if (a.empty()) throw UsageError("first_task_curve: empty matrix");
    std::vector<double> curve;
    curve.reserve(a.task_count());
    for (std::size_t j = 0; j < a.task_count(); ++j) curve.push_back(a.at(0, j));
    return curve;
}

PcaResult pca_project(const Tensor2D& points, std::size_t k) {
    if (points.rows < 2) throw UsageError("pca_project: need at least two points");
    const std::size_t n = points.rows;
    const std::size_t dim = points.cols;
    k = std::min(k, dim);

    Tensor2D centered = points;
    Tensor2D mean = mean_rows(points);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) centered.at(i, j) -= mean.at(0, j);
    }

    Tensor2D cov(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < dim; ++a) {
            const double va = centered.at(i, a);
            if (va == 0.0) continue;
            for (std::size_t b = 0; b < dim; ++b) cov.at(a, b) += va * centered.at(i, b);
        }
    }
    for (double& v : cov.data) v /= static_cast<double>(n - 1);

    double total = 0.0;
    for (std::size_t a = 0; a < dim; ++a) total += cov.at(a, a);

    PcaResult res;
    res.projected = Tensor2D(n, k);
    res.explained_ratio.assign(k, 0.0);
    if (!(total > 0.0)) {
        res.degenerate = true;
        return res;
    }

    Tensor2D components(k, dim);
    Rng rng(0x9c0ffeeull);  // fixed start so plot data is reproducible
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> v(dim);
        double norm = 0.0;
        for (double& x : v) {
            x = rng.uniform(-1.0, 1.0);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;

        double lambda = 0.0;
        bool deficient = false;
        for (int iter = 0; iter < 2000; ++iter) {
            std::vector<double> w(dim, 0.0);
            for (std::size_t a = 0; a < dim; ++a) {
                double acc = 0.0;
                for (std::size_t b = 0; b < dim; ++b) acc += cov.at(a, b) * v[b];
                w[a] = acc;
            }
            double wn = 0.0;
            for (double x : w) wn += x * x;
            wn = std::sqrt(wn);
            if (wn < 1e-14 * total) {
                deficient = true;  // remaining variance is numerically zero
                break;
            }
            double delta = 0.0;
            for (std::size_t a = 0; a < dim; ++a) {
                w[a] /= wn;
                delta = std::max(delta, std::abs(w[a] - v[a]));
            }
            v = w;
            lambda = wn;
            if (delta < 1e-14) break;
        }
        if (deficient) continue;  // leaves a zero component and ratio 0

        // Rayleigh quotient for the final eigenvalue estimate.
        double quad = 0.0;
        for (std::size_t a = 0; a < dim; ++a) {
            double acc = 0.0;
            for (std::size_t b = 0; b < dim; ++b) acc += cov.at(a, b) * v[b];
            quad += v[a] * acc;
        }
        lambda = std::max(quad, 0.0);

        // Sign convention: the largest-magnitude coordinate is positive.
        std::size_t arg = 0;
        for (std::size_t a = 1; a < dim; ++a) {
            if (std::abs(v[a]) > std::abs(v[arg])) arg = a;
        }
        if (v[arg] < 0.0) {
            for (double& x : v) x = -x;
        }

        for (std::size_t a = 0; a < dim; ++a) components.at(c, a) = v[a];
        res.explained_ratio[c] = lambda / total;

        for (std::size_t a = 0; a < dim; ++a) {
            for (std::size_t b = 0; b < dim; ++b) cov.at(a, b) -= lambda * v[a] * v[b];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t a = 0; a < dim; ++a) acc += centered.at(i, a) * components.at(c, a);
            res.projected.at(i, c) = acc;
        }
    }
    return res;
}

RunReport build_report(nlohmann::json config_echo, std::string task_order, std::string variant,
                       std::uint64_t seed, const AccuracyMatrix& accuracy,
                       std::optional<ClusteringError> clustering, double wall_seconds) {
    RunReport r;
    r.config_echo = std::move(config_echo);
    r.task_order = std::move(task_order);
    r.variant = std::move(variant);
    r.seed = seed;
    r.accuracy = accuracy;
    if (!accuracy.empty()) {
        const std::size_t last = accuracy.task_count() - 1;
        double sum = 0.0;
        for (std::size_t i = 0; i < accuracy.task_count(); ++i) sum += accuracy.at(i, last);
        r.average_accuracy = sum / static_cast<double>(accuracy.task_count());
        r.forgetting = forgetting(accuracy);
        r.first_task_curve = first_task_curve(accuracy);
    }
    r.clustering = clustering;
    r.wall_seconds = wall_seconds;
    return r;
}

nlohmann::json report_results_json(const RunReport& report) {
    nlohmann::json res;
    res["task_order"] = report.task_order;
    res["variant"] = report.variant;
    res["seed"] = report.seed;
    res["accuracy_matrix"] = report.accuracy.triangle();
    res["average_accuracy"] = report.average_accuracy;
    res["forgetting"] = {{"per_task", report.forgetting.per_task},
                         {"average", report.forgetting.average},
                         {"defined", report.forgetting.defined},
                         {"excluded", report.forgetting.excluded}};
    if (report.clustering) {
        res["clustering_error"] = {{"visual", report.clustering->visual},
                                   {"textual", report.clustering->textual}};
    } else {
        res["clustering_error"] = nullptr;
    }
    res["first_task_curve"] = report.first_task_curve;
    return res;
}

namespace {

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", fraction * 100.0);
    return buf;
}

void write_table(const RunReport& report, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("emit_report: cannot write " + path.string());
    os << "task order: " << report.task_order << "    variant: " << report.variant
       << "    seed: " << report.seed << "\n\n";
    os << "variant          A (acc %)      F (forgetting %)\n";
    os << report.variant;
    for (std::size_t i = report.variant.size(); i < 17; ++i) os << ' ';
    os << pct(report.average_accuracy) << "      "
       << (report.forgetting.defined ? pct(report.forgetting.average) : "n/a") << "\n\n";
    os << "accuracy matrix (%, row = task, column = after task):\n";
    const std::size_t tasks = report.accuracy.task_count();
    for (std::size_t i = 0; i < tasks; ++i) {
        os << "task" << i << ":";
        for (std::size_t j = 0; j < tasks; ++j) {
            os << ' ' << (j >= i ? pct(report.accuracy.at(i, j)) : "         -");
        }
        os << '\n';
    }
    os << "\nfirst-task curve (%):";
    for (double v : report.first_task_curve) os << ' ' << pct(v);
    os << '\n';
    if (report.clustering) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "clustering error (visual, textual): %.6f %.6f",
                      report.clustering->visual, report.clustering->textual);
        os << buf << '\n';
    }
    char wall[48];
    std::snprintf(wall, sizeof(wall), "wall seconds: %.3f", report.wall_seconds);
    os << wall << '\n';
}

}  // namespace

void emit_report(const RunReport& report, const std::filesystem::path& path) {
    if (report.accuracy.empty()) {
        throw ValueError("emit_report: refusing to write a report of an empty run");
    }
    nlohmann::json doc;
    doc["config"] = report.config_echo;
    doc["results"] = report_results_json(report);  // throws if the matrix is incomplete
    doc["timing"] = {{"wall_seconds", report.wall_seconds}};

    std::ofstream os(path);
    if (!os) throw IoError("emit_report: cannot write " + path.string());
    os << doc.dump(2) << '\n';
    os.close();

    std::filesystem::path table = path;
    table.replace_extension(".txt");
    write_table(report, table);
}

RunReport load_report(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_report: cannot read " + path.string());
    nlohmann::json doc = nlohmann::json::parse(is);
    const nlohmann::json& res = doc.at("results");
    RunReport r;
    r.config_echo = doc.at("config");
    r.task_order = res.at("task_order").get<std::string>();
    r.variant = res.at("variant").get<std::string>();
    r.seed = res.at("seed").get<std::uint64_t>();
    r.accuracy = AccuracyMatrix::from_triangle(
        res.at("accuracy_matrix").get<std::vector<std::vector<double>>>());
    r.average_accuracy = res.at("average_accuracy").get<double>();
    r.forgetting.per_task = res.at("forgetting").at("per_task").get<std::vector<double>>();
    r.forgetting.average = res.at("forgetting").at("average").get<double>();
    r.forgetting.defined = res.at("forgetting").at("defined").get<bool>();
    r.forgetting.excluded = res.at("forgetting").at("excluded").get<std::vector<std::size_t>>();
    if (!res.at("clustering_error").is_null()) {
        ClusteringError ce;
        ce.visual = res.at("clustering_error").at("visual").get<double>();
        ce.textual = res.at("clustering_error").at("textual").get<double>();
        r.clustering = ce;
    }
    r.first_task_curve = res.at("first_task_curve").get<std::vector<double>>();
    r.wall_seconds = doc.at("timing").at("wall_seconds").get<double>();
    return r;
}

}  // namespace clumo

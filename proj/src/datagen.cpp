#include "clumo/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "clumo/errors.hpp"
#include "clumo/numerics.hpp"
#include "clumo/serialize.hpp"

namespace clumo {

void TaskSpec::validate() const {
    if (visual_centers.rows < 1 || textual_centers.rows < 1)
        throw ConfigError("task spec: need at least one sub-domain per modality");
    if (visual_centers.cols != textual_centers.cols)
        throw ConfigError("task spec: modality centers disagree on raw_dim");
    if (sigma <= 0.0) throw ConfigError("task spec: sigma must be > 0");
    if (label_table.size() != visual_centers.rows * textual_centers.rows)
        throw ConfigError("task spec: label table must cover every group pair");
    if (visual_tokens < 1 || textual_tokens < 1)
        throw ConfigError("task spec: token counts must be >= 1");
    for (int a : label_table) {
        if (a < 0) throw ConfigError("task spec: negative answer id");
    }
}

void StreamConfig::validate() const {
    if (num_tasks < 1) throw ConfigError("stream: num_tasks must be >= 1");
    if (visual_groups < 1 || textual_groups < 1)
        throw ConfigError("stream: group counts must be >= 1");
    if (sigma <= 0.0) throw ConfigError("stream: sigma must be > 0");
    if (task_separation <= 0.0) throw ConfigError("stream: task_separation must be > 0");
    if (subdomain_spread <= 0.0) throw ConfigError("stream: subdomain_spread must be > 0");
    if (raw_dim < 1) throw ConfigError("stream: raw_dim must be >= 1");
    if (train_per_task < 1 || test_per_task < 1)
        throw ConfigError("stream: split sizes must be >= 1");
    if (visual_tokens < 1 || textual_tokens < 1)
        throw ConfigError("stream: token counts must be >= 1");
}

namespace {

Instance draw_instance(const TaskSpec& spec, Rng& rng) {
    Instance inst;
    const std::size_t gv_count = spec.visual_centers.rows;
    const std::size_t gt_count = spec.textual_centers.rows;
    inst.visual_group = static_cast<int>(rng.index(gv_count));
    inst.textual_group = static_cast<int>(rng.index(gt_count));
    const std::size_t raw = spec.visual_centers.cols;
    inst.visual = Tensor2D(spec.visual_tokens, raw);
    for (std::size_t t = 0; t < spec.visual_tokens; ++t) {
        for (std::size_t j = 0; j < raw; ++j) {
            inst.visual.at(t, j) =
                spec.visual_centers.at(inst.visual_group, j) + spec.sigma * rng.gaussian();
        }
    }
    inst.textual = Tensor2D(spec.textual_tokens, raw);
    for (std::size_t t = 0; t < spec.textual_tokens; ++t) {
        for (std::size_t j = 0; j < raw; ++j) {
            inst.textual.at(t, j) =
                spec.textual_centers.at(inst.textual_group, j) + spec.sigma * rng.gaussian();
        }
    }
    inst.answer = spec.label_table[inst.visual_group * gt_count + inst.textual_group];
    return inst;
}

// Per-task sub-domain centers placed around an anchor; rejected and redrawn
// until every pair of centers within the task is min_sep apart.
Tensor2D place_centers(const Tensor2D& anchor, std::size_t count, double spread,
                       double min_sep, Rng& rng) {
    const std::size_t dim = anchor.cols;
    const double per_coord = spread / std::sqrt(static_cast<double>(dim));
    for (int attempt = 0; attempt < 200; ++attempt) {
        Tensor2D centers(count, dim);
        for (std::size_t g = 0; g < count; ++g) {
            for (std::size_t j = 0; j < dim; ++j) {
                centers.at(g, j) = anchor.at(0, j) + per_coord * rng.gaussian();
            }
        }
        double min_pair = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < count; ++a) {
            for (std::size_t b = a + 1; b < count; ++b) {
                min_pair = std::min(min_pair, l2_distance(centers.row(a), centers.row(b)));
            }
        }
        if (count < 2 || min_pair >= min_sep) return centers;
    }
    throw ConfigError("stream: could not separate sub-domain centers; "
                      "lower min_subdomain_separation or raise subdomain_spread");
}

double min_cross_task_distance(const std::vector<TaskSpec>& specs) {
    double best = std::numeric_limits<double>::infinity();
    auto scan = [&best](const Tensor2D& a, const Tensor2D& b) {
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t j = 0; j < b.rows; ++j)
                best = std::min(best, l2_distance(a.row(i), b.row(j)));
    };
    for (std::size_t s = 0; s < specs.size(); ++s) {
        for (std::size_t t = s + 1; t < specs.size(); ++t) {
            scan(specs[s].visual_centers, specs[t].visual_centers);
            scan(specs[s].textual_centers, specs[t].textual_centers);
        }
    }
    return best;
}

std::vector<int> build_label_table(const StreamConfig& cfg, std::size_t task, Rng& rng) {
    const std::size_t per_task = cfg.answers_per_task();
    std::vector<int> table(per_task);
    std::iota(table.begin(), table.end(), 0);
    if (cfg.disjoint_answers) {
        for (int& a : table) a += static_cast<int>(task * per_task);
    } else {
        // Shared vocabulary with a task-specific remapping so later tasks
        // actively interfere with earlier ones.
        std::vector<std::size_t> perm(per_task);
        std::iota(perm.begin(), perm.end(), 0);
        shuffle_indices(perm, rng);
        for (std::size_t i = 0; i < per_task; ++i) table[i] = static_cast<int>(perm[i]);
    }
    return table;
}

}  // namespace

TaskDataset make_task(const TaskSpec& spec, std::uint64_t seed) {
    spec.validate();
    TaskDataset ds;
    ds.task_id = spec.task_id;
    Rng rng = Rng(seed).fork(0x7a5cull + static_cast<std::uint64_t>(spec.task_id));
    ds.train.reserve(spec.train_count);
    for (std::size_t i = 0; i < spec.train_count; ++i) ds.train.push_back(draw_instance(spec, rng));
    ds.test.reserve(spec.test_count);
    for (std::size_t i = 0; i < spec.test_count; ++i) ds.test.push_back(draw_instance(spec, rng));
    return ds;
}

TaskStream make_stream(const StreamConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng = Rng(seed).fork(0x57123ull);

    // Anchors drawn in a box sized from the separation requirement; the whole
    // placement is redrawn until the exact cross-task center distance holds.
    const double box = std::max(2.0, 0.45 * (cfg.task_separation + 2.0 * cfg.subdomain_spread));
    std::vector<TaskSpec> specs;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        specs.clear();
        for (std::size_t t = 0; t < cfg.num_tasks; ++t) {
            Tensor2D anchor_v = random_uniform(rng, 1, cfg.raw_dim, -box, box);
            Tensor2D anchor_t = random_uniform(rng, 1, cfg.raw_dim, -box, box);
            TaskSpec spec;
            spec.task_id = static_cast<int>(t);
            spec.visual_centers = place_centers(anchor_v, cfg.visual_groups,
                                                cfg.subdomain_spread,
                                                cfg.min_subdomain_separation, rng);
            spec.textual_centers = place_centers(anchor_t, cfg.textual_groups,
                                                 cfg.subdomain_spread,
                                                 cfg.min_subdomain_separation, rng);
            spec.sigma = cfg.sigma;
            spec.label_table = build_label_table(cfg, t, rng);
            spec.train_count = cfg.train_per_task;
            spec.test_count = cfg.test_per_task;
            spec.visual_tokens = cfg.visual_tokens;
            spec.textual_tokens = cfg.textual_tokens;
            specs.push_back(std::move(spec));
        }
        placed = cfg.num_tasks < 2 || min_cross_task_distance(specs) >= cfg.task_separation;
    }
    if (!placed) {
        throw ConfigError("stream: could not separate " + std::to_string(cfg.num_tasks) +
                          " tasks by " + std::to_string(cfg.task_separation));
    }

    TaskStream stream;
    for (const TaskSpec& spec : specs) {
        stream.tasks.push_back(make_task(spec, Rng(seed).fork(0xda7aull + spec.task_id).seed()));
    }
    return stream;
}

TaskStream permute_stream(const TaskStream& stream, const std::string& order) {
    if (order.size() != stream.size()) {
        throw ConfigError("task order '" + order + "' does not match stream size " +
                          std::to_string(stream.size()));
    }
    std::vector<bool> seen(stream.size(), false);
    TaskStream out;
    for (char c : order) {
        int idx = c - 'a';
        if (idx < 0 || static_cast<std::size_t>(idx) >= stream.size() || seen[idx]) {
            throw ConfigError("task order '" + order + "' is not a permutation of " +
                              natural_order(stream.size()));
        }
        seen[idx] = true;
        TaskDataset ds = stream.tasks[idx];
        ds.task_id = static_cast<int>(out.tasks.size());
        out.tasks.push_back(std::move(ds));
    }
    return out;
}

std::string natural_order(std::size_t num_tasks) {
    std::string s;
    for (std::size_t i = 0; i < num_tasks; ++i) s.push_back(static_cast<char>('a' + i));
    return s;
}

namespace {

void save_instance(std::ostream& os, int task, const char* split, const Instance& inst) {
    os << task << ' ' << split << ' ' << inst.answer << ' ' << inst.visual_group << ' '
       << inst.textual_group;
    for (double v : inst.visual.data) os << ' ' << format_double(v);
    for (double v : inst.textual.data) os << ' ' << format_double(v);
    os << '\n';
}

}  // namespace

void save_stream(std::ostream& os, const TaskStream& stream) {
    if (stream.tasks.empty()) throw ValueError("save_stream: empty stream");
    const Instance& probe = stream.tasks[0].train.empty() ? stream.tasks[0].test[0]
                                                          : stream.tasks[0].train[0];
    os << "stream " << stream.size() << ' ' << probe.visual.cols << ' ' << probe.visual.rows
       << ' ' << probe.textual.rows << '\n';
    for (const TaskDataset& ds : stream.tasks) {
        for (const Instance& inst : ds.train) save_instance(os, ds.task_id, "train", inst);
        for (const Instance& inst : ds.test) save_instance(os, ds.task_id, "test", inst);
    }
}

TaskStream load_stream(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw IoError("load_stream: empty input");
    std::istringstream hs(header);
    std::string tag;
    std::size_t tasks = 0, raw_dim = 0, lv = 0, lt = 0;
    if (!(hs >> tag >> tasks >> raw_dim >> lv >> lt) || tag != "stream") {
        throw IoError("load_stream: bad header '" + header + "'");
    }
    TaskStream stream;
    stream.tasks.resize(tasks);
    for (std::size_t t = 0; t < tasks; ++t) stream.tasks[t].task_id = static_cast<int>(t);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int task = 0;
        std::string split, tok;
        Instance inst;
        if (!(ls >> task >> split >> inst.answer >> inst.visual_group >> inst.textual_group)) {
            throw IoError("load_stream: bad record '" + line + "'");
        }
        if (task < 0 || static_cast<std::size_t>(task) >= tasks) {
            throw IoError("load_stream: task id out of range in '" + line + "'");
        }
        inst.visual = Tensor2D(lv, raw_dim);
        for (double& v : inst.visual.data) {
            if (!(ls >> tok)) throw IoError("load_stream: short record");
            v = parse_double(tok);
        }
        inst.textual = Tensor2D(lt, raw_dim);
        for (double& v : inst.textual.data) {
            if (!(ls >> tok)) throw IoError("load_stream: short record");
            v = parse_double(tok);
        }
        if (split == "train") {
            stream.tasks[task].train.push_back(std::move(inst));
        } else if (split == "test") {
            stream.tasks[task].test.push_back(std::move(inst));
        } else {
            throw IoError("load_stream: unknown split '" + split + "'");
        }
    }
    return stream;
}

}  // namespace clumo

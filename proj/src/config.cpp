#include "clumo/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "clumo/errors.hpp"

namespace clumo {

namespace {

void check_keys(const nlohmann::json& obj, const std::string& scope,
                std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw ConfigError("config: section '" + scope + "' must be an object");
    std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError("config: unknown field '" +
                              (scope.empty() ? item.key() : scope + "." + item.key()) + "'");
        }
    }
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
    train.validate();
    stream.validate();
    if (feature_dim < 2) throw ConfigError("config: feature_dim must be >= 2");
    if (seeds.empty()) throw ConfigError("config: seeds must not be empty");
    if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
    if (!task_order.empty()) {
        if (task_order.size() != stream.num_tasks) {
            throw ConfigError("config: task_order '" + task_order + "' must name exactly " +
                              std::to_string(stream.num_tasks) + " tasks");
        }
        std::set<char> seen;
        for (char c : task_order) {
            if (c < 'a' || c >= static_cast<char>('a' + stream.num_tasks) || !seen.insert(c).second) {
                throw ConfigError("config: task_order '" + task_order + "' is not a permutation of " +
                                  natural_order(stream.num_tasks));
            }
        }
    }
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json doc;
    doc["train"] = {{"visual_keys", c.train.visual_key_count},
                    {"textual_keys", c.train.textual_key_count},
                    {"prompt_length", c.train.prompt_length},
                    {"lr", c.train.lr},
                    {"epochs", c.train.epochs},
                    {"batch_size", c.train.batch_size},
                    {"kd_weight", c.train.kd_weight},
                    {"variant", to_string(c.train.variant)},
                    {"cluster_batch_size", c.train.cluster_batch_size},
                    {"cluster_max_iters", c.train.cluster_max_iters},
                    {"cluster_tol", c.train.cluster_tol}};
    doc["stream"] = {{"num_tasks", c.stream.num_tasks},
                     {"visual_groups", c.stream.visual_groups},
                     {"textual_groups", c.stream.textual_groups},
                     {"train_per_task", c.stream.train_per_task},
                     {"test_per_task", c.stream.test_per_task},
                     {"sigma", c.stream.sigma},
                     {"task_separation", c.stream.task_separation},
                     {"subdomain_spread", c.stream.subdomain_spread},
                     {"min_subdomain_separation", c.stream.min_subdomain_separation},
                     {"raw_dim", c.stream.raw_dim},
                     {"visual_tokens", c.stream.visual_tokens},
                     {"textual_tokens", c.stream.textual_tokens},
                     {"disjoint_answers", c.stream.disjoint_answers}};
    doc["model"] = {{"feature_dim", c.feature_dim}};
    doc["task_order"] = c.task_order;
    doc["seeds"] = c.seeds;
    doc["out_dir"] = c.out_dir;
    doc["data_file"] = c.data_file;
    return doc;
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
    check_keys(doc, "", {"train", "stream", "model", "task_order", "seeds", "out_dir", "data_file"});
    ExperimentConfig c;
    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        check_keys(t, "train",
                   {"visual_keys", "textual_keys", "prompt_length", "lr", "epochs", "batch_size",
                    "kd_weight", "variant", "cluster_batch_size", "cluster_max_iters",
                    "cluster_tol"});
        read_field(t, "visual_keys", c.train.visual_key_count);
        read_field(t, "textual_keys", c.train.textual_key_count);
        read_field(t, "prompt_length", c.train.prompt_length);
        read_field(t, "lr", c.train.lr);
        read_field(t, "epochs", c.train.epochs);
        read_field(t, "batch_size", c.train.batch_size);
        read_field(t, "kd_weight", c.train.kd_weight);
        if (t.contains("variant")) {
            c.train.variant = variant_from_string(t.at("variant").get<std::string>());
        }
        read_field(t, "cluster_batch_size", c.train.cluster_batch_size);
        read_field(t, "cluster_max_iters", c.train.cluster_max_iters);
        read_field(t, "cluster_tol", c.train.cluster_tol);
    }
    if (doc.contains("stream")) {
        const auto& s = doc.at("stream");
        check_keys(s, "stream",
                   {"num_tasks", "visual_groups", "textual_groups", "train_per_task",
                    "test_per_task", "sigma", "task_separation", "subdomain_spread",
                    "min_subdomain_separation", "raw_dim", "visual_tokens", "textual_tokens",
                    "disjoint_answers"});
        read_field(s, "num_tasks", c.stream.num_tasks);
        read_field(s, "visual_groups", c.stream.visual_groups);
        read_field(s, "textual_groups", c.stream.textual_groups);
        read_field(s, "train_per_task", c.stream.train_per_task);
        read_field(s, "test_per_task", c.stream.test_per_task);
        read_field(s, "sigma", c.stream.sigma);
        read_field(s, "task_separation", c.stream.task_separation);
        read_field(s, "subdomain_spread", c.stream.subdomain_spread);
        read_field(s, "min_subdomain_separation", c.stream.min_subdomain_separation);
        read_field(s, "raw_dim", c.stream.raw_dim);
        read_field(s, "visual_tokens", c.stream.visual_tokens);
        read_field(s, "textual_tokens", c.stream.textual_tokens);
        read_field(s, "disjoint_answers", c.stream.disjoint_answers);
    }
    if (doc.contains("model")) {
        check_keys(doc.at("model"), "model", {"feature_dim"});
        read_field(doc.at("model"), "feature_dim", c.feature_dim);
    }
    read_field(doc, "task_order", c.task_order);
    read_field(doc, "seeds", c.seeds);
    read_field(doc, "out_dir", c.out_dir);
    read_field(doc, "data_file", c.data_file);
    c.validate();
    return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot read '" + path.string() + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' must look like section.key=value");
    }
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value;  // plain string
    }

    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path segment");
        if (dot == std::string::npos) {
            (*node)[key] = parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace clumo

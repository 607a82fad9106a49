#include "clumo/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "clumo/errors.hpp"

namespace clumo {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError("parse_double: bad value '" + s + "'");
    }
    return v;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor2D& t) {
    os << "tensor " << name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (std::size_t i = 0; i < t.rows; ++i) {
        auto row = t.row(i);
        for (std::size_t j = 0; j < t.cols; ++j) {
            if (j) os << ' ';
            os << format_double(row[j]);
        }
        os << '\n';
    }
}

void write_meta(std::ostream& os, const std::string& key, const std::string& value) {
    os << "meta " << key << ' ' << value << '\n';
}

const Tensor2D& TextDocument::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError("document: missing tensor '" + name + "'");
    return it->second;
}

const std::string& TextDocument::meta_value(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw IoError("document: missing meta '" + key + "'");
    return it->second;
}

TextDocument read_document(std::istream& is) {
    TextDocument doc;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            doc.meta[key] = value;
        } else if (kind == "tensor") {
            std::string name;
            std::size_t rows = 0, cols = 0;
            if (!(ls >> name >> rows >> cols)) throw IoError("document: bad tensor header '" + line + "'");
            Tensor2D t(rows, cols);
            for (std::size_t i = 0; i < rows; ++i) {
                if (!std::getline(is, line)) throw IoError("document: truncated tensor '" + name + "'");
                std::istringstream vs(line);
                std::string tok;
                for (std::size_t j = 0; j < cols; ++j) {
                    if (!(vs >> tok)) throw IoError("document: short row in tensor '" + name + "'");
                    t.at(i, j) = parse_double(tok);
                }
            }
            doc.tensors[name] = std::move(t);
        } else {
            throw IoError("document: unknown record '" + kind + "'");
        }
    }
    return doc;
}

}  // namespace clumo

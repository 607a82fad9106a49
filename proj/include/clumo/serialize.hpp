#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "clumo/tensor.hpp"

namespace clumo {

// Plain-text tensor records, one per tensor:
//
//   tensor <name> <rows> <cols>
//   <cols decimal values per row, space separated>
//
// plus string metadata lines of the form
//
//   meta <key> <value>
//
// Values are printed with enough digits that a parse reproduces the exact
// double, so round trips are value-exact.

void write_tensor(std::ostream& os, const std::string& name, const Tensor2D& t);
void write_meta(std::ostream& os, const std::string& key, const std::string& value);

struct TextDocument {
    std::map<std::string, std::string> meta;
    std::map<std::string, Tensor2D> tensors;

    const Tensor2D& tensor(const std::string& name) const;     // throws IoError if absent
    const std::string& meta_value(const std::string& key) const;
    bool has_tensor(const std::string& name) const { return tensors.count(name) > 0; }
};

TextDocument read_document(std::istream& is);

std::string format_double(double v);   // shortest exact decimal form
double parse_double(const std::string& s);

}  // namespace clumo

#pragma once

#include <stdexcept>
#include <string>

namespace phydra {

// Thrown by text-format readers (Newick, CSV); carries the offending offset.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " (at position " + std::to_string(position) + ")"),
          position_(position) {}

    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

}  // namespace phydra

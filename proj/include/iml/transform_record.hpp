#pragma once

#include <string>
#include <vector>

#include "iml/exact.hpp"

namespace iml {

/// One entry of a connection's transform history.
struct TransformRecord {
    enum class Kind { Elm, PermuteA, TwistB, Gauge };

    Kind kind = Kind::Gauge;
    int puncture = -1;   // 0-based; -1 when not tied to a puncture
    int j = 0;           // Elm index
    int direction = 0;   // TwistB direction (+1 / -1)
    std::string gauge;   // human-readable gauge description
    std::vector<Exponent> before;  // exponent row at `puncture` before the move
    std::vector<Exponent> after;   // ... and after
    long long degree_delta = 0;    // d' - d
    std::vector<std::string> notes;
};

const char* to_string(TransformRecord::Kind kind);

}  // namespace iml

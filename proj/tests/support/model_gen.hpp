#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "oracle.hpp"

namespace gen {

/// A random block-structured, data-free model: user tasks, XOR blocks with
/// literal guards, AND blocks and at most one embedded sub-process, which
/// may raise an error caught by a boundary event.
struct Generated {
    std::string xml;
    oracle::Model model;
    std::size_t elementCount = 0;  // every flow element, sub-process contents included
};

Generated randomModel(std::mt19937_64& rng, std::size_t maxElements = 12);

}  // namespace gen

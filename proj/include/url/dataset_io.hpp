#pragma once

#include <string>
#include <vector>

#include "url/synth.hpp"

namespace url {

// In-memory dataset: config, anchor, and the two splits.
struct Dataset {
    SynthConfig config;
    Anchor anchor;
    std::vector<Graph> train;
    std::vector<Graph> test;
};

// Deterministic generation: graph with global index i (train first, then
// test) draws from stream i of the config seed.
Dataset generate_dataset(const SynthConfig& config);

// Line-delimited JSON: one meta record (config + anchor), then one record per
// graph (id, split, labels, coords, features). Doubles are printed with 17
// significant digits so a write -> read round trip is value-exact and a
// rewrite is byte-identical.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

}  // namespace url

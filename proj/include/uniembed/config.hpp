#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uniembed/net.hpp"
#include "uniembed/synthdata.hpp"
#include "uniembed/triplet.hpp"

namespace uniembed {

// Every tunable of the pipeline with its default. Loaded from a line-oriented
// "key = value" file, then overridden by command-line flags.
struct RunConfig {
    std::uint64_t seed = 42;
    int threads = 1;

    // network
    int input_dim = 32;
    std::vector<int> hidden_dims = {64, 32};
    int embedding_dim = 16;
    bool normalize_output = true;

    // triplet training
    double alpha = 0.2;
    int batch_products = 8;
    int images_per_product = 4;
    int steps = 2000;
    double lr = 0.05;
    double momentum = 0.9;
    int checkpoint_every = 100;
    int finetune_steps = 1000;

    // generator
    int verticals = 4;
    int products_per_vertical = 20;
    int items_per_product = 12;
    double vertical_spread = 10.0;
    double product_spread = 2.0;
    double sample_noise = 0.3;
    double query_fraction = 0.25;
    std::vector<int> conflict_verticals;
    double noise_rate = 0.0;

    // combination and distillation
    double epsilon = 1.0;  // top-1 points
    int distill_steps = 2000;
    int distill_batch = 32;
    double distill_lr = 0.05;
    double distill_momentum = 0.9;

    // evaluation
    std::vector<int> ks = {1, 5, 20};

    NetConfig net_config() const;
    TripletConfig triplet_config() const;
    GenSpec gen_spec() const;
};

// Applies one "key = value" assignment. `where` prefixes error messages
// (file line or flag name). Unknown keys and malformed values throw
// config_error.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        const std::string& where);

// Line-oriented key = value file; '#' starts a comment; blank lines ignored.
RunConfig parse_config(const std::string& path);

}  // namespace uniembed

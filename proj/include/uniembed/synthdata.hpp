#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uniembed/matrix.hpp"
#include "uniembed/rng.hpp"

namespace uniembed {

enum class Split { index, query };

struct Item {
    int item_id = 0;
    std::string vertical;
    std::string product_id;  // unique across verticals (vertical-prefixed)
    Split split = Split::index;
    std::vector<float> features;  // stored at 32-bit precision
};

struct Dataset {
    int input_dim = 0;
    std::vector<Item> items;

    // Vertical names in first-appearance order.
    std::vector<std::string> verticals() const;
};

// Hierarchical Gaussian generator: vertical centers far apart, product
// centers around them, items around product centers. Conflict verticals are
// placed on top of the first normal vertical's region with a cross-paired
// product structure, so no single metric can rank both verticals' products
// correctly at once.
struct GenSpec {
    int verticals = 4;
    int products_per_vertical = 20;
    int items_per_product = 12;
    int input_dim = 32;
    double vertical_spread = 10.0;
    double product_spread = 2.0;
    double sample_noise = 0.3;
    double query_fraction = 0.25;
    std::vector<int> conflict_verticals;
    std::uint64_t seed = 42;
};

void validate(const GenSpec& spec);

Dataset generate(const GenSpec& spec);

// Each item independently, with the given probability, gets its product id
// reassigned to a different product of the same vertical. Features and
// splits stay put; the input dataset is not modified.
Dataset add_label_noise(const Dataset& dataset, double rate, Rng& rng);

// CSV container: "# uniembed-dataset v1 dim=<d>" comment, then a header row
// item_id,vertical,product_id,split,f0..f{d-1}. Features print with 9
// significant digits, which round-trips their 32-bit storage exactly.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Feature rows of the given items as a double matrix (net input).
Matrix gather_features(const Dataset& dataset, const std::vector<int>& item_ids);

// Item ids of the training pool: the index split. Queries stay held out of
// all training.
std::vector<int> training_items(const Dataset& dataset);

}  // namespace uniembed

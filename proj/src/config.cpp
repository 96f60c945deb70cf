#include "uniembed/config.hpp"

#include <cstdlib>
#include <fstream>

#include "uniembed/errors.hpp"

namespace uniembed {

NetConfig RunConfig::net_config() const {
    NetConfig n;
    n.input_dim = input_dim;
    n.hidden_dims = hidden_dims;
    n.embedding_dim = embedding_dim;
    n.normalize_output = normalize_output;
    n.seed = seed + seed_offset::net_init;
    return n;
}

TripletConfig RunConfig::triplet_config() const {
    TripletConfig t;
    t.alpha = alpha;
    t.batch_products = batch_products;
    t.items_per_product = images_per_product;
    t.steps = steps;
    t.lr = lr;
    t.momentum = momentum;
    t.checkpoint_every = checkpoint_every;
    t.seed = seed;
    return t;
}

GenSpec RunConfig::gen_spec() const {
    GenSpec g;
    g.verticals = verticals;
    g.products_per_vertical = products_per_vertical;
    g.items_per_product = items_per_product;
    g.input_dim = input_dim;
    g.vertical_spread = vertical_spread;
    g.product_spread = product_spread;
    g.sample_noise = sample_noise;
    g.query_fraction = query_fraction;
    g.conflict_verticals = conflict_verticals;
    g.seed = seed;
    return g;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& value, const std::string& where) {
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size())
        throw config_error(where + ": expected an integer, got '" + value + "'");
    return v;
}

double parse_real(const std::string& value, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size())
        throw config_error(where + ": expected a number, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& value, const std::string& where) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw config_error(where + ": expected true or false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& value, const std::string& where) {
    std::vector<int> out;
    if (trim(value).empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = value.find(',', start);
        const std::string cell =
            trim(value.substr(start, pos == std::string::npos ? pos : pos - start));
        out.push_back(static_cast<int>(parse_int(cell, where)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        const std::string& where) {
    if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(parse_int(value, where));
    else if (key == "threads")
        cfg.threads = static_cast<int>(parse_int(value, where));
    else if (key == "input_dim")
        cfg.input_dim = static_cast<int>(parse_int(value, where));
    else if (key == "hidden_dims")
        cfg.hidden_dims = parse_int_list(value, where);
    else if (key == "embedding_dim")
        cfg.embedding_dim = static_cast<int>(parse_int(value, where));
    else if (key == "activation") {
        if (value != "relu") throw config_error(where + ": unsupported activation '" + value + "'");
    } else if (key == "normalize_output")
        cfg.normalize_output = parse_bool(value, where);
    else if (key == "alpha")
        cfg.alpha = parse_real(value, where);
    else if (key == "batch_products")
        cfg.batch_products = static_cast<int>(parse_int(value, where));
    else if (key == "images_per_product")
        cfg.images_per_product = static_cast<int>(parse_int(value, where));
    else if (key == "steps")
        cfg.steps = static_cast<int>(parse_int(value, where));
    else if (key == "lr")
        cfg.lr = parse_real(value, where);
    else if (key == "momentum")
        cfg.momentum = parse_real(value, where);
    else if (key == "checkpoint_every")
        cfg.checkpoint_every = static_cast<int>(parse_int(value, where));
    else if (key == "finetune_steps")
        cfg.finetune_steps = static_cast<int>(parse_int(value, where));
    else if (key == "verticals")
        cfg.verticals = static_cast<int>(parse_int(value, where));
    else if (key == "products_per_vertical")
        cfg.products_per_vertical = static_cast<int>(parse_int(value, where));
    else if (key == "items_per_product")
        cfg.items_per_product = static_cast<int>(parse_int(value, where));
    else if (key == "vertical_spread")
        cfg.vertical_spread = parse_real(value, where);
    else if (key == "product_spread")
        cfg.product_spread = parse_real(value, where);
    else if (key == "sample_noise")
        cfg.sample_noise = parse_real(value, where);
    else if (key == "query_fraction")
        cfg.query_fraction = parse_real(value, where);
    else if (key == "conflict_verticals")
        cfg.conflict_verticals = parse_int_list(value, where);
    else if (key == "noise_rate")
        cfg.noise_rate = parse_real(value, where);
    else if (key == "epsilon")
        cfg.epsilon = parse_real(value, where);
    else if (key == "distill_steps")
        cfg.distill_steps = static_cast<int>(parse_int(value, where));
    else if (key == "distill_batch")
        cfg.distill_batch = static_cast<int>(parse_int(value, where));
    else if (key == "distill_lr")
        cfg.distill_lr = parse_real(value, where);
    else if (key == "distill_momentum")
        cfg.distill_momentum = parse_real(value, where);
    else if (key == "ks")
        cfg.ks = parse_int_list(value, where);
    else
        throw config_error(where + ": unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw config_error(path + " line " + std::to_string(lineno) +
                               ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw config_error(path + " line " + std::to_string(lineno) + ": empty key");
        apply_config_entry(cfg, key, value, path + " line " + std::to_string(lineno));
    }
    return cfg;
}

}  // namespace uniembed

#include "uniembed/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "uniembed/errors.hpp"

namespace uniembed {

std::vector<std::string> Dataset::verticals() const {
    std::vector<std::string> out;
    for (const Item& item : items)
        if (std::find(out.begin(), out.end(), item.vertical) == out.end())
            out.push_back(item.vertical);
    return out;
}

void validate(const GenSpec& spec) {
    if (spec.verticals < 1 || spec.products_per_vertical < 1 || spec.items_per_product < 1 ||
        spec.input_dim < 1)
        throw spec_error("gen: counts must be >= 1");
    if (spec.vertical_spread <= 0.0 || spec.product_spread <= 0.0 || spec.sample_noise <= 0.0)
        throw spec_error("gen: spreads and noise must be > 0");
    if (!(spec.query_fraction > 0.0 && spec.query_fraction < 1.0))
        throw spec_error("gen: query_fraction must be in (0, 1)");
    for (int c : spec.conflict_verticals)
        if (c < 0 || c >= spec.verticals) throw spec_error("gen: conflict vertical index out of range");
    if (!spec.conflict_verticals.empty() &&
        static_cast<int>(std::set<int>(spec.conflict_verticals.begin(), spec.conflict_verticals.end())
                             .size()) == spec.verticals)
        throw spec_error("gen: at least one vertical must be non-conflicting");
}

namespace {

std::vector<double> scaled(std::vector<double> v, double s) {
    for (double& x : v) x *= s;
    return v;
}

std::vector<double> added(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

int gcd(int a, int b) { return b == 0 ? a : gcd(b, a % b); }

// largest shift <= P/2 coprime with P, so the conflict pairs (p, p+shift)
// chain through every product instead of decomposing into 2-cycles
int conflict_shift(int P) {
    for (int s = P / 2; s >= 2; --s)
        if (gcd(s, P) == 1) return s;
    return 1;
}

}  // namespace

Dataset generate(const GenSpec& spec) {
    validate(spec);
    Rng rng(spec.seed + seed_offset::generate);
    const int d = spec.input_dim;
    const int P = spec.products_per_vertical;

    std::vector<bool> is_conflict(static_cast<std::size_t>(spec.verticals), false);
    for (int c : spec.conflict_verticals) is_conflict[static_cast<std::size_t>(c)] = true;
    int anchor = -1;  // first normal vertical; conflict verticals reuse its region
    for (int v = 0; v < spec.verticals; ++v)
        if (!is_conflict[static_cast<std::size_t>(v)]) {
            anchor = v;
            break;
        }

    // Pass 1: normal verticals. Centers are redrawn until they keep at least
    // vertical_spread of distance from every earlier normal center.
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(spec.verticals));
    std::vector<std::vector<std::vector<double>>> product_centers(
        static_cast<std::size_t>(spec.verticals));
    for (int v = 0; v < spec.verticals; ++v) {
        if (is_conflict[static_cast<std::size_t>(v)]) continue;
        for (;;) {
            auto c = scaled(rng.normal_vec(d), spec.vertical_spread);
            bool ok = true;
            for (int u = 0; u < v; ++u)
                if (!is_conflict[static_cast<std::size_t>(u)] &&
                    dist(c, centers[static_cast<std::size_t>(u)]) < spec.vertical_spread)
                    ok = false;
            if (ok) {
                centers[static_cast<std::size_t>(v)] = std::move(c);
                break;
            }
        }
        auto& pcs = product_centers[static_cast<std::size_t>(v)];
        pcs.reserve(static_cast<std::size_t>(P));
        for (int p = 0; p < P; ++p)
            pcs.push_back(added(centers[static_cast<std::size_t>(v)],
                                scaled(rng.normal_vec(d), spec.product_spread)));
    }

    // Pass 2: conflict verticals. Every conflict product is bimodal: its even
    // items cluster near the anchor vertical's product p and its odd items
    // near the anchor's product (p + shift) mod P, each mode offset from the
    // anchor center by 2.5 * product_spread in its own random direction. The
    // conflict vertical's own retrieval stays solvable (all 2P modes are
    // distinct clusters, one product each), but its triplets pull together
    // regions the anchor vertical's triplets must keep apart, so one metric
    // cannot serve both.
    const int shift = conflict_shift(P);
    const double mode_offset = 2.5 * spec.product_spread;
    std::vector<std::vector<std::vector<double>>> odd_centers(static_cast<std::size_t>(spec.verticals));
    for (int v = 0; v < spec.verticals; ++v) {
        if (!is_conflict[static_cast<std::size_t>(v)]) continue;
        const auto& base = product_centers[static_cast<std::size_t>(anchor)];
        auto& even = product_centers[static_cast<std::size_t>(v)];
        auto& odd = odd_centers[static_cast<std::size_t>(v)];
        even.reserve(static_cast<std::size_t>(P));
        odd.reserve(static_cast<std::size_t>(P));
        for (int p = 0; p < P; ++p) {
            even.push_back(added(base[static_cast<std::size_t>(p)], scaled(rng.unit_vec(d), mode_offset)));
            odd.push_back(added(base[static_cast<std::size_t>((p + shift) % P)],
                                scaled(rng.unit_vec(d), mode_offset)));
        }
    }

    Dataset ds;
    ds.input_dim = d;
    char name[64];
    for (int v = 0; v < spec.verticals; ++v) {
        const auto& pcs = product_centers[static_cast<std::size_t>(v)];
        for (int p = 0; p < P; ++p) {
            for (int t = 0; t < spec.items_per_product; ++t) {
                const auto& mode = (is_conflict[static_cast<std::size_t>(v)] && t % 2 == 1)
                                       ? odd_centers[static_cast<std::size_t>(v)][static_cast<std::size_t>(p)]
                                       : pcs[static_cast<std::size_t>(p)];
                Item item;
                item.item_id = static_cast<int>(ds.items.size());
                std::snprintf(name, sizeof(name), "v%d", v);
                item.vertical = name;
                std::snprintf(name, sizeof(name), "v%d_p%02d", v, p);
                item.product_id = name;
                auto feat = added(mode, scaled(rng.normal_vec(d), spec.sample_noise));
                item.features.resize(static_cast<std::size_t>(d));
                for (int i = 0; i < d; ++i)
                    item.features[static_cast<std::size_t>(i)] = static_cast<float>(feat[static_cast<std::size_t>(i)]);
                ds.items.push_back(std::move(item));
            }
        }
    }

    // Pass 3: per-product query slots, at least one index item forced.
    const int ipp = spec.items_per_product;
    int n_query = static_cast<int>(std::lround(spec.query_fraction * ipp));
    n_query = std::min(n_query, ipp - 1);
    if (n_query > 0) {
        for (std::size_t base = 0; base < ds.items.size(); base += static_cast<std::size_t>(ipp)) {
            std::vector<int> slots(static_cast<std::size_t>(ipp));
            for (int i = 0; i < ipp; ++i) slots[static_cast<std::size_t>(i)] = i;
            for (int i = 0; i < n_query; ++i) {
                const int j = i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(ipp - i)));
                std::swap(slots[static_cast<std::size_t>(i)], slots[static_cast<std::size_t>(j)]);
                ds.items[base + static_cast<std::size_t>(slots[static_cast<std::size_t>(i)])].split =
                    Split::query;
            }
        }
    }
    return ds;
}

Dataset add_label_noise(const Dataset& dataset, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) throw spec_error("label noise rate must be in [0, 1]");

    // per-vertical product lists of the unmodified dataset, sorted
    std::map<std::string, std::vector<std::string>> products;
    for (const Item& item : dataset.items) {
        auto& list = products[item.vertical];
        if (std::find(list.begin(), list.end(), item.product_id) == list.end())
            list.push_back(item.product_id);
    }
    for (auto& [vertical, list] : products) {
        std::sort(list.begin(), list.end());
        if (rate > 0.0 && list.size() < 2)
            throw spec_error("label noise: vertical " + vertical + " has fewer than 2 products");
    }

    Dataset noisy = dataset;
    for (Item& item : noisy.items) {
        if (rng.u01() >= rate) continue;
        const auto& list = products[item.vertical];
        const auto self = static_cast<std::size_t>(
            std::find(list.begin(), list.end(), item.product_id) - list.begin());
        auto pick = static_cast<std::size_t>(rng.bounded(list.size() - 1));
        if (pick >= self) ++pick;  // skip the current product
        item.product_id = list[pick];
    }
    return noisy;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write dataset file: " + path);
    out << "# uniembed-dataset v1 dim=" << dataset.input_dim << "\n";
    out << "item_id,vertical,product_id,split";
    for (int i = 0; i < dataset.input_dim; ++i) out << ",f" << i;
    out << "\n";
    char buf[64];
    for (const Item& item : dataset.items) {
        out << item.item_id << ',' << item.vertical << ',' << item.product_id << ','
            << (item.split == Split::index ? "index" : "query");
        for (float f : item.features) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(f));
            out << ',' << buf;
        }
        out << "\n";
    }
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# uniembed-dataset v1 dim=", 0) != 0)
        throw format_error("dataset file " + path + ": missing '# uniembed-dataset v1' header");
    int dim = 0;
    try {
        dim = std::stoi(line.substr(std::string("# uniembed-dataset v1 dim=").size()));
    } catch (const std::exception&) {
        throw format_error("dataset file " + path + ": bad dim in header");
    }
    if (dim < 1) throw format_error("dataset file " + path + ": bad dim in header");

    if (!std::getline(in, line)) throw format_error("dataset file " + path + ": missing column header");
    {
        std::ostringstream expect;
        expect << "item_id,vertical,product_id,split";
        for (int i = 0; i < dim; ++i) expect << ",f" << i;
        if (line != expect.str())
            throw format_error("dataset file " + path + ": column header does not match dim=" +
                               std::to_string(dim));
    }

    Dataset ds;
    ds.input_dim = dim;
    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const std::size_t pos = line.find(',', start);
            cols.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (static_cast<int>(cols.size()) != 4 + dim)
            throw parse_error("dataset file " + path + " line " + std::to_string(lineno) +
                              ": expected " + std::to_string(4 + dim) + " columns, got " +
                              std::to_string(cols.size()));
        Item item;
        try {
            std::size_t used = 0;
            item.item_id = std::stoi(cols[0], &used);
            if (used != cols[0].size()) throw std::invalid_argument(cols[0]);
        } catch (const std::exception&) {
            throw parse_error("dataset file " + path + " line " + std::to_string(lineno) +
                              ": bad item_id '" + cols[0] + "'");
        }
        item.vertical = cols[1];
        item.product_id = cols[2];
        if (cols[3] == "index")
            item.split = Split::index;
        else if (cols[3] == "query")
            item.split = Split::query;
        else
            throw parse_error("dataset file " + path + " line " + std::to_string(lineno) +
                              ": bad split '" + cols[3] + "'");
        item.features.resize(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i) {
            const std::string& cell = cols[static_cast<std::size_t>(4 + i)];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
                throw parse_error("dataset file " + path + " line " + std::to_string(lineno) +
                                  ": non-numeric feature '" + cell + "'");
            item.features[static_cast<std::size_t>(i)] = static_cast<float>(v);
        }
        ds.items.push_back(std::move(item));
    }
    for (std::size_t i = 0; i < ds.items.size(); ++i)
        if (ds.items[i].item_id != static_cast<int>(i))
            throw parse_error("dataset file " + path + ": item ids are not dense 0..N-1");
    return ds;
}

Matrix gather_features(const Dataset& dataset, const std::vector<int>& item_ids) {
    Matrix x(static_cast<int>(item_ids.size()), dataset.input_dim);
    for (std::size_t r = 0; r < item_ids.size(); ++r) {
        const int id = item_ids[r];
        require_shape(id >= 0 && id < static_cast<int>(dataset.items.size()),
                      "gather_features: item id out of range");
        const Item& item = dataset.items[static_cast<std::size_t>(id)];
        double* row = x.row(static_cast<int>(r));
        for (int j = 0; j < dataset.input_dim; ++j)
            row[j] = static_cast<double>(item.features[static_cast<std::size_t>(j)]);
    }
    return x;
}

std::vector<int> training_items(const Dataset& dataset) {
    std::vector<int> ids;
    for (const Item& item : dataset.items)
        if (item.split == Split::index) ids.push_back(item.item_id);
    return ids;
}

}  // namespace uniembed

#include "uniembed/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "uniembed/errors.hpp"
#include "uniembed/kernels.hpp"

namespace uniembed {

EvalSplit make_split(const Dataset& dataset) {
    EvalSplit split;
    for (const Item& item : dataset.items)
        (item.split == Split::query ? split.query_ids : split.index_ids).push_back(item.item_id);
    return split;
}

std::vector<int> knn(const std::vector<double>& query,
                     const std::vector<std::pair<int, std::vector<double>>>& index, int k) {
    if (index.empty()) throw usage_error("knn: empty index");
    if (k < 1) throw usage_error("knn: k must be >= 1");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(index.size());
    for (const auto& [id, emb] : index) {
        require_shape(emb.size() == query.size(), "knn: embedding dim mismatch");
        scored.emplace_back(sqdist(query.data(), emb.data(), static_cast<int>(query.size())), id);
    }
    std::sort(scored.begin(), scored.end());  // pair order = (distance, id)
    const int n = std::min<int>(k, static_cast<int>(scored.size()));
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = scored[static_cast<std::size_t>(i)].second;
    return out;
}

namespace {

// 1-based rank of the first same-product index item for each query, or
// INT_MAX-ish sentinel when none is indexed. Rank counts by the (distance,
// item id) order used everywhere.
std::vector<int> first_hit_ranks(const EmbeddingNet& model, const Dataset& dataset,
                                 const EvalSplit& split) {
    if (split.index_ids.empty()) throw usage_error("top_k_accuracy: empty index");
    if (split.query_ids.empty()) throw usage_error("top_k_accuracy: no queries");
    const Matrix qe = forward(model, gather_features(dataset, split.query_ids));
    const Matrix ie = forward(model, gather_features(dataset, split.index_ids));
    const Matrix dist = pairwise_sqdist(qe, ie);

    const int nq = static_cast<int>(split.query_ids.size());
    const int ni = static_cast<int>(split.index_ids.size());
    std::vector<int> ranks(static_cast<std::size_t>(nq), std::numeric_limits<int>::max());
    std::vector<std::pair<double, int>> order(static_cast<std::size_t>(ni));
    for (int q = 0; q < nq; ++q) {
        const std::string& product =
            dataset.items[static_cast<std::size_t>(split.query_ids[static_cast<std::size_t>(q)])].product_id;
        for (int i = 0; i < ni; ++i)
            order[static_cast<std::size_t>(i)] = {dist(q, i), split.index_ids[static_cast<std::size_t>(i)]};
        std::sort(order.begin(), order.end());
        for (int r = 0; r < ni; ++r) {
            const int id = order[static_cast<std::size_t>(r)].second;
            if (dataset.items[static_cast<std::size_t>(id)].product_id == product) {
                ranks[static_cast<std::size_t>(q)] = r + 1;
                break;
            }
        }
    }
    return ranks;
}

}  // namespace

RetrievalReport top_k_accuracy(const EmbeddingNet& model, const Dataset& dataset,
                               const EvalSplit& split, const std::vector<int>& ks) {
    if (ks.empty()) throw usage_error("top_k_accuracy: ks must be non-empty");
    for (int k : ks)
        if (k < 1) throw usage_error("top_k_accuracy: every k must be >= 1");
    const std::vector<int> ranks = first_hit_ranks(model, dataset, split);

    RetrievalReport report;
    report.ks = ks;
    for (const std::string& vertical : dataset.verticals()) {
        VerticalAccuracy row;
        row.vertical = vertical;
        row.accuracy.assign(ks.size(), 0.0);
        for (std::size_t q = 0; q < split.query_ids.size(); ++q) {
            if (dataset.items[static_cast<std::size_t>(split.query_ids[q])].vertical != vertical)
                continue;
            ++row.n_queries;
            for (std::size_t j = 0; j < ks.size(); ++j)
                if (ranks[q] <= ks[j]) row.accuracy[j] += 1.0;
        }
        if (row.n_queries == 0) continue;
        for (double& a : row.accuracy) a /= row.n_queries;
        report.rows.push_back(std::move(row));
    }
    return report;
}

double overall_top1(const EmbeddingNet& model, const Dataset& dataset, const EvalSplit& split) {
    const std::vector<int> ranks = first_hit_ranks(model, dataset, split);
    double hits = 0.0;
    for (int r : ranks)
        if (r <= 1) hits += 1.0;
    return hits / static_cast<double>(ranks.size());
}

ComparisonReport compare_reports(const RetrievalReport& a, const RetrievalReport& b) {
    if (a.ks != b.ks) throw comparison_error("compare_reports: k lists differ");
    std::map<std::string, const VerticalAccuracy*> bv;
    for (const VerticalAccuracy& row : b.rows) bv[row.vertical] = &row;
    if (a.rows.size() != b.rows.size())
        throw comparison_error("compare_reports: vertical sets differ");

    ComparisonReport out;
    out.ks = a.ks;
    out.mean_delta.assign(a.ks.size(), 0.0);
    for (const VerticalAccuracy& row : a.rows) {
        const auto it = bv.find(row.vertical);
        if (it == bv.end())
            throw comparison_error("compare_reports: vertical " + row.vertical + " missing from b");
        ComparisonRow cr;
        cr.vertical = row.vertical;
        cr.delta.resize(a.ks.size());
        for (std::size_t j = 0; j < a.ks.size(); ++j) {
            cr.delta[j] = row.accuracy[j] - it->second->accuracy[j];
            out.mean_delta[j] += cr.delta[j];
        }
        out.rows.push_back(std::move(cr));
    }
    for (double& m : out.mean_delta) m /= static_cast<double>(out.rows.size());
    return out;
}

void save_report_json(const RetrievalReport& report, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["ks"] = report.ks;
    j["verticals"] = nlohmann::json::array();
    for (const VerticalAccuracy& row : report.rows) {
        nlohmann::json r;
        r["vertical"] = row.vertical;
        r["n_queries"] = row.n_queries;
        r["accuracy"] = row.accuracy;
        j["verticals"].push_back(r);
    }
    std::ofstream out(path);
    if (!out) throw format_error("cannot write report file: " + path);
    out << j.dump(1) << "\n";
}

RetrievalReport load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open report file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("report file " + path + ": " + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1)
            throw format_error("report file " + path + ": unsupported format version");
        RetrievalReport report;
        report.ks = j.at("ks").get<std::vector<int>>();
        for (const nlohmann::json& r : j.at("verticals")) {
            VerticalAccuracy row;
            row.vertical = r.at("vertical").get<std::string>();
            row.n_queries = r.at("n_queries").get<int>();
            row.accuracy = r.at("accuracy").get<std::vector<double>>();
            if (row.accuracy.size() != report.ks.size())
                throw parse_error("report file " + path + ": accuracy row length mismatch");
            report.rows.push_back(std::move(row));
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("report file " + path + ": " + e.what());
    }
}

void save_report_csv(const RetrievalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write report file: " + path);
    out << "vertical,k,accuracy,n_queries\n";
    char buf[64];
    for (const VerticalAccuracy& row : report.rows)
        for (std::size_t j = 0; j < report.ks.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", row.accuracy[j]);
            out << row.vertical << ',' << report.ks[j] << ',' << buf << ',' << row.n_queries
                << "\n";
        }
}

void save_comparison_json(const ComparisonReport& report, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["ks"] = report.ks;
    j["rows"] = nlohmann::json::array();
    for (const ComparisonRow& row : report.rows) {
        nlohmann::json r;
        r["vertical"] = row.vertical;
        r["delta"] = row.delta;
        j["rows"].push_back(r);
    }
    j["mean_delta"] = report.mean_delta;
    std::ofstream out(path);
    if (!out) throw format_error("cannot write comparison file: " + path);
    out << j.dump(1) << "\n";
}

}  // namespace uniembed

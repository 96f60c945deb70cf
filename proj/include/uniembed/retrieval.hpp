#pragma once

#include <string>
#include <vector>

#include "uniembed/net.hpp"
#include "uniembed/synthdata.hpp"

namespace uniembed {

struct EvalSplit {
    std::vector<int> query_ids;
    std::vector<int> index_ids;
};

// Splits by each item's split flag.
EvalSplit make_split(const Dataset& dataset);

struct VerticalAccuracy {
    std::string vertical;
    int n_queries = 0;
    std::vector<double> accuracy;  // aligned with RetrievalReport::ks
};

struct RetrievalReport {
    std::vector<int> ks;
    std::vector<VerticalAccuracy> rows;  // dataset vertical order, zero-query verticals omitted
};

// Ranks index ids by ascending squared Euclidean distance to the query,
// exact ties broken by ascending item id. Returns min(k, index size) ids.
std::vector<int> knn(const std::vector<double>& query,
                     const std::vector<std::pair<int, std::vector<double>>>& index, int k);

// Embeds queries and index items with the model; a query scores at k iff one
// of its k nearest index items shares its product. The retrieval pool spans
// all verticals, so cross-vertical confusions count as misses.
RetrievalReport top_k_accuracy(const EmbeddingNet& model, const Dataset& dataset,
                               const EvalSplit& split, const std::vector<int>& ks);

// Convenience: top-1 over all queries pooled (not per vertical).
double overall_top1(const EmbeddingNet& model, const Dataset& dataset, const EvalSplit& split);

struct ComparisonRow {
    std::string vertical;
    std::vector<double> delta;  // a - b, aligned with ks
};

struct ComparisonReport {
    std::vector<int> ks;
    std::vector<ComparisonRow> rows;
    std::vector<double> mean_delta;  // aligned with ks
};

// Elementwise a - b. Throws comparison_error when the vertical sets or k
// lists differ.
ComparisonReport compare_reports(const RetrievalReport& a, const RetrievalReport& b);

void save_report_json(const RetrievalReport& report, const std::string& path);
RetrievalReport load_report_json(const std::string& path);
void save_report_csv(const RetrievalReport& report, const std::string& path);
void save_comparison_json(const ComparisonReport& report, const std::string& path);

}  // namespace uniembed

#pragma once

#include <string>
#include <vector>

#include "uniembed/matrix.hpp"

namespace uniembed {

struct PcaResult {
    Matrix coordinates;                     // rows x out_dim
    std::vector<double> explained_variance;  // per component, descending
};

// Mean-centered projection onto the top principal components of the sample
// covariance (divisor n-1). Components are ordered by descending eigenvalue
// and sign-fixed so each component's first loading above 1e-12 in magnitude
// is positive. The result is identical under any permutation of the input
// rows: column means and covariance entries are accumulated in sorted order,
// so floating-point summation cannot observe the row order.
PcaResult pca_project(const Matrix& embeddings, int out_dim = 2);

struct OccupancyReport {
    std::vector<std::string> verticals;
    std::vector<std::vector<double>> centroids;
    std::vector<double> mean_intra;        // mean distance to own centroid, per vertical
    std::vector<std::vector<double>> inter_centroid;  // symmetric, zero diagonal
    double mean_silhouette = 0.0;          // verticals as cluster labels
};

// Per-vertical separation statistics over labeled embedding rows. Distances
// are Euclidean (not squared) so intra and inter figures compare directly.
// Requires at least two verticals with at least two samples each.
OccupancyReport occupancy(const Matrix& embeddings, const std::vector<std::string>& vertical_labels);

void save_occupancy_json(const OccupancyReport& report, const std::string& path);

// Projection CSV for plotting: item_id,vertical,x,y (out_dim columns).
void save_projection_csv(const PcaResult& pca, const std::vector<int>& item_ids,
                         const std::vector<std::string>& vertical_labels, const std::string& path);

}  // namespace uniembed

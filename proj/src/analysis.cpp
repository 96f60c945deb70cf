#include "uniembed/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "uniembed/errors.hpp"
#include "uniembed/kernels.hpp"

namespace uniembed {

namespace {

double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenpairs
// sorted by descending eigenvalue; v holds eigenvectors as columns.
void jacobi_eigen(Matrix a, std::vector<double>& eigenvalues, Matrix& v) {
    const int n = a.rows;
    v = Matrix(n, n);
    for (int i = 0; i < n; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
        if (std::sqrt(off) < 1e-12) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    eigenvalues.resize(static_cast<std::size_t>(n));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return a(x, x) > a(y, y); });
    Matrix vs(n, n);
    for (int j = 0; j < n; ++j) {
        eigenvalues[static_cast<std::size_t>(j)] = a(order[static_cast<std::size_t>(j)],
                                                     order[static_cast<std::size_t>(j)]);
        for (int i = 0; i < n; ++i) vs(i, j) = v(i, order[static_cast<std::size_t>(j)]);
    }
    v = std::move(vs);
}

}  // namespace

PcaResult pca_project(const Matrix& embeddings, int out_dim) {
    const int n = embeddings.rows;
    const int d = embeddings.cols;
    if (n < 2) throw usage_error("pca_project: need at least 2 rows");
    if (out_dim < 1 || out_dim > d) throw usage_error("pca_project: out_dim must be in [1, dim]");

    std::vector<double> mean(static_cast<std::size_t>(d));
    {
        std::vector<double> col(static_cast<std::size_t>(n));
        for (int j = 0; j < d; ++j) {
            for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = embeddings(i, j);
            mean[static_cast<std::size_t>(j)] = sorted_sum(col) / n;
        }
    }

    Matrix centered(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            centered(i, j) = embeddings(i, j) - mean[static_cast<std::size_t>(j)];

    Matrix cov(d, d);
    {
        std::vector<double> terms(static_cast<std::size_t>(n));
        for (int j = 0; j < d; ++j)
            for (int k = j; k < d; ++k) {
                for (int i = 0; i < n; ++i)
                    terms[static_cast<std::size_t>(i)] = centered(i, j) * centered(i, k);
                const double c = sorted_sum(terms) / (n - 1);
                cov(j, k) = c;
                cov(k, j) = c;
            }
    }

    std::vector<double> eig;
    Matrix v;
    jacobi_eigen(cov, eig, v);

    // sign convention: first loading with magnitude above 1e-12 made positive
    for (int j = 0; j < out_dim; ++j) {
        for (int i = 0; i < d; ++i) {
            if (std::abs(v(i, j)) <= 1e-12) continue;
            if (v(i, j) < 0.0)
                for (int r = 0; r < d; ++r) v(r, j) = -v(r, j);
            break;
        }
    }

    PcaResult result;
    result.coordinates = Matrix(n, out_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += centered(i, k) * v(k, j);
            result.coordinates(i, j) = s;
        }
    result.explained_variance.assign(eig.begin(), eig.begin() + out_dim);
    for (double& e : result.explained_variance)
        if (e < 0.0 && e > -1e-12) e = 0.0;  // Jacobi round-off on rank-deficient input
    return result;
}

OccupancyReport occupancy(const Matrix& embeddings, const std::vector<std::string>& vertical_labels) {
    const int n = embeddings.rows;
    const int d = embeddings.cols;
    require_shape(static_cast<int>(vertical_labels.size()) == n,
                  "occupancy: labels must align with embedding rows");

    std::vector<std::string> verticals;
    std::map<std::string, int> cluster_of;
    for (const std::string& v : vertical_labels)
        if (!cluster_of.count(v)) {
            cluster_of[v] = static_cast<int>(verticals.size());
            verticals.push_back(v);
        }
    const int nc = static_cast<int>(verticals.size());
    if (nc < 2) throw usage_error("occupancy: need at least 2 verticals; use pca_project for one");
    std::vector<int> count(static_cast<std::size_t>(nc), 0);
    std::vector<int> label(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        label[static_cast<std::size_t>(i)] = cluster_of[vertical_labels[static_cast<std::size_t>(i)]];
        ++count[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < nc; ++c)
        if (count[static_cast<std::size_t>(c)] < 2)
            throw usage_error("occupancy: vertical " + verticals[static_cast<std::size_t>(c)] +
                              " has fewer than 2 samples");

    OccupancyReport report;
    report.verticals = verticals;
    report.centroids.assign(static_cast<std::size_t>(nc),
                            std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            report.centroids[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])]
                            [static_cast<std::size_t>(j)] += embeddings(i, j);
    for (int c = 0; c < nc; ++c)
        for (double& x : report.centroids[static_cast<std::size_t>(c)])
            x /= count[static_cast<std::size_t>(c)];

    report.mean_intra.assign(static_cast<std::size_t>(nc), 0.0);
    for (int i = 0; i < n; ++i) {
        const int c = label[static_cast<std::size_t>(i)];
        report.mean_intra[static_cast<std::size_t>(c)] += std::sqrt(
            sqdist(embeddings.row(i), report.centroids[static_cast<std::size_t>(c)].data(), d));
    }
    for (int c = 0; c < nc; ++c) report.mean_intra[static_cast<std::size_t>(c)] /= count[static_cast<std::size_t>(c)];

    report.inter_centroid.assign(static_cast<std::size_t>(nc),
                                 std::vector<double>(static_cast<std::size_t>(nc), 0.0));
    for (int a = 0; a < nc; ++a)
        for (int b = a + 1; b < nc; ++b) {
            const double dist = std::sqrt(sqdist(report.centroids[static_cast<std::size_t>(a)].data(),
                                                 report.centroids[static_cast<std::size_t>(b)].data(), d));
            report.inter_centroid[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = dist;
            report.inter_centroid[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = dist;
        }

    // silhouette with verticals as clusters: s(i) = (b-a)/max(a,b), a = mean
    // distance to own cluster (excluding self), b = min over other clusters of
    // the mean distance to that cluster
    double total_s = 0.0;
    std::vector<double> cluster_sum(static_cast<std::size_t>(nc));
    for (int i = 0; i < n; ++i) {
        std::fill(cluster_sum.begin(), cluster_sum.end(), 0.0);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            cluster_sum[static_cast<std::size_t>(label[static_cast<std::size_t>(j)])] +=
                std::sqrt(sqdist(embeddings.row(i), embeddings.row(j), d));
        }
        const int own = label[static_cast<std::size_t>(i)];
        const double a = cluster_sum[static_cast<std::size_t>(own)] /
                         (count[static_cast<std::size_t>(own)] - 1);
        double b = 0.0;
        bool first = true;
        for (int c = 0; c < nc; ++c) {
            if (c == own) continue;
            const double m = cluster_sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)];
            if (first || m < b) b = m;
            first = false;
        }
        const double denom = std::max(a, b);
        total_s += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    report.mean_silhouette = total_s / n;
    return report;
}

void save_occupancy_json(const OccupancyReport& report, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["verticals"] = report.verticals;
    j["centroids"] = report.centroids;
    j["mean_intra"] = report.mean_intra;
    j["inter_centroid"] = report.inter_centroid;
    j["mean_silhouette"] = report.mean_silhouette;
    std::ofstream out(path);
    if (!out) throw format_error("cannot write occupancy report: " + path);
    out << j.dump(1) << "\n";
}

void save_projection_csv(const PcaResult& pca, const std::vector<int>& item_ids,
                         const std::vector<std::string>& vertical_labels, const std::string& path) {
    require_shape(static_cast<int>(item_ids.size()) == pca.coordinates.rows &&
                      item_ids.size() == vertical_labels.size(),
                  "save_projection_csv: ids and labels must align with coordinate rows");
    std::ofstream out(path);
    if (!out) throw format_error("cannot write projection file: " + path);
    out << "item_id,vertical";
    const char* axis[] = {"x", "y"};
    for (int j = 0; j < pca.coordinates.cols; ++j) {
        if (j < 2)
            out << ',' << axis[j];
        else
            out << ",c" << j;
    }
    out << "\n";
    char buf[64];
    for (std::size_t r = 0; r < item_ids.size(); ++r) {
        out << item_ids[r] << ',' << vertical_labels[r];
        for (int j = 0; j < pca.coordinates.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", pca.coordinates(static_cast<int>(r), j));
            out << ',' << buf;
        }
        out << "\n";
    }
}

}  // namespace uniembed

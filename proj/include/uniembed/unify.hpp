#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uniembed/net.hpp"
#include "uniembed/retrieval.hpp"
#include "uniembed/synthdata.hpp"
#include "uniembed/triplet.hpp"

namespace uniembed {

// Ordered grouping of the dataset's verticals: pairwise disjoint, union
// covers every vertical, no empty group.
struct VerticalPartition {
    std::vector<std::vector<std::string>> groups;
};

void validate(const VerticalPartition& partition, const std::vector<std::string>& dataset_verticals);

struct SpecialistEntry {
    std::vector<std::string> verticals;
    EmbeddingNet model;
};

struct SpecialistRegistry {
    std::vector<SpecialistEntry> entries;
};

// One row per candidate examined by the greedy search.
struct CombineRecord {
    std::string candidate;
    bool accepted = false;
    // per tentative-group vertical: individually trained baseline vs the
    // tentative combined model, both top-1
    std::vector<std::string> verticals;
    std::vector<double> baseline_top1;
    std::vector<double> tentative_top1;
    double worst_degradation_pts = 0.0;  // max over the tentative group, in points
};

struct CombineReport {
    std::vector<CombineRecord> records;
    std::vector<std::string> baseline_verticals;
    std::vector<double> baseline_top1;
};

struct GreedyResult {
    VerticalPartition partition;
    CombineReport report;
    SpecialistRegistry registry;  // final model per group, aligned with partition
};

// Greedy data combination: open a group with the first uncovered vertical,
// tentatively add each later uncovered vertical in order, retrain, and accept
// only when no tentative-group vertical loses more than epsilon top-1 points
// against its individually trained baseline. Rejected candidates stay
// eligible for later groups. Baselines are trained once up front.
GreedyResult greedy_combine(const Dataset& dataset, const std::vector<std::string>& vertical_order,
                            double epsilon_pts, const NetConfig& net_config,
                            const TripletConfig& triplet_config, const EvalSplit& eval_split);

// Candidate order used by the CLI when none is given: descending training
// item count, ties by dataset vertical order.
std::vector<std::string> default_vertical_order(const Dataset& dataset);

struct TargetEmbeddingSet {
    int dim = 0;
    std::map<int, std::vector<double>> targets;  // item id -> embedding
};

// Runs every training item through the model of its vertical's group and only
// that model. Throws routing_error when an item's vertical is unregistered.
TargetEmbeddingSet compute_targets(const SpecialistRegistry& registry, const Dataset& dataset);

struct DistillGrad {
    double loss = 0.0;
    Matrix d_student;  // gradient wrt the student batch
};

// L = sum_j ||student_j - target_j||^2 over batch rows; gradient wrt the
// student is 2(student - target), targets are constants.
DistillGrad distill_loss(const Matrix& student, const Matrix& target);

// Regresses a fresh net onto the targets with shuffled mini-batches drawn
// uniformly over all training items (product labels never consulted).
// History records the mean per-item squared distance per checkpoint batch.
std::pair<EmbeddingNet, TrainHistory> train_unified(const Dataset& dataset,
                                                    const TargetEmbeddingSet& targets,
                                                    const NetConfig& net_config, int steps,
                                                    double lr, double momentum, int batch_size,
                                                    std::uint64_t seed, int checkpoint_every = 100);

// Mean per-item squared distance between the model's embeddings and the
// targets, over all target items.
double mean_target_sqdist(const EmbeddingNet& model, const Dataset& dataset,
                          const TargetEmbeddingSet& targets);

void save_partition(const VerticalPartition& partition, const std::string& path);
VerticalPartition load_partition(const std::string& path);
void save_combine_report(const CombineReport& report, const std::string& path);
// Targets CSV: "# uniembed-targets v1 dim=<d>" then item_id,t0..t{d-1} rows
// at full precision.
void save_targets(const TargetEmbeddingSet& targets, const std::string& path);
TargetEmbeddingSet load_targets(const std::string& path);

}  // namespace uniembed

#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "uniembed/net.hpp"
#include "uniembed/rng.hpp"
#include "uniembed/synthdata.hpp"

namespace uniembed {

struct TripletConfig {
    double alpha = 0.2;           // hinge margin
    int batch_products = 8;       // P
    int items_per_product = 4;    // K, so the default batch is 32 rows
    int steps = 2000;
    double lr = 0.05;
    double momentum = 0.9;
    int checkpoint_every = 100;
    std::uint64_t seed = 42;
};

void validate(const TripletConfig& cfg);

// (anchor, positive, negative) as row indices into one batch. Anchor and
// positive share a product; the negative is a different product from the
// anchor's vertical.
struct Triplet {
    int anchor = 0;
    int positive = 0;
    int negative = 0;
};

struct Checkpoint {
    int step = 0;
    double mean_loss = 0.0;
    double top1 = -1.0;  // < 0 when not evaluated
};

struct TrainHistory {
    std::vector<Checkpoint> checkpoints;
};

// CSV export: header "step,mean_loss,top1", top1 column empty when absent.
void save_history(const TrainHistory& history, const std::string& path);

// Squared Euclidean distance.
double distance(const std::vector<double>& x, const std::vector<double>& y);

struct TripletGrad {
    double loss = 0.0;
    std::vector<double> d_anchor, d_positive, d_negative;
};

// Hinge loss max{0, alpha + D(a,p) - D(a,n)} with exact gradients. The
// inactive region (including the boundary) has zero gradients.
TripletGrad triplet_loss(const std::vector<double>& fa, const std::vector<double>& fp,
                         const std::vector<double>& fn, double alpha);

// Draws P distinct products from the scope's verticals and K training items
// per product, items without replacement within a product. Only index-split
// items are eligible; queries stay held out. Throws sampling_error naming the
// scope when it lacks P products with K training items each.
std::vector<int> sample_batch(const Dataset& dataset, const std::set<std::string>& vertical_scope,
                              int P, int K, Rng& rng);

// For every ordered same-product (anchor, positive) row pair, picks the
// negative with minimal D(a,n) inside the band D(a,p) < D(a,n) <= D(a,p)+alpha
// (ties to the lowest row index). When the band is empty, falls back to the
// farthest same-vertical different-product row (ties to the lowest index).
// Pairs with no candidate negative at all are skipped.
std::vector<Triplet> mine_semi_hard(const Matrix& embeddings,
                                    const std::vector<std::string>& product_labels,
                                    const std::vector<std::string>& vertical_labels, double alpha);

// Optional instrumentation for train_specialist.
struct TrainHooks {
    // called at each checkpoint to fill the top1 column; may be empty
    std::function<double(const EmbeddingNet&)> eval_top1;
    // when set, records every dataset item index the trainer reads
    std::vector<int>* touched = nullptr;
};

// Runs steps of {sample_batch, forward, mine_semi_hard, mean triplet loss,
// backward, sgd_step} over the scope's training items. Steps that mine zero
// triplets make no update. Batch sampling draws from a stream seeded with
// config.seed + seed_offset::sampling.
std::pair<EmbeddingNet, TrainHistory> train_specialist(const Dataset& dataset,
                                                       const std::set<std::string>& vertical_scope,
                                                       const NetConfig& net_config,
                                                       const TripletConfig& triplet_config,
                                                       const TrainHooks& hooks = {});

// Same loop, but continues from an existing net (the fine-tune phase). The
// sampling stream is seeded with seed_base so a second phase can use a
// distinct stream from the first.
TrainHistory train_specialist_from(EmbeddingNet& net, const Dataset& dataset,
                                   const std::set<std::string>& vertical_scope,
                                   const TripletConfig& triplet_config, std::uint64_t seed_base,
                                   const TrainHooks& hooks = {});

}  // namespace uniembed

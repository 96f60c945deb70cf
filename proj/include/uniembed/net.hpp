#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uniembed/matrix.hpp"

namespace uniembed {

enum class Activation { relu };

struct NetConfig {
    int input_dim = 32;
    std::vector<int> hidden_dims = {64, 32};
    int embedding_dim = 16;
    Activation activation = Activation::relu;
    bool normalize_output = true;
    std::uint64_t seed = 42;
};

void validate(const NetConfig& cfg);

struct Layer {
    Matrix weight;             // out_dim x in_dim
    std::vector<double> bias;  // out_dim
};

// Feed-forward embedding network: input -> hidden... -> embedding. The
// activation applies after every hidden layer; the output layer is linear,
// optionally followed by per-row L2 normalization. Rows whose pre-normalized
// norm is <= 1e-12 are passed through unscaled.
struct EmbeddingNet {
    NetConfig config;
    std::vector<Layer> layers;

    int num_layers() const { return static_cast<int>(layers.size()); }
    int embedding_dim() const { return config.embedding_dim; }
};

// Weights drawn uniformly in [-s, s], s = sqrt(6 / (fan_in + fan_out)), from
// a stream seeded with config.seed; biases start at zero.
EmbeddingNet init_net(const NetConfig& cfg);

// Everything backward() needs: layer inputs, pre-activations and the
// pre-normalization output of the matching forward() call.
struct ForwardCache {
    std::vector<Matrix> inputs;    // per-layer input, inputs[0] = batch
    std::vector<Matrix> preacts;   // per-layer pre-activation
    Matrix pre_norm;               // output layer before normalization
    std::vector<double> norms;     // per-row L2 norm of pre_norm
    bool nudged = false;           // relu kinks were nudged (gradient checks)
};

// Maps a batch (one input vector per row) to embeddings. When `cache` is
// given it is filled for a later backward(). `nudge_relu_kinks` shifts any
// pre-activation within 1e-6 of zero by +1e-3; it exists solely for
// finite-difference gradient checks and is off in normal operation.
Matrix forward(const EmbeddingNet& net, const Matrix& inputs, ForwardCache* cache = nullptr,
               bool nudge_relu_kinks = false);

struct GradSet {
    std::vector<Layer> layers;  // same shapes as EmbeddingNet::layers
};

// Exact analytic gradients of the scalar whose embedding gradient is
// supplied, including the L2-normalization Jacobian when enabled.
GradSet backward(const EmbeddingNet& net, const ForwardCache& cache,
                 const Matrix& grad_wrt_embeddings);

struct SgdState {
    std::vector<Layer> velocity;
};

SgdState make_sgd_state(const EmbeddingNet& net);

// v <- momentum*v + g; w <- w - lr*v. Throws train_error naming the layer if
// a gradient is not finite.
void sgd_step(EmbeddingNet& net, const GradSet& grads, double lr, double momentum,
              SgdState& state);

enum class LossKind { triplet, distill };

// Test hook: shifts one analytic weight gradient before the comparison so a
// deliberately wrong gradient is reported.
struct GradCorruption {
    int layer = 0;
    int row = 0;
    int col = 0;
    double delta = 0.0;
};

struct GradCheckReport {
    double tol = 0.0;
    std::vector<double> layer_max_rel_err;
    double max_rel_err = 0.0;
    int worst_layer = -1;
    bool passed = false;
};

// Compares analytic gradients against central finite differences (h = 1e-5)
// on a seeded synthetic batch for the chosen loss. Failures are reported,
// never thrown.
GradCheckReport grad_check(const EmbeddingNet& net, LossKind loss, double tol,
                           const GradCorruption* corrupt = nullptr);

// JSON model container, format_version 1. Round trips are lossless: reloaded
// nets produce bit-identical embeddings.
void save_model(const EmbeddingNet& net, const std::string& path);
EmbeddingNet load_model(const std::string& path);

}  // namespace uniembed

#include "uniembed/net.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uniembed/kernels.hpp"
#include "uniembed/rng.hpp"

namespace uniembed {

namespace {

constexpr double kNormGuard = 1e-12;  // rows at or below this norm stay unscaled
constexpr double kKinkWindow = 1e-6;
constexpr double kKinkNudge = 1e-3;

std::vector<int> layer_dims(const NetConfig& cfg) {
    std::vector<int> dims;
    dims.push_back(cfg.input_dim);
    for (int h : cfg.hidden_dims) dims.push_back(h);
    dims.push_back(cfg.embedding_dim);
    return dims;
}

}  // namespace

void validate(const NetConfig& cfg) {
    if (cfg.input_dim < 1) throw config_error("net: input_dim must be >= 1");
    if (cfg.embedding_dim < 2) throw config_error("net: embedding_dim must be >= 2");
    for (int h : cfg.hidden_dims)
        if (h < 1) throw config_error("net: hidden dims must be >= 1");
}

EmbeddingNet init_net(const NetConfig& cfg) {
    validate(cfg);
    EmbeddingNet net;
    net.config = cfg;
    Rng rng(cfg.seed);
    const auto dims = layer_dims(cfg);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        Layer layer;
        layer.weight = Matrix(fan_out, fan_in);
        for (double& w : layer.weight.a) w = rng.uniform(-s, s);
        layer.bias.assign(static_cast<std::size_t>(fan_out), 0.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix forward(const EmbeddingNet& net, const Matrix& inputs, ForwardCache* cache,
               bool nudge_relu_kinks) {
    require_shape(inputs.cols == net.config.input_dim, "forward: input dim mismatch");
    const int n_layers = net.num_layers();
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
        cache->nudged = nudge_relu_kinks;
    }

    Matrix act = inputs;
    for (int l = 0; l < n_layers; ++l) {
        const Layer& layer = net.layers[l];
        Matrix z = matmul_nt(act, layer.weight);
        for (int i = 0; i < z.rows; ++i) {
            double* zr = z.row(i);
            for (int j = 0; j < z.cols; ++j) zr[j] += layer.bias[j];
        }
        if (nudge_relu_kinks) {
            for (double& v : z.a)
                if (std::fabs(v) <= kKinkWindow) v += kKinkNudge;
        }
        if (cache) {
            cache->inputs.push_back(act);
            cache->preacts.push_back(z);
        }
        if (l + 1 < n_layers) {
            // hidden layer: relu
            act = z;
            for (double& v : act.a)
                if (v < 0.0) v = 0.0;
        } else {
            act = std::move(z);
        }
    }

    if (cache) cache->pre_norm = act;
    std::vector<double> norms(static_cast<std::size_t>(act.rows), 0.0);
    if (net.config.normalize_output) {
        for (int i = 0; i < act.rows; ++i) {
            double* r = act.row(i);
            double s = 0.0;
            for (int j = 0; j < act.cols; ++j) s += r[j] * r[j];
            const double norm = std::sqrt(s);
            norms[static_cast<std::size_t>(i)] = norm;
            if (norm > kNormGuard) {
                const double inv = 1.0 / norm;
                for (int j = 0; j < act.cols; ++j) r[j] *= inv;
            }
        }
    }
    if (cache) cache->norms = std::move(norms);
    return act;
}

GradSet backward(const EmbeddingNet& net, const ForwardCache& cache,
                 const Matrix& grad_wrt_embeddings) {
    const int n_layers = net.num_layers();
    if (static_cast<int>(cache.inputs.size()) != n_layers ||
        static_cast<int>(cache.preacts.size()) != n_layers)
        throw usage_error("backward: cache does not match this net");
    require_shape(grad_wrt_embeddings.rows == cache.pre_norm.rows &&
                      grad_wrt_embeddings.cols == cache.pre_norm.cols,
                  "backward: gradient shape mismatch");
    if (cache.inputs[0].cols != net.config.input_dim ||
        cache.preacts.back().cols != net.config.embedding_dim)
        throw usage_error("backward: cache produced by a different net shape");

    // Through the normalization: for y = x/||x||,
    // dL/dx = (g - (g.y) y) / ||x||; degenerate rows pass g through.
    Matrix grad = grad_wrt_embeddings;
    if (net.config.normalize_output) {
        for (int i = 0; i < grad.rows; ++i) {
            const double norm = cache.norms[static_cast<std::size_t>(i)];
            if (norm <= kNormGuard) continue;
            const double* x = cache.pre_norm.row(i);
            double* g = grad.row(i);
            double dot = 0.0;
            for (int j = 0; j < grad.cols; ++j) dot += g[j] * x[j] / norm;
            for (int j = 0; j < grad.cols; ++j) g[j] = (g[j] - dot * x[j] / norm) / norm;
        }
    }

    GradSet grads;
    grads.layers.resize(static_cast<std::size_t>(n_layers));
    for (int l = n_layers - 1; l >= 0; --l) {
        if (l + 1 < n_layers) {
            // relu mask of this layer's output, taken on the cached preacts
            const Matrix& z = cache.preacts[static_cast<std::size_t>(l)];
            for (std::size_t i = 0; i < grad.a.size(); ++i)
                if (z.a[i] <= 0.0) grad.a[i] = 0.0;
        }
        const Matrix& in = cache.inputs[static_cast<std::size_t>(l)];
        Layer& g = grads.layers[static_cast<std::size_t>(l)];
        g.weight = matmul_tn(grad, in);
        g.bias.assign(static_cast<std::size_t>(grad.cols), 0.0);
        for (int i = 0; i < grad.rows; ++i) {
            const double* gr = grad.row(i);
            for (int j = 0; j < grad.cols; ++j) g.bias[static_cast<std::size_t>(j)] += gr[j];
        }
        if (l > 0) grad = matmul(grad, net.layers[static_cast<std::size_t>(l)].weight);
    }
    return grads;
}

SgdState make_sgd_state(const EmbeddingNet& net) {
    SgdState st;
    for (const Layer& layer : net.layers) {
        Layer v;
        v.weight = Matrix(layer.weight.rows, layer.weight.cols);
        v.bias.assign(layer.bias.size(), 0.0);
        st.velocity.push_back(std::move(v));
    }
    return st;
}

void sgd_step(EmbeddingNet& net, const GradSet& grads, double lr, double momentum,
              SgdState& state) {
    if (lr <= 0.0) throw config_error("sgd: lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw config_error("sgd: momentum must be in [0, 1)");
    if (grads.layers.size() != net.layers.size())
        throw shape_error("sgd: gradient layer count mismatch");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& g = grads.layers[l];
        if (!all_finite(g.weight) || !all_finite(g.bias))
            throw train_error("sgd: non-finite gradient in layer " + std::to_string(l));
        Layer& w = net.layers[l];
        Layer& v = state.velocity[l];
        if (!g.weight.same_shape(w.weight) || g.bias.size() != w.bias.size())
            throw shape_error("sgd: gradient shape mismatch in layer " + std::to_string(l));
        for (std::size_t i = 0; i < w.weight.a.size(); ++i) {
            v.weight.a[i] = momentum * v.weight.a[i] + g.weight.a[i];
            w.weight.a[i] -= lr * v.weight.a[i];
        }
        for (std::size_t i = 0; i < w.bias.size(); ++i) {
            v.bias[i] = momentum * v.bias[i] + g.bias[i];
            w.bias[i] -= lr * v.bias[i];
        }
    }
}

// ---------------------------------------------------------------------------
// gradient check

namespace {

struct CheckScenario {
    Matrix inputs;
    Matrix targets;                        // distill only
    std::vector<std::array<int, 3>> trips;  // triplet only: (a, p, n) row indices
    double alpha = 0.2;
};

// Scalar loss on the embeddings plus its embedding gradient. Both loss kinds
// are tiny closed-form expressions, local on purpose: the checker must not
// share code with the training path it validates.
double scenario_loss(const CheckScenario& sc, const Matrix& emb, Matrix* grad_out) {
    if (grad_out) *grad_out = Matrix(emb.rows, emb.cols);
    const int d = emb.cols;
    if (!sc.trips.empty()) {
        double total = 0.0;
        for (const auto& t : sc.trips) {
            const double* fa = emb.row(t[0]);
            const double* fp = emb.row(t[1]);
            const double* fn = emb.row(t[2]);
            const double margin = sc.alpha + sqdist(fa, fp, d) - sqdist(fa, fn, d);
            if (margin > 0.0) {
                total += margin;
                if (grad_out) {
                    double* ga = grad_out->row(t[0]);
                    double* gp = grad_out->row(t[1]);
                    double* gn = grad_out->row(t[2]);
                    for (int j = 0; j < d; ++j) {
                        ga[j] += 2.0 * (fn[j] - fp[j]);
                        gp[j] += -2.0 * (fa[j] - fp[j]);
                        gn[j] += 2.0 * (fa[j] - fn[j]);
                    }
                }
            }
        }
        const double inv = 1.0 / static_cast<double>(sc.trips.size());
        if (grad_out)
            for (double& g : grad_out->a) g *= inv;
        return total * inv;
    }
    // distill: mean squared distance to fixed targets
    double total = 0.0;
    for (int i = 0; i < emb.rows; ++i) {
        const double* e = emb.row(i);
        const double* t = sc.targets.row(i);
        for (int j = 0; j < d; ++j) {
            const double diff = e[j] - t[j];
            total += diff * diff;
            if (grad_out) grad_out->row(i)[j] = 2.0 * diff / emb.rows;
        }
    }
    return total / emb.rows;
}

CheckScenario make_scenario(const EmbeddingNet& net, LossKind kind) {
    CheckScenario sc;
    Rng rng(net.config.seed ^ 0x5eedc4ec5ULL);
    const int batch = 12;
    sc.inputs = Matrix(batch, net.config.input_dim);
    for (double& v : sc.inputs.a) v = rng.uniform(-1.0, 1.0);

    if (kind == LossKind::distill) {
        sc.targets = Matrix(batch, net.config.embedding_dim);
        for (int i = 0; i < batch; ++i) {
            auto dir = rng.unit_vec(net.config.embedding_dim);
            for (int j = 0; j < sc.targets.cols; ++j) sc.targets(i, j) = dir[static_cast<std::size_t>(j)];
        }
        return sc;
    }

    // Fixed triplets over 4 groups of 3 rows: all ordered (a, p) pairs inside
    // a group, negative from the next group. Triplets sitting within 1e-3 of
    // the hinge boundary at the starting point are dropped so the central
    // differences never straddle the kink.
    Matrix emb = forward(net, sc.inputs, nullptr, true);
    std::vector<std::array<int, 3>> unfiltered;
    for (int g = 0; g < 4; ++g) {
        for (int a = 0; a < 3; ++a) {
            for (int p = 0; p < 3; ++p) {
                if (a == p) continue;
                const int ia = g * 3 + a;
                const int ip = g * 3 + p;
                const int in = ((g + 1) % 4) * 3 + a;
                unfiltered.push_back({ia, ip, in});
                const double margin = sc.alpha + sqdist(emb.row(ia), emb.row(ip), emb.cols) -
                                      sqdist(emb.row(ia), emb.row(in), emb.cols);
                if (std::fabs(margin) > 1e-3) sc.trips.push_back({ia, ip, in});
            }
        }
    }
    if (sc.trips.empty()) sc.trips = unfiltered;
    return sc;
}

}  // namespace

GradCheckReport grad_check(const EmbeddingNet& net, LossKind kind, double tol,
                           const GradCorruption* corrupt) {
    const CheckScenario sc = make_scenario(net, kind);
    constexpr double h = 1e-5;

    ForwardCache cache;
    Matrix emb = forward(net, sc.inputs, &cache, true);
    Matrix grad_emb;
    scenario_loss(sc, emb, &grad_emb);
    GradSet analytic = backward(net, cache, grad_emb);
    if (corrupt)
        analytic.layers[static_cast<std::size_t>(corrupt->layer)]
            .weight(corrupt->row, corrupt->col) += corrupt->delta;

    EmbeddingNet probe = net;  // nudged parameters live on a copy
    auto loss_at = [&]() {
        Matrix e = forward(probe, sc.inputs, nullptr, true);
        return scenario_loss(sc, e, nullptr);
    };

    GradCheckReport report;
    report.tol = tol;
    report.layer_max_rel_err.assign(net.layers.size(), 0.0);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto check_param = [&](double& param, double analytic_g) {
            const double saved = param;
            param = saved + h;
            const double up = loss_at();
            param = saved - h;
            const double down = loss_at();
            param = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::fabs(analytic_g), std::fabs(fd), 1e-4});
            const double rel = std::fabs(analytic_g - fd) / denom;
            auto& layer_err = report.layer_max_rel_err[l];
            if (rel > layer_err) layer_err = rel;
        };
        Layer& pl = probe.layers[l];
        const Layer& gl = analytic.layers[l];
        for (std::size_t i = 0; i < pl.weight.a.size(); ++i)
            check_param(pl.weight.a[i], gl.weight.a[i]);
        for (std::size_t i = 0; i < pl.bias.size(); ++i) check_param(pl.bias[i], gl.bias[i]);
    }

    for (std::size_t l = 0; l < report.layer_max_rel_err.size(); ++l) {
        if (report.layer_max_rel_err[l] > report.max_rel_err) {
            report.max_rel_err = report.layer_max_rel_err[l];
            report.worst_layer = static_cast<int>(l);
        }
    }
    report.passed = report.max_rel_err < tol;
    return report;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

// 17 significant digits round-trips any finite double exactly.
void write_reals(std::ostream& out, const std::vector<double>& values) {
    char buf[64];
    out << '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw format_error("refusing to save non-finite parameter");
        std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
        out << (i ? "," : "") << buf;
    }
    out << ']';
}

}  // namespace

void save_model(const EmbeddingNet& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write model file: " + path);
    out << "{\n \"format_version\": 1,\n \"config\": {\n"
        << "  \"input_dim\": " << net.config.input_dim << ",\n  \"hidden_dims\": [";
    for (std::size_t i = 0; i < net.config.hidden_dims.size(); ++i)
        out << (i ? "," : "") << net.config.hidden_dims[i];
    out << "],\n  \"embedding_dim\": " << net.config.embedding_dim
        << ",\n  \"activation\": \"relu\",\n  \"normalize_output\": "
        << (net.config.normalize_output ? "true" : "false")
        << ",\n  \"seed\": " << net.config.seed << "\n },\n \"layers\": [";
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        out << (l ? "," : "") << "\n  {\"rows\": " << layer.weight.rows
            << ", \"cols\": " << layer.weight.cols << ",\n   \"weights\": ";
        write_reals(out, layer.weight.a);
        out << ",\n   \"bias\": ";
        write_reals(out, layer.bias);
        out << '}';
    }
    out << "\n ]\n}\n";
}

EmbeddingNet load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("model file " + path + ": " + e.what());
    }
    try {
        if (!j.contains("format_version") || j["format_version"] != 1)
            throw format_error("model file " + path + ": unsupported format version " +
                               j.value("format_version", nlohmann::json()).dump());
        EmbeddingNet net;
        const auto& c = j.at("config");
        net.config.input_dim = c.at("input_dim").get<int>();
        net.config.hidden_dims = c.at("hidden_dims").get<std::vector<int>>();
        net.config.embedding_dim = c.at("embedding_dim").get<int>();
        if (c.at("activation").get<std::string>() != "relu")
            throw format_error("model file " + path + ": unknown activation");
        net.config.normalize_output = c.at("normalize_output").get<bool>();
        net.config.seed = c.at("seed").get<std::uint64_t>();
        validate(net.config);
        for (const auto& jl : j.at("layers")) {
            Layer layer;
            layer.weight = Matrix(jl.at("rows").get<int>(), jl.at("cols").get<int>());
            const auto& w = jl.at("weights");
            if (static_cast<std::size_t>(w.size()) != layer.weight.a.size())
                throw parse_error("model file " + path + ": weight count mismatch");
            for (std::size_t i = 0; i < layer.weight.a.size(); ++i)
                layer.weight.a[i] = w[i].get<double>();
            layer.bias = jl.at("bias").get<std::vector<double>>();
            if (static_cast<int>(layer.bias.size()) != layer.weight.rows)
                throw parse_error("model file " + path + ": bias length mismatch");
            if (!all_finite(layer.weight) || !all_finite(layer.bias))
                throw parse_error("model file " + path + ": non-finite parameter");
            net.layers.push_back(std::move(layer));
        }
        // dims must chain input -> hidden... -> embedding
        std::vector<int> dims{net.config.input_dim};
        for (int h : net.config.hidden_dims) dims.push_back(h);
        dims.push_back(net.config.embedding_dim);
        if (net.layers.size() + 1 != dims.size())
            throw parse_error("model file " + path + ": layer count mismatch");
        for (std::size_t l = 0; l < net.layers.size(); ++l)
            if (net.layers[l].weight.cols != dims[l] || net.layers[l].weight.rows != dims[l + 1])
                throw parse_error("model file " + path + ": layer shape mismatch");
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("model file " + path + ": " + e.what());
    }
}

}  // namespace uniembed

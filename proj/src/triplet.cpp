#include "uniembed/triplet.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "uniembed/errors.hpp"
#include "uniembed/kernels.hpp"

namespace uniembed {

void validate(const TripletConfig& cfg) {
    if (cfg.alpha <= 0.0) throw spec_error("triplet: alpha must be > 0");
    if (cfg.batch_products < 2) throw spec_error("triplet: batch_products must be >= 2");
    if (cfg.items_per_product < 2) throw spec_error("triplet: items_per_product must be >= 2");
    if (cfg.steps < 0) throw spec_error("triplet: steps must be >= 0");
    if (cfg.lr <= 0.0) throw spec_error("triplet: lr must be > 0");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw spec_error("triplet: momentum must be in [0, 1)");
    if (cfg.checkpoint_every < 1) throw spec_error("triplet: checkpoint_every must be >= 1");
}

void save_history(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write history file: " + path);
    out << "step,mean_loss,top1\n";
    char buf[64];
    for (const Checkpoint& c : history.checkpoints) {
        std::snprintf(buf, sizeof(buf), "%.17g", c.mean_loss);
        out << c.step << ',' << buf << ',';
        if (c.top1 >= 0.0) {
            std::snprintf(buf, sizeof(buf), "%.17g", c.top1);
            out << buf;
        }
        out << "\n";
    }
}

double distance(const std::vector<double>& x, const std::vector<double>& y) {
    require_shape(x.size() == y.size(), "distance: dim mismatch");
    return sqdist(x.data(), y.data(), static_cast<int>(x.size()));
}

TripletGrad triplet_loss(const std::vector<double>& fa, const std::vector<double>& fp,
                         const std::vector<double>& fn, double alpha) {
    require_shape(fa.size() == fp.size() && fa.size() == fn.size(), "triplet_loss: dim mismatch");
    const std::size_t d = fa.size();
    TripletGrad g;
    g.d_anchor.assign(d, 0.0);
    g.d_positive.assign(d, 0.0);
    g.d_negative.assign(d, 0.0);
    const double margin = alpha + distance(fa, fp) - distance(fa, fn);
    if (margin <= 0.0) return g;  // inactive hinge, boundary included
    g.loss = margin;
    // d/dfa [||fa-fp||^2 - ||fa-fn||^2] = 2(fn - fp), etc.
    for (std::size_t i = 0; i < d; ++i) {
        g.d_anchor[i] = 2.0 * (fn[i] - fp[i]);
        g.d_positive[i] = 2.0 * (fp[i] - fa[i]);
        g.d_negative[i] = 2.0 * (fa[i] - fn[i]);
    }
    return g;
}

std::vector<int> sample_batch(const Dataset& dataset, const std::set<std::string>& vertical_scope,
                              int P, int K, Rng& rng) {
    // training items of the scope, grouped by product in first-appearance order
    std::vector<std::string> product_order;
    std::map<std::string, std::vector<int>> by_product;
    for (const Item& item : dataset.items) {
        if (item.split != Split::index) continue;
        if (vertical_scope.find(item.vertical) == vertical_scope.end()) continue;
        auto [it, fresh] = by_product.try_emplace(item.product_id);
        if (fresh) product_order.push_back(item.product_id);
        it->second.push_back(item.item_id);
    }

    std::string scope_name;
    for (const std::string& v : vertical_scope) scope_name += (scope_name.empty() ? "" : ",") + v;

    std::vector<const std::vector<int>*> eligible;
    for (const std::string& p : product_order)
        if (static_cast<int>(by_product[p].size()) >= K) eligible.push_back(&by_product[p]);
    if (static_cast<int>(eligible.size()) < P)
        throw sampling_error("scope {" + scope_name + "}: need " + std::to_string(P) +
                             " products with >= " + std::to_string(K) + " training items, have " +
                             std::to_string(eligible.size()));

    // partial Fisher-Yates: first P slots pick the products, then K items each
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(P) * K);
    const int n_prod = static_cast<int>(eligible.size());
    std::vector<int> pidx(static_cast<std::size_t>(n_prod));
    for (int i = 0; i < n_prod; ++i) pidx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < P; ++i) {
        const int j = i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n_prod - i)));
        std::swap(pidx[static_cast<std::size_t>(i)], pidx[static_cast<std::size_t>(j)]);
        const std::vector<int>& pool = *eligible[static_cast<std::size_t>(pidx[static_cast<std::size_t>(i)])];
        std::vector<int> iidx(pool.size());
        for (std::size_t t = 0; t < pool.size(); ++t) iidx[t] = static_cast<int>(t);
        for (int t = 0; t < K; ++t) {
            const int u = t + static_cast<int>(rng.bounded(pool.size() - static_cast<std::size_t>(t)));
            std::swap(iidx[static_cast<std::size_t>(t)], iidx[static_cast<std::size_t>(u)]);
            batch.push_back(pool[static_cast<std::size_t>(iidx[static_cast<std::size_t>(t)])]);
        }
    }
    return batch;
}

std::vector<Triplet> mine_semi_hard(const Matrix& embeddings,
                                    const std::vector<std::string>& product_labels,
                                    const std::vector<std::string>& vertical_labels, double alpha) {
    const int n = embeddings.rows;
    require_shape(static_cast<int>(product_labels.size()) == n &&
                      static_cast<int>(vertical_labels.size()) == n,
                  "mine_semi_hard: labels must align with embedding rows");
    const Matrix dist = pairwise_sqdist(embeddings, embeddings);

    std::vector<Triplet> out;
    for (int a = 0; a < n; ++a) {
        for (int p = 0; p < n; ++p) {
            if (a == p || product_labels[static_cast<std::size_t>(a)] != product_labels[static_cast<std::size_t>(p)])
                continue;
            const double dap = dist(a, p);
            int band_pick = -1, far_pick = -1;
            for (int c = 0; c < n; ++c) {
                if (vertical_labels[static_cast<std::size_t>(c)] != vertical_labels[static_cast<std::size_t>(a)])
                    continue;
                if (product_labels[static_cast<std::size_t>(c)] == product_labels[static_cast<std::size_t>(a)])
                    continue;
                const double dan = dist(a, c);
                if (dan > dap && dan <= dap + alpha &&
                    (band_pick < 0 || dan < dist(a, band_pick)))
                    band_pick = c;
                if (far_pick < 0 || dan > dist(a, far_pick)) far_pick = c;
            }
            const int neg = band_pick >= 0 ? band_pick : far_pick;
            if (neg >= 0) out.push_back({a, p, neg});
        }
    }
    return out;
}

namespace {

void run_steps(EmbeddingNet& net, const Dataset& dataset,
               const std::set<std::string>& vertical_scope, const TripletConfig& cfg,
               std::uint64_t sampling_seed, const TrainHooks& hooks, TrainHistory& history) {
    Rng rng(sampling_seed);
    SgdState state = make_sgd_state(net);
    const int dim = net.embedding_dim();

    auto checkpoint = [&](int step, double mean_loss) {
        Checkpoint c;
        c.step = step;
        c.mean_loss = mean_loss;
        if (hooks.eval_top1) c.top1 = hooks.eval_top1(net);
        history.checkpoints.push_back(c);
    };

    for (int step = 1; step <= cfg.steps; ++step) {
        const std::vector<int> batch =
            sample_batch(dataset, vertical_scope, cfg.batch_products, cfg.items_per_product, rng);
        if (hooks.touched)
            hooks.touched->insert(hooks.touched->end(), batch.begin(), batch.end());

        std::vector<std::string> products, verticals;
        products.reserve(batch.size());
        verticals.reserve(batch.size());
        for (int id : batch) {
            products.push_back(dataset.items[static_cast<std::size_t>(id)].product_id);
            verticals.push_back(dataset.items[static_cast<std::size_t>(id)].vertical);
        }

        const Matrix inputs = gather_features(dataset, batch);
        ForwardCache cache;
        const Matrix emb = forward(net, inputs, &cache);
        const std::vector<Triplet> trips = mine_semi_hard(emb, products, verticals, cfg.alpha);

        double mean_loss = 0.0;
        if (!trips.empty()) {
            Matrix grad(emb.rows, emb.cols);
            double total = 0.0;
            const double scale = 1.0 / static_cast<double>(trips.size());
            for (const Triplet& t : trips) {
                const double dap = sqdist(emb.row(t.anchor), emb.row(t.positive), dim);
                const double dan = sqdist(emb.row(t.anchor), emb.row(t.negative), dim);
                const double margin = cfg.alpha + dap - dan;
                if (margin <= 0.0) continue;
                total += margin;
                double* ga = grad.row(t.anchor);
                double* gp = grad.row(t.positive);
                double* gn = grad.row(t.negative);
                const double* fa = emb.row(t.anchor);
                const double* fp = emb.row(t.positive);
                const double* fn = emb.row(t.negative);
                for (int i = 0; i < dim; ++i) {
                    ga[i] += scale * 2.0 * (fn[i] - fp[i]);
                    gp[i] += scale * 2.0 * (fp[i] - fa[i]);
                    gn[i] += scale * 2.0 * (fa[i] - fn[i]);
                }
            }
            mean_loss = total * scale;
            if (!std::isfinite(mean_loss))
                throw train_error("non-finite loss at step " + std::to_string(step));
            const GradSet grads = backward(net, cache, grad);
            sgd_step(net, grads, cfg.lr, cfg.momentum, state);
        }

        if (step % cfg.checkpoint_every == 0 || step == cfg.steps) checkpoint(step, mean_loss);
    }
}

}  // namespace

std::pair<EmbeddingNet, TrainHistory> train_specialist(const Dataset& dataset,
                                                       const std::set<std::string>& vertical_scope,
                                                       const NetConfig& net_config,
                                                       const TripletConfig& triplet_config,
                                                       const TrainHooks& hooks) {
    validate(net_config);
    validate(triplet_config);
    EmbeddingNet net = init_net(net_config);
    TrainHistory history;
    run_steps(net, dataset, vertical_scope, triplet_config,
              triplet_config.seed + seed_offset::sampling, hooks, history);
    return {std::move(net), std::move(history)};
}

TrainHistory train_specialist_from(EmbeddingNet& net, const Dataset& dataset,
                                   const std::set<std::string>& vertical_scope,
                                   const TripletConfig& triplet_config, std::uint64_t seed_base,
                                   const TrainHooks& hooks) {
    validate(triplet_config);
    TrainHistory history;
    run_steps(net, dataset, vertical_scope, triplet_config, seed_base + seed_offset::sampling,
              hooks, history);
    return history;
}

}  // namespace uniembed

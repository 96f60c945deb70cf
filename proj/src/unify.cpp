#include "uniembed/unify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "uniembed/errors.hpp"
#include "uniembed/kernels.hpp"
#include "uniembed/rng.hpp"

namespace uniembed {

void validate(const VerticalPartition& partition,
              const std::vector<std::string>& dataset_verticals) {
    std::set<std::string> seen;
    for (const auto& group : partition.groups) {
        if (group.empty()) throw routing_error("partition contains an empty group");
        for (const std::string& v : group)
            if (!seen.insert(v).second)
                throw routing_error("partition lists vertical " + v + " twice");
    }
    for (const std::string& v : dataset_verticals)
        if (seen.find(v) == seen.end())
            throw routing_error("partition does not cover vertical " + v);
    if (seen.size() != dataset_verticals.size())
        throw routing_error("partition lists verticals absent from the dataset");
}

namespace {

std::map<std::string, double> per_vertical_top1(const EmbeddingNet& model, const Dataset& dataset,
                                                const EvalSplit& split) {
    const RetrievalReport report = top_k_accuracy(model, dataset, split, {1});
    std::map<std::string, double> out;
    for (const VerticalAccuracy& row : report.rows) out[row.vertical] = row.accuracy[0];
    return out;
}

}  // namespace

std::vector<std::string> default_vertical_order(const Dataset& dataset) {
    const std::vector<std::string> verticals = dataset.verticals();
    std::map<std::string, int> count;
    for (const Item& item : dataset.items)
        if (item.split == Split::index) ++count[item.vertical];
    std::vector<std::string> order = verticals;
    std::stable_sort(order.begin(), order.end(),
                     [&](const std::string& a, const std::string& b) { return count[a] > count[b]; });
    return order;
}

GreedyResult greedy_combine(const Dataset& dataset, const std::vector<std::string>& vertical_order,
                            double epsilon_pts, const NetConfig& net_config,
                            const TripletConfig& triplet_config, const EvalSplit& eval_split) {
    if (epsilon_pts < 0.0) throw spec_error("greedy_combine: epsilon must be >= 0");
    {
        const std::vector<std::string> verticals = dataset.verticals();
        std::set<std::string> want(verticals.begin(), verticals.end());
        std::set<std::string> got(vertical_order.begin(), vertical_order.end());
        if (want != got || vertical_order.size() != verticals.size())
            throw routing_error("greedy_combine: vertical_order must be a permutation of the dataset's verticals");
    }

    GreedyResult result;

    // individually trained baselines, one per vertical
    std::map<std::string, double> baseline;
    std::map<std::string, EmbeddingNet> baseline_model;
    for (const std::string& v : vertical_order) {
        auto [net, history] = train_specialist(dataset, {v}, net_config, triplet_config);
        baseline[v] = per_vertical_top1(net, dataset, eval_split)[v];
        baseline_model.emplace(v, std::move(net));
        result.report.baseline_verticals.push_back(v);
        result.report.baseline_top1.push_back(baseline[v]);
    }

    std::vector<std::string> uncovered = vertical_order;
    while (!uncovered.empty()) {
        std::vector<std::string> group = {uncovered.front()};
        uncovered.erase(uncovered.begin());
        EmbeddingNet group_model = baseline_model.at(group.front());

        for (std::size_t i = 0; i < uncovered.size();) {
            const std::string candidate = uncovered[i];
            std::vector<std::string> tentative = group;
            tentative.push_back(candidate);
            auto [net, history] = train_specialist(
                dataset, std::set<std::string>(tentative.begin(), tentative.end()), net_config,
                triplet_config);
            const std::map<std::string, double> top1 = per_vertical_top1(net, dataset, eval_split);

            CombineRecord record;
            record.candidate = candidate;
            record.verticals = tentative;
            for (const std::string& v : tentative) {
                record.baseline_top1.push_back(baseline.at(v));
                record.tentative_top1.push_back(top1.at(v));
                record.worst_degradation_pts =
                    std::max(record.worst_degradation_pts, (baseline.at(v) - top1.at(v)) * 100.0);
            }
            record.accepted = record.worst_degradation_pts <= epsilon_pts;
            result.report.records.push_back(record);

            if (record.accepted) {
                group = std::move(tentative);
                group_model = std::move(net);
                uncovered.erase(uncovered.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
                ++i;  // candidate stays eligible for later groups
            }
        }
        result.partition.groups.push_back(group);
        result.registry.entries.push_back({std::move(group), std::move(group_model)});
    }

    validate(result.partition, dataset.verticals());
    return result;
}

TargetEmbeddingSet compute_targets(const SpecialistRegistry& registry, const Dataset& dataset) {
    std::map<std::string, const EmbeddingNet*> model_of;
    for (const SpecialistEntry& entry : registry.entries)
        for (const std::string& v : entry.verticals) {
            if (model_of.count(v))
                throw routing_error("vertical " + v + " appears in two registry groups");
            model_of[v] = &entry.model;
        }

    TargetEmbeddingSet out;
    out.dim = registry.entries.empty() ? 0 : registry.entries.front().model.embedding_dim();
    for (const SpecialistEntry& entry : registry.entries)
        if (entry.model.embedding_dim() != out.dim)
            throw routing_error("registry models disagree on embedding_dim");

    // group items by registry entry so each model runs one batch
    for (const SpecialistEntry& entry : registry.entries) {
        std::set<std::string> scope(entry.verticals.begin(), entry.verticals.end());
        std::vector<int> ids;
        for (const Item& item : dataset.items)
            if (item.split == Split::index && scope.count(item.vertical)) ids.push_back(item.item_id);
        if (ids.empty()) continue;
        const Matrix emb = forward(entry.model, gather_features(dataset, ids));
        for (std::size_t r = 0; r < ids.size(); ++r) {
            std::vector<double> t(static_cast<std::size_t>(out.dim));
            const double* row = emb.row(static_cast<int>(r));
            std::copy(row, row + out.dim, t.begin());
            out.targets[ids[r]] = std::move(t);
        }
    }

    for (const Item& item : dataset.items)
        if (item.split == Split::index && !model_of.count(item.vertical))
            throw routing_error("no registry group covers vertical " + item.vertical);
    return out;
}

DistillGrad distill_loss(const Matrix& student, const Matrix& target) {
    require_shape(student.same_shape(target), "distill_loss: shape mismatch");
    DistillGrad g;
    g.d_student = Matrix(student.rows, student.cols);
    for (std::size_t i = 0; i < student.a.size(); ++i) {
        const double d = student.a[i] - target.a[i];
        g.loss += d * d;
        g.d_student.a[i] = 2.0 * d;
    }
    return g;
}

std::pair<EmbeddingNet, TrainHistory> train_unified(const Dataset& dataset,
                                                    const TargetEmbeddingSet& targets,
                                                    const NetConfig& net_config, int steps,
                                                    double lr, double momentum, int batch_size,
                                                    std::uint64_t seed, int checkpoint_every) {
    validate(net_config);
    if (steps < 0) throw spec_error("train_unified: steps must be >= 0");
    if (batch_size < 1) throw spec_error("train_unified: batch_size must be >= 1");
    if (checkpoint_every < 1) throw spec_error("train_unified: checkpoint_every must be >= 1");
    if (net_config.embedding_dim != targets.dim)
        throw routing_error("train_unified: net embedding_dim " +
                            std::to_string(net_config.embedding_dim) + " != targets dim " +
                            std::to_string(targets.dim));

    std::vector<int> pool = training_items(dataset);
    for (int id : pool)
        if (!targets.targets.count(id))
            throw routing_error("train_unified: no target for item " + std::to_string(id));
    if (pool.empty()) throw routing_error("train_unified: dataset has no training items");

    EmbeddingNet net = init_net(net_config);
    TrainHistory history;
    if (steps == 0) return {std::move(net), std::move(history)};

    SgdState state = make_sgd_state(net);
    Rng rng(seed + seed_offset::distill);
    const int B = std::min<int>(batch_size, static_cast<int>(pool.size()));
    rng.shuffle(pool);
    std::size_t pos = 0;

    for (int step = 1; step <= steps; ++step) {
        if (pos + static_cast<std::size_t>(B) > pool.size()) {
            rng.shuffle(pool);
            pos = 0;
        }
        const std::vector<int> batch(pool.begin() + static_cast<std::ptrdiff_t>(pos),
                                     pool.begin() + static_cast<std::ptrdiff_t>(pos) + B);
        pos += static_cast<std::size_t>(B);

        Matrix target(B, targets.dim);
        for (int r = 0; r < B; ++r) {
            const std::vector<double>& t = targets.targets.at(batch[static_cast<std::size_t>(r)]);
            std::copy(t.begin(), t.end(), target.row(r));
        }

        ForwardCache cache;
        const Matrix emb = forward(net, gather_features(dataset, batch), &cache);
        DistillGrad g = distill_loss(emb, target);
        const double mean_loss = g.loss / static_cast<double>(B);
        if (!std::isfinite(mean_loss))
            throw train_error("non-finite loss at step " + std::to_string(step));
        for (double& x : g.d_student.a) x /= static_cast<double>(B);
        const GradSet grads = backward(net, cache, g.d_student);
        sgd_step(net, grads, lr, momentum, state);

        if (step % checkpoint_every == 0 || step == steps)
            history.checkpoints.push_back({step, mean_loss, -1.0});
    }
    return {std::move(net), std::move(history)};
}

double mean_target_sqdist(const EmbeddingNet& model, const Dataset& dataset,
                          const TargetEmbeddingSet& targets) {
    if (targets.targets.empty()) throw routing_error("mean_target_sqdist: empty target set");
    std::vector<int> ids;
    for (const auto& [id, t] : targets.targets) ids.push_back(id);
    const Matrix emb = forward(model, gather_features(dataset, ids));
    double total = 0.0;
    for (std::size_t r = 0; r < ids.size(); ++r)
        total += sqdist(emb.row(static_cast<int>(r)), targets.targets.at(ids[r]).data(),
                        targets.dim);
    return total / static_cast<double>(ids.size());
}

void save_partition(const VerticalPartition& partition, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["groups"] = partition.groups;
    std::ofstream out(path);
    if (!out) throw format_error("cannot write partition file: " + path);
    out << j.dump(1) << "\n";
}

VerticalPartition load_partition(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open partition file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("partition file " + path + ": " + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1)
            throw format_error("partition file " + path + ": unsupported format version");
        VerticalPartition p;
        p.groups = j.at("groups").get<std::vector<std::vector<std::string>>>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("partition file " + path + ": " + e.what());
    }
}

void save_combine_report(const CombineReport& report, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["baselines"] = nlohmann::json::array();
    for (std::size_t i = 0; i < report.baseline_verticals.size(); ++i) {
        nlohmann::json b;
        b["vertical"] = report.baseline_verticals[i];
        b["top1"] = report.baseline_top1[i];
        j["baselines"].push_back(b);
    }
    j["records"] = nlohmann::json::array();
    for (const CombineRecord& record : report.records) {
        nlohmann::json r;
        r["candidate"] = record.candidate;
        r["accepted"] = record.accepted;
        r["verticals"] = record.verticals;
        r["baseline_top1"] = record.baseline_top1;
        r["tentative_top1"] = record.tentative_top1;
        r["worst_degradation_pts"] = record.worst_degradation_pts;
        j["records"].push_back(r);
    }
    std::ofstream out(path);
    if (!out) throw format_error("cannot write combine report: " + path);
    out << j.dump(1) << "\n";
}

void save_targets(const TargetEmbeddingSet& targets, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw format_error("cannot write targets file: " + path);
    out << "# uniembed-targets v1 dim=" << targets.dim << "\n";
    out << "item_id";
    for (int i = 0; i < targets.dim; ++i) out << ",t" << i;
    out << "\n";
    char buf[64];
    for (const auto& [id, t] : targets.targets) {
        out << id;
        for (double x : t) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << ',' << buf;
        }
        out << "\n";
    }
}

TargetEmbeddingSet load_targets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open targets file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# uniembed-targets v1 dim=", 0) != 0)
        throw format_error("targets file " + path + ": missing '# uniembed-targets v1' header");
    TargetEmbeddingSet out;
    try {
        out.dim = std::stoi(line.substr(std::string("# uniembed-targets v1 dim=").size()));
    } catch (const std::exception&) {
        throw format_error("targets file " + path + ": bad dim in header");
    }
    if (out.dim < 1) throw format_error("targets file " + path + ": bad dim in header");
    if (!std::getline(in, line)) throw format_error("targets file " + path + ": missing column header");

    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const std::size_t p = line.find(',', start);
            cols.push_back(line.substr(start, p == std::string::npos ? p : p - start));
            if (p == std::string::npos) break;
            start = p + 1;
        }
        if (static_cast<int>(cols.size()) != 1 + out.dim)
            throw parse_error("targets file " + path + " line " + std::to_string(lineno) +
                              ": expected " + std::to_string(1 + out.dim) + " columns, got " +
                              std::to_string(cols.size()));
        int id = 0;
        try {
            id = std::stoi(cols[0]);
        } catch (const std::exception&) {
            throw parse_error("targets file " + path + " line " + std::to_string(lineno) +
                              ": bad item_id '" + cols[0] + "'");
        }
        std::vector<double> t(static_cast<std::size_t>(out.dim));
        for (int i = 0; i < out.dim; ++i) {
            const std::string& cell = cols[static_cast<std::size_t>(1 + i)];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
                throw parse_error("targets file " + path + " line " + std::to_string(lineno) +
                                  ": non-numeric value '" + cell + "'");
            t[static_cast<std::size_t>(i)] = v;
        }
        out.targets[id] = std::move(t);
    }
    return out;
}

}  // namespace uniembed

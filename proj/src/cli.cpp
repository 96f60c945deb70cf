#include "uniembed/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>

#include "uniembed/analysis.hpp"
#include "uniembed/config.hpp"
#include "uniembed/errors.hpp"
#include "uniembed/net.hpp"
#include "uniembed/retrieval.hpp"
#include "uniembed/synthdata.hpp"
#include "uniembed/triplet.hpp"
#include "uniembed/unify.hpp"

namespace uniembed {

namespace {

const char* kUsage =
    "usage: uniembed <command> [options]\n"
    "\n"
    "commands:\n"
    "  gen-data    generate a synthetic dataset            --out <csv> [--noise-rate R]\n"
    "  train       train a specialist with triplet loss    --data <csv> --model-out <json>\n"
    "              [--scope v0,v1] [--finetune <clean csv>] [--history-out <csv>]\n"
    "  combine     greedy vertical combination search      --data <csv> --partition-out <json>\n"
    "              [--report-out <json>] [--models-out <prefix>]\n"
    "  targets     specialist embeddings as targets        --data <csv> --partition <json>\n"
    "              --models <m0.json,m1.json,...> --out <csv>\n"
    "  distill     regress a unified model onto targets    --data <csv> --targets <csv>\n"
    "              --model-out <json> [--history-out <csv>]\n"
    "  eval        top-k retrieval accuracy                --data <csv> --model <json>\n"
    "              --report-out <json> [--csv-out <csv>]\n"
    "  compare     per-vertical report deltas (a - b)      --a <json> --b <json> [--out <json>]\n"
    "  analyze     PCA projection and separation stats     --data <csv> --model <json>\n"
    "              [--proj-out <csv>] [--report-out <json>]\n"
    "  check-grad  finite-difference gradient check        [--loss triplet|distill|both] [--tol T]\n"
    "\n"
    "common options:\n"
    "  --config <file>     key = value settings file\n"
    "  --set key=value     override one setting (repeatable, wins over --config)\n"
    "  --seed <n>          override the seed everywhere\n"
    "  --threads <n>       worker threads for parallel kernels (default 1)\n";

struct ParsedArgs {
    std::vector<std::pair<std::string, std::string>> flags;  // in order, no leading --

    const std::string* find(const std::string& name) const {
        for (const auto& [flag, value] : flags)
            if (flag == name) return &value;
        return nullptr;
    }
    const std::string& require(const std::string& name) const {
        const std::string* v = find(name);
        if (!v) throw usage_error("missing required flag --" + name);
        return *v;
    }
};

ParsedArgs parse_flags(const std::vector<std::string>& args, std::size_t start,
                       const std::set<std::string>& allowed) {
    ParsedArgs parsed;
    for (std::size_t i = start; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0) throw usage_error("unexpected argument '" + arg + "'");
        const std::string name = arg.substr(2);
        if (!allowed.count(name)) throw usage_error("unknown flag --" + name);
        if (i + 1 >= args.size()) throw usage_error("flag --" + name + " needs a value");
        parsed.flags.emplace_back(name, args[++i]);
    }
    return parsed;
}

// --config first, then --set overrides in order, then --seed/--threads.
RunConfig build_config(const ParsedArgs& args) {
    RunConfig cfg;
    if (const std::string* path = args.find("config")) cfg = parse_config(*path);
    for (const auto& [flag, value] : args.flags) {
        if (flag != "set") continue;
        const std::size_t eq = value.find('=');
        if (eq == std::string::npos)
            throw usage_error("--set expects key=value, got '" + value + "'");
        std::string key = value.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        apply_config_entry(cfg, key, value.substr(eq + 1), "--set " + key);
    }
    if (const std::string* seed = args.find("seed")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(seed->c_str(), &end, 10);
        if (seed->empty() || end != seed->c_str() + seed->size())
            throw usage_error("--seed expects an integer, got '" + *seed + "'");
        cfg.seed = v;
    }
    if (const std::string* threads = args.find("threads"))
        apply_config_entry(cfg, "threads", *threads, "--threads");
    if (cfg.threads < 1) throw usage_error("threads must be >= 1");
    omp_set_num_threads(cfg.threads);
    return cfg;
}

std::set<std::string> with_common(std::set<std::string> flags) {
    flags.insert({"config", "set", "seed", "threads"});
    return flags;
}

std::set<std::string> parse_scope(const Dataset& dataset, const std::string* scope_flag) {
    const std::vector<std::string> all = dataset.verticals();
    if (!scope_flag) return {all.begin(), all.end()};
    std::set<std::string> scope;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = scope_flag->find(',', start);
        const std::string v =
            scope_flag->substr(start, pos == std::string::npos ? pos : pos - start);
        if (std::find(all.begin(), all.end(), v) == all.end())
            throw routing_error("scope vertical '" + v + "' is not in the dataset");
        scope.insert(v);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return scope;
}

// top-1 over the scope's queries against the full cross-vertical index
double scoped_top1(const EmbeddingNet& net, const Dataset& dataset,
                   const std::set<std::string>& scope) {
    EvalSplit split = make_split(dataset);
    std::vector<int> queries;
    for (int id : split.query_ids)
        if (scope.count(dataset.items[static_cast<std::size_t>(id)].vertical))
            queries.push_back(id);
    if (queries.empty()) return -1.0;
    split.query_ids = std::move(queries);
    return overall_top1(net, dataset, split);
}

int cmd_gen_data(const std::vector<std::string>& args) {
    const ParsedArgs parsed = parse_flags(args, 1, with_common({"out", "noise-rate"}));
    RunConfig cfg = build_config(parsed);
    if (const std::string* rate = parsed.find("noise-rate"))
        apply_config_entry(cfg, "noise_rate", *rate, "--noise-rate");
    const std::string& out = parsed.require("out");

    Dataset ds = generate(cfg.gen_spec());
    if (cfg.noise_rate > 0.0) {
        Rng rng(cfg.seed + seed_offset::label_noise);
        ds = add_label_noise(ds, cfg.noise_rate, rng);
    }
    save_dataset(ds, out);
    std::cout << "wrote " << out << ": " << ds.items.size() << " items, "
              << ds.verticals().size() << " verticals\n";
    return 0;
}

int cmd_train(const std::vector<std::string>& args) {
    const ParsedArgs parsed = parse_flags(
        args, 1, with_common({"data", "scope", "finetune", "model-out", "history-out"}));
    const RunConfig cfg = build_config(parsed);
    const Dataset ds = load_dataset(parsed.require("data"));
    const std::set<std::string> scope = parse_scope(ds, parsed.find("scope"));
    const std::string* history_out = parsed.find("history-out");

    TrainHooks hooks;
    if (history_out)
        hooks.eval_top1 = [&](const EmbeddingNet& net) { return scoped_top1(net, ds, scope); };

    auto [net, history] = train_specialist(ds, scope, cfg.net_config(), cfg.triplet_config(), hooks);

    if (const std::string* clean_path = parsed.find("finetune")) {
        const Dataset clean = load_dataset(*clean_path);
        TripletConfig ft = cfg.triplet_config();
        ft.steps = cfg.finetune_steps;
        TrainHooks ft_hooks;
        if (history_out)
            ft_hooks.eval_top1 = [&](const EmbeddingNet& net) { return scoped_top1(net, clean, scope); };
        const TrainHistory ft_history =
            train_specialist_from(net, clean, scope, ft, cfg.seed + seed_offset::finetune, ft_hooks);
        for (Checkpoint c : ft_history.checkpoints) {
            c.step += cfg.steps;
            history.checkpoints.push_back(c);
        }
    }

    save_model(net, parsed.require("model-out"));
    if (history_out) save_history(history, *history_out);
    std::cout << "trained on {";
    bool first = true;
    for (const std::string& v : scope) {
        std::cout << (first ? "" : ",") << v;
        first = false;
    }
    std::cout << "}, " << history.checkpoints.size() << " checkpoints\n";
    return 0;
}

int cmd_combine(const std::vector<std::string>& args) {
    const ParsedArgs parsed = parse_flags(
        args, 1, with_common({"data", "partition-out", "report-out", "models-out"}));
    const RunConfig cfg = build_config(parsed);
    const Dataset ds = load_dataset(parsed.require("data"));

    const GreedyResult result =
        greedy_combine(ds, default_vertical_order(ds), cfg.epsilon, cfg.net_config(),
                       cfg.triplet_config(), make_split(ds));

    save_partition(result.partition, parsed.require("partition-out"));
    if (const std::string* report_out = parsed.find("report-out"))
        save_combine_report(result.report, *report_out);
    if (const std::string* prefix = parsed.find("models-out"))
        for (std::size_t g = 0; g < result.registry.entries.size(); ++g)
            save_model(result.registry.entries[g].model, *prefix + "_g" + std::to_string(g) + ".json");

    std::cout << "partition:";
    for (const auto& group : result.partition.groups) {
        std::cout << " {";
        for (std::size_t i = 0; i < group.size(); ++i) std::cout << (i ? "," : "") << group[i];
        std::cout << "}";
    }
    std::cout << "\n";
    return 0;
}

int cmd_targets(const std::vector<std::string>& args) {
    const ParsedArgs parsed =
        parse_flags(args, 1, with_common({"data", "partition", "models", "out"}));
    build_config(parsed);
    const Dataset ds = load_dataset(parsed.require("data"));
    const VerticalPartition partition = load_partition(parsed.require("partition"));
    validate(partition, ds.verticals());

    std::vector<std::string> model_paths;
    {
        const std::string& list = parsed.require("models");
        std::size_t start = 0;
        for (;;) {
            const std::size_t pos = list.find(',', start);
            model_paths.push_back(list.substr(start, pos == std::string::npos ? pos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
    }
    if (model_paths.size() != partition.groups.size())
        throw routing_error("got " + std::to_string(model_paths.size()) + " models for " +
                            std::to_string(partition.groups.size()) + " partition groups");

    SpecialistRegistry registry;
    for (std::size_t g = 0; g < partition.groups.size(); ++g)
        registry.entries.push_back({partition.groups[g], load_model(model_paths[g])});

    const TargetEmbeddingSet targets = compute_targets(registry, ds);
    save_targets(targets, parsed.require("out"));
    std::cout << "wrote " << targets.targets.size() << " targets, dim " << targets.dim << "\n";
    return 0;
}

int cmd_distill(const std::vector<std::string>& args) {
    const ParsedArgs parsed =
        parse_flags(args, 1, with_common({"data", "targets", "model-out", "history-out"}));
    const RunConfig cfg = build_config(parsed);
    const Dataset ds = load_dataset(parsed.require("data"));
    const TargetEmbeddingSet targets = load_targets(parsed.require("targets"));

    NetConfig net_config = cfg.net_config();
    net_config.embedding_dim = targets.dim;
    auto [net, history] =
        train_unified(ds, targets, net_config, cfg.distill_steps, cfg.distill_lr,
                      cfg.distill_momentum, cfg.distill_batch, cfg.seed, cfg.checkpoint_every);

    save_model(net, parsed.require("model-out"));
    if (const std::string* history_out = parsed.find("history-out"))
        save_history(history, *history_out);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", mean_target_sqdist(net, ds, targets));
    std::cout << "distilled, mean squared distance to targets " << buf << "\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& args) {
    const ParsedArgs parsed =
        parse_flags(args, 1, with_common({"data", "model", "report-out", "csv-out"}));
    const RunConfig cfg = build_config(parsed);
    const Dataset ds = load_dataset(parsed.require("data"));
    const EmbeddingNet net = load_model(parsed.require("model"));

    const RetrievalReport report = top_k_accuracy(net, ds, make_split(ds), cfg.ks);
    save_report_json(report, parsed.require("report-out"));
    if (const std::string* csv_out = parsed.find("csv-out")) save_report_csv(report, *csv_out);

    char buf[64];
    for (const VerticalAccuracy& row : report.rows) {
        std::cout << row.vertical << ":";
        for (std::size_t j = 0; j < report.ks.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.4f", row.accuracy[j]);
            std::cout << " top" << report.ks[j] << "=" << buf;
        }
        std::cout << " (" << row.n_queries << " queries)\n";
    }
    return 0;
}

int cmd_compare(const std::vector<std::string>& args) {
    const ParsedArgs parsed = parse_flags(args, 1, with_common({"a", "b", "out"}));
    build_config(parsed);
    const RetrievalReport a = load_report_json(parsed.require("a"));
    const RetrievalReport b = load_report_json(parsed.require("b"));
    const ComparisonReport deltas = compare_reports(a, b);
    if (const std::string* out = parsed.find("out")) save_comparison_json(deltas, *out);

    char buf[64];
    for (const ComparisonRow& row : deltas.rows) {
        std::cout << row.vertical << ":";
        for (std::size_t j = 0; j < deltas.ks.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%+.4f", row.delta[j]);
            std::cout << " k" << deltas.ks[j] << "=" << buf;
        }
        std::cout << "\n";
    }
    std::cout << "mean:";
    for (std::size_t j = 0; j < deltas.ks.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%+.4f", deltas.mean_delta[j]);
        std::cout << " k" << deltas.ks[j] << "=" << buf;
    }
    std::cout << "\n";
    return 0;
}

int cmd_analyze(const std::vector<std::string>& args) {
    const ParsedArgs parsed =
        parse_flags(args, 1, with_common({"data", "model", "proj-out", "report-out"}));
    build_config(parsed);
    const Dataset ds = load_dataset(parsed.require("data"));
    const EmbeddingNet net = load_model(parsed.require("model"));

    std::vector<int> ids;
    std::vector<std::string> labels;
    for (const Item& item : ds.items) {
        ids.push_back(item.item_id);
        labels.push_back(item.vertical);
    }
    const Matrix emb = forward(net, gather_features(ds, ids));

    if (const std::string* proj_out = parsed.find("proj-out"))
        save_projection_csv(pca_project(emb, 2), ids, labels, *proj_out);
    const OccupancyReport report = occupancy(emb, labels);
    if (const std::string* report_out = parsed.find("report-out"))
        save_occupancy_json(report, *report_out);

    double min_inter = -1.0;
    for (std::size_t a = 0; a < report.verticals.size(); ++a)
        for (std::size_t b = a + 1; b < report.verticals.size(); ++b)
            if (min_inter < 0.0 || report.inter_centroid[a][b] < min_inter)
                min_inter = report.inter_centroid[a][b];
    double mean_intra = 0.0;
    for (double m : report.mean_intra) mean_intra += m;
    mean_intra /= static_cast<double>(report.mean_intra.size());

    char buf[96];
    std::snprintf(buf, sizeof(buf), "silhouette %.4f, min inter-centroid %.4f, mean intra %.4f",
                  report.mean_silhouette, min_inter, mean_intra);
    std::cout << buf << "\n";
    return 0;
}

int cmd_check_grad(const std::vector<std::string>& args) {
    const ParsedArgs parsed = parse_flags(args, 1, with_common({"loss", "tol"}));
    const RunConfig cfg = build_config(parsed);
    double tol = 1e-4;
    if (const std::string* t = parsed.find("tol")) {
        char* end = nullptr;
        tol = std::strtod(t->c_str(), &end);
        if (t->empty() || end != t->c_str() + t->size() || tol <= 0.0)
            throw usage_error("--tol expects a positive number");
    }
    std::string loss = "both";
    if (const std::string* l = parsed.find("loss")) loss = *l;
    if (loss != "triplet" && loss != "distill" && loss != "both")
        throw usage_error("--loss must be triplet, distill or both");

    const EmbeddingNet net = init_net(cfg.net_config());
    bool all_passed = true;
    char buf[64];
    for (const char* name : {"triplet", "distill"}) {
        if (loss != "both" && loss != name) continue;
        const LossKind kind = std::string(name) == "triplet" ? LossKind::triplet : LossKind::distill;
        const GradCheckReport report = grad_check(net, kind, tol);
        std::snprintf(buf, sizeof(buf), "%.3e", report.max_rel_err);
        std::cout << name << ": max relative error " << buf << " over "
                  << report.layer_max_rel_err.size() << " layers -> "
                  << (report.passed ? "pass" : "FAIL") << "\n";
        all_passed = all_passed && report.passed;
    }
    if (!all_passed) throw train_error("gradient check failed");
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    try {
        if (args.empty()) throw usage_error("no command given");
        const std::string& cmd = args[0];
        if (cmd == "--help" || cmd == "-h" || cmd == "help") {
            std::cout << kUsage;
            return 0;
        }
        if (cmd == "gen-data") return cmd_gen_data(args);
        if (cmd == "train") return cmd_train(args);
        if (cmd == "combine") return cmd_combine(args);
        if (cmd == "targets") return cmd_targets(args);
        if (cmd == "distill") return cmd_distill(args);
        if (cmd == "eval") return cmd_eval(args);
        if (cmd == "compare") return cmd_compare(args);
        if (cmd == "analyze") return cmd_analyze(args);
        if (cmd == "check-grad") return cmd_check_grad(args);
        throw usage_error("unknown command '" + cmd + "'");
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n\n" << kUsage;
        return 2;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace uniembed

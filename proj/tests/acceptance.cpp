// Acceptance suite: nine go/no-go checks over the whole pipeline, one line
// each. Exits with the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uniembed/analysis.hpp"
#include "uniembed/cli.hpp"
#include "uniembed/config.hpp"
#include "uniembed/kernels.hpp"
#include "uniembed/net.hpp"
#include "uniembed/retrieval.hpp"
#include "uniembed/rng.hpp"
#include "uniembed/synthdata.hpp"
#include "uniembed/triplet.hpp"
#include "uniembed/unify.hpp"

using namespace uniembed;

namespace {

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

int failures = 0;

// limit_s <= 0 means the criterion has no runtime budget.
void report(int index, bool passed, const std::string& detail, double seconds, double limit_s) {
    const std::string budget =
        limit_s > 0.0 ? fmt("[%.1fs < %.0fs]", seconds, limit_s) : fmt("[%.1fs]", seconds);
    std::printf("criterion %d: %s  %s  %s\n", index, passed ? "PASS" : "FAIL", detail.c_str(),
                budget.c_str());
    if (passed && limit_s > 0.0 && seconds >= limit_s) {
        std::printf("criterion %d: FAIL  runtime budget exceeded\n", index);
        ++failures;
    } else if (!passed) {
        ++failures;
    }
}

void report_error(int index, const std::exception& e, double seconds) {
    report(index, false, fmt("threw: %s", e.what()), seconds, 0.0);
}

// ---- criterion 2 oracles ----

// Candidate list per (anchor, positive) pair, band pick by (distance, index),
// farthest fallback. Mirrors the documented contract, not the implementation.
std::vector<Triplet> brute_mine(const Matrix& emb, const std::vector<std::string>& prod,
                                const std::vector<std::string>& vert, double alpha) {
    std::vector<Triplet> out;
    const int n = emb.rows;
    for (int a = 0; a < n; ++a) {
        for (int p = 0; p < n; ++p) {
            if (a == p || prod[static_cast<std::size_t>(a)] != prod[static_cast<std::size_t>(p)])
                continue;
            const double dap = sqdist(emb.row(a), emb.row(p), emb.cols);
            std::vector<std::pair<double, int>> cands;
            for (int c = 0; c < n; ++c)
                if (vert[static_cast<std::size_t>(c)] == vert[static_cast<std::size_t>(a)] &&
                    prod[static_cast<std::size_t>(c)] != prod[static_cast<std::size_t>(a)])
                    cands.emplace_back(sqdist(emb.row(a), emb.row(c), emb.cols), c);
            if (cands.empty()) continue;
            int neg = -1;
            for (const auto& [d, i] : cands)
                if (d > dap && d <= dap + alpha &&
                    (neg < 0 || d < sqdist(emb.row(a), emb.row(neg), emb.cols)))
                    neg = i;
            if (neg < 0)
                for (const auto& [d, i] : cands)
                    if (neg < 0 || d > sqdist(emb.row(a), emb.row(neg), emb.cols)) neg = i;
            out.push_back({a, p, neg});
        }
    }
    return out;
}

bool same_triplets(const std::vector<Triplet>& a, const std::vector<Triplet>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].anchor != b[i].anchor || a[i].positive != b[i].positive ||
            a[i].negative != b[i].negative)
            return false;
    return true;
}

// Full-sort retrieval oracle over a dataset: per query, rank every index item
// by (squared distance, id) and score at k on a shared product.
RetrievalReport retrieval_oracle(const EmbeddingNet& net, const Dataset& ds,
                                 const EvalSplit& split, const std::vector<int>& ks) {
    const Matrix qe = forward(net, gather_features(ds, split.query_ids));
    const Matrix ie = forward(net, gather_features(ds, split.index_ids));

    std::map<std::string, std::vector<int>> correct_at;  // vertical -> per-k counts
    std::map<std::string, int> n_queries;
    for (std::size_t q = 0; q < split.query_ids.size(); ++q) {
        const Item& query = ds.items[static_cast<std::size_t>(split.query_ids[q])];
        std::vector<std::pair<double, int>> order;
        for (std::size_t i = 0; i < split.index_ids.size(); ++i)
            order.emplace_back(sqdist(qe.row(static_cast<int>(q)), ie.row(static_cast<int>(i)), qe.cols),
                               split.index_ids[i]);
        std::sort(order.begin(), order.end());

        auto& counts = correct_at[query.vertical];
        counts.resize(ks.size(), 0);
        n_queries[query.vertical]++;
        for (std::size_t j = 0; j < ks.size(); ++j) {
            const int k = std::min<int>(ks[j], static_cast<int>(order.size()));
            for (int r = 0; r < k; ++r)
                if (ds.items[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)]
                        .product_id == query.product_id) {
                    counts[j]++;
                    break;
                }
        }
    }

    RetrievalReport report;
    report.ks = ks;
    for (const std::string& v : ds.verticals()) {
        if (!n_queries.count(v)) continue;
        VerticalAccuracy row;
        row.vertical = v;
        row.n_queries = n_queries[v];
        for (std::size_t j = 0; j < ks.size(); ++j)
            row.accuracy.push_back(static_cast<double>(correct_at[v][j]) / n_queries[v]);
        report.rows.push_back(std::move(row));
    }
    return report;
}

bool same_report(const RetrievalReport& a, const RetrievalReport& b) {
    if (a.ks != b.ks || a.rows.size() != b.rows.size()) return false;
    for (std::size_t r = 0; r < a.rows.size(); ++r)
        if (a.rows[r].vertical != b.rows[r].vertical ||
            a.rows[r].n_queries != b.rows[r].n_queries ||
            a.rows[r].accuracy != b.rows[r].accuracy)
            return false;
    return true;
}

// ---- shared helpers ----

double row_top1(const RetrievalReport& report, const std::string& vertical) {
    for (const VerticalAccuracy& row : report.rows)
        if (row.vertical == vertical) return row.accuracy.front();
    return -1.0;
}

double mean_top1(const RetrievalReport& report) {
    double sum = 0.0;
    for (const VerticalAccuracy& row : report.rows) sum += row.accuracy.front();
    return sum / static_cast<double>(report.rows.size());
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<missing " + path + ">";
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_quiet(const std::vector<std::string>& args) {
    std::stringstream sink;
    std::streambuf* out = std::cout.rdbuf(sink.rdbuf());
    std::streambuf* err = std::cerr.rdbuf(sink.rdbuf());
    const int code = run(args);
    std::cout.rdbuf(out);
    std::cerr.rdbuf(err);
    if (code != 0) std::printf("%s\n", sink.str().c_str());
    return code;
}

}  // namespace

int main() {
    const RunConfig cfg;  // seed 42 defaults everywhere
    const std::vector<int> ks = cfg.ks;
    std::vector<RetrievalReport> suite_reports;

    // ---- criterion 1: gradient suite ----
    {
        Timer t;
        try {
            double worst = 0.0;
            bool passed = true;
            std::string detail;
            for (const std::uint64_t seed : {cfg.seed, cfg.seed + 1000}) {
                RunConfig c = cfg;
                c.seed = seed;
                const EmbeddingNet net = init_net(c.net_config());
                for (const LossKind kind : {LossKind::triplet, LossKind::distill}) {
                    const GradCheckReport r = grad_check(net, kind, 1e-4);
                    passed = passed && r.passed;
                    worst = std::max(worst, r.max_rel_err);
                }
            }
            detail = fmt("2 seeded nets x 2 losses, max rel err %.2e (tol 1e-4, kink-nudged)",
                         worst);
            report(1, passed && worst < 1e-4, detail, t.seconds(), 5.0);
        } catch (const std::exception& e) {
            report_error(1, e, t.seconds());
        }
    }

    // ---- criterion 2: brute-force oracle equivalence ----
    {
        Timer t;
        try {
            int mine_ok = 0;
            const int mine_trials = 30;
            for (int trial = 0; trial < mine_trials; ++trial) {
                Rng rng(1000 + static_cast<std::uint64_t>(trial));
                const int n = 2 + static_cast<int>(rng.uniform(0.0, 63.0));  // <= 64 rows
                const int dim = trial % 2 ? 4 : 8;
                const double alpha = (trial % 3 == 0) ? 0.05 : (trial % 3 == 1 ? 0.2 : 0.6);
                Matrix emb(n, dim);
                for (double& x : emb.a) x = rng.uniform(-1.0, 1.0);
                std::vector<std::string> prod, vert;
                for (int i = 0; i < n; ++i) {
                    const int v = static_cast<int>(rng.uniform(0.0, 2.0));
                    const int p = static_cast<int>(rng.uniform(0.0, 4.0));
                    vert.push_back("v" + std::to_string(v));
                    prod.push_back("v" + std::to_string(v) + "_p" + std::to_string(p));
                }
                if (same_triplets(mine_semi_hard(emb, prod, vert, alpha),
                                  brute_mine(emb, prod, vert, alpha)))
                    ++mine_ok;
            }

            int topk_ok = 0, topk_total = 0;
            for (const std::uint64_t seed : {11ULL, 12ULL}) {
                GenSpec gs;
                gs.verticals = seed == 11 ? 3 : 4;
                gs.products_per_vertical = seed == 11 ? 5 : 4;
                gs.items_per_product = seed == 11 ? 6 : 12;  // 90 and 192 items, <= 200
                gs.input_dim = 8;
                gs.seed = seed;
                const Dataset ds = generate(gs);
                NetConfig nc;
                nc.input_dim = 8;
                nc.hidden_dims = {16};
                nc.embedding_dim = 4;
                nc.seed = seed + 1;
                const EmbeddingNet net = init_net(nc);
                const EvalSplit split = make_split(ds);
                for (const std::vector<int>& klist :
                     {std::vector<int>{1, 3, 10}, std::vector<int>{1, 5, 20}}) {
                    ++topk_total;
                    const RetrievalReport got = top_k_accuracy(net, ds, split, klist);
                    if (same_report(got, retrieval_oracle(net, ds, split, klist))) ++topk_ok;
                    suite_reports.push_back(got);
                }
            }

            const bool passed = mine_ok == mine_trials && topk_ok == topk_total;
            report(2, passed,
                   fmt("mining %d/%d batches exact; top-k %d/%d dataset/k-list combos exact",
                       mine_ok, mine_trials, topk_ok, topk_total),
                   t.seconds(), 10.0);
        } catch (const std::exception& e) {
            report_error(2, e, t.seconds());
        }
    }

    // shared state for criteria 3, 5, 7, 8
    Dataset clean;
    EvalSplit clean_split;
    std::vector<std::string> clean_verticals;
    std::map<std::string, EmbeddingNet> specialists;
    std::map<std::string, double> specialist_top1;
    bool have_specialists = false;

    // ---- criterion 3: specialist quality ----
    {
        Timer t;
        try {
            clean = generate(cfg.gen_spec());
            clean_split = make_split(clean);
            clean_verticals = clean.verticals();
            bool passed = true;
            std::string detail;
            for (const std::string& v : clean_verticals) {
                auto [net, history] =
                    train_specialist(clean, {v}, cfg.net_config(), cfg.triplet_config());
                const RetrievalReport rep = top_k_accuracy(net, clean, clean_split, ks);
                suite_reports.push_back(rep);
                const double top1 = row_top1(rep, v);
                specialist_top1[v] = top1;
                specialists.emplace(v, std::move(net));
                passed = passed && top1 >= 0.80 - 1e-9;
                detail += fmt("%s%s %.3f", detail.empty() ? "" : " ", v.c_str(), top1);
            }
            have_specialists = passed || !specialists.empty();
            report(3, passed, detail + " (each >= 0.80, 2000 steps, seed 42)", t.seconds(), 60.0);
        } catch (const std::exception& e) {
            report_error(3, e, t.seconds());
        }
    }

    // ---- criterion 4: conflict degradation and greedy exclusion ----
    {
        Timer t;
        try {
            RunConfig ccfg = cfg;
            ccfg.conflict_verticals = {3};
            const Dataset conflict = generate(ccfg.gen_spec());
            const EvalSplit split = make_split(conflict);
            const std::vector<std::string> verts = conflict.verticals();
            const std::string conflict_vertical = "v3";

            std::map<std::string, double> base_top1;
            for (const std::string& v : verts) {
                auto [net, history] =
                    train_specialist(conflict, {v}, ccfg.net_config(), ccfg.triplet_config());
                const RetrievalReport rep = top_k_accuracy(net, conflict, split, ks);
                suite_reports.push_back(rep);
                base_top1[v] = row_top1(rep, v);
            }

            const std::set<std::string> all(verts.begin(), verts.end());
            auto [combined, chist] =
                train_specialist(conflict, all, ccfg.net_config(), ccfg.triplet_config());
            const RetrievalReport comb_rep = top_k_accuracy(combined, conflict, split, ks);
            suite_reports.push_back(comb_rep);

            double worst_gap = -1e300;
            std::string worst_vertical;
            for (const std::string& v : verts) {
                const double gap = (base_top1[v] - row_top1(comb_rep, v)) * 100.0;
                if (gap > worst_gap) {
                    worst_gap = gap;
                    worst_vertical = v;
                }
            }
            const bool degraded = worst_gap >= 10.0 - 1e-6;

            const GreedyResult greedy =
                greedy_combine(conflict, default_vertical_order(conflict), 1.0,
                               ccfg.net_config(), ccfg.triplet_config(), split);
            bool excluded = false;
            std::string partition_str;
            for (const auto& group : greedy.partition.groups) {
                partition_str += "{";
                for (std::size_t i = 0; i < group.size(); ++i)
                    partition_str += (i ? "," : "") + group[i];
                partition_str += "}";
                if (group.size() == 1 && group[0] == conflict_vertical) excluded = true;
            }

            report(4, degraded && excluded,
                   fmt("%s drops %.1f pts combined vs specialist (need >= 10); greedy eps=1.0 -> %s",
                       worst_vertical.c_str(), worst_gap, partition_str.c_str()),
                   t.seconds(), 180.0);
        } catch (const std::exception& e) {
            report_error(4, e, t.seconds());
        }
    }

    // ---- criterion 5: unified model within 5 points of specialists ----
    TargetEmbeddingSet targets;
    bool have_targets = false;
    {
        Timer t;
        try {
            if (!have_specialists) throw std::runtime_error("no specialists from criterion 3");
            SpecialistRegistry registry;
            for (const std::string& v : clean_verticals)
                registry.entries.push_back({{v}, specialists.at(v)});
            targets = compute_targets(registry, clean);
            have_targets = true;

            auto [unified, history] = train_unified(
                clean, targets, cfg.net_config(), cfg.distill_steps, cfg.distill_lr,
                cfg.distill_momentum, cfg.distill_batch, cfg.seed, cfg.checkpoint_every);
            const RetrievalReport rep = top_k_accuracy(unified, clean, clean_split, ks);
            suite_reports.push_back(rep);

            double worst_delta = 0.0;
            std::string worst_vertical = clean_verticals.front();
            for (const std::string& v : clean_verticals) {
                const double delta = std::abs(row_top1(rep, v) - specialist_top1[v]) * 100.0;
                if (delta > worst_delta) {
                    worst_delta = delta;
                    worst_vertical = v;
                }
            }
            const double msd = mean_target_sqdist(unified, clean, targets);
            const bool passed = worst_delta <= 5.0 + 1e-6 && msd < 0.05;
            report(5, passed,
                   fmt("worst |unified - specialist| %.1f pts on %s (need <= 5); "
                       "mean sqdist to targets %.4f (need < 0.05)",
                       worst_delta, worst_vertical.c_str(), msd),
                   t.seconds(), 120.0);
        } catch (const std::exception& e) {
            report_error(5, e, t.seconds());
        }
    }

    // ---- criterion 8 runs before 6 so its reports join the monotonicity pool ----
    std::string crit8_detail;
    bool crit8_passed = false, crit8_threw = false;
    double crit8_seconds = 0.0;
    {
        Timer t;
        try {
            Rng noise_rng(cfg.seed + seed_offset::label_noise);
            const Dataset noisy = add_label_noise(clean, 0.2, noise_rng);
            const std::set<std::string> all(clean_verticals.begin(), clean_verticals.end());

            auto [noisy_net, nhist] =
                train_specialist(noisy, all, cfg.net_config(), cfg.triplet_config());
            const RetrievalReport noisy_rep = top_k_accuracy(noisy_net, clean, clean_split, ks);
            suite_reports.push_back(noisy_rep);

            EmbeddingNet tuned = noisy_net;
            TripletConfig ft = cfg.triplet_config();
            ft.steps = cfg.finetune_steps;
            train_specialist_from(tuned, clean, all, ft, cfg.seed + seed_offset::finetune);
            const RetrievalReport tuned_rep = top_k_accuracy(tuned, clean, clean_split, ks);
            suite_reports.push_back(tuned_rep);

            const double before = mean_top1(noisy_rep), after = mean_top1(tuned_rep);
            crit8_passed = after >= before - 1e-9;
            crit8_detail = fmt("mean top-1 %.3f noisy-only -> %.3f fine-tuned (need >=)",
                               before, after);
        } catch (const std::exception& e) {
            crit8_threw = true;
            crit8_detail = fmt("threw: %s", e.what());
        }
        crit8_seconds = t.seconds();
    }

    // ---- criterion 6: top-k monotonicity across every report above ----
    {
        Timer t;
        try {
            int rows = 0;
            bool passed = true;
            for (const RetrievalReport& rep : suite_reports)
                for (const VerticalAccuracy& row : rep.rows) {
                    ++rows;
                    for (std::size_t j = 1; j < row.accuracy.size(); ++j)
                        passed = passed && row.accuracy[j] >= row.accuracy[j - 1];
                }
            report(6, passed,
                   fmt("non-decreasing accuracy in k over %d report rows (%zu reports)", rows,
                       suite_reports.size()),
                   t.seconds(), 0.0);
        } catch (const std::exception& e) {
            report_error(6, e, t.seconds());
        }
    }

    // ---- criterion 7: specialist target embeddings separate by vertical ----
    {
        Timer t;
        try {
            if (!have_targets) throw std::runtime_error("no targets from criterion 5");
            const std::vector<int> ids = training_items(clean);
            Matrix emb(static_cast<int>(ids.size()), targets.dim);
            std::vector<std::string> labels;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const std::vector<double>& row = targets.targets.at(ids[i]);
                for (int j = 0; j < targets.dim; ++j) emb(static_cast<int>(i), j) = row[static_cast<std::size_t>(j)];
                labels.push_back(clean.items[static_cast<std::size_t>(ids[i])].vertical);
            }
            const OccupancyReport occ = occupancy(emb, labels);

            double min_inter = -1.0;
            for (std::size_t a = 0; a < occ.verticals.size(); ++a)
                for (std::size_t b = a + 1; b < occ.verticals.size(); ++b)
                    if (min_inter < 0.0 || occ.inter_centroid[a][b] < min_inter)
                        min_inter = occ.inter_centroid[a][b];
            double mean_intra = 0.0;
            for (double m : occ.mean_intra) mean_intra += m;
            mean_intra /= static_cast<double>(occ.mean_intra.size());

            const bool passed = min_inter > mean_intra && occ.mean_silhouette > 0.2;
            report(7, passed,
                   fmt("min inter-centroid %.3f vs mean intra %.3f (need >); "
                       "silhouette %.3f (need > 0.2)",
                       min_inter, mean_intra, occ.mean_silhouette),
                   t.seconds(), 0.0);
        } catch (const std::exception& e) {
            report_error(7, e, t.seconds());
        }
    }

    // ---- criterion 8 (computed above) ----
    report(8, crit8_passed && !crit8_threw, crit8_detail, crit8_seconds, 0.0);

    // ---- criterion 9: pipeline determinism and lossless round trips ----
    {
        Timer t;
        try {
            namespace fs = std::filesystem;
            const std::vector<std::string> artifacts = {
                "data.csv",      "partition.json",    "combine.json", "spec_g0.json",
                "spec_g1.json",  "targets.csv",       "distill.csv",  "unified.json",
                "eval_unified.json", "eval_unified.csv", "eval_g0.json", "cmp.json",
                "occ.json",      "proj.csv"};

            auto run_pipeline = [&](const std::string& dir) {
                fs::remove_all(dir);
                fs::create_directories(dir);
                const auto p = [&](const char* name) { return dir + "/" + name; };
                const std::vector<std::vector<std::string>> steps = {
                    {"gen-data", "--set", "conflict_verticals=1", "--out", p("data.csv")},
                    {"combine", "--data", p("data.csv"), "--partition-out", p("partition.json"),
                     "--report-out", p("combine.json"), "--models-out", p("spec")},
                    {"targets", "--data", p("data.csv"), "--partition", p("partition.json"),
                     "--models", p("spec_g0.json") + "," + p("spec_g1.json"), "--out",
                     p("targets.csv")},
                    {"distill", "--data", p("data.csv"), "--targets", p("targets.csv"),
                     "--model-out", p("unified.json"), "--history-out", p("distill.csv")},
                    {"eval", "--data", p("data.csv"), "--model", p("unified.json"),
                     "--report-out", p("eval_unified.json"), "--csv-out", p("eval_unified.csv")},
                    {"eval", "--data", p("data.csv"), "--model", p("spec_g0.json"),
                     "--report-out", p("eval_g0.json")},
                    {"compare", "--a", p("eval_g0.json"), "--b", p("eval_unified.json"), "--out",
                     p("cmp.json")},
                    {"analyze", "--data", p("data.csv"), "--model", p("unified.json"),
                     "--report-out", p("occ.json"), "--proj-out", p("proj.csv")}};
                for (const auto& step : steps)
                    if (run_quiet(step) != 0)
                        throw std::runtime_error("pipeline step '" + step[0] + "' failed");
            };

            run_pipeline("acc_pipe_a");
            run_pipeline("acc_pipe_b");

            int identical = 0;
            for (const std::string& name : artifacts)
                if (read_bytes("acc_pipe_a/" + name) == read_bytes("acc_pipe_b/" + name))
                    ++identical;

            // round trips: load + save reproduces the file byte for byte
            const Dataset ds = load_dataset("acc_pipe_a/data.csv");
            save_dataset(ds, "acc_pipe_a/rt.csv");
            const bool dataset_rt =
                read_bytes("acc_pipe_a/rt.csv") == read_bytes("acc_pipe_a/data.csv");
            const EmbeddingNet net = load_model("acc_pipe_a/unified.json");
            save_model(net, "acc_pipe_a/rt.json");
            const bool model_rt =
                read_bytes("acc_pipe_a/rt.json") == read_bytes("acc_pipe_a/unified.json");

            fs::remove_all("acc_pipe_a");
            fs::remove_all("acc_pipe_b");

            const bool passed =
                identical == static_cast<int>(artifacts.size()) && dataset_rt && model_rt;
            report(9, passed,
                   fmt("two seeded runs: %d/%zu artifacts byte-identical; dataset round trip %s, "
                       "model round trip %s",
                       identical, artifacts.size(), dataset_rt ? "lossless" : "LOSSY",
                       model_rt ? "lossless" : "LOSSY"),
                   t.seconds(), 0.0);
        } catch (const std::exception& e) {
            report_error(9, e, t.seconds());
        }
    }

    if (failures) std::printf("%d of 9 criteria failed\n", failures);
    else std::printf("all 9 criteria passed\n");
    return failures;
}

#include "invseq/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "invseq/errors.hpp"
#include "invseq/textio.hpp"

namespace invseq::harness {

double framewise_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw DimensionError("framewise_accuracy: " + std::to_string(predicted.size()) +
                             " predictions for " + std::to_string(truth.size()) + " labels");
    }
    std::size_t matches = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) matches++;
    return 100.0 * static_cast<double>(matches) / static_cast<double>(predicted.size());
}

SplitSpec SplitSpec::parse(const std::string& text) {
    SplitSpec s;
    if (text == "louo") {
        s.kind = Kind::louo;
    } else if (text == "lotO" || text == "loto") {
        s.kind = Kind::leave_one_technique_out;
    } else if (text.rfind("kfold", 0) == 0) {
        s.kind = Kind::kfold;
        auto colon = text.find(':');
        if (colon != std::string::npos) {
            s.k = static_cast<std::size_t>(parse_long(text.substr(colon + 1)));
        }
    } else {
        throw ConfigError("unknown split '" + text + "' (expected louo|kfold[:k]|loto)");
    }
    return s;
}

std::string SplitSpec::name() const {
    switch (kind) {
        case Kind::louo: return "louo";
        case Kind::leave_one_technique_out: return "loto";
        case Kind::kfold: return "kfold:" + std::to_string(k);
    }
    return "?";
}

std::vector<data::Fold> make_folds(const std::vector<data::MultiStreamTrial>& trials,
                                   const SplitSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case SplitSpec::Kind::louo: return data::split_louo(trials);
        case SplitSpec::Kind::leave_one_technique_out:
            return data::split_leave_one_technique_out(trials);
        case SplitSpec::Kind::kfold: return data::split_kfold(trials, spec.k, seed);
    }
    throw ConfigError("make_folds: bad split kind");
}

EvalReport evaluate(const net::Model& model, const net::TrialCache& cache,
                    const std::vector<int>& test_ids) {
    if (test_ids.empty()) throw DataError("evaluate: no test trials");
    auto start = std::chrono::steady_clock::now();
    EvalReport rep;
    rep.variant = model.core.kind;
    rep.mode = model.core.cfg.mode;
    rep.states = model.core.cfg.states;
    rep.confusion = Tensor({rep.states, rep.states});

    std::size_t matches = 0, total = 0;
    FoldResult fold;
    fold.key = "all";
    fold.test_ids = test_ids;
    std::sort(fold.test_ids.begin(), fold.test_ids.end());
    for (int id : fold.test_ids) {
        const auto& trial = cache.trial(id);
        std::vector<int> pred = predict_trial(model, cache, id);
        for (std::size_t t = 0; t < pred.size(); ++t) {
            int truth = trial.labels[t];
            rep.confusion.at(static_cast<std::size_t>(truth),
                             static_cast<std::size_t>(pred[t])) += 1.0;
            if (truth == pred[t]) matches++;
            total++;
        }
    }
    fold.accuracy = 100.0 * static_cast<double>(matches) / static_cast<double>(total);
    rep.folds.push_back(std::move(fold));
    rep.mean_accuracy = rep.folds[0].accuracy;
    rep.std_accuracy = 0.0;
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

std::vector<dtwc::TrialSeries> kinematics_series(
    const std::vector<data::MultiStreamTrial>& trials, const std::vector<int>& ids) {
    std::vector<dtwc::TrialSeries> out;
    for (int id : ids) {
        const auto& t = data::trial_by_id(trials, id);
        out.push_back(dtwc::TrialSeries{t.id, t.kin});
    }
    return out;
}

dtwc::TechniqueLabels cluster_techniques(const std::vector<data::MultiStreamTrial>& trials,
                                         const std::vector<int>& train_ids,
                                         const ClusterConfig& cfg, std::uint64_t seed) {
    auto series = kinematics_series(trials, train_ids);
    auto dm = dtwc::pairwise_dtw(series, cfg.band);
    dtwc::ClusterAssignment assignment;
    if (cfg.k > 0) {
        assignment = dtwc::cluster(dm, cfg.k, cfg.restarts, seed);
    } else {
        std::size_t k_max = std::min(cfg.k_max, dm.size());
        auto sel = dtwc::select_k(dm, cfg.k_min, k_max, cfg.restarts, seed);
        assignment = sel.chosen;
    }
    return dtwc::labels_from(dm, assignment);
}

namespace {

void aggregate(EvalReport& rep) {
    double mean = 0.0;
    for (const auto& f : rep.folds) mean += f.accuracy;
    mean /= static_cast<double>(rep.folds.size());
    double var = 0.0;
    for (const auto& f : rep.folds) var += (f.accuracy - mean) * (f.accuracy - mean);
    var /= static_cast<double>(rep.folds.size());
    rep.mean_accuracy = mean;
    rep.std_accuracy = std::sqrt(var);
}

}  // namespace

EvalReport run_experiment(const std::vector<data::MultiStreamTrial>& trials,
                          const SplitSpec& split, net::VariantKind kind, const Config& config,
                          std::uint64_t seed) {
    auto start = std::chrono::steady_clock::now();
    auto folds = make_folds(trials, split, seed);

    EvalReport rep;
    rep.variant = kind;
    rep.mode = config.model.mode;
    rep.seed = seed;
    rep.states = config.dataset.states;
    rep.confusion = Tensor({rep.states, rep.states});
    rep.config_echo = config.to_json_string();

    for (std::size_t fi = 0; fi < folds.size(); ++fi) {
        const data::Fold& fold = folds[fi];
        std::uint64_t fold_seed = substream_seed(seed, 0x666f6cULL, fi);

        net::ModelConfig mcfg = config.model;
        dtwc::TechniqueLabels labels;
        const dtwc::TechniqueLabels* labels_ptr = nullptr;
        std::vector<int> cluster_inputs;
        if (kind == net::VariantKind::FULL) {
            labels = cluster_techniques(trials, fold.train_ids, config.cluster,
                                        substream_seed(fold_seed, 0x636c7573ULL));
            labels_ptr = &labels;
            mcfg.techniques = labels.k;
            cluster_inputs = fold.train_ids;
            std::sort(cluster_inputs.begin(), cluster_inputs.end());
        }

        net::Model model = net::Model::init(kind, config.encoder, mcfg, fold_seed);
        std::vector<data::MultiStreamTrial> scope;
        for (int id : fold.train_ids) scope.push_back(data::trial_by_id(trials, id));
        for (int id : fold.test_ids) scope.push_back(data::trial_by_id(trials, id));
        net::TrialCache cache(model.encoders, scope);

        net::TrainSchedule sched = config.train;
        sched.seed = substream_seed(fold_seed, 0x747261696eULL);
        net::train_minimax(model, cache, fold.train_ids, labels_ptr, sched);

        EvalReport fold_eval = evaluate(model, cache, fold.test_ids);
        FoldResult fr = fold_eval.folds[0];
        fr.key = fold.key;
        fr.cluster_input_ids = cluster_inputs;
        rep.folds.push_back(std::move(fr));
        for (std::size_t i = 0; i < rep.confusion.size(); ++i)
            rep.confusion[i] += fold_eval.confusion[i];
    }
    aggregate(rep);
    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

AblationReport run_ablation(const std::vector<data::MultiStreamTrial>& trials,
                            const SplitSpec& split, const Config& config, std::uint64_t seed) {
    AblationReport rep;
    rep.na = run_experiment(trials, split, net::VariantKind::NA, config, seed);
    rep.no = run_experiment(trials, split, net::VariantKind::NO, config, seed);
    rep.full = run_experiment(trials, split, net::VariantKind::FULL, config, seed);
    rep.delta_full_na = rep.full.mean_accuracy - rep.na.mean_accuracy;
    rep.delta_full_no = rep.full.mean_accuracy - rep.no.mean_accuracy;
    rep.delta_no_na = rep.no.mean_accuracy - rep.na.mean_accuracy;
    return rep;
}

DisentanglementReport disentanglement_report(const net::Model& model,
                                             const net::TrialCache& cache,
                                             const std::vector<int>& trial_ids) {
    auto records = net::export_embeddings(model, cache, trial_ids);
    std::set<int> states;
    for (const auto& r : records) states.insert(r.state);
    if (states.size() < 2) {
        throw ConfigError("disentanglement_report: fewer than 2 states present");
    }
    std::vector<Tensor> e1_points, e2_points;
    std::vector<int> labels;
    std::map<int, long> counts;
    for (const auto& r : records) {
        e1_points.push_back(r.mean_e1);
        e2_points.push_back(r.mean_e2);
        labels.push_back(r.state);
        counts[r.state]++;
    }
    DisentanglementReport rep;
    rep.silhouette_e1 = dtwc::silhouette_mean(dtwc::euclidean_matrix(e1_points), labels).mean;
    rep.silhouette_e2 = dtwc::silhouette_mean(dtwc::euclidean_matrix(e2_points), labels).mean;
    for (const auto& [state, count] : counts) rep.state_instance_counts.emplace_back(state, count);
    return rep;
}

KSelectionReport k_selection_report(const std::vector<data::MultiStreamTrial>& trials,
                                    const ClusterConfig& cluster_cfg, std::uint64_t seed) {
    std::vector<int> ids;
    for (const auto& t : trials) ids.push_back(t.id);
    auto series = kinematics_series(trials, ids);
    auto dm = dtwc::pairwise_dtw(series, cluster_cfg.band);
    std::size_t k_max = std::min(cluster_cfg.k_max, dm.size());
    auto sel = dtwc::select_k(dm, cluster_cfg.k_min, k_max, cluster_cfg.restarts, seed);

    KSelectionReport rep;
    rep.chosen_k = sel.chosen_k;
    rep.ks = sel.ks;
    rep.mean_silhouette = sel.silhouette_curve;
    double max_inertia = 0.0;
    for (double v : sel.inertia_curve) max_inertia = std::max(max_inertia, v);
    for (double v : sel.inertia_curve)
        rep.normalized_inertia.push_back(max_inertia > 0.0 ? v / max_inertia : 0.0);
    return rep;
}

double linear_probe_accuracy(const std::vector<Tensor>& features,
                             const std::vector<int>& labels, std::size_t classes,
                             std::uint64_t seed, int steps, int batch_size) {
    if (features.size() != labels.size() || features.empty()) {
        throw DimensionError("linear_probe_accuracy: feature/label count mismatch");
    }
    std::size_t dim = features[0].size();
    auto rng = make_rng(substream_seed(seed, 0x70726f6265ULL));
    ParamGroup probe;
    probe.name = "probe";
    probe.add("W", init_weight(rng, dim, classes));
    probe.add("b", Tensor({classes}));
    Adam opt(AdamHyper{1e-2, 0.9, 0.999, 1e-8});

    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();

    for (int step = 0; step < steps; ++step) {
        std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                              features.size());
        Tensor X({B, dim});
        std::vector<std::size_t> y(B);
        for (std::size_t r = 0; r < B; ++r) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            std::size_t idx = order[cursor++];
            for (std::size_t c = 0; c < dim; ++c) X.at(r, c) = features[idx][c];
            y[r] = static_cast<std::size_t>(labels[idx]);
        }
        Tape tape;
        TapeBindings b;
        b.bind(tape, probe);
        Var probs = softmax_rows(
            tape, add_row_broadcast(tape, matmul(tape, tape.leaf(X), b.var("probe", "W")),
                                    b.var("probe", "b")));
        Var loss = cross_entropy_rows_mean(tape, probs, y);
        tape.backward(loss);
        opt.step(probe, b.collect(tape, probe));
    }

    std::size_t hits = 0;
    const Tensor& W = probe.tensor("W");
    const Tensor& bias = probe.tensor("b");
    for (std::size_t i = 0; i < features.size(); ++i) {
        std::size_t best = 0;
        double best_v = -1e300;
        for (std::size_t c = 0; c < classes; ++c) {
            double v = bias[c];
            for (std::size_t d = 0; d < dim; ++d) v += features[i][d] * W.at(d, c);
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        if (static_cast<int>(best) == labels[i]) hits++;
    }
    return static_cast<double>(hits) / static_cast<double>(features.size());
}

// ---- report serialization ----------------------------------------------

namespace {

void append_eval_body(std::string& out, const EvalReport& r) {
    out += "variant " + net::variant_name(r.variant) + "\n";
    out += "mode " + std::string(r.mode == WindowMode::causal ? "causal" : "noncausal") + "\n";
    out += "seed " + std::to_string(r.seed) + "\n";
    out += "states " + std::to_string(r.states) + "\n";
    out += "folds " + std::to_string(r.folds.size()) + "\n";
    for (const auto& f : r.folds) {
        out += "fold " + f.key + " accuracy " + format_sig6(f.accuracy) + " test_ids";
        for (int id : f.test_ids) out += " " + std::to_string(id);
        out += "\n";
    }
    out += "mean_accuracy " + format_sig6(r.mean_accuracy) + "\n";
    out += "std_accuracy " + format_sig6(r.std_accuracy) + "\n";
    out += "confusion " + std::to_string(r.states) + "\n";
    for (std::size_t i = 0; i < r.states; ++i) {
        for (std::size_t j = 0; j < r.states; ++j) {
            if (j) out += ' ';
            out += format_sig6(r.confusion.at(i, j));
        }
        out += "\n";
    }
}

}  // namespace

std::string EvalReport::serialize() const {
    std::string out = "invseq-report v1\nkind eval\n";
    append_eval_body(out, *this);
    out += "config " + (config_echo.empty() ? "{}" : config_echo) + "\n";
    return out;
}

std::string AblationReport::serialize() const {
    std::string out = "invseq-report v1\nkind ablation\n";
    out += "== variant na ==\n";
    append_eval_body(out, na);
    out += "== variant no ==\n";
    append_eval_body(out, no);
    out += "== variant full ==\n";
    append_eval_body(out, full);
    out += "delta_full_minus_na " + format_sig6(delta_full_na) + "\n";
    out += "delta_full_minus_no " + format_sig6(delta_full_no) + "\n";
    out += "delta_no_minus_na " + format_sig6(delta_no_na) + "\n";
    out += "config " + (full.config_echo.empty() ? "{}" : full.config_echo) + "\n";
    return out;
}

std::string DisentanglementReport::serialize() const {
    std::string out = "invseq-report v1\nkind disentanglement\n";
    out += "silhouette_e1 " + format_sig6(silhouette_e1) + "\n";
    out += "silhouette_e2 " + format_sig6(silhouette_e2) + "\n";
    out += "state_instances " + std::to_string(state_instance_counts.size()) + "\n";
    for (const auto& [state, count] : state_instance_counts) {
        out += "state " + std::to_string(state) + " instances " + std::to_string(count) + "\n";
    }
    return out;
}

std::string KSelectionReport::serialize() const {
    std::string out = "invseq-report v1\nkind k-selection\n";
    out += "chosen_k " + std::to_string(chosen_k) + "\n";
    out += "entries " + std::to_string(ks.size()) + "\n";
    for (std::size_t i = 0; i < ks.size(); ++i) {
        out += "k " + std::to_string(ks[i]) + " normalized_inertia " +
               format_sig6(normalized_inertia[i]) + " mean_silhouette " +
               format_sig6(mean_silhouette[i]) + "\n";
    }
    return out;
}

std::string serialize_embeddings(const std::vector<net::EmbeddingRecord>& records) {
    std::string out = "invseq-embeddings v1\n";
    for (const auto& r : records) {
        out += "instance trial " + std::to_string(r.trial_id) + " state " +
               std::to_string(r.state) + " start " + std::to_string(r.start) + " length " +
               std::to_string(r.length) + "\ne1";
        for (std::size_t i = 0; i < r.mean_e1.size(); ++i)
            out += " " + format_double(r.mean_e1[i]);
        out += "\ne2";
        for (std::size_t i = 0; i < r.mean_e2.size(); ++i)
            out += " " + format_double(r.mean_e2[i]);
        out += "\n";
    }
    return out;
}

}  // namespace invseq::harness

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invseq/config.hpp"

namespace invseq::harness {

// 100 * matches / total over two equal-length label sequences.
double framewise_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

struct FoldResult {
    std::string key;
    double accuracy = 0.0;                // percent
    std::vector<int> test_ids;            // sorted
    std::vector<int> cluster_input_ids;   // trials seen by pairwise_dtw (audit)
};

struct EvalReport {
    net::VariantKind variant = net::VariantKind::FULL;
    WindowMode mode = WindowMode::causal;
    std::uint64_t seed = 0;
    std::size_t states = 0;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    Tensor confusion;  // [S x S], rows = true state, summed over folds
    std::string config_echo;
    double runtime_seconds = 0.0;  // console diagnostics only; not serialized

    // versioned structured text with a stable field order; numeric values at
    // six significant digits
    std::string serialize() const;
};

// Frame-wise evaluation of a trained model over whole trials.
EvalReport evaluate(const net::Model& model, const net::TrialCache& cache,
                    const std::vector<int>& test_ids);

struct SplitSpec {
    enum class Kind { louo, kfold, leave_one_technique_out };
    Kind kind = Kind::kfold;
    std::size_t k = 5;

    static SplitSpec parse(const std::string& text);
    std::string name() const;
};

std::vector<data::Fold> make_folds(const std::vector<data::MultiStreamTrial>& trials,
                                   const SplitSpec& spec, std::uint64_t seed);

// Cross-validated experiment: per fold, technique clustering runs on the
// training trials only (FULL variant), the model trains on the training
// trials and is scored on the held-out fold.
EvalReport run_experiment(const std::vector<data::MultiStreamTrial>& trials,
                          const SplitSpec& split, net::VariantKind kind, const Config& config,
                          std::uint64_t seed);

struct AblationReport {
    EvalReport na, no, full;
    double delta_full_na = 0.0;
    double delta_full_no = 0.0;
    double delta_no_na = 0.0;
    std::string serialize() const;
};

// NA, NO and FULL trained and evaluated on identical folds and seeds.
AblationReport run_ablation(const std::vector<data::MultiStreamTrial>& trials,
                            const SplitSpec& split, const Config& config, std::uint64_t seed);

struct DisentanglementReport {
    double silhouette_e1 = 0.0;
    double silhouette_e2 = 0.0;
    std::vector<std::pair<int, long>> state_instance_counts;  // state -> instances
    std::string serialize() const;
};

// Silhouette of state-labeled instance-mean embeddings, e1 vs e2 (Euclidean
// distances between state-instance means).
DisentanglementReport disentanglement_report(const net::Model& model,
                                             const net::TrialCache& cache,
                                             const std::vector<int>& trial_ids);

struct KSelectionReport {
    std::size_t chosen_k = 0;
    std::vector<std::size_t> ks;
    std::vector<double> normalized_inertia;  // relative to the curve maximum
    std::vector<double> mean_silhouette;
    std::string serialize() const;
};

KSelectionReport k_selection_report(const std::vector<data::MultiStreamTrial>& trials,
                                    const ClusterConfig& cluster_cfg, std::uint64_t seed);

// Kinematics series of the listed trials, for technique clustering.
std::vector<dtwc::TrialSeries> kinematics_series(
    const std::vector<data::MultiStreamTrial>& trials, const std::vector<int>& ids);

// Technique labels for training trials, using the configured k or the
// silhouette sweep when k = 0.
dtwc::TechniqueLabels cluster_techniques(const std::vector<data::MultiStreamTrial>& trials,
                                         const std::vector<int>& train_ids,
                                         const ClusterConfig& cfg, std::uint64_t seed);

// Accuracy of an affine-softmax probe trained to predict `labels` from
// `features`; measures how much label information the features expose.
double linear_probe_accuracy(const std::vector<Tensor>& features,
                             const std::vector<int>& labels, std::size_t classes,
                             std::uint64_t seed, int steps = 400, int batch_size = 32);

// Serialized embedding records (one line per state instance).
std::string serialize_embeddings(const std::vector<net::EmbeddingRecord>& records);

}  // namespace invseq::harness

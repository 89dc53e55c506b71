#pragma once

#include <map>
#include <string>
#include <vector>

#include "invseq/clustering.hpp"
#include "invseq/dataset.hpp"
#include "invseq/encoders.hpp"
#include "invseq/model.hpp"

namespace invseq::net {

// Full pipeline: frozen stream encoders feeding one architecture variant.
struct Model {
    enc::StreamEncoders encoders;
    ModelVariant core;

    static Model init(VariantKind kind, const enc::EncoderConfig& enc_cfg, ModelConfig model_cfg,
                      std::uint64_t seed);
};

// Feature bundles precomputed per trial (the encoders are frozen, so H is a
// pure function of the trial).
class TrialCache {
public:
    TrialCache() = default;
    TrialCache(const enc::StreamEncoders& encoders,
               const std::vector<data::MultiStreamTrial>& trials);

    const Tensor& features(int trial_id) const;
    const data::MultiStreamTrial& trial(int trial_id) const;
    std::vector<int> ids() const;

private:
    std::map<int, Tensor> features_;
    std::map<int, const data::MultiStreamTrial*> trials_;
};

struct TrainSchedule {
    int p1_batches = 1;
    int p2_batches = 5;
    int epochs = 20;
    int batch_size = 16;
    std::uint64_t seed = 1;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int rounds_per_epoch = 0;  // 0 -> ceil(pool size / batch size)
};

struct EpochTrace {
    int epoch = 0;
    double p1_objective = 0.0;  // mean over P1 batches
    double p2_objective = 0.0;  // mean over P2 batches (adversarial variants)
    LossBreakdown p1_terms;     // mean per-term values seen in P1 batches
};

struct TrainResult {
    std::vector<EpochTrace> trace;
    std::size_t p1_steps = 0;
    std::size_t p2_steps = 0;
};

// Scheduled minimax training. P1 batches update {E, M, R} on
// alpha*L_M + beta*L_R - gamma*(L_f1+L_f2) - delta*L_D while the adversary is
// frozen; P2 batches update {f1, f2, D} on L_f1 + L_f2 (+ L_D) while the
// estimation side is frozen. The NA variant ignores the schedule and runs
// plain supervised batches. Technique labels are required for FULL.
TrainResult train_minimax(Model& model, const TrialCache& cache,
                          const std::vector<int>& trial_ids,
                          const dtwc::TechniqueLabels* labels, const TrainSchedule& schedule);

// Per-frame argmax state predictions over a whole trial.
std::vector<int> predict_trial(const Model& model, const TrialCache& cache, int trial_id);

struct EmbeddingRecord {
    int trial_id = 0;
    int state = 0;
    long start = 0;
    long length = 0;
    Tensor mean_e1;
    Tensor mean_e2;
};

// One record per state instance (maximal run of a constant state label),
// carrying the instance-mean codes. Dropout is inactive here.
std::vector<EmbeddingRecord> export_embeddings(const Model& model, const TrialCache& cache,
                                               const std::vector<int>& trial_ids);

// ---- checkpointing -----------------------------------------------------

// Versioned text container holding a config echo plus every ParamGroup of
// the pipeline; round-trips bit-exactly.
void save_checkpoint(const Model& model, const std::string& path,
                     const std::string& config_echo);

struct Checkpoint {
    Model model;
    std::string config_echo;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace invseq::net

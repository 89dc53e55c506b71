#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "invseq/lstm.hpp"
#include "invseq/params.hpp"
#include "invseq/windowing.hpp"

namespace invseq::net {

enum class VariantKind { NA, NO, FULL };

std::string variant_name(VariantKind k);
VariantKind parse_variant(const std::string& name);

// Loss weights for the composite objective plus the reconstruction dropout
// rate. Variant invariants are enforced at model construction: NA forces
// beta = gamma = delta = 0, NO forces delta = 0.
struct LossWeights {
    double alpha = 1.0;
    double beta = 0.5;
    double gamma = 0.1;
    double delta = 0.1;
    double dropout = 0.4;
};

struct ModelConfig {
    std::size_t feature_dim = 84;  // |H|
    std::size_t e_dim = 16;        // |e1| = |e2|
    std::size_t m_hidden = 32;
    std::size_t states = 8;      // S
    std::size_t techniques = 0;  // cluster count k; required for FULL
    int t_obs = 20;
    WindowMode mode = WindowMode::causal;
    LossWeights weights;
};

// Per-frame latent pair produced by the encoder split.
struct LatentSplit {
    Tensor e1;
    Tensor e2;
};

// Parameter container for one architecture variant. Components a variant
// does not own are never allocated.
struct ModelVariant {
    VariantKind kind = VariantKind::FULL;
    ModelConfig cfg;
    std::optional<ParamGroup> E;   // NO, FULL
    ParamGroup M;                  // always
    std::optional<ParamGroup> R;   // NO, FULL
    std::optional<ParamGroup> f1;  // NO, FULL
    std::optional<ParamGroup> f2;  // NO, FULL
    std::optional<ParamGroup> D;   // FULL

    static ModelVariant init(VariantKind kind, ModelConfig cfg, std::uint64_t seed);

    bool has_split() const { return kind != VariantKind::NA; }
    bool has_discriminator() const { return kind == VariantKind::FULL; }

    // estimation-side groups updated in the P1 phase / adversary groups
    // updated in the P2 phase
    std::vector<ParamGroup*> p1_groups();
    std::vector<ParamGroup*> p2_groups();
    std::vector<ParamGroup*> all_groups();
    std::vector<const ParamGroup*> all_groups() const;
};

// ---- single-sample operations ----------------------------------------------

LatentSplit encode_split(const Tensor& H, const ModelVariant& model);

// Probability vector over S states from a window of per-frame codes
// ([dim x L] with L = window_length(t_obs, mode)). Causal mode runs one
// forward recurrence; non-causal runs forward-to-center and backward-to-
// center recurrences and classifies from the concatenated states.
Tensor estimate_state(const Tensor& code_window, const ModelVariant& model);

// Reconstruction of H from (e2, dropout(e1)). Dropout is applied only when
// `training`, with no inverted rescaling.
Tensor reconstruct(const Tensor& e2, const Tensor& e1, double rate, const ModelVariant& model,
                   std::uint64_t seed, bool training = true);

enum class Disentangler { f1, f2 };  // f1: e1 -> e2hat, f2: e2 -> e1hat
Tensor disentangle(const Tensor& source, Disentangler which, const ModelVariant& model);

// Probability vector over the k technique clusters; FULL variant only.
Tensor discriminate(const Tensor& e1, const ModelVariant& model);

// ---- batched forward + losses ----------------------------------------------

// One training/evaluation sample: a frame of a trial whose feature bundle
// sequence has been precomputed.
struct Sample {
    const Tensor* H = nullptr;  // [feature_dim x T]
    long t = 0;
    int state = 0;
    int technique = -1;  // assigned cluster label; -1 when absent
};

enum class Phase { P1, P2, Eval };

struct ForwardOut {
    Var probs;  // [B x S]; invalid in P2 phase
    Var e1c, e2c, Hc;
    Var l_m, l_r, l_f1, l_f2, l_d;  // scalar nodes; invalid when not computed
};

// Builds the batch forward graph on `tape` with parameters already bound in
// `bindings`. dropout_rng drives the reconstruction dropout in P1.
// with_discriminator = false skips the L_D head even on a FULL model (used by
// the Eq.-3 loss, which has no discriminator term).
ForwardOut forward_batch(Tape& tape, const TapeBindings& bindings, const ModelVariant& model,
                         const std::vector<Sample>& batch, Phase phase,
                         std::mt19937_64* dropout_rng, bool with_discriminator = true);

struct LossBreakdown {
    double total = 0.0;
    double l_m = 0.0, l_r = 0.0, l_f1 = 0.0, l_f2 = 0.0, l_d = 0.0;
};

double compose_nuis(const LossWeights& w, double l_m, double l_r, double l_f1, double l_f2);
double compose_full(const LossWeights& w, double l_m, double l_r, double l_f1, double l_f2,
                    double l_d);

// Composite losses evaluated on one batch (forward only). loss_full
// additionally scores the discriminator against the per-sample technique
// labels.
LossBreakdown loss_nuis(const ModelVariant& model, const std::vector<Sample>& batch,
                        std::uint64_t dropout_seed);
LossBreakdown loss_full(const ModelVariant& model, const std::vector<Sample>& batch,
                        std::uint64_t dropout_seed);

}  // namespace invseq::net

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "invseq/rng.hpp"
#include "invseq/tape.hpp"
#include "invseq/tensor.hpp"

namespace invseq {

// Named collection of parameter tensors. `trainable` is the freezing flag:
// a frozen group takes part in forward passes but never receives gradients
// or optimizer updates.
struct ParamGroup {
    std::string name;
    std::vector<std::string> tensor_names;
    std::vector<Tensor> tensors;
    bool trainable = true;

    Tensor& add(const std::string& tname, Tensor t);
    Tensor& tensor(const std::string& tname);
    const Tensor& tensor(const std::string& tname) const;
    std::size_t param_count() const;
};

// Per-parameter gradients aligned one-to-one with a ParamGroup. `connected`
// is false when the loss did not reach any tensor of the group; in that case
// `grads` is empty rather than silently zero.
struct GradientRecord {
    std::string group;
    std::vector<Tensor> grads;
    bool connected = false;
};

// Binds ParamGroups to leaves of a per-batch tape and collects gradients back
// out after backward.
class TapeBindings {
public:
    // Inserts every tensor of the group as a tape leaf. Gradients are only
    // requested for trainable groups.
    void bind(Tape& t, const ParamGroup& group);

    // Var of a bound tensor.
    Var var(const std::string& group, const std::string& tname) const;

    // Gradient extraction after Tape::backward. Frozen groups yield an
    // unconnected record.
    GradientRecord collect(Tape& t, const ParamGroup& group) const;

private:
    struct Entry {
        std::string group;
        std::vector<std::string> names;
        std::vector<Var> vars;
    };
    const Entry& entry(const std::string& group) const;
    std::vector<Entry> entries_;
};

// ---- Adam ------------------------------------------------------------------

struct AdamHyper {
    double rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment accumulators for one ParamGroup.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

// One bias-corrected Adam update, t >= 1. Frozen groups and unconnected
// gradient records are left untouched.
void adam_step(ParamGroup& params, const GradientRecord& grads, const AdamHyper& hyper,
               AdamState& state, long t);

// Optimizer wrapper that keeps AdamState and the step counter per group.
class Adam {
public:
    explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}
    void step(ParamGroup& params, const GradientRecord& grads);
    const AdamHyper& hyper() const { return hyper_; }

private:
    struct Slot {
        AdamState state;
        long t = 0;
    };
    AdamHyper hyper_;
    std::vector<std::pair<std::string, Slot>> slots_;
};

// Uniform(-r, r) initialization with r = 1/sqrt(fan_in).
Tensor init_weight(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out);
Tensor init_weight_vec(std::mt19937_64& rng, std::size_t fan_in, std::size_t n);

}  // namespace invseq

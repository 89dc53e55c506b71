#include "invseq/params.hpp"

#include <algorithm>
#include <cmath>

#include "invseq/errors.hpp"

namespace invseq {

Tensor& ParamGroup::add(const std::string& tname, Tensor t) {
    if (std::find(tensor_names.begin(), tensor_names.end(), tname) != tensor_names.end()) {
        throw ConfigError("ParamGroup " + name + ": duplicate tensor name " + tname);
    }
    tensor_names.push_back(tname);
    tensors.push_back(std::move(t));
    return tensors.back();
}

Tensor& ParamGroup::tensor(const std::string& tname) {
    for (std::size_t i = 0; i < tensor_names.size(); ++i)
        if (tensor_names[i] == tname) return tensors[i];
    throw ConfigError("ParamGroup " + name + ": no tensor named " + tname);
}

const Tensor& ParamGroup::tensor(const std::string& tname) const {
    for (std::size_t i = 0; i < tensor_names.size(); ++i)
        if (tensor_names[i] == tname) return tensors[i];
    throw ConfigError("ParamGroup " + name + ": no tensor named " + tname);
}

std::size_t ParamGroup::param_count() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
}

void TapeBindings::bind(Tape& t, const ParamGroup& group) {
    Entry e;
    e.group = group.name;
    e.names = group.tensor_names;
    e.vars.reserve(group.tensors.size());
    for (const Tensor& tensor : group.tensors) {
        e.vars.push_back(t.leaf(tensor, group.trainable));
    }
    entries_.push_back(std::move(e));
}

const TapeBindings::Entry& TapeBindings::entry(const std::string& group) const {
    for (const Entry& e : entries_)
        if (e.group == group) return e;
    throw ConfigError("TapeBindings: group " + group + " not bound");
}

Var TapeBindings::var(const std::string& group, const std::string& tname) const {
    const Entry& e = entry(group);
    for (std::size_t i = 0; i < e.names.size(); ++i)
        if (e.names[i] == tname) return e.vars[i];
    throw ConfigError("TapeBindings: group " + group + " has no tensor " + tname);
}

GradientRecord TapeBindings::collect(Tape& t, const ParamGroup& group) const {
    GradientRecord rec;
    rec.group = group.name;
    if (!group.trainable) return rec;
    const Entry& e = entry(group.name);
    bool any = false;
    std::vector<Tensor> grads;
    grads.reserve(e.vars.size());
    for (std::size_t i = 0; i < e.vars.size(); ++i) {
        const Tensor& g = t.grad(e.vars[i]);
        grads.push_back(g);
        for (std::size_t j = 0; j < g.size() && !any; ++j)
            if (g[j] != 0.0) any = true;
    }
    // "any" distinguishes a loss genuinely disconnected from the group from
    // one that reached it; callers get an explicit empty record, not zeros.
    if (any) {
        rec.grads = std::move(grads);
        rec.connected = true;
    }
    return rec;
}

void adam_step(ParamGroup& params, const GradientRecord& grads, const AdamHyper& hyper,
               AdamState& state, long t) {
    if (!params.trainable || !grads.connected) return;
    if (t < 1) throw ConfigError("adam_step: step index must be >= 1");
    if (grads.grads.size() != params.tensors.size()) {
        throw DimensionError("adam_step: gradient record has " +
                             std::to_string(grads.grads.size()) + " tensors, group " +
                             params.name + " has " + std::to_string(params.tensors.size()));
    }
    if (state.m.empty()) {
        for (const Tensor& p : params.tensors) {
            state.m.emplace_back(p.shape());
            state.v.emplace_back(p.shape());
        }
    }
    double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        Tensor& p = params.tensors[i];
        const Tensor& g = grads.grads[i];
        if (!p.same_shape(g)) {
            throw DimensionError("adam_step: gradient shape " + g.shape_str() +
                                 " does not match parameter " + params.tensor_names[i] +
                                 " " + p.shape_str());
        }
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            p[j] -= hyper.rate * mhat / (std::sqrt(vhat) + hyper.epsilon);
        }
    }
}

void Adam::step(ParamGroup& params, const GradientRecord& grads) {
    if (!params.trainable || !grads.connected) return;
    Slot* slot = nullptr;
    for (auto& [name, s] : slots_) {
        if (name == params.name) {
            slot = &s;
            break;
        }
    }
    if (!slot) {
        slots_.emplace_back(params.name, Slot{});
        slot = &slots_.back().second;
    }
    slot->t += 1;
    adam_step(params, grads, hyper_, slot->state, slot->t);
}

Tensor init_weight(std::mt19937_64& rng, std::size_t fan_in, std::size_t fan_out) {
    double r = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    return random_uniform(rng, {fan_in, fan_out}, -r, r);
}

Tensor init_weight_vec(std::mt19937_64& rng, std::size_t fan_in, std::size_t n) {
    double r = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    return random_uniform(rng, {n}, -r, r);
}

}  // namespace invseq

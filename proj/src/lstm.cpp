#include "invseq/lstm.hpp"

#include "invseq/errors.hpp"

namespace invseq::enc {

StreamState zero_state(std::size_t hidden, std::string tag) {
    return StreamState{Tensor({hidden}), Tensor({hidden}), std::move(tag)};
}

void add_lstm_tensors(ParamGroup& g, const std::string& prefix, std::size_t input,
                      std::size_t hidden, std::mt19937_64& rng) {
    const char* gates[4] = {"i", "f", "o", "g"};
    for (const char* gate : gates) {
        g.add(prefix + "W" + gate, init_weight(rng, input, hidden));
        g.add(prefix + "U" + gate, init_weight(rng, hidden, hidden));
        g.add(prefix + "b" + gate, Tensor({hidden}));
    }
}

LstmParams LstmParams::init(std::size_t input, std::size_t hidden, std::mt19937_64& rng,
                            const std::string& name) {
    LstmParams p;
    p.input = input;
    p.hidden = hidden;
    p.group.name = name;
    add_lstm_tensors(p.group, "", input, hidden, rng);
    return p;
}

LstmVars bind_lstm(const TapeBindings& b, const std::string& group, const std::string& prefix) {
    LstmVars v;
    v.Wi = b.var(group, prefix + "Wi");
    v.Ui = b.var(group, prefix + "Ui");
    v.bi = b.var(group, prefix + "bi");
    v.Wf = b.var(group, prefix + "Wf");
    v.Uf = b.var(group, prefix + "Uf");
    v.bf = b.var(group, prefix + "bf");
    v.Wo = b.var(group, prefix + "Wo");
    v.Uo = b.var(group, prefix + "Uo");
    v.bo = b.var(group, prefix + "bo");
    v.Wg = b.var(group, prefix + "Wg");
    v.Ug = b.var(group, prefix + "Ug");
    v.bg = b.var(group, prefix + "bg");
    return v;
}

std::pair<Var, Var> lstm_step_tape(Tape& t, const LstmVars& v, Var x, Var h, Var c) {
    auto gate = [&](Var W, Var U, Var b) {
        return add(t, add(t, vecmat(t, x, W), vecmat(t, h, U)), b);
    };
    Var i = sigmoid(t, gate(v.Wi, v.Ui, v.bi));
    Var f = sigmoid(t, gate(v.Wf, v.Uf, v.bf));
    Var o = sigmoid(t, gate(v.Wo, v.Uo, v.bo));
    Var g = tanh_op(t, gate(v.Wg, v.Ug, v.bg));
    Var c_next = add(t, mul(t, f, c), mul(t, i, g));
    Var h_next = mul(t, o, tanh_op(t, c_next));
    return {h_next, c_next};
}

std::pair<Var, Var> lstm_step_rows(Tape& t, const LstmVars& v, Var X, Var H, Var C) {
    auto gate = [&](Var W, Var U, Var b) {
        return add_row_broadcast(t, add(t, matmul(t, X, W), matmul(t, H, U)), b);
    };
    Var i = sigmoid(t, gate(v.Wi, v.Ui, v.bi));
    Var f = sigmoid(t, gate(v.Wf, v.Uf, v.bf));
    Var o = sigmoid(t, gate(v.Wo, v.Uo, v.bo));
    Var g = tanh_op(t, gate(v.Wg, v.Ug, v.bg));
    Var c_next = add(t, mul(t, f, C), mul(t, i, g));
    Var h_next = mul(t, o, tanh_op(t, c_next));
    return {h_next, c_next};
}

StreamState lstm_step(const Tensor& x, const StreamState& state, const LstmParams& params) {
    if (x.rank() != 1 || x.size() != params.input) {
        throw DimensionError("lstm_step: input " + x.shape_str() + " does not match cell input size " +
                             std::to_string(params.input));
    }
    if (state.h.size() != params.hidden || state.c.size() != params.hidden) {
        throw DimensionError("lstm_step: state size " + state.h.shape_str() +
                             " does not match hidden size " + std::to_string(params.hidden));
    }
    Tape t(false);
    TapeBindings b;
    b.bind(t, params.group);
    LstmVars v = bind_lstm(b, params.group.name);
    Var xv = t.leaf(x);
    Var hv = t.leaf(state.h);
    Var cv = t.leaf(state.c);
    auto [hn, cn] = lstm_step_tape(t, v, xv, hv, cv);
    return StreamState{t.val(hn), t.val(cn), state.tag};
}

void add_attention_tensors(ParamGroup& g, const std::string& prefix, std::size_t hidden,
                           std::size_t att_dim, int t_obs, std::mt19937_64& rng) {
    g.add(prefix + "u", init_weight_vec(rng, att_dim, att_dim));
    g.add(prefix + "W", init_weight(rng, 2 * hidden, att_dim));
    g.add(prefix + "V", init_weight(rng, static_cast<std::size_t>(t_obs), att_dim));
}

AttentionParams AttentionParams::init(std::size_t hidden, std::size_t att_dim, int t_obs,
                                      std::mt19937_64& rng, const std::string& name) {
    AttentionParams p;
    p.hidden = hidden;
    p.att_dim = att_dim;
    p.t_obs = t_obs;
    p.group.name = name;
    add_attention_tensors(p.group, "", hidden, att_dim, t_obs, rng);
    return p;
}

AttentionVars bind_attention(const TapeBindings& b, const std::string& group,
                             const std::string& prefix) {
    return AttentionVars{b.var(group, prefix + "u"), b.var(group, prefix + "W"),
                         b.var(group, prefix + "V")};
}

Var attention_weights_tape(Tape& t, const AttentionVars& v, Var window, Var h, Var c) {
    Var hc = concat(t, h, c);
    Var projected = matmul(t, window, v.V);           // [channels x att]
    Var state_term = vecmat(t, hc, v.W);              // [att]
    Var scored = tanh_op(t, add_row_broadcast(t, projected, state_term));
    Var scores = matvec(t, scored, v.u);              // [channels]
    return softmax(t, scores);
}

namespace {

Var attention_scores_tape(Tape& t, const AttentionVars& v, Var window, Var h, Var c) {
    Var hc = concat(t, h, c);
    Var projected = matmul(t, window, v.V);
    Var state_term = vecmat(t, hc, v.W);
    Var scored = tanh_op(t, add_row_broadcast(t, projected, state_term));
    return matvec(t, scored, v.u);
}

void check_attention_inputs(const Tensor& window, const StreamState& state,
                            const AttentionParams& params) {
    if (window.rank() != 2 || window.rows() == 0 || window.cols() == 0) {
        throw DomainError("attention: empty window");
    }
    if (window.cols() != static_cast<std::size_t>(params.t_obs)) {
        throw DimensionError("attention: window spans " + std::to_string(window.cols()) +
                             " frames, expected " + std::to_string(params.t_obs));
    }
    if (state.h.size() != params.hidden || state.c.size() != params.hidden) {
        throw DimensionError("attention: state size " + state.h.shape_str() +
                             " does not match hidden size " + std::to_string(params.hidden));
    }
}

}  // namespace

Tensor attention_scores(const Tensor& window, const StreamState& state,
                        const AttentionParams& params) {
    check_attention_inputs(window, state, params);
    Tape t(false);
    TapeBindings b;
    b.bind(t, params.group);
    AttentionVars v = bind_attention(b, params.group.name, "");
    Var s = attention_scores_tape(t, v, t.leaf(window), t.leaf(state.h), t.leaf(state.c));
    return t.val(s);
}

Tensor attention_weights(const Tensor& window, const StreamState& state,
                         const AttentionParams& params) {
    check_attention_inputs(window, state, params);
    Tape t(false);
    TapeBindings b;
    b.bind(t, params.group);
    AttentionVars v = bind_attention(b, params.group.name, "");
    Var a = attention_weights_tape(t, v, t.leaf(window), t.leaf(state.h), t.leaf(state.c));
    return t.val(a);
}

}  // namespace invseq::enc

#pragma once

#include <optional>
#include <string>
#include <utility>

#include "invseq/params.hpp"
#include "invseq/tape.hpp"

namespace invseq::enc {

// Hidden/cell state of one stream encoder. tag is "vis" | "kin" | "evt" for
// stream encoders, free-form elsewhere.
struct StreamState {
    Tensor h;
    Tensor c;
    std::string tag;
};

StreamState zero_state(std::size_t hidden, std::string tag = "");

// One LSTM cell: input/forget/output/candidate gates with separate weight
// matrices ([in x h], [h x h]) and biases ([h]). Parameter count is
// 4 * (input + hidden + 1) * hidden.
struct LstmParams {
    std::size_t input = 0;
    std::size_t hidden = 0;
    ParamGroup group;

    static LstmParams init(std::size_t input, std::size_t hidden, std::mt19937_64& rng,
                           const std::string& name = "lstm");
    std::size_t param_count() const { return group.param_count(); }
};

// Gate tensor names used inside any group that embeds an LSTM cell.
void add_lstm_tensors(ParamGroup& g, const std::string& prefix, std::size_t input,
                      std::size_t hidden, std::mt19937_64& rng);

// Standard cell update on plain tensors. h' entries lie in (-1, 1).
StreamState lstm_step(const Tensor& x, const StreamState& state, const LstmParams& params);

// Attention scoring parameters for Eq.-style channel weighting:
//   scores = tanh(X*V + broadcast((h,c)*W)) * u,   alpha = softmax(scores)
// with X the [channels x t_obs] input window. u: [att], W: [2*hidden x att],
// V: [t_obs x att]. One score per channel.
struct AttentionParams {
    std::size_t hidden = 0;
    std::size_t att_dim = 0;
    int t_obs = 0;
    ParamGroup group;

    static AttentionParams init(std::size_t hidden, std::size_t att_dim, int t_obs,
                                std::mt19937_64& rng, const std::string& name = "attention");
};

void add_attention_tensors(ParamGroup& g, const std::string& prefix, std::size_t hidden,
                           std::size_t att_dim, int t_obs, std::mt19937_64& rng);

// Pre-softmax channel scores; exposed so shift-invariance of the weights can
// be tested directly.
Tensor attention_scores(const Tensor& window, const StreamState& state,
                        const AttentionParams& params);

// Probability vector over kinematics channels (positive, sums to 1).
Tensor attention_weights(const Tensor& window, const StreamState& state,
                         const AttentionParams& params);

// ---- tape-based building blocks ---------------------------------------

struct LstmVars {
    Var Wi, Ui, bi, Wf, Uf, bf, Wo, Uo, bo, Wg, Ug, bg;
};

LstmVars bind_lstm(const TapeBindings& b, const std::string& group,
                   const std::string& prefix = "");

// Rank-1 step: x [in], h/c [hidden] -> (h', c').
std::pair<Var, Var> lstm_step_tape(Tape& t, const LstmVars& v, Var x, Var h, Var c);

// Batched step: X [B x in], H/C [B x hidden] -> (H', C').
std::pair<Var, Var> lstm_step_rows(Tape& t, const LstmVars& v, Var X, Var H, Var C);

struct AttentionVars {
    Var u, W, V;
};

AttentionVars bind_attention(const TapeBindings& b, const std::string& group,
                             const std::string& prefix = "att_");

Var attention_weights_tape(Tape& t, const AttentionVars& v, Var window, Var h, Var c);

}  // namespace invseq::enc

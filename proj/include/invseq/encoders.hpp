#pragma once

#include <cstdint>
#include <vector>

#include "invseq/lstm.hpp"
#include "invseq/windowing.hpp"

namespace invseq::enc {

// Per-frame feature bundle: concatenation of the three stream latents in the
// fixed order vis, kin, evt.
struct FeatureBundle {
    Tensor h_vis;
    Tensor h_kin;
    Tensor h_evt;
    Tensor H;
};

struct FuseDims {
    std::size_t n_vis = 40;
    std::size_t n_kin = 40;
    std::size_t n_evt = 4;
    std::size_t total() const { return n_vis + n_kin + n_evt; }
};

FeatureBundle fuse(const Tensor& h_vis, const Tensor& h_kin, const Tensor& h_evt,
                   const FuseDims& dims);

// Causal left-to-right encoding of one stream. `frames` is [d x T]. When
// attention is supplied (kin/evt streams), each step weights the current
// frame by attention over the trailing t_obs-frame window, replicate-padded
// at the trial start. Output has one state per input frame.
std::vector<StreamState> encode_stream(const Tensor& frames, const LstmParams& lstm,
                                       const AttentionParams* attention);

// Tape version used for gradient checks; `frames` are rank-1 leaves.
std::vector<std::pair<Var, Var>> encode_stream_tape(Tape& t, const LstmVars& lstm,
                                                    std::size_t hidden,
                                                    const AttentionVars* attention, int t_obs,
                                                    const std::vector<Var>& frames);

// The three frozen stream encoders. Parameters are drawn once from the seed
// and never updated; the per-frame bundle H they produce is a deterministic
// function of the trial, which lets callers cache it.
struct EncoderConfig {
    std::size_t vis_in = 16;
    std::size_t kin_in = 6;
    std::size_t evt_in = 4;
    std::size_t n_vis = 40;
    std::size_t n_kin = 40;
    std::size_t n_evt = 4;
    std::size_t att_dim = 0;  // 0 -> same as the stream's hidden size
    int t_obs = 20;

    FuseDims fuse_dims() const { return FuseDims{n_vis, n_kin, n_evt}; }
};

struct StreamEncoders {
    EncoderConfig cfg;
    LstmParams vis;
    LstmParams kin;
    AttentionParams kin_att;
    LstmParams evt;
    AttentionParams evt_att;

    static StreamEncoders init(const EncoderConfig& cfg, std::uint64_t seed);

    // Encodes one trial's streams into the [n_vis+n_kin+n_evt x T] bundle
    // sequence.
    Tensor encode_trial(const Tensor& vis_frames, const Tensor& kin_frames,
                        const Tensor& evt_frames) const;

    std::vector<const ParamGroup*> groups() const;
    std::vector<ParamGroup*> groups();
};

}  // namespace invseq::enc

#include "invseq/encoders.hpp"

#include <cmath>

#include "invseq/errors.hpp"

namespace invseq::enc {

FeatureBundle fuse(const Tensor& h_vis, const Tensor& h_kin, const Tensor& h_evt,
                   const FuseDims& dims) {
    if (h_vis.rank() != 1 || h_vis.size() != dims.n_vis || h_kin.rank() != 1 ||
        h_kin.size() != dims.n_kin || h_evt.rank() != 1 || h_evt.size() != dims.n_evt) {
        throw DimensionError("fuse: stream sizes " + h_vis.shape_str() + "/" +
                             h_kin.shape_str() + "/" + h_evt.shape_str() +
                             " do not match configured " + std::to_string(dims.n_vis) + "/" +
                             std::to_string(dims.n_kin) + "/" + std::to_string(dims.n_evt));
    }
    FeatureBundle b;
    b.h_vis = h_vis;
    b.h_kin = h_kin;
    b.h_evt = h_evt;
    b.H = Tensor({dims.total()});
    std::size_t off = 0;
    for (std::size_t i = 0; i < dims.n_vis; ++i) b.H[off++] = h_vis[i];
    for (std::size_t i = 0; i < dims.n_kin; ++i) b.H[off++] = h_kin[i];
    for (std::size_t i = 0; i < dims.n_evt; ++i) b.H[off++] = h_evt[i];
    return b;
}

std::vector<std::pair<Var, Var>> encode_stream_tape(Tape& t, const LstmVars& lstm,
                                                    std::size_t hidden,
                                                    const AttentionVars* attention, int t_obs,
                                                    const std::vector<Var>& frames) {
    if (frames.empty()) throw DataError("encode_stream: no frames");
    Var h = t.leaf(Tensor({hidden}));
    Var c = t.leaf(Tensor({hidden}));
    std::vector<std::pair<Var, Var>> states;
    states.reserve(frames.size());
    long total = static_cast<long>(frames.size());
    for (long i = 0; i < total; ++i) {
        Var x = frames[static_cast<std::size_t>(i)];
        if (attention) {
            std::vector<Var> cols(static_cast<std::size_t>(t_obs));
            for (int slot = 0; slot < t_obs; ++slot) {
                long src = window_source_index(i, slot, t_obs, WindowMode::causal, total);
                cols[static_cast<std::size_t>(slot)] = frames[static_cast<std::size_t>(src)];
            }
            Var window = stack_cols(t, cols);
            Var alpha = attention_weights_tape(t, *attention, window, h, c);
            x = mul(t, alpha, x);
        }
        auto [hn, cn] = lstm_step_tape(t, lstm, x, h, c);
        h = hn;
        c = cn;
        states.emplace_back(h, c);
    }
    return states;
}

std::vector<StreamState> encode_stream(const Tensor& frames, const LstmParams& lstm,
                                       const AttentionParams* attention) {
    if (frames.rank() != 2 || frames.cols() == 0) {
        throw DataError("encode_stream: expected a [channels x frames] sequence with >= 1 frame");
    }
    if (frames.rows() != lstm.input) {
        throw DimensionError("encode_stream: " + std::to_string(frames.rows()) +
                             " channels for LSTM input size " + std::to_string(lstm.input));
    }
    for (std::size_t t = 0; t < frames.cols(); ++t) {
        for (std::size_t r = 0; r < frames.rows(); ++r) {
            if (!std::isfinite(frames.at(r, t))) {
                throw DataError("encode_stream: non-finite value at frame " + std::to_string(t));
            }
        }
    }
    Tape tape(false);
    TapeBindings b;
    b.bind(tape, lstm.group);
    LstmVars lv = bind_lstm(b, lstm.group.name);
    AttentionVars av;
    int t_obs = 0;
    if (attention) {
        b.bind(tape, attention->group);
        av = bind_attention(b, attention->group.name, "");
        t_obs = attention->t_obs;
    }
    std::vector<Var> frame_vars;
    frame_vars.reserve(frames.cols());
    for (std::size_t t = 0; t < frames.cols(); ++t) frame_vars.push_back(tape.leaf(column(frames, t)));
    auto states = encode_stream_tape(tape, lv, lstm.hidden, attention ? &av : nullptr, t_obs,
                                     frame_vars);
    std::vector<StreamState> out;
    out.reserve(states.size());
    for (auto& [h, c] : states) out.push_back(StreamState{tape.val(h), tape.val(c), ""});
    return out;
}

StreamEncoders StreamEncoders::init(const EncoderConfig& cfg, std::uint64_t seed) {
    StreamEncoders e;
    e.cfg = cfg;
    auto att_dim = [&](std::size_t hidden) { return cfg.att_dim ? cfg.att_dim : hidden; };
    auto rng_vis = make_rng(substream_seed(seed, 0x76697300));  // "vis"
    auto rng_kin = make_rng(substream_seed(seed, 0x6b696e00));  // "kin"
    auto rng_evt = make_rng(substream_seed(seed, 0x65767400));  // "evt"
    e.vis = LstmParams::init(cfg.vis_in, cfg.n_vis, rng_vis, "encoder.vis");
    e.kin = LstmParams::init(cfg.kin_in, cfg.n_kin, rng_kin, "encoder.kin");
    e.kin_att = AttentionParams::init(cfg.n_kin, att_dim(cfg.n_kin), cfg.t_obs, rng_kin,
                                      "encoder.kin_att");
    e.evt = LstmParams::init(cfg.evt_in, cfg.n_evt, rng_evt, "encoder.evt");
    e.evt_att = AttentionParams::init(cfg.n_evt, att_dim(cfg.n_evt), cfg.t_obs, rng_evt,
                                      "encoder.evt_att");
    for (ParamGroup* g : e.groups()) g->trainable = false;
    return e;
}

Tensor StreamEncoders::encode_trial(const Tensor& vis_frames, const Tensor& kin_frames,
                                    const Tensor& evt_frames) const {
    if (vis_frames.cols() != kin_frames.cols() || kin_frames.cols() != evt_frames.cols()) {
        throw DimensionError("encode_trial: stream lengths differ (" +
                             std::to_string(vis_frames.cols()) + "/" +
                             std::to_string(kin_frames.cols()) + "/" +
                             std::to_string(evt_frames.cols()) + ")");
    }
    auto vis_states = encode_stream(vis_frames, vis, nullptr);
    auto kin_states = encode_stream(kin_frames, kin, &kin_att);
    auto evt_states = encode_stream(evt_frames, evt, &evt_att);
    FuseDims dims = cfg.fuse_dims();
    std::size_t frames = vis_states.size();
    Tensor H({dims.total(), frames});
    for (std::size_t t = 0; t < frames; ++t) {
        FeatureBundle b = fuse(vis_states[t].h, kin_states[t].h, evt_states[t].h, dims);
        set_column(H, t, b.H);
    }
    return H;
}

std::vector<const ParamGroup*> StreamEncoders::groups() const {
    return {&vis.group, &kin.group, &kin_att.group, &evt.group, &evt_att.group};
}

std::vector<ParamGroup*> StreamEncoders::groups() {
    return {&vis.group, &kin.group, &kin_att.group, &evt.group, &evt_att.group};
}

}  // namespace invseq::enc

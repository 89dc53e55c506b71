#include "invseq/model.hpp"

#include <cmath>

#include "invseq/errors.hpp"

namespace invseq::net {

std::string variant_name(VariantKind k) {
    switch (k) {
        case VariantKind::NA: return "na";
        case VariantKind::NO: return "no";
        case VariantKind::FULL: return "full";
    }
    return "?";
}

VariantKind parse_variant(const std::string& name) {
    if (name == "na") return VariantKind::NA;
    if (name == "no") return VariantKind::NO;
    if (name == "full") return VariantKind::FULL;
    throw ConfigError("unknown variant '" + name + "' (expected na|no|full)");
}

ModelVariant ModelVariant::init(VariantKind kind, ModelConfig cfg, std::uint64_t seed) {
    if (cfg.weights.alpha <= 0.0) throw ConfigError("loss weight alpha must be > 0");
    if (cfg.weights.dropout < 0.0 || cfg.weights.dropout >= 1.0) {
        throw ConfigError("dropout rate must be in [0, 1)");
    }
    if (kind == VariantKind::FULL && cfg.techniques < 2) {
        throw ConfigError("FULL variant needs a technique count k >= 2");
    }
    // variant invariants on the weights
    if (kind == VariantKind::NA) {
        cfg.weights.beta = cfg.weights.gamma = cfg.weights.delta = 0.0;
    } else if (kind == VariantKind::NO) {
        cfg.weights.delta = 0.0;
    }

    ModelVariant m;
    m.kind = kind;
    m.cfg = cfg;
    auto rng = make_rng(substream_seed(seed, 0x6d6f64656cULL));  // "model"

    std::size_t m_input = kind == VariantKind::NA ? cfg.feature_dim : cfg.e_dim;
    m.M.name = "M";
    enc::add_lstm_tensors(m.M, "fwd_", m_input, cfg.m_hidden, rng);
    std::size_t out_in = cfg.m_hidden;
    if (cfg.mode == WindowMode::noncausal) {
        enc::add_lstm_tensors(m.M, "bwd_", m_input, cfg.m_hidden, rng);
        out_in = 2 * cfg.m_hidden;
    }
    m.M.add("Wout", init_weight(rng, out_in, cfg.states));
    m.M.add("bout", Tensor({cfg.states}));

    if (kind != VariantKind::NA) {
        ParamGroup E;
        E.name = "E";
        E.add("W1", init_weight(rng, cfg.feature_dim, cfg.e_dim));
        E.add("b1", Tensor({cfg.e_dim}));
        E.add("W2", init_weight(rng, cfg.feature_dim, cfg.e_dim));
        E.add("b2", Tensor({cfg.e_dim}));
        m.E = std::move(E);

        ParamGroup R;
        R.name = "R";
        R.add("W", init_weight(rng, 2 * cfg.e_dim, cfg.feature_dim));
        R.add("b", Tensor({cfg.feature_dim}));
        m.R = std::move(R);

        ParamGroup f1;
        f1.name = "f1";
        f1.add("W", init_weight(rng, cfg.e_dim, cfg.e_dim));
        f1.add("b", Tensor({cfg.e_dim}));
        m.f1 = std::move(f1);

        ParamGroup f2;
        f2.name = "f2";
        f2.add("W", init_weight(rng, cfg.e_dim, cfg.e_dim));
        f2.add("b", Tensor({cfg.e_dim}));
        m.f2 = std::move(f2);
    }
    if (kind == VariantKind::FULL) {
        ParamGroup D;
        D.name = "D";
        D.add("W", init_weight(rng, cfg.e_dim, cfg.techniques));
        D.add("b", Tensor({cfg.techniques}));
        m.D = std::move(D);
    }
    return m;
}

std::vector<ParamGroup*> ModelVariant::p1_groups() {
    std::vector<ParamGroup*> out;
    if (E) out.push_back(&*E);
    out.push_back(&M);
    if (R) out.push_back(&*R);
    return out;
}

std::vector<ParamGroup*> ModelVariant::p2_groups() {
    std::vector<ParamGroup*> out;
    if (f1) out.push_back(&*f1);
    if (f2) out.push_back(&*f2);
    if (D) out.push_back(&*D);
    return out;
}

std::vector<ParamGroup*> ModelVariant::all_groups() {
    auto out = p1_groups();
    for (ParamGroup* g : p2_groups()) out.push_back(g);
    return out;
}

std::vector<const ParamGroup*> ModelVariant::all_groups() const {
    std::vector<const ParamGroup*> out;
    if (E) out.push_back(&*E);
    out.push_back(&M);
    if (R) out.push_back(&*R);
    if (f1) out.push_back(&*f1);
    if (f2) out.push_back(&*f2);
    if (D) out.push_back(&*D);
    return out;
}

// ---- shared graph builders ---------------------------------------------

namespace {

// affine row map y = X W + b
Var affine_rows(Tape& t, Var X, Var W, Var b) {
    return add_row_broadcast(t, matmul(t, X, W), b);
}

Var encode_rows(Tape& t, const TapeBindings& b, Var X, const char* w, const char* bias) {
    return tanh_op(t, affine_rows(t, X, b.var("E", w), b.var("E", bias)));
}

// estimator head over per-slot inputs [B x dim] each
Var estimator_rows(Tape& t, const TapeBindings& b, const ModelVariant& model,
                   const std::vector<Var>& slots) {
    const ModelConfig& cfg = model.cfg;
    std::size_t B = t.val(slots[0]).rows();
    enc::LstmVars fwd = enc::bind_lstm(b, "M", "fwd_");
    int L = static_cast<int>(slots.size());
    int center = window_center(cfg.t_obs, cfg.mode);

    Var h = t.leaf(Tensor({B, cfg.m_hidden}));
    Var c = t.leaf(Tensor({B, cfg.m_hidden}));
    Var final_state;
    if (cfg.mode == WindowMode::causal) {
        for (int s = 0; s < L; ++s) {
            auto [hn, cn] = enc::lstm_step_rows(t, fwd, slots[static_cast<std::size_t>(s)], h, c);
            h = hn;
            c = cn;
        }
        final_state = h;
    } else {
        for (int s = 0; s <= center; ++s) {
            auto [hn, cn] = enc::lstm_step_rows(t, fwd, slots[static_cast<std::size_t>(s)], h, c);
            h = hn;
            c = cn;
        }
        Var hf = h;
        enc::LstmVars bwd = enc::bind_lstm(b, "M", "bwd_");
        Var hb = t.leaf(Tensor({B, cfg.m_hidden}));
        Var cb = t.leaf(Tensor({B, cfg.m_hidden}));
        for (int s = L - 1; s >= center; --s) {
            auto [hn, cn] = enc::lstm_step_rows(t, bwd, slots[static_cast<std::size_t>(s)], hb, cb);
            hb = hn;
            cb = cn;
        }
        final_state = concat_cols(t, hf, hb);
    }
    return softmax_rows(t, affine_rows(t, final_state, b.var("M", "Wout"), b.var("M", "bout")));
}

}  // namespace

ForwardOut forward_batch(Tape& tape, const TapeBindings& bindings, const ModelVariant& model,
                         const std::vector<Sample>& batch, Phase phase,
                         std::mt19937_64* dropout_rng, bool with_discriminator) {
    if (batch.empty()) throw DataError("forward_batch: empty batch");
    const ModelConfig& cfg = model.cfg;
    std::size_t B = batch.size();
    int L = window_length(cfg.t_obs, cfg.mode);
    int center = window_center(cfg.t_obs, cfg.mode);

    std::vector<std::size_t> states;
    states.reserve(B);
    for (const Sample& s : batch) {
        if (!s.H || s.H->rows() != cfg.feature_dim) {
            throw DataError("forward_batch: sample feature sequence missing or mis-sized");
        }
        if (s.state < 0 || static_cast<std::size_t>(s.state) >= cfg.states) {
            throw DataError("forward_batch: state label " + std::to_string(s.state) +
                            " out of range [0, " + std::to_string(cfg.states) + ")");
        }
        states.push_back(static_cast<std::size_t>(s.state));
    }

    auto slot_leaf = [&](int slot) {
        Tensor X({B, cfg.feature_dim});
        for (std::size_t r = 0; r < B; ++r) {
            const Sample& s = batch[r];
            long src = window_source_index(s.t, slot, cfg.t_obs, cfg.mode,
                                           static_cast<long>(s.H->cols()));
            for (std::size_t cdim = 0; cdim < cfg.feature_dim; ++cdim)
                X.at(r, cdim) = s.H->at(cdim, static_cast<std::size_t>(src));
        }
        return tape.leaf(std::move(X));
    };

    ForwardOut out;
    bool need_estimator = phase != Phase::P2;
    bool need_heads = model.has_split() && phase != Phase::Eval;

    Var Hc;
    bool have_center = false;
    if (need_estimator) {
        std::vector<Var> slots;
        slots.reserve(static_cast<std::size_t>(L));
        for (int s = 0; s < L; ++s) slots.push_back(slot_leaf(s));
        Hc = slots[static_cast<std::size_t>(center)];
        have_center = true;

        std::vector<Var> inputs;
        inputs.reserve(slots.size());
        if (model.has_split()) {
            for (Var s : slots) inputs.push_back(encode_rows(tape, bindings, s, "W1", "b1"));
        } else {
            inputs = slots;
        }
        out.probs = estimator_rows(tape, bindings, model, inputs);
        out.l_m = cross_entropy_rows_mean(tape, out.probs, states);
    }
    if (!have_center && need_heads) Hc = slot_leaf(center);
    out.Hc = Hc;

    if (need_heads) {
        out.e1c = encode_rows(tape, bindings, Hc, "W1", "b1");
        out.e2c = encode_rows(tape, bindings, Hc, "W2", "b2");

        if (phase == Phase::P1) {
            if (!dropout_rng) throw ConfigError("forward_batch: P1 phase needs a dropout rng");
            Var psi = dropout(tape, out.e1c, cfg.weights.dropout, *dropout_rng, true);
            Var recon = affine_rows(tape, concat_cols(tape, out.e2c, psi),
                                    bindings.var("R", "W"), bindings.var("R", "b"));
            out.l_r = mse(tape, recon, Hc);
        }

        Var e2hat = affine_rows(tape, out.e1c, bindings.var("f1", "W"), bindings.var("f1", "b"));
        out.l_f1 = mse(tape, out.e2c, e2hat);
        Var e1hat = affine_rows(tape, out.e2c, bindings.var("f2", "W"), bindings.var("f2", "b"));
        out.l_f2 = mse(tape, out.e1c, e1hat);

        if (model.has_discriminator() && with_discriminator) {
            std::vector<std::size_t> techniques;
            techniques.reserve(B);
            for (const Sample& s : batch) {
                if (s.technique < 0 || static_cast<std::size_t>(s.technique) >= cfg.techniques) {
                    throw DataError("forward_batch: technique label " +
                                    std::to_string(s.technique) + " out of range [0, " +
                                    std::to_string(cfg.techniques) + ")");
                }
                techniques.push_back(static_cast<std::size_t>(s.technique));
            }
            Var dprobs = softmax_rows(
                tape, affine_rows(tape, out.e1c, bindings.var("D", "W"), bindings.var("D", "b")));
            out.l_d = cross_entropy_rows_mean(tape, dprobs, techniques);
        }
    }
    return out;
}

// ---- single-sample wrappers -------------------------------------------

namespace {

TapeBindings bind_all(Tape& t, const ModelVariant& model) {
    TapeBindings b;
    for (const ParamGroup* g : model.all_groups()) b.bind(t, *g);
    return b;
}

Tensor row0(const Tensor& m) {
    Tensor v({m.cols()});
    for (std::size_t c = 0; c < m.cols(); ++c) v[c] = m.at(0, c);
    return v;
}

Tensor as_row(const Tensor& v) {
    if (v.rank() != 1) throw DimensionError("expected a vector, got " + v.shape_str());
    Tensor m({1, v.size()});
    for (std::size_t i = 0; i < v.size(); ++i) m.at(0, i) = v[i];
    return m;
}

}  // namespace

LatentSplit encode_split(const Tensor& H, const ModelVariant& model) {
    if (!model.has_split()) throw VariantError("encode_split: NA variant has no encoder E");
    if (H.rank() != 1 || H.size() != model.cfg.feature_dim) {
        throw DimensionError("encode_split: |H| = " + H.shape_str() + ", expected [" +
                             std::to_string(model.cfg.feature_dim) + "]");
    }
    Tape t(false);
    TapeBindings b = bind_all(t, model);
    Var Hrow = t.leaf(as_row(H));
    Var e1 = encode_rows(t, b, Hrow, "W1", "b1");
    Var e2 = encode_rows(t, b, Hrow, "W2", "b2");
    return LatentSplit{row0(t.val(e1)), row0(t.val(e2))};
}

Tensor estimate_state(const Tensor& code_window, const ModelVariant& model) {
    const ModelConfig& cfg = model.cfg;
    std::size_t in_dim = model.has_split() ? cfg.e_dim : cfg.feature_dim;
    std::size_t L = static_cast<std::size_t>(window_length(cfg.t_obs, cfg.mode));
    if (code_window.rank() != 2 || code_window.rows() != in_dim || code_window.cols() != L) {
        throw DimensionError("estimate_state: window " + code_window.shape_str() +
                             ", expected [" + std::to_string(in_dim) + "x" + std::to_string(L) +
                             "]");
    }
    Tape t(false);
    TapeBindings b = bind_all(t, model);
    std::vector<Var> slots;
    for (std::size_t s = 0; s < L; ++s) slots.push_back(t.leaf(as_row(column(code_window, s))));
    Var probs = estimator_rows(t, b, model, slots);
    return row0(t.val(probs));
}

Tensor reconstruct(const Tensor& e2, const Tensor& e1, double rate, const ModelVariant& model,
                   std::uint64_t seed, bool training) {
    if (!model.has_split()) throw VariantError("reconstruct: NA variant has no reconstructor R");
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("reconstruct: dropout rate must be in [0, 1)");
    }
    if (e1.size() != model.cfg.e_dim || e2.size() != model.cfg.e_dim) {
        throw DimensionError("reconstruct: code sizes " + e1.shape_str() + "/" + e2.shape_str() +
                             " do not match e_dim " + std::to_string(model.cfg.e_dim));
    }
    Tape t(false);
    TapeBindings b = bind_all(t, model);
    auto rng = make_rng(seed);
    Var psi = dropout(t, t.leaf(as_row(e1)), rate, rng, training);
    Var recon = affine_rows(t, concat_cols(t, t.leaf(as_row(e2)), psi), b.var("R", "W"),
                            b.var("R", "b"));
    return row0(t.val(recon));
}

Tensor disentangle(const Tensor& source, Disentangler which, const ModelVariant& model) {
    if (!model.has_split()) throw VariantError("disentangle: NA variant has no disentanglers");
    if (source.size() != model.cfg.e_dim) {
        throw DimensionError("disentangle: source " + source.shape_str() +
                             " does not match e_dim " + std::to_string(model.cfg.e_dim));
    }
    Tape t(false);
    TapeBindings b = bind_all(t, model);
    const char* group = which == Disentangler::f1 ? "f1" : "f2";
    Var pred = affine_rows(t, t.leaf(as_row(source)), b.var(group, "W"), b.var(group, "b"));
    return row0(t.val(pred));
}

Tensor discriminate(const Tensor& e1, const ModelVariant& model) {
    if (!model.has_discriminator()) {
        throw VariantError("discriminate: variant " + variant_name(model.kind) +
                           " has no discriminator D");
    }
    if (e1.size() != model.cfg.e_dim) {
        throw DimensionError("discriminate: e1 " + e1.shape_str() + " does not match e_dim " +
                             std::to_string(model.cfg.e_dim));
    }
    Tape t(false);
    TapeBindings b = bind_all(t, model);
    Var probs =
        softmax_rows(t, affine_rows(t, t.leaf(as_row(e1)), b.var("D", "W"), b.var("D", "b")));
    return row0(t.val(probs));
}

// ---- composite losses -------------------------------------------------

double compose_nuis(const LossWeights& w, double l_m, double l_r, double l_f1, double l_f2) {
    return w.alpha * l_m + w.beta * l_r + w.gamma * (l_f1 + l_f2);
}

double compose_full(const LossWeights& w, double l_m, double l_r, double l_f1, double l_f2,
                    double l_d) {
    return compose_nuis(w, l_m, l_r, l_f1, l_f2) + w.delta * l_d;
}

namespace {

LossBreakdown batch_losses(const ModelVariant& model, const std::vector<Sample>& batch,
                           std::uint64_t dropout_seed, bool with_discriminator) {
    if (!model.has_split()) {
        throw VariantError("composite loss: NA variant has no adversarial terms");
    }
    Tape t(false);
    TapeBindings b = bind_all(t, model);
    auto rng = make_rng(dropout_seed);
    ForwardOut f = forward_batch(t, b, model, batch, Phase::P1, &rng, with_discriminator);
    LossBreakdown out;
    out.l_m = t.scalar(f.l_m);
    out.l_r = t.scalar(f.l_r);
    out.l_f1 = t.scalar(f.l_f1);
    out.l_f2 = t.scalar(f.l_f2);
    if (with_discriminator) {
        out.l_d = t.scalar(f.l_d);
        out.total = compose_full(model.cfg.weights, out.l_m, out.l_r, out.l_f1, out.l_f2, out.l_d);
    } else {
        out.total = compose_nuis(model.cfg.weights, out.l_m, out.l_r, out.l_f1, out.l_f2);
    }
    return out;
}

}  // namespace

LossBreakdown loss_nuis(const ModelVariant& model, const std::vector<Sample>& batch,
                        std::uint64_t dropout_seed) {
    return batch_losses(model, batch, dropout_seed, false);
}

LossBreakdown loss_full(const ModelVariant& model, const std::vector<Sample>& batch,
                        std::uint64_t dropout_seed) {
    if (!model.has_discriminator()) {
        throw VariantError("loss_full: requires the FULL variant");
    }
    return batch_losses(model, batch, dropout_seed, true);
}

}  // namespace invseq::net

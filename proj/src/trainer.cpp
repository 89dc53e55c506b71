#include "invseq/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "invseq/errors.hpp"
#include "invseq/textio.hpp"

namespace invseq::net {

Model Model::init(VariantKind kind, const enc::EncoderConfig& enc_cfg, ModelConfig model_cfg,
                  std::uint64_t seed) {
    Model m;
    m.encoders = enc::StreamEncoders::init(enc_cfg, substream_seed(seed, 0x656e63ULL));
    model_cfg.feature_dim = enc_cfg.fuse_dims().total();
    model_cfg.t_obs = enc_cfg.t_obs;
    m.core = ModelVariant::init(kind, model_cfg, seed);
    return m;
}

TrialCache::TrialCache(const enc::StreamEncoders& encoders,
                       const std::vector<data::MultiStreamTrial>& trials) {
    for (const auto& t : trials) {
        features_[t.id] = encoders.encode_trial(t.vis, t.kin, t.evt);
        trials_[t.id] = &t;
    }
}

const Tensor& TrialCache::features(int trial_id) const {
    auto it = features_.find(trial_id);
    if (it == features_.end()) throw DataError("no cached features for trial " + std::to_string(trial_id));
    return it->second;
}

const data::MultiStreamTrial& TrialCache::trial(int trial_id) const {
    auto it = trials_.find(trial_id);
    if (it == trials_.end()) throw DataError("no trial " + std::to_string(trial_id));
    return *it->second;
}

std::vector<int> TrialCache::ids() const {
    std::vector<int> out;
    for (const auto& [id, f] : features_) out.push_back(id);
    return out;
}

namespace {

std::vector<Sample> build_pool(const TrialCache& cache, const std::vector<int>& trial_ids,
                               const dtwc::TechniqueLabels* labels) {
    std::vector<Sample> pool;
    for (int id : trial_ids) {
        const auto& trial = cache.trial(id);
        const Tensor& H = cache.features(id);
        int technique = labels ? labels->label_of(id) : -1;
        for (long t = 0; t < static_cast<long>(trial.frames()); ++t) {
            Sample s;
            s.H = &H;
            s.t = t;
            s.state = trial.labels[static_cast<std::size_t>(t)];
            s.technique = technique;
            pool.push_back(s);
        }
    }
    if (pool.empty()) throw DataError("train: empty dataset");
    return pool;
}

void set_trainable(std::vector<ParamGroup*> groups, bool on) {
    for (ParamGroup* g : groups) g->trainable = on;
}

struct BatchStream {
    const std::vector<Sample>* pool;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::mt19937_64 rng;

    BatchStream(const std::vector<Sample>& p, std::uint64_t seed) : pool(&p), rng(seed) {
        order.resize(p.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
    }

    std::vector<Sample> next(std::size_t n) {
        std::vector<Sample> batch;
        batch.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back((*pool)[order[cursor++]]);
        }
        return batch;
    }
};

double finite_or_throw(double v, const char* what, int epoch) {
    if (!std::isfinite(v) || std::abs(v) > 1e6) {
        throw TrainingError(std::string("training diverged (") + what + " = " +
                            std::to_string(v) + ") at epoch " + std::to_string(epoch));
    }
    return v;
}

}  // namespace

TrainResult train_minimax(Model& model, const TrialCache& cache,
                          const std::vector<int>& trial_ids,
                          const dtwc::TechniqueLabels* labels, const TrainSchedule& schedule) {
    ModelVariant& core = model.core;
    if (core.has_discriminator() && !labels) {
        throw DataError("train_minimax: FULL variant needs technique labels");
    }
    if (core.has_split() && (schedule.p1_batches < 1 || schedule.p2_batches < 1)) {
        throw ConfigError("train_minimax: adversarial variants need p1/p2 batch counts >= 1");
    }
    if (schedule.epochs < 1 || schedule.batch_size < 1) {
        throw ConfigError("train_minimax: epochs and batch size must be >= 1");
    }

    std::vector<Sample> pool = build_pool(cache, trial_ids, labels);
    std::size_t rounds = schedule.rounds_per_epoch > 0
                             ? static_cast<std::size_t>(schedule.rounds_per_epoch)
                             : (pool.size() + static_cast<std::size_t>(schedule.batch_size) - 1) /
                                   static_cast<std::size_t>(schedule.batch_size);

    AdamHyper hyper{schedule.learning_rate, schedule.beta1, schedule.beta2, schedule.epsilon};
    Adam optimizer(hyper);
    BatchStream stream(pool, substream_seed(schedule.seed, 0x62617463ULL));  // "batc"
    auto dropout_rng = make_rng(substream_seed(schedule.seed, 0x64726f70ULL));

    const LossWeights& w = core.cfg.weights;
    TrainResult result;

    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        EpochTrace trace;
        trace.epoch = epoch;
        std::size_t p1_count = 0, p2_count = 0;

        for (std::size_t round = 0; round < rounds; ++round) {
            // ---- P1: estimation side ----
            for (int rep = 0; rep < std::max(1, core.has_split() ? schedule.p1_batches : 1);
                 ++rep) {
                set_trainable(core.p1_groups(), true);
                set_trainable(core.p2_groups(), false);
                Tape tape;
                TapeBindings bindings;
                for (ParamGroup* g : core.all_groups()) bindings.bind(tape, *g);
                auto batch = stream.next(static_cast<std::size_t>(schedule.batch_size));
                ForwardOut f =
                    forward_batch(tape, bindings, core, batch, Phase::P1, &dropout_rng);

                Var objective = scale(tape, f.l_m, w.alpha);
                if (core.has_split()) {
                    objective = add(tape, objective, scale(tape, f.l_r, w.beta));
                    Var adv = add(tape, f.l_f1, f.l_f2);
                    objective = sub(tape, objective, scale(tape, adv, w.gamma));
                    if (core.has_discriminator())
                        objective = sub(tape, objective, scale(tape, f.l_d, w.delta));
                }
                tape.backward(objective);
                for (ParamGroup* g : core.p1_groups())
                    optimizer.step(*g, bindings.collect(tape, *g));

                trace.p1_objective += tape.scalar(objective);
                trace.p1_terms.l_m += tape.scalar(f.l_m);
                if (core.has_split()) {
                    trace.p1_terms.l_r += tape.scalar(f.l_r);
                    trace.p1_terms.l_f1 += tape.scalar(f.l_f1);
                    trace.p1_terms.l_f2 += tape.scalar(f.l_f2);
                    if (core.has_discriminator()) trace.p1_terms.l_d += tape.scalar(f.l_d);
                }
                p1_count++;
                result.p1_steps++;
            }

            // ---- P2: adversary ----
            if (core.has_split()) {
                for (int rep = 0; rep < schedule.p2_batches; ++rep) {
                    set_trainable(core.p1_groups(), false);
                    set_trainable(core.p2_groups(), true);
                    Tape tape;
                    TapeBindings bindings;
                    for (ParamGroup* g : core.all_groups()) bindings.bind(tape, *g);
                    auto batch = stream.next(static_cast<std::size_t>(schedule.batch_size));
                    ForwardOut f = forward_batch(tape, bindings, core, batch, Phase::P2, nullptr);

                    Var objective = add(tape, f.l_f1, f.l_f2);
                    if (core.has_discriminator()) objective = add(tape, objective, f.l_d);
                    tape.backward(objective);
                    for (ParamGroup* g : core.p2_groups())
                        optimizer.step(*g, bindings.collect(tape, *g));

                    trace.p2_objective += tape.scalar(objective);
                    p2_count++;
                    result.p2_steps++;
                }
            }
        }

        set_trainable(core.p1_groups(), true);
        set_trainable(core.p2_groups(), true);

        if (p1_count) {
            trace.p1_objective /= static_cast<double>(p1_count);
            trace.p1_terms.l_m /= static_cast<double>(p1_count);
            trace.p1_terms.l_r /= static_cast<double>(p1_count);
            trace.p1_terms.l_f1 /= static_cast<double>(p1_count);
            trace.p1_terms.l_f2 /= static_cast<double>(p1_count);
            trace.p1_terms.l_d /= static_cast<double>(p1_count);
        }
        if (p2_count) trace.p2_objective /= static_cast<double>(p2_count);
        trace.p1_terms.total = core.has_discriminator()
                                   ? compose_full(w, trace.p1_terms.l_m, trace.p1_terms.l_r,
                                                  trace.p1_terms.l_f1, trace.p1_terms.l_f2,
                                                  trace.p1_terms.l_d)
                                   : compose_nuis(w, trace.p1_terms.l_m, trace.p1_terms.l_r,
                                                  trace.p1_terms.l_f1, trace.p1_terms.l_f2);

        finite_or_throw(trace.p1_objective, "p1 objective", epoch);
        finite_or_throw(trace.p2_objective, "p2 objective", epoch);
        result.trace.push_back(trace);
    }
    return result;
}

std::vector<int> predict_trial(const Model& model, const TrialCache& cache, int trial_id) {
    const auto& trial = cache.trial(trial_id);
    const Tensor& H = cache.features(trial_id);
    if (trial.states != model.core.cfg.states) {
        throw ConfigError("predict: model expects " + std::to_string(model.core.cfg.states) +
                          " states, trial has " + std::to_string(trial.states));
    }
    std::vector<int> out;
    out.reserve(trial.frames());
    constexpr std::size_t kChunk = 64;
    for (std::size_t begin = 0; begin < trial.frames(); begin += kChunk) {
        std::size_t end = std::min(trial.frames(), begin + kChunk);
        std::vector<Sample> batch;
        batch.reserve(end - begin);
        for (std::size_t t = begin; t < end; ++t) {
            Sample s;
            s.H = &H;
            s.t = static_cast<long>(t);
            s.state = trial.labels[t];
            batch.push_back(s);
        }
        Tape tape(false);
        TapeBindings bindings;
        for (const ParamGroup* g : model.core.all_groups()) bindings.bind(tape, *g);
        ForwardOut f = forward_batch(tape, bindings, model.core, batch, Phase::Eval, nullptr);
        const Tensor& probs = tape.val(f.probs);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < probs.cols(); ++c)
                if (probs.at(r, c) > probs.at(r, best)) best = c;
            out.push_back(static_cast<int>(best));
        }
    }
    return out;
}

std::vector<EmbeddingRecord> export_embeddings(const Model& model, const TrialCache& cache,
                                               const std::vector<int>& trial_ids) {
    if (!model.core.has_split()) {
        throw VariantError("export_embeddings: NA variant has no latent split");
    }
    std::vector<EmbeddingRecord> out;
    for (int id : trial_ids) {
        const auto& trial = cache.trial(id);
        const Tensor& H = cache.features(id);
        long T = static_cast<long>(trial.frames());
        long start = 0;
        while (start < T) {
            long end = start;
            while (end < T && trial.labels[static_cast<std::size_t>(end)] ==
                                  trial.labels[static_cast<std::size_t>(start)])
                end++;
            EmbeddingRecord rec;
            rec.trial_id = id;
            rec.state = trial.labels[static_cast<std::size_t>(start)];
            rec.start = start;
            rec.length = end - start;
            rec.mean_e1 = Tensor({model.core.cfg.e_dim});
            rec.mean_e2 = Tensor({model.core.cfg.e_dim});
            for (long t = start; t < end; ++t) {
                LatentSplit split = encode_split(column(H, static_cast<std::size_t>(t)), model.core);
                for (std::size_t i = 0; i < rec.mean_e1.size(); ++i) {
                    rec.mean_e1[i] += split.e1[i] / static_cast<double>(rec.length);
                    rec.mean_e2[i] += split.e2[i] / static_cast<double>(rec.length);
                }
            }
            out.push_back(std::move(rec));
            start = end;
        }
    }
    return out;
}

// ---- checkpointing -----------------------------------------------------

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json model_meta(const Model& m) {
    nlohmann::ordered_json j;
    j["variant"] = variant_name(m.core.kind);
    j["enc"] = {{"vis_in", m.encoders.cfg.vis_in}, {"kin_in", m.encoders.cfg.kin_in},
                {"evt_in", m.encoders.cfg.evt_in}, {"n_vis", m.encoders.cfg.n_vis},
                {"n_kin", m.encoders.cfg.n_kin},   {"n_evt", m.encoders.cfg.n_evt},
                {"att_dim", m.encoders.cfg.att_dim}, {"t_obs", m.encoders.cfg.t_obs}};
    const ModelConfig& c = m.core.cfg;
    j["core"] = {{"feature_dim", c.feature_dim},
                 {"e_dim", c.e_dim},
                 {"m_hidden", c.m_hidden},
                 {"states", c.states},
                 {"techniques", c.techniques},
                 {"t_obs", c.t_obs},
                 {"mode", c.mode == WindowMode::causal ? "causal" : "noncausal"},
                 {"alpha", c.weights.alpha},
                 {"beta", c.weights.beta},
                 {"gamma", c.weights.gamma},
                 {"delta", c.weights.delta},
                 {"dropout", c.weights.dropout}};
    return j;
}

Model model_from_meta(const nlohmann::json& j) {
    enc::EncoderConfig ec;
    ec.vis_in = j.at("enc").at("vis_in");
    ec.kin_in = j.at("enc").at("kin_in");
    ec.evt_in = j.at("enc").at("evt_in");
    ec.n_vis = j.at("enc").at("n_vis");
    ec.n_kin = j.at("enc").at("n_kin");
    ec.n_evt = j.at("enc").at("n_evt");
    ec.att_dim = j.at("enc").at("att_dim");
    ec.t_obs = j.at("enc").at("t_obs");
    ModelConfig mc;
    mc.feature_dim = j.at("core").at("feature_dim");
    mc.e_dim = j.at("core").at("e_dim");
    mc.m_hidden = j.at("core").at("m_hidden");
    mc.states = j.at("core").at("states");
    mc.techniques = j.at("core").at("techniques");
    mc.t_obs = j.at("core").at("t_obs");
    mc.mode = j.at("core").at("mode") == "causal" ? WindowMode::causal : WindowMode::noncausal;
    mc.weights.alpha = j.at("core").at("alpha");
    mc.weights.beta = j.at("core").at("beta");
    mc.weights.gamma = j.at("core").at("gamma");
    mc.weights.delta = j.at("core").at("delta");
    mc.weights.dropout = j.at("core").at("dropout");
    return Model::init(parse_variant(j.at("variant")), ec, mc, 0);
}

void append_group(std::string& out, const ParamGroup& g) {
    out += "group " + g.name + " trainable " + (g.trainable ? std::string("1") : std::string("0")) +
           " tensors " + std::to_string(g.tensors.size()) + "\n";
    for (std::size_t i = 0; i < g.tensors.size(); ++i) {
        const Tensor& t = g.tensors[i];
        out += "tensor " + g.tensor_names[i] + " " + std::to_string(t.rank());
        for (std::size_t d : t.shape()) out += " " + std::to_string(d);
        out += "\n";
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (j) out += ' ';
            out += format_double(t[j]);
        }
        out += "\n";
    }
}

void read_group(LineReader& in, ParamGroup& g) {
    auto toks = split_ws(in.expect_line("group header"));
    if (toks.size() != 6 || toks[0] != "group" || toks[2] != "trainable" || toks[4] != "tensors") {
        throw ParseError(in.path() + ": malformed group header", in.line_number());
    }
    if (toks[1] != g.name) {
        throw ParseError(in.path() + ": expected group " + g.name + ", found " + toks[1],
                         in.line_number());
    }
    g.trainable = toks[3] == "1";
    std::size_t count = static_cast<std::size_t>(parse_long(toks[5]));
    if (count != g.tensors.size()) {
        throw ParseError(in.path() + ": group " + g.name + " tensor count mismatch",
                         in.line_number());
    }
    for (std::size_t i = 0; i < count; ++i) {
        auto head = split_ws(in.expect_line("tensor header"));
        if (head.size() < 3 || head[0] != "tensor") {
            throw ParseError(in.path() + ": malformed tensor header", in.line_number());
        }
        if (head[1] != g.tensor_names[i]) {
            throw ParseError(in.path() + ": expected tensor " + g.tensor_names[i], in.line_number());
        }
        std::size_t rank = static_cast<std::size_t>(parse_long(head[2]));
        if (head.size() != 3 + rank) {
            throw ParseError(in.path() + ": tensor rank/dims mismatch", in.line_number());
        }
        std::vector<std::size_t> shape;
        for (std::size_t d = 0; d < rank; ++d)
            shape.push_back(static_cast<std::size_t>(parse_long(head[3 + d])));
        if (shape != g.tensors[i].shape()) {
            throw ParseError(in.path() + ": tensor " + g.tensor_names[i] + " shape mismatch",
                             in.line_number());
        }
        auto vals = split_ws(in.expect_line("tensor values"));
        if (vals.size() != g.tensors[i].size()) {
            throw ParseError(in.path() + ": tensor " + g.tensor_names[i] + " value count mismatch",
                             in.line_number());
        }
        for (std::size_t j = 0; j < vals.size(); ++j) g.tensors[i][j] = parse_double(vals[j]);
    }
}

std::vector<ParamGroup*> checkpoint_groups(Model& m) {
    std::vector<ParamGroup*> out = m.encoders.groups();
    for (ParamGroup* g : m.core.all_groups()) out.push_back(g);
    return out;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path,
                     const std::string& config_echo) {
    std::string out = "invseq-checkpoint v" + std::to_string(kCheckpointVersion) + "\n";
    out += "meta " + model_meta(model).dump() + "\n";
    std::string echo = config_echo.empty() ? "{}" : config_echo;
    out += "config " + echo + "\n";
    Model& m = const_cast<Model&>(model);
    auto groups = checkpoint_groups(m);
    out += "groups " + std::to_string(groups.size()) + "\n";
    for (const ParamGroup* g : groups) append_group(out, *g);
    write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    LineReader in(path);
    std::string magic = in.expect_line("header");
    if (magic.rfind("invseq-checkpoint v", 0) != 0) {
        throw ParseError(path + ": not a checkpoint file", in.line_number());
    }
    if (parse_long(magic.substr(19)) != kCheckpointVersion) {
        throw VersionError(path + ": unsupported checkpoint version");
    }
    std::string meta_line = in.expect_line("meta");
    if (meta_line.rfind("meta ", 0) != 0)
        throw ParseError(path + ": expected meta line", in.line_number());
    std::string config_line = in.expect_line("config");
    if (config_line.rfind("config ", 0) != 0)
        throw ParseError(path + ": expected config line", in.line_number());

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_line.substr(5));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad meta json: " + e.what());
    }
    Checkpoint ck{model_from_meta(meta), config_line.substr(7)};

    auto head = split_ws(in.expect_line("groups"));
    if (head.size() != 2 || head[0] != "groups")
        throw ParseError(path + ": expected groups count", in.line_number());
    auto groups = checkpoint_groups(ck.model);
    if (static_cast<std::size_t>(parse_long(head[1])) != groups.size()) {
        throw ParseError(path + ": group count mismatch", in.line_number());
    }
    for (ParamGroup* g : groups) read_group(in, *g);
    return ck;
}

}  // namespace invseq::net

#include "invseq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "invseq/errors.hpp"
#include "invseq/rng.hpp"
#include "invseq/textio.hpp"

namespace invseq::data {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kTagTask = 0x7461736bULL;      // "task"
constexpr std::uint64_t kTagTechnique = 0x74656368ULL; // "tech"
constexpr std::uint64_t kTagTrial = 0x7472696cULL;     // "tril"

}  // namespace

void TaskFsm::validate_transitions(const Tensor& matrix) const {
    if (matrix.rank() != 2 || matrix.rows() != states || matrix.cols() != states) {
        throw ConfigError("transition matrix shape " + matrix.shape_str() + " for " +
                          std::to_string(states) + " states");
    }
    for (std::size_t r = 0; r < states; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < states; ++c) {
            if (matrix.at(r, c) < 0.0) throw ConfigError("negative transition probability");
            sum += matrix.at(r, c);
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError("transition row " + std::to_string(r) + " sums to " +
                              std::to_string(sum) + ", not 1");
        }
    }
}

TaskFsm make_task(const GeneratorConfig& cfg, std::uint64_t seed) {
    if (cfg.states < 2) throw ConfigError("task needs at least 2 states");
    TaskFsm fsm;
    fsm.states = cfg.states;
    fsm.kin_channels = cfg.kin_channels;
    fsm.vis_dims = cfg.vis_dims;
    fsm.evt_dims = cfg.evt_dims;
    fsm.duration_jitter = cfg.duration_jitter;
    auto rng = make_rng(substream_seed(seed, kTagTask));
    for (std::size_t s = 0; s < cfg.states; ++s) {
        fsm.duration_mean.push_back(uniform(rng, cfg.duration_min, cfg.duration_max));
        StateEmission e;
        for (std::size_t c = 0; c < cfg.kin_channels; ++c) {
            e.kin_offset.push_back(uniform(rng, -1.5, 1.5));
            e.kin_amp.push_back(uniform(rng, 0.4, 1.2));
            e.kin_freq.push_back(uniform(rng, 0.2, 1.2));
            e.kin_phase.push_back(uniform(rng, 0.0, 2.0 * kPi));
        }
        for (std::size_t c = 0; c < cfg.vis_dims; ++c) {
            e.vis_offset.push_back(uniform(rng, -1.5, 1.5));
            e.vis_amp.push_back(uniform(rng, 0.2, 0.8));
            e.vis_freq.push_back(uniform(rng, 0.1, 0.8));
            e.vis_phase.push_back(uniform(rng, 0.0, 2.0 * kPi));
        }
        for (std::size_t c = 0; c < cfg.evt_dims; ++c) {
            e.evt_pattern.push_back(uniform(rng, 0.0, 1.0) < 0.4 ? 1 : 0);
        }
        fsm.emissions.push_back(std::move(e));
    }
    return fsm;
}

namespace {

// Sequential backbone with a technique-specific reordering mixed in. The
// bias pushes probability mass onto the technique's preferred successor.
Tensor technique_transition(const TaskFsm& fsm, std::mt19937_64& rng, double bias) {
    std::size_t S = fsm.states;
    std::vector<std::size_t> order(S);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin() + 1, order.end(), rng);  // state 0 stays the entry state
    std::vector<std::size_t> successor(S);
    for (std::size_t i = 0; i < S; ++i) successor[order[i]] = order[(i + 1) % S];

    Tensor m({S, S});
    for (std::size_t s = 0; s < S; ++s) {
        // base: next-in-index-order 0.7, any other (non-self) 0.3 split
        std::size_t seq_next = (s + 1) % S;
        for (std::size_t c = 0; c < S; ++c) {
            if (c == s) continue;
            m.at(s, c) = 0.3 / static_cast<double>(S - (seq_next == s ? 1 : 2));
        }
        if (seq_next != s) m.at(s, seq_next) = 0.7;
        // blend toward the technique ordering
        std::size_t pref = successor[s];
        for (std::size_t c = 0; c < S; ++c) m.at(s, c) *= (1.0 - bias);
        if (pref != s) {
            m.at(s, pref) += bias;
        } else {
            m.at(s, seq_next) += bias;
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < S; ++c) sum += m.at(s, c);
        for (std::size_t c = 0; c < S; ++c) m.at(s, c) /= sum;
    }
    return m;
}

}  // namespace

std::vector<TechniqueSpec> make_techniques(const TaskFsm& fsm, const GeneratorConfig& cfg,
                                           std::uint64_t seed) {
    if (cfg.techniques < 1) throw ConfigError("need at least one technique");
    std::vector<TechniqueSpec> out;
    for (std::size_t k = 0; k < cfg.techniques; ++k) {
        auto rng = make_rng(substream_seed(seed, kTagTechnique, k));
        TechniqueSpec t;
        t.id = static_cast<int>(k);
        t.transition = technique_transition(fsm, rng, cfg.transition_bias);
        fsm.validate_transitions(t.transition);
        for (std::size_t c = 0; c < fsm.kin_channels; ++c) {
            t.amp_mult.push_back(uniform(rng, 1.0 - cfg.technique_amp_spread,
                                         1.0 + cfg.technique_amp_spread));
            t.speed_mult.push_back(uniform(rng, 1.0 - cfg.technique_speed_spread,
                                           1.0 + cfg.technique_speed_spread));
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<MultiStreamTrial> generate(const TaskFsm& fsm,
                                       const std::vector<TechniqueSpec>& techniques,
                                       const NuisanceSpec& nuisance, std::size_t n_trials,
                                       std::size_t n_users, double frame_rate,
                                       double trial_seconds, std::uint64_t seed) {
    if (n_users < 1 || n_trials < n_users) {
        throw ConfigError("generate: need n_trials >= n_users >= 1");
    }
    if (techniques.empty()) throw ConfigError("generate: no techniques");
    for (const TechniqueSpec& t : techniques) fsm.validate_transitions(t.transition);

    std::vector<MultiStreamTrial> trials;
    trials.reserve(n_trials);
    std::size_t K = techniques.size();
    for (std::size_t i = 0; i < n_trials; ++i) {
        auto rng = make_rng(substream_seed(seed, kTagTrial, i));
        const TechniqueSpec& tech = techniques[i % K];

        MultiStreamTrial trial;
        trial.id = static_cast<int>(i);
        trial.technique = tech.id;
        trial.user = static_cast<int>((i / K) % n_users);
        trial.rate = frame_rate;
        trial.states = fsm.states;

        std::size_t target_frames = static_cast<std::size_t>(
            std::llround(trial_seconds * frame_rate * uniform(rng, 0.9, 1.1)));
        target_frames = std::max<std::size_t>(target_frames, 2);

        // per-trial nuisance draws
        std::vector<double> kin_gain(fsm.kin_channels), kin_off(fsm.kin_channels);
        std::vector<double> vis_gain(fsm.vis_dims), vis_off(fsm.vis_dims);
        for (std::size_t c = 0; c < fsm.kin_channels; ++c) {
            kin_gain[c] = uniform(rng, nuisance.gain_min, nuisance.gain_max);
            kin_off[c] = uniform(rng, nuisance.offset_min, nuisance.offset_max);
        }
        for (std::size_t c = 0; c < fsm.vis_dims; ++c) {
            vis_gain[c] = uniform(rng, nuisance.gain_min, nuisance.gain_max);
            vis_off[c] = uniform(rng, nuisance.offset_min, nuisance.offset_max);
        }
        double drift_freq = uniform(rng, 0.02, 0.08);
        double drift_phase = uniform(rng, 0.0, 2.0 * kPi);

        trial.kin = Tensor({fsm.kin_channels, target_frames});
        trial.vis = Tensor({fsm.vis_dims, target_frames});
        trial.evt = Tensor({fsm.evt_dims, target_frames});
        trial.labels.resize(target_frames);

        std::size_t state = 0;
        std::size_t t = 0;
        while (t < target_frames) {
            double jitter = 1.0 + fsm.duration_jitter * gaussian(rng);
            double dur_s = std::max(0.2, fsm.duration_mean[state] * jitter);
            std::size_t dur_frames =
                std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(dur_s * frame_rate)));
            const StateEmission& em = fsm.emissions[state];
            for (std::size_t f = 0; f < dur_frames && t < target_frames; ++f, ++t) {
                double phase_s = static_cast<double>(f) / frame_rate;
                double drift = nuisance.drift_amplitude *
                               std::sin(2.0 * kPi * drift_freq * static_cast<double>(t) / frame_rate +
                                        drift_phase);
                trial.labels[t] = static_cast<int>(state);
                for (std::size_t c = 0; c < fsm.kin_channels; ++c) {
                    double core = em.kin_offset[c] +
                                  em.kin_amp[c] * std::sin(2.0 * kPi * em.kin_freq[c] *
                                                               tech.speed_mult[c] * phase_s +
                                                           em.kin_phase[c]);
                    double v = kin_gain[c] * tech.amp_mult[c] * core + kin_off[c] + drift +
                               nuisance.noise_sigma * gaussian(rng);
                    trial.kin.at(c, t) = v;
                }
                for (std::size_t c = 0; c < fsm.vis_dims; ++c) {
                    double core = em.vis_offset[c] +
                                  em.vis_amp[c] * std::sin(2.0 * kPi * em.vis_freq[c] * phase_s +
                                                           em.vis_phase[c]);
                    double v = vis_gain[c] * core + vis_off[c] + drift +
                               nuisance.noise_sigma * gaussian(rng);
                    trial.vis.at(c, t) = v;
                }
                for (std::size_t c = 0; c < fsm.evt_dims; ++c) {
                    double on = em.evt_pattern[c] ? 1.0 : 0.0;
                    if (on == 1.0 && nuisance.event_dropout > 0.0 &&
                        uniform(rng, 0.0, 1.0) < nuisance.event_dropout) {
                        on = 0.0;
                    }
                    trial.evt.at(c, t) = on;
                }
            }
            // sample the next state
            double u = uniform(rng, 0.0, 1.0);
            double acc = 0.0;
            std::size_t next = fsm.states - 1;
            for (std::size_t c = 0; c < fsm.states; ++c) {
                acc += tech.transition.at(state, c);
                if (u <= acc) {
                    next = c;
                    break;
                }
            }
            state = next;
        }
        trials.push_back(std::move(trial));
    }
    return trials;
}

std::vector<MultiStreamTrial> generate(const GeneratorConfig& cfg, std::uint64_t seed) {
    TaskFsm fsm = make_task(cfg, seed);
    auto techniques = make_techniques(fsm, cfg, seed);
    return generate(fsm, techniques, cfg.nuisance, cfg.trials, cfg.users, cfg.frame_rate,
                    cfg.trial_seconds, seed);
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr int kTrialVersion = 1;

std::string trial_filename(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trial_%04d.txt", id);
    return buf;
}

void append_block(std::string& out, const Tensor& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out += ' ';
            out += format_double(m.at(r, c));
        }
        out += '\n';
    }
}

Tensor parse_block(LineReader& in, std::size_t rows, std::size_t cols, const char* what) {
    Tensor m({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        auto toks = split_ws(in.expect_line(what));
        if (toks.size() != cols) {
            throw ParseError(in.path() + ": " + what + " row has " + std::to_string(toks.size()) +
                                 " values, expected " + std::to_string(cols),
                             in.line_number());
        }
        for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = parse_double(toks[c]);
    }
    return m;
}

long header_value(LineReader& in, const char* key) {
    auto toks = split_ws(in.expect_line(key));
    if (toks.size() != 2 || toks[0] != key) {
        throw ParseError(in.path() + ": expected '" + key + " <value>'", in.line_number());
    }
    return parse_long(toks[1]);
}

std::string serialize_trial(const MultiStreamTrial& t) {
    std::string out;
    out += "invseq-trial v" + std::to_string(kTrialVersion) + "\n";
    out += "id " + std::to_string(t.id) + "\n";
    out += "user " + std::to_string(t.user) + "\n";
    out += "technique " + std::to_string(t.technique) + "\n";
    out += "rate " + format_double(t.rate) + "\n";
    out += "states " + std::to_string(t.states) + "\n";
    out += "kin_channels " + std::to_string(t.kin.rows()) + "\n";
    out += "vis_dims " + std::to_string(t.vis.rows()) + "\n";
    out += "evt_dims " + std::to_string(t.evt.rows()) + "\n";
    out += "frames " + std::to_string(t.frames()) + "\n";
    out += "labels\n";
    for (std::size_t i = 0; i < t.labels.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(t.labels[i]);
    }
    out += "\nkin\n";
    append_block(out, t.kin);
    out += "vis\n";
    append_block(out, t.vis);
    out += "evt\n";
    append_block(out, t.evt);
    return out;
}

MultiStreamTrial parse_trial(const std::string& path) {
    LineReader in(path);
    std::string magic = in.expect_line("header");
    if (magic.rfind("invseq-trial v", 0) != 0) {
        throw ParseError(path + ": not a trial file", in.line_number());
    }
    long version = parse_long(magic.substr(14));
    if (version != kTrialVersion) {
        throw VersionError(path + ": unsupported trial version " + std::to_string(version));
    }
    MultiStreamTrial t;
    t.id = static_cast<int>(header_value(in, "id"));
    t.user = static_cast<int>(header_value(in, "user"));
    t.technique = static_cast<int>(header_value(in, "technique"));
    {
        auto toks = split_ws(in.expect_line("rate"));
        if (toks.size() != 2 || toks[0] != "rate")
            throw ParseError(path + ": expected 'rate <value>'", in.line_number());
        t.rate = parse_double(toks[1]);
    }
    t.states = static_cast<std::size_t>(header_value(in, "states"));
    std::size_t kin_ch = static_cast<std::size_t>(header_value(in, "kin_channels"));
    std::size_t vis_d = static_cast<std::size_t>(header_value(in, "vis_dims"));
    std::size_t evt_d = static_cast<std::size_t>(header_value(in, "evt_dims"));
    std::size_t frames = static_cast<std::size_t>(header_value(in, "frames"));

    if (in.expect_line("labels") != "labels")
        throw ParseError(path + ": expected 'labels'", in.line_number());
    auto toks = split_ws(in.expect_line("label row"));
    if (toks.size() != frames)
        throw ParseError(path + ": label count mismatch", in.line_number());
    for (const auto& tok : toks) {
        long v = parse_long(tok);
        if (v < 0 || static_cast<std::size_t>(v) >= t.states)
            throw ParseError(path + ": state label out of range", in.line_number());
        t.labels.push_back(static_cast<int>(v));
    }
    if (in.expect_line("kin") != "kin")
        throw ParseError(path + ": expected 'kin'", in.line_number());
    t.kin = parse_block(in, kin_ch, frames, "kin");
    if (in.expect_line("vis") != "vis")
        throw ParseError(path + ": expected 'vis'", in.line_number());
    t.vis = parse_block(in, vis_d, frames, "vis");
    if (in.expect_line("evt") != "evt")
        throw ParseError(path + ": expected 'evt'", in.line_number());
    t.evt = parse_block(in, evt_d, frames, "evt");
    for (std::size_t i = 0; i < t.evt.size(); ++i) {
        if (t.evt[i] != 0.0 && t.evt[i] != 1.0)
            throw ParseError(path + ": event stream value not binary");
    }
    return t;
}

}  // namespace

void save(const std::vector<MultiStreamTrial>& trials, const std::string& dir,
          std::uint64_t seed, const std::string& config_echo) {
    fs::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format"] = "invseq-dataset";
    manifest["version"] = 1;
    manifest["seed"] = seed;
    manifest["config"] = config_echo;
    std::vector<std::string> names;
    for (const MultiStreamTrial& t : trials) {
        std::string name = trial_filename(t.id);
        write_file(dir + "/" + name, serialize_trial(t));
        names.push_back(name);
    }
    manifest["trials"] = names;
    write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::vector<MultiStreamTrial> load(const std::string& dir) {
    std::string manifest_path = dir + "/manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path + ": " + e.what());
    }
    if (manifest.value("format", "") != "invseq-dataset") {
        throw ParseError(manifest_path + ": not a dataset manifest");
    }
    if (manifest.value("version", 0) != 1) {
        throw VersionError(manifest_path + ": unsupported dataset version");
    }
    std::vector<MultiStreamTrial> trials;
    for (const auto& name : manifest.at("trials")) {
        trials.push_back(parse_trial(dir + "/" + name.get<std::string>()));
    }
    return trials;
}

MultiStreamTrial resample(const MultiStreamTrial& trial, double source_rate) {
    if (!(source_rate > 0.0)) {
        throw DataError("resample: non-monotone timestamps (source rate " +
                        std::to_string(source_rate) + ")");
    }
    constexpr double kTargetRate = 10.0;
    std::size_t in_frames = trial.frames();
    if (in_frames == 0) throw DataError("resample: empty trial");
    double duration = static_cast<double>(in_frames - 1) / source_rate;
    // guard against 23.9 * 10 landing just below 239
    std::size_t out_frames =
        static_cast<std::size_t>(std::floor(duration * kTargetRate + 1e-9)) + 1;

    MultiStreamTrial out = trial;
    out.rate = kTargetRate;
    out.kin = Tensor({trial.kin.rows(), out_frames});
    out.vis = Tensor({trial.vis.rows(), out_frames});
    out.evt = Tensor({trial.evt.rows(), out_frames});
    out.labels.assign(out_frames, 0);

    for (std::size_t j = 0; j < out_frames; ++j) {
        double src = static_cast<double>(j) * source_rate / kTargetRate;
        auto lo = static_cast<std::size_t>(std::floor(src));
        std::size_t hi = std::min(lo + 1, in_frames - 1);
        double w = src - static_cast<double>(lo);
        for (std::size_t c = 0; c < trial.kin.rows(); ++c)
            out.kin.at(c, j) = (1.0 - w) * trial.kin.at(c, lo) + w * trial.kin.at(c, hi);
        for (std::size_t c = 0; c < trial.vis.rows(); ++c)
            out.vis.at(c, j) = (1.0 - w) * trial.vis.at(c, lo) + w * trial.vis.at(c, hi);
        std::size_t nearest = w < 0.5 ? lo : hi;
        for (std::size_t c = 0; c < trial.evt.rows(); ++c)
            out.evt.at(c, j) = trial.evt.at(c, nearest);
        out.labels[j] = trial.labels[nearest];
    }
    return out;
}

std::vector<WindowedSample> window(const MultiStreamTrial& trial, int t_obs, WindowMode mode,
                                   int technique_label) {
    if (trial.frames() == 0) throw DataError("window: empty trial");
    std::vector<WindowedSample> out;
    out.reserve(trial.frames());
    for (long t = 0; t < static_cast<long>(trial.frames()); ++t) {
        WindowedSample s;
        s.trial_id = trial.id;
        s.center = t;
        s.mode = mode;
        s.kin_window = window_columns(trial.kin, t, t_obs, mode);
        s.vis_window = window_columns(trial.vis, t, t_obs, mode);
        s.evt_window = window_columns(trial.evt, t, t_obs, mode);
        s.state = trial.labels[static_cast<std::size_t>(t)];
        s.technique_label = technique_label;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Fold> split_louo(const std::vector<MultiStreamTrial>& trials) {
    std::map<int, std::vector<int>> by_user;
    for (const auto& t : trials) by_user[t.user].push_back(t.id);
    if (by_user.size() < 2) {
        throw ConfigError("split_louo: needs at least 2 users; use split_kfold instead");
    }
    std::vector<Fold> folds;
    for (const auto& [user, test_ids] : by_user) {
        Fold f;
        f.key = "user_" + std::to_string(user);
        f.test_ids = test_ids;
        for (const auto& t : trials)
            if (t.user != user) f.train_ids.push_back(t.id);
        folds.push_back(std::move(f));
    }
    return folds;
}

std::vector<Fold> split_kfold(const std::vector<MultiStreamTrial>& trials, std::size_t k,
                              std::uint64_t seed) {
    if (k < 1 || k > trials.size()) {
        throw ConfigError("split_kfold: k = " + std::to_string(k) + " for " +
                          std::to_string(trials.size()) + " trials");
    }
    std::vector<int> ids;
    for (const auto& t : trials) ids.push_back(t.id);
    auto rng = make_rng(substream_seed(seed, 0x666f6c64));  // "fold"
    std::shuffle(ids.begin(), ids.end(), rng);

    std::vector<Fold> folds(k);
    std::size_t n = ids.size(), base = n / k, extra = n % k, pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t take = base + (f < extra ? 1 : 0);
        folds[f].key = "fold_" + std::to_string(f);
        for (std::size_t i = 0; i < take; ++i) folds[f].test_ids.push_back(ids[pos++]);
    }
    for (std::size_t f = 0; f < k; ++f) {
        std::set<int> test(folds[f].test_ids.begin(), folds[f].test_ids.end());
        for (const auto& t : trials)
            if (!test.count(t.id)) folds[f].train_ids.push_back(t.id);
        std::sort(folds[f].test_ids.begin(), folds[f].test_ids.end());
    }
    return folds;
}

std::vector<Fold> split_leave_one_technique_out(const std::vector<MultiStreamTrial>& trials) {
    std::map<int, std::vector<int>> by_tech;
    for (const auto& t : trials) by_tech[t.technique].push_back(t.id);
    if (by_tech.size() < 2) {
        throw ConfigError("split_leave_one_technique_out: needs at least 2 techniques");
    }
    std::vector<Fold> folds;
    for (const auto& [tech, test_ids] : by_tech) {
        Fold f;
        f.key = "technique_" + std::to_string(tech);
        f.test_ids = test_ids;
        for (const auto& t : trials)
            if (t.technique != tech) f.train_ids.push_back(t.id);
        folds.push_back(std::move(f));
    }
    return folds;
}

const MultiStreamTrial& trial_by_id(const std::vector<MultiStreamTrial>& trials, int id) {
    for (const auto& t : trials)
        if (t.id == id) return t;
    throw DataError("no trial with id " + std::to_string(id));
}

}  // namespace invseq::data

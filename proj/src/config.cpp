#include "invseq/config.hpp"

#include <json.hpp>

#include "invseq/errors.hpp"
#include "invseq/textio.hpp"

namespace invseq::harness {

using nlohmann::json;
using nlohmann::ordered_json;

void Config::derive() {
    encoder.vis_in = dataset.vis_dims;
    encoder.kin_in = dataset.kin_channels;
    encoder.evt_in = dataset.evt_dims;
    model.feature_dim = encoder.fuse_dims().total();
    model.t_obs = encoder.t_obs;
    model.states = dataset.states;
}

namespace {

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string Config::to_json_string() const {
    ordered_json j;
    j["dataset"] = {{"states", dataset.states},
                    {"kin_channels", dataset.kin_channels},
                    {"vis_dims", dataset.vis_dims},
                    {"evt_dims", dataset.evt_dims},
                    {"techniques", dataset.techniques},
                    {"users", dataset.users},
                    {"trials", dataset.trials},
                    {"frame_rate", dataset.frame_rate},
                    {"trial_seconds", dataset.trial_seconds},
                    {"duration_min", dataset.duration_min},
                    {"duration_max", dataset.duration_max},
                    {"duration_jitter", dataset.duration_jitter},
                    {"noise_sigma", dataset.nuisance.noise_sigma},
                    {"gain_min", dataset.nuisance.gain_min},
                    {"gain_max", dataset.nuisance.gain_max},
                    {"offset_min", dataset.nuisance.offset_min},
                    {"offset_max", dataset.nuisance.offset_max},
                    {"drift_amplitude", dataset.nuisance.drift_amplitude},
                    {"event_dropout", dataset.nuisance.event_dropout},
                    {"technique_amp_spread", dataset.technique_amp_spread},
                    {"technique_speed_spread", dataset.technique_speed_spread},
                    {"transition_bias", dataset.transition_bias}};
    j["encoder"] = {{"n_vis", encoder.n_vis},
                    {"n_kin", encoder.n_kin},
                    {"n_evt", encoder.n_evt},
                    {"att_dim", encoder.att_dim},
                    {"t_obs", encoder.t_obs}};
    j["model"] = {{"e_dim", model.e_dim},
                  {"m_hidden", model.m_hidden},
                  {"alpha", model.weights.alpha},
                  {"beta", model.weights.beta},
                  {"gamma", model.weights.gamma},
                  {"delta", model.weights.delta},
                  {"dropout", model.weights.dropout}};
    j["train"] = {{"p1_batches", train.p1_batches},
                  {"p2_batches", train.p2_batches},
                  {"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"rounds_per_epoch", train.rounds_per_epoch}};
    j["cluster"] = {{"k", cluster.k},
                    {"k_min", cluster.k_min},
                    {"k_max", cluster.k_max},
                    {"restarts", cluster.restarts},
                    {"band", cluster.band}};
    return j.dump();
}

Config Config::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    Config c;
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        get_if_present(d, "states", c.dataset.states);
        get_if_present(d, "kin_channels", c.dataset.kin_channels);
        get_if_present(d, "vis_dims", c.dataset.vis_dims);
        get_if_present(d, "evt_dims", c.dataset.evt_dims);
        get_if_present(d, "techniques", c.dataset.techniques);
        get_if_present(d, "users", c.dataset.users);
        get_if_present(d, "trials", c.dataset.trials);
        get_if_present(d, "frame_rate", c.dataset.frame_rate);
        get_if_present(d, "trial_seconds", c.dataset.trial_seconds);
        get_if_present(d, "duration_min", c.dataset.duration_min);
        get_if_present(d, "duration_max", c.dataset.duration_max);
        get_if_present(d, "duration_jitter", c.dataset.duration_jitter);
        get_if_present(d, "noise_sigma", c.dataset.nuisance.noise_sigma);
        get_if_present(d, "gain_min", c.dataset.nuisance.gain_min);
        get_if_present(d, "gain_max", c.dataset.nuisance.gain_max);
        get_if_present(d, "offset_min", c.dataset.nuisance.offset_min);
        get_if_present(d, "offset_max", c.dataset.nuisance.offset_max);
        get_if_present(d, "drift_amplitude", c.dataset.nuisance.drift_amplitude);
        get_if_present(d, "event_dropout", c.dataset.nuisance.event_dropout);
        get_if_present(d, "technique_amp_spread", c.dataset.technique_amp_spread);
        get_if_present(d, "technique_speed_spread", c.dataset.technique_speed_spread);
        get_if_present(d, "transition_bias", c.dataset.transition_bias);
    }
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        get_if_present(e, "n_vis", c.encoder.n_vis);
        get_if_present(e, "n_kin", c.encoder.n_kin);
        get_if_present(e, "n_evt", c.encoder.n_evt);
        get_if_present(e, "att_dim", c.encoder.att_dim);
        get_if_present(e, "t_obs", c.encoder.t_obs);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        get_if_present(m, "e_dim", c.model.e_dim);
        get_if_present(m, "m_hidden", c.model.m_hidden);
        get_if_present(m, "alpha", c.model.weights.alpha);
        get_if_present(m, "beta", c.model.weights.beta);
        get_if_present(m, "gamma", c.model.weights.gamma);
        get_if_present(m, "delta", c.model.weights.delta);
        get_if_present(m, "dropout", c.model.weights.dropout);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        get_if_present(t, "p1_batches", c.train.p1_batches);
        get_if_present(t, "p2_batches", c.train.p2_batches);
        get_if_present(t, "epochs", c.train.epochs);
        get_if_present(t, "batch_size", c.train.batch_size);
        get_if_present(t, "learning_rate", c.train.learning_rate);
        get_if_present(t, "rounds_per_epoch", c.train.rounds_per_epoch);
    }
    if (j.contains("cluster")) {
        const json& k = j.at("cluster");
        get_if_present(k, "k", c.cluster.k);
        get_if_present(k, "k_min", c.cluster.k_min);
        get_if_present(k, "k_max", c.cluster.k_max);
        get_if_present(k, "restarts", c.cluster.restarts);
        get_if_present(k, "band", c.cluster.band);
    }
    c.derive();
    return c;
}

Config Config::load(const std::string& path) { return from_json_string(read_file(path)); }

void Config::save(const std::string& path) const { write_file(path, to_json_string() + "\n"); }

}  // namespace invseq::harness

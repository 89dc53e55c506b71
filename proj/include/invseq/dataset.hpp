#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "invseq/tensor.hpp"
#include "invseq/windowing.hpp"

namespace invseq::data {

// Per-state emission templates: each channel carries a sinusoid around a
// state-specific offset; events are a binary activation pattern.
struct StateEmission {
    std::vector<double> kin_offset, kin_amp, kin_freq, kin_phase;
    std::vector<double> vis_offset, vis_amp, vis_freq, vis_phase;
    std::vector<std::uint8_t> evt_pattern;
};

// Semi-Markov task model: explicit per-state durations, zero-diagonal
// transition rows. Transition matrices are per technique.
struct TaskFsm {
    std::size_t states = 0;
    std::size_t kin_channels = 0;
    std::size_t vis_dims = 0;
    std::size_t evt_dims = 0;
    std::vector<double> duration_mean;  // seconds
    double duration_jitter = 0.25;      // relative

    std::vector<StateEmission> emissions;

    void validate_transitions(const Tensor& matrix) const;
};

// Trial-level style: a transition-matrix variant plus per-channel speed and
// amplitude multipliers applied to the kinematics templates.
struct TechniqueSpec {
    int id = 0;
    Tensor transition;  // [S x S], rows sum to 1
    std::vector<double> speed_mult;
    std::vector<double> amp_mult;
};

struct NuisanceSpec {
    double offset_min = -0.3, offset_max = 0.3;
    double gain_min = 0.85, gain_max = 1.2;
    double noise_sigma = 0.05;
    double drift_amplitude = 0.1;
    double event_dropout = 0.05;
};

struct MultiStreamTrial {
    int id = 0;
    int user = 0;
    int technique = 0;  // ground truth
    double rate = 10.0;
    std::size_t states = 0;
    Tensor kin;  // [channels x T]
    Tensor vis;  // [vis_dims x T]
    Tensor evt;  // [evt_dims x T], entries in {0,1}
    std::vector<int> labels;  // per-frame state, in [0, states)

    std::size_t frames() const { return labels.size(); }
};

struct GeneratorConfig {
    std::size_t states = 8;
    std::size_t kin_channels = 6;
    std::size_t vis_dims = 16;
    std::size_t evt_dims = 4;
    std::size_t techniques = 3;
    std::size_t users = 5;
    std::size_t trials = 30;
    double frame_rate = 10.0;
    double trial_seconds = 25.0;
    double duration_min = 1.0;
    double duration_max = 7.0;
    double duration_jitter = 0.25;
    NuisanceSpec nuisance;
    double technique_amp_spread = 0.5;
    double technique_speed_spread = 0.35;
    double transition_bias = 0.6;
};

// Deterministic default task + technique set for a configuration seed.
TaskFsm make_task(const GeneratorConfig& cfg, std::uint64_t seed);
std::vector<TechniqueSpec> make_techniques(const TaskFsm& fsm, const GeneratorConfig& cfg,
                                           std::uint64_t seed);

// Walks the FSM once per trial with independent per-trial substreams; fully
// deterministic for a given seed regardless of generation order.
std::vector<MultiStreamTrial> generate(const TaskFsm& fsm,
                                       const std::vector<TechniqueSpec>& techniques,
                                       const NuisanceSpec& nuisance, std::size_t n_trials,
                                       std::size_t n_users, double frame_rate,
                                       double trial_seconds, std::uint64_t seed);

// Convenience wrapper building task + techniques from the config seed.
std::vector<MultiStreamTrial> generate(const GeneratorConfig& cfg, std::uint64_t seed);

// Dataset directory: manifest.json + one text file per trial. Numeric fields
// round-trip bit-exactly.
void save(const std::vector<MultiStreamTrial>& trials, const std::string& dir,
          std::uint64_t seed, const std::string& config_echo);
std::vector<MultiStreamTrial> load(const std::string& dir);

// Resamples a trial recorded at source_rate to the canonical 10 Hz: linear
// interpolation for kin/vis, nearest-frame hold for events and labels.
MultiStreamTrial resample(const MultiStreamTrial& trial, double source_rate);

struct WindowedSample {
    int trial_id = 0;
    long center = 0;
    WindowMode mode = WindowMode::causal;
    Tensor kin_window, vis_window, evt_window;
    int state = 0;
    int technique_label = -1;  // assigned by clustering, not ground truth
};

// One sample per frame; early/late frames are replicate-padded.
std::vector<WindowedSample> window(const MultiStreamTrial& trial, int t_obs, WindowMode mode,
                                   int technique_label = -1);

struct Fold {
    std::string key;
    std::vector<int> train_ids;
    std::vector<int> test_ids;
};

std::vector<Fold> split_louo(const std::vector<MultiStreamTrial>& trials);
std::vector<Fold> split_kfold(const std::vector<MultiStreamTrial>& trials, std::size_t k,
                              std::uint64_t seed);
std::vector<Fold> split_leave_one_technique_out(const std::vector<MultiStreamTrial>& trials);

const MultiStreamTrial& trial_by_id(const std::vector<MultiStreamTrial>& trials, int id);

}  // namespace invseq::data

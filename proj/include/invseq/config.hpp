#pragma once

#include <string>

#include "invseq/dataset.hpp"
#include "invseq/encoders.hpp"
#include "invseq/model.hpp"
#include "invseq/trainer.hpp"

namespace invseq::harness {

struct ClusterConfig {
    std::size_t k = 0;  // 0 -> select via the silhouette sweep
    std::size_t k_min = 2;
    std::size_t k_max = 8;
    int restarts = 10;
    int band = 0;  // Sakoe-Chiba band width; 0 disables
};

// Whole-experiment configuration. Encoder input sizes and the model feature
// dimension are derived from the dataset section.
struct Config {
    data::GeneratorConfig dataset;
    enc::EncoderConfig encoder;
    net::ModelConfig model;
    net::TrainSchedule train;
    ClusterConfig cluster;

    // propagates dataset dims into encoder inputs and |H| into the model
    void derive();

    std::string to_json_string() const;
    static Config from_json_string(const std::string& text);
    static Config load(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace invseq::harness

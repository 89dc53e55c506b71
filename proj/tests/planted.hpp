#pragma once

// Planted-technique series used by clustering tests: each group shares a
// smooth multi-sinusoid template; members add small noise and length jitter.

#include <vector>

#include "invseq/clustering.hpp"
#include "invseq/rng.hpp"

namespace planted {

using invseq::Tensor;
using invseq::dtwc::TrialSeries;

struct GroupTemplate {
    std::vector<double> freq, phase, amp, offset;  // per (channel, harmonic) flattened
};

inline std::vector<TrialSeries> make_series(std::size_t groups, std::size_t per_group,
                                            std::size_t channels, std::size_t base_len,
                                            double noise, std::uint64_t seed,
                                            std::vector<int>* truth = nullptr) {
    constexpr int kHarmonics = 3;
    std::vector<GroupTemplate> templates(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        auto rng = invseq::make_rng(invseq::substream_seed(seed, 0x67727000, g));
        for (std::size_t c = 0; c < channels * kHarmonics; ++c) {
            templates[g].freq.push_back(invseq::uniform(rng, 0.5, 3.0));
            templates[g].phase.push_back(invseq::uniform(rng, 0.0, 6.28318));
            templates[g].amp.push_back(invseq::uniform(rng, 0.4, 1.0));
        }
        for (std::size_t c = 0; c < channels; ++c)
            templates[g].offset.push_back(invseq::uniform(rng, -1.0, 1.0));
    }
    std::vector<TrialSeries> out;
    int id = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t m = 0; m < per_group; ++m, ++id) {
            auto rng = invseq::make_rng(invseq::substream_seed(seed, 0x73657200, id));
            std::size_t len = base_len +
                              static_cast<std::size_t>(invseq::uniform(rng, 0.0, 0.2) *
                                                       static_cast<double>(base_len));
            TrialSeries s;
            s.id = id;
            s.frames = Tensor({channels, len});
            for (std::size_t t = 0; t < len; ++t) {
                double u = static_cast<double>(t) / static_cast<double>(len);
                for (std::size_t c = 0; c < channels; ++c) {
                    double v = templates[g].offset[c];
                    for (int h = 0; h < kHarmonics; ++h) {
                        std::size_t idx = c * kHarmonics + static_cast<std::size_t>(h);
                        v += templates[g].amp[idx] *
                             std::sin(6.28318 * templates[g].freq[idx] * u +
                                      templates[g].phase[idx]);
                    }
                    s.frames.at(c, t) = v + noise * invseq::gaussian(rng);
                }
            }
            out.push_back(std::move(s));
            if (truth) truth->push_back(static_cast<int>(g));
        }
    }
    return out;
}

// mean within-group DTW distance / mean between-group distance
inline double within_between_ratio(const invseq::dtwc::DistanceMatrix& dm,
                                   const std::vector<int>& truth) {
    double within = 0.0, between = 0.0;
    long nw = 0, nb = 0;
    for (std::size_t i = 0; i < dm.size(); ++i) {
        for (std::size_t j = i + 1; j < dm.size(); ++j) {
            if (truth[i] == truth[j]) {
                within += dm.at(i, j);
                nw++;
            } else {
                between += dm.at(i, j);
                nb++;
            }
        }
    }
    return (within / static_cast<double>(nw)) / (between / static_cast<double>(nb));
}

}  // namespace planted

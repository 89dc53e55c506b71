#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invseq/tensor.hpp"

namespace invseq::dtwc {

// One trial's kinematics viewed as a multivariate time series.
struct TrialSeries {
    int id = 0;
    Tensor frames;  // [channels x T]
};

struct DistanceMatrix {
    std::vector<int> ids;  // trial id order
    Tensor d;              // [n x n], symmetric, zero diagonal

    std::size_t size() const { return ids.size(); }
    double at(std::size_t i, std::size_t j) const { return d.at(i, j); }
};

// Per-channel z-normalization over the whole trial; applied before DTW so
// per-trial gain/offset nuisances do not dominate the technique signal.
TrialSeries znormalize(const TrialSeries& s);

// Dynamic time warping distance: minimal cumulative Euclidean frame cost
// over monotone alignments with steps {(1,0),(0,1),(1,1)}, unnormalized by
// path length. band > 0 restricts |i - j| (Sakoe-Chiba).
double dtw_distance(const TrialSeries& a, const TrialSeries& b, int band = 0);

// Symmetric zero-diagonal matrix of pairwise DTW distances over z-normalized
// trials. Entries are independent; `threads` > 1 computes them concurrently
// with an identical result.
DistanceMatrix pairwise_dtw(const std::vector<TrialSeries>& trials, int band = 0,
                            int threads = 1);

struct ClusterAssignment {
    std::size_t k = 0;
    std::vector<int> labels;            // aligned with DistanceMatrix ids
    std::vector<std::size_t> medoids;   // indices into the matrix
    double inertia = 0.0;
    double mean_silhouette = 0.0;
};

// k-medoids under the precomputed distance matrix: alternate
// assignment-to-nearest-medoid and medoid update until fixpoint, best of
// `restarts` seeded initializations by inertia. An emptied cluster is
// re-seeded from the point farthest from its current medoid.
ClusterAssignment cluster(const DistanceMatrix& dm, std::size_t k, int restarts,
                          std::uint64_t seed);

// Sum over trials of the squared distance to their medoid.
double inertia(const DistanceMatrix& dm, const ClusterAssignment& assignment);

struct SilhouetteTerms {
    std::vector<double> a;  // mean intra-cluster distance
    std::vector<double> b;  // min over other clusters of mean distance
    std::vector<double> d;  // (b - a) / max(a, b), 0 for singletons
};

struct SilhouetteResult {
    double mean = 0.0;
    SilhouetteTerms terms;
};

// Standard silhouette over an arbitrary label vector (labels need not be
// contiguous). Requires at least 2 distinct labels.
SilhouetteResult silhouette_mean(const DistanceMatrix& dm, const std::vector<int>& labels);
SilhouetteResult silhouette_mean(const DistanceMatrix& dm, const ClusterAssignment& assignment);

struct KSelection {
    std::size_t chosen_k = 0;
    std::vector<std::size_t> ks;
    std::vector<double> inertia_curve;
    std::vector<double> silhouette_curve;
    ClusterAssignment chosen;
};

// Sweeps k over [k_min, k_max], returns the argmax-silhouette k (ties ->
// smallest). Each k's candidate set includes a warm start grown from the
// previous k's best medoids, which keeps the inertia curve non-increasing.
KSelection select_k(const DistanceMatrix& dm, std::size_t k_min, std::size_t k_max,
                    int restarts, std::uint64_t seed);
KSelection select_k(const std::vector<TrialSeries>& trials, std::size_t k_min,
                    std::size_t k_max, int restarts, std::uint64_t seed, int band = 0);

// Tie-break helper: index of the best k (largest silhouette, then smallest k).
std::size_t choose_k_index(const std::vector<double>& silhouettes);

// Euclidean distance matrix over a point set (used for embedding-quality
// silhouettes; ids are the point indices).
DistanceMatrix euclidean_matrix(const std::vector<Tensor>& points);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Technique-label file: one line per trial with the full record.
struct TechniqueLabels {
    std::size_t k = 0;
    double mean_silhouette = 0.0;
    double inertia = 0.0;
    std::vector<std::pair<int, int>> labels;  // (trial id, label)

    int label_of(int trial_id) const;
};

TechniqueLabels labels_from(const DistanceMatrix& dm, const ClusterAssignment& assignment);
std::string serialize_labels(const TechniqueLabels& labels);
TechniqueLabels parse_labels(const std::string& path);

}  // namespace invseq::dtwc

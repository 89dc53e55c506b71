#include "invseq/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "invseq/errors.hpp"
#include "invseq/rng.hpp"
#include "invseq/textio.hpp"

namespace invseq::dtwc {

TrialSeries znormalize(const TrialSeries& s) {
    TrialSeries out;
    out.id = s.id;
    out.frames = s.frames;
    std::size_t T = s.frames.cols();
    for (std::size_t c = 0; c < s.frames.rows(); ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < T; ++t) mean += s.frames.at(c, t);
        mean /= static_cast<double>(T);
        double var = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            double d = s.frames.at(c, t) - mean;
            var += d * d;
        }
        double sd = std::sqrt(var / static_cast<double>(T));
        for (std::size_t t = 0; t < T; ++t) {
            double centered = s.frames.at(c, t) - mean;
            out.frames.at(c, t) = sd > 0.0 ? centered / sd : 0.0;
        }
    }
    return out;
}

double dtw_distance(const TrialSeries& a, const TrialSeries& b, int band) {
    if (a.frames.rows() != b.frames.rows()) {
        throw DimensionError("dtw_distance: channel counts differ (" +
                             std::to_string(a.frames.rows()) + " vs " +
                             std::to_string(b.frames.rows()) + ")");
    }
    std::size_t m = a.frames.cols(), n = b.frames.cols();
    if (m == 0 || n == 0) throw DataError("dtw_distance: empty series");
    std::size_t ch = a.frames.rows();

    auto frame_cost = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t c = 0; c < ch; ++c) {
            double d = a.frames.at(c, i) - b.frames.at(c, j);
            s += d * d;
        }
        return std::sqrt(s);
    };

    long eff_band = band > 0
                        ? std::max<long>(band, std::labs(static_cast<long>(m) - static_cast<long>(n)))
                        : -1;

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(n, inf), cur(n, inf);
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        for (std::size_t j = 0; j < n; ++j) {
            if (eff_band >= 0 &&
                std::labs(static_cast<long>(i) - static_cast<long>(j)) > eff_band)
                continue;
            double best;
            if (i == 0 && j == 0) {
                best = 0.0;
            } else {
                best = inf;
                if (i > 0) best = std::min(best, prev[j]);
                if (j > 0) best = std::min(best, cur[j - 1]);
                if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
            }
            cur[j] = best + frame_cost(i, j);
        }
        std::swap(prev, cur);
    }
    return prev[n - 1];
}

DistanceMatrix pairwise_dtw(const std::vector<TrialSeries>& trials, int band, int threads) {
    if (trials.size() < 2) throw ConfigError("pairwise_dtw: need at least 2 trials");
    std::size_t n = trials.size();
    std::vector<TrialSeries> normed;
    normed.reserve(n);
    for (const auto& t : trials) normed.push_back(znormalize(t));

    DistanceMatrix dm;
    for (const auto& t : trials) dm.ids.push_back(t.id);
    dm.d = Tensor({n, n});

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            auto [i, j] = pairs[p];
            double dist = dtw_distance(normed[i], normed[j], band);
            dm.d.at(i, j) = dist;
            dm.d.at(j, i) = dist;
        }
    };

    if (threads <= 1) {
        work(0, pairs.size());
    } else {
        std::vector<std::thread> pool;
        std::size_t per = (pairs.size() + static_cast<std::size_t>(threads) - 1) /
                          static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            std::size_t begin = static_cast<std::size_t>(t) * per;
            std::size_t end = std::min(pairs.size(), begin + per);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return dm;
}

namespace {

struct KmedoidsState {
    std::vector<std::size_t> medoids;
    std::vector<int> labels;
    double inertia = 0.0;
};

double assignment_inertia(const DistanceMatrix& dm, const std::vector<int>& labels,
                          const std::vector<std::size_t>& medoids) {
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double d = dm.at(i, medoids[static_cast<std::size_t>(labels[i])]);
        total += d * d;
    }
    return total;
}

// assignment to the nearest medoid; ties go to the lower cluster index
std::vector<int> assign(const DistanceMatrix& dm, const std::vector<std::size_t>& medoids) {
    std::vector<int> labels(dm.size());
    for (std::size_t i = 0; i < dm.size(); ++i) {
        int best = 0;
        double best_d = dm.at(i, medoids[0]);
        for (std::size_t c = 1; c < medoids.size(); ++c) {
            double d = dm.at(i, medoids[c]);
            if (d < best_d) {
                best = static_cast<int>(c);
                best_d = d;
            }
        }
        labels[i] = best;
    }
    return labels;
}

// point with the largest distance to its assigned medoid, excluding medoids
std::size_t farthest_point(const DistanceMatrix& dm, const std::vector<int>& labels,
                           const std::vector<std::size_t>& medoids) {
    std::set<std::size_t> used(medoids.begin(), medoids.end());
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < dm.size(); ++i) {
        if (used.count(i)) continue;
        double d = dm.at(i, medoids[static_cast<std::size_t>(labels[i])]);
        if (d > best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

// PAM-style alternation from a given initialization; returns the best
// assignment state seen, judged by inertia.
KmedoidsState kmedoids_run(const DistanceMatrix& dm, std::vector<std::size_t> medoids) {
    std::size_t k = medoids.size();
    KmedoidsState best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < 200; ++iter) {
        std::vector<int> labels = assign(dm, medoids);

        // re-seed any emptied cluster from the farthest point
        for (std::size_t c = 0; c < k; ++c) {
            bool empty = true;
            for (int l : labels)
                if (static_cast<std::size_t>(l) == c) empty = false;
            if (empty) {
                medoids[c] = farthest_point(dm, labels, medoids);
                labels = assign(dm, medoids);
            }
        }

        double in = assignment_inertia(dm, labels, medoids);
        if (in < best.inertia) {
            best.inertia = in;
            best.labels = labels;
            best.medoids = medoids;
        }

        // medoid update: member minimizing total within-cluster distance
        std::vector<std::size_t> next = medoids;
        for (std::size_t c = 0; c < k; ++c) {
            double best_total = std::numeric_limits<double>::infinity();
            std::size_t best_member = medoids[c];
            for (std::size_t i = 0; i < dm.size(); ++i) {
                if (static_cast<std::size_t>(labels[i]) != c) continue;
                double total = 0.0;
                for (std::size_t j = 0; j < dm.size(); ++j)
                    if (static_cast<std::size_t>(labels[j]) == c) total += dm.at(i, j);
                if (total < best_total) {
                    best_total = total;
                    best_member = i;
                }
            }
            next[c] = best_member;
        }
        if (next == medoids) break;
        medoids = std::move(next);
    }
    return best;
}

ClusterAssignment finish_assignment(const DistanceMatrix& dm, const KmedoidsState& s) {
    ClusterAssignment out;
    out.k = s.medoids.size();
    out.labels = s.labels;
    out.medoids = s.medoids;
    out.inertia = s.inertia;
    out.mean_silhouette = out.k >= 2 ? silhouette_mean(dm, s.labels).mean : 0.0;
    return out;
}

KmedoidsState cluster_candidates(const DistanceMatrix& dm, std::size_t k, int restarts,
                                 std::uint64_t seed,
                                 const std::vector<std::size_t>* warm_start) {
    std::size_t n = dm.size();
    KmedoidsState best;
    best.inertia = std::numeric_limits<double>::infinity();
    auto consider = [&](KmedoidsState cand) {
        if (cand.inertia < best.inertia) best = std::move(cand);
    };
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        auto rng = make_rng(substream_seed(seed, 0x696e6974, static_cast<std::uint64_t>(r)));
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(k);
        consider(kmedoids_run(dm, idx));
    }
    if (warm_start) consider(kmedoids_run(dm, *warm_start));
    return best;
}

}  // namespace

ClusterAssignment cluster(const DistanceMatrix& dm, std::size_t k, int restarts,
                          std::uint64_t seed) {
    if (k < 1 || k > dm.size()) {
        throw ConfigError("cluster: k = " + std::to_string(k) + " out of range [1, " +
                          std::to_string(dm.size()) + "]");
    }
    return finish_assignment(dm, cluster_candidates(dm, k, restarts, seed, nullptr));
}

double inertia(const DistanceMatrix& dm, const ClusterAssignment& assignment) {
    if (assignment.labels.size() != dm.size()) {
        throw DimensionError("inertia: assignment does not match matrix size");
    }
    return assignment_inertia(dm, assignment.labels, assignment.medoids);
}

SilhouetteResult silhouette_mean(const DistanceMatrix& dm, const std::vector<int>& labels) {
    if (labels.size() != dm.size()) {
        throw DimensionError("silhouette: label count does not match matrix size");
    }
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw ConfigError("silhouette: needs at least 2 clusters");
    }
    std::size_t n = dm.size();
    SilhouetteResult out;
    out.terms.a.resize(n);
    out.terms.b.resize(n);
    out.terms.d.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // a_i: mean distance to own cluster (excluding self)
        double a_sum = 0.0;
        long a_count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || labels[j] != labels[i]) continue;
            a_sum += dm.at(i, j);
            a_count++;
        }
        // b_i: smallest mean distance to another cluster
        double b_min = std::numeric_limits<double>::infinity();
        for (int other : distinct) {
            if (other == labels[i]) continue;
            double sum = 0.0;
            long count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] != other) continue;
                sum += dm.at(i, j);
                count++;
            }
            if (count > 0) b_min = std::min(b_min, sum / static_cast<double>(count));
        }
        double a_i = a_count > 0 ? a_sum / static_cast<double>(a_count) : 0.0;
        out.terms.a[i] = a_i;
        out.terms.b[i] = b_min;
        if (a_count == 0) {
            out.terms.d[i] = 0.0;  // singleton cluster
        } else {
            double denom = std::max(a_i, b_min);
            out.terms.d[i] = denom > 0.0 ? (b_min - a_i) / denom : 0.0;
        }
        out.mean += out.terms.d[i];
    }
    out.mean /= static_cast<double>(n);
    return out;
}

SilhouetteResult silhouette_mean(const DistanceMatrix& dm, const ClusterAssignment& assignment) {
    return silhouette_mean(dm, assignment.labels);
}

std::size_t choose_k_index(const std::vector<double>& silhouettes) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < silhouettes.size(); ++i) {
        if (silhouettes[i] > silhouettes[best]) best = i;
    }
    return best;
}

KSelection select_k(const DistanceMatrix& dm, std::size_t k_min, std::size_t k_max,
                    int restarts, std::uint64_t seed) {
    if (k_min < 2 || k_max < k_min || k_max > dm.size()) {
        throw ConfigError("select_k: degenerate range [" + std::to_string(k_min) + ", " +
                          std::to_string(k_max) + "] for n = " + std::to_string(dm.size()));
    }
    KSelection sel;
    std::vector<ClusterAssignment> per_k;
    const std::vector<std::size_t>* warm = nullptr;
    std::vector<std::size_t> warm_medoids;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        KmedoidsState best = cluster_candidates(dm, k, restarts, seed, warm);
        ClusterAssignment a = finish_assignment(dm, best);
        sel.ks.push_back(k);
        sel.inertia_curve.push_back(a.inertia);
        sel.silhouette_curve.push_back(a.mean_silhouette);
        // warm start for k+1: keep these medoids and add the farthest point
        warm_medoids = a.medoids;
        warm_medoids.push_back(farthest_point(dm, a.labels, a.medoids));
        warm = &warm_medoids;
        per_k.push_back(std::move(a));
    }
    std::size_t idx = choose_k_index(sel.silhouette_curve);
    sel.chosen_k = sel.ks[idx];
    sel.chosen = per_k[idx];
    return sel;
}

KSelection select_k(const std::vector<TrialSeries>& trials, std::size_t k_min,
                    std::size_t k_max, int restarts, std::uint64_t seed, int band) {
    return select_k(pairwise_dtw(trials, band), k_min, k_max, restarts, seed);
}

DistanceMatrix euclidean_matrix(const std::vector<Tensor>& points) {
    if (points.size() < 2) throw ConfigError("euclidean_matrix: need at least 2 points");
    std::size_t n = points.size();
    DistanceMatrix dm;
    dm.d = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        dm.ids.push_back(static_cast<int>(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!points[i].same_shape(points[j])) {
                throw DimensionError("euclidean_matrix: point dimensions differ");
            }
            double s = 0.0;
            for (std::size_t c = 0; c < points[i].size(); ++c) {
                double d = points[i][c] - points[j][c];
                s += d * d;
            }
            double dist = std::sqrt(s);
            dm.d.at(i, j) = dist;
            dm.d.at(j, i) = dist;
        }
    }
    return dm;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DimensionError("adjusted_rand_index: length mismatch");
    std::map<std::pair<int, int>, long> contingency;
    std::map<int, long> row, col;
    for (std::size_t i = 0; i < a.size(); ++i) {
        contingency[{a[i], b[i]}]++;
        row[a[i]]++;
        col[b[i]]++;
    }
    auto comb2 = [](long x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (auto& [key, v] : contingency) sum_ij += comb2(v);
    for (auto& [key, v] : row) sum_a += comb2(v);
    for (auto& [key, v] : col) sum_b += comb2(v);
    double total = comb2(static_cast<long>(a.size()));
    double expected = sum_a * sum_b / total;
    double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both partitions trivial
    return (sum_ij - expected) / (max_index - expected);
}

int TechniqueLabels::label_of(int trial_id) const {
    for (const auto& [id, label] : labels)
        if (id == trial_id) return label;
    throw DataError("no technique label for trial " + std::to_string(trial_id));
}

TechniqueLabels labels_from(const DistanceMatrix& dm, const ClusterAssignment& assignment) {
    TechniqueLabels out;
    out.k = assignment.k;
    out.mean_silhouette = assignment.mean_silhouette;
    out.inertia = assignment.inertia;
    for (std::size_t i = 0; i < dm.ids.size(); ++i)
        out.labels.emplace_back(dm.ids[i], assignment.labels[i]);
    return out;
}

std::string serialize_labels(const TechniqueLabels& labels) {
    std::string out = "invseq-labels v1\n";
    for (const auto& [id, label] : labels.labels) {
        out += "trial " + std::to_string(id) + " label " + std::to_string(label) + " k " +
               std::to_string(labels.k) + " silhouette " + format_double(labels.mean_silhouette) +
               " inertia " + format_double(labels.inertia) + "\n";
    }
    return out;
}

TechniqueLabels parse_labels(const std::string& path) {
    LineReader in(path);
    std::string magic = in.expect_line("header");
    if (magic != "invseq-labels v1") {
        throw VersionError(path + ": not a technique-label file");
    }
    TechniqueLabels out;
    std::string line;
    while (in.next_line(line)) {
        auto toks = split_ws(line);
        if (toks.size() != 10 || toks[0] != "trial" || toks[2] != "label" || toks[4] != "k" ||
            toks[6] != "silhouette" || toks[8] != "inertia") {
            throw ParseError(path + ": malformed label record", in.line_number());
        }
        out.labels.emplace_back(static_cast<int>(parse_long(toks[1])),
                                static_cast<int>(parse_long(toks[3])));
        out.k = static_cast<std::size_t>(parse_long(toks[5]));
        out.mean_silhouette = parse_double(toks[7]);
        out.inertia = parse_double(toks[9]);
    }
    if (out.labels.empty()) throw ParseError(path + ": no label records");
    return out;
}

}  // namespace invseq::dtwc

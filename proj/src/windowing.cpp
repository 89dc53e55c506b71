#include "invseq/windowing.hpp"

#include <algorithm>

#include "invseq/errors.hpp"

namespace invseq {

int window_length(int t_obs, WindowMode mode) {
    if (t_obs < 1) throw ConfigError("window: t_obs must be >= 1");
    return mode == WindowMode::causal ? t_obs : 2 * (t_obs / 2) + 1;
}

int window_center(int t_obs, WindowMode mode) {
    return mode == WindowMode::causal ? t_obs - 1 : t_obs / 2;
}

long window_source_index(long t, int slot, int t_obs, WindowMode mode, long total) {
    long start = mode == WindowMode::causal ? t - (t_obs - 1) : t - (t_obs / 2);
    long idx = start + slot;
    return std::clamp(idx, 0L, total - 1);
}

Tensor window_columns(const Tensor& seq, long t, int t_obs, WindowMode mode) {
    if (seq.rank() != 2 || seq.cols() == 0) {
        throw DataError("window: empty sequence");
    }
    long total = static_cast<long>(seq.cols());
    if (t < 0 || t >= total) {
        throw DimensionError("window: frame " + std::to_string(t) + " out of range [0, " +
                             std::to_string(total) + ")");
    }
    int len = window_length(t_obs, mode);
    std::size_t d = seq.rows();
    Tensor out({d, static_cast<std::size_t>(len)});
    for (int slot = 0; slot < len; ++slot) {
        long src = window_source_index(t, slot, t_obs, mode, total);
        for (std::size_t r = 0; r < d; ++r)
            out.at(r, static_cast<std::size_t>(slot)) = seq.at(r, static_cast<std::size_t>(src));
    }
    return out;
}

Tensor column(const Tensor& seq, std::size_t t) {
    Tensor col({seq.rows()});
    for (std::size_t r = 0; r < seq.rows(); ++r) col[r] = seq.at(r, t);
    return col;
}

void set_column(Tensor& seq, std::size_t t, const Tensor& col) {
    if (col.size() != seq.rows()) {
        throw DimensionError("set_column: column size " + col.shape_str() +
                             " does not match rows of " + seq.shape_str());
    }
    for (std::size_t r = 0; r < seq.rows(); ++r) seq.at(r, t) = col[r];
}

}  // namespace invseq

#pragma once

#include "invseq/tensor.hpp"

namespace invseq {

enum class WindowMode { causal, noncausal };

// Length of an observation window. Causal windows cover [t - t_obs + 1, t];
// non-causal windows cover [t - t_obs/2, t + t_obs/2].
int window_length(int t_obs, WindowMode mode);

// Index of the reference frame t inside its window.
int window_center(int t_obs, WindowMode mode);

// Extracts the window around column t of a [d x T] sequence, replicating the
// first/last column where the window spills over a trial boundary.
Tensor window_columns(const Tensor& seq, long t, int t_obs, WindowMode mode);

// Clamped source column index for window slot `slot` of the window at t.
long window_source_index(long t, int slot, int t_obs, WindowMode mode, long total);

Tensor column(const Tensor& seq, std::size_t t);
void set_column(Tensor& seq, std::size_t t, const Tensor& col);

}  // namespace invseq

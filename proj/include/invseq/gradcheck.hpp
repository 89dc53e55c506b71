#pragma once

#include <functional>
#include <string>
#include <vector>

#include "invseq/params.hpp"

namespace invseq {

// Builds a scalar loss from the current values of the bound groups. Called
// repeatedly by grad_check while parameters are perturbed, so it must read
// parameters through the bindings it is handed.
using LossBuilder = std::function<Var(Tape&, TapeBindings&)>;

struct GradCheckEntry {
    std::string group;
    std::string tensor;
    double max_rel_err = 0.0;
    bool finite = true;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    bool pass = true;

    std::string summary() const;
};

// Compares reverse-mode gradients against central finite differences for
// every element of every trainable tensor in `groups`. Intended for
// desk-scale fragments (dimensions <= 8).
GradCheckReport grad_check(const LossBuilder& build, std::vector<ParamGroup*> groups,
                           double tolerance, double step = 1e-5);

}  // namespace invseq

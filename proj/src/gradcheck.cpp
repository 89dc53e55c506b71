#include "invseq/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "invseq/errors.hpp"

namespace invseq {

namespace {

double loss_value(const LossBuilder& build, const std::vector<ParamGroup*>& groups) {
    Tape t(false);
    TapeBindings b;
    for (ParamGroup* g : groups) b.bind(t, *g);
    Var loss = build(t, b);
    return t.scalar(loss);
}

}  // namespace

std::string GradCheckReport::summary() const {
    std::string s;
    char line[160];
    for (const GradCheckEntry& e : entries) {
        std::snprintf(line, sizeof(line), "%-24s %-12s max_rel_err %.3e  %s\n",
                      e.group.c_str(), e.tensor.c_str(), e.max_rel_err,
                      e.finite ? (e.pass ? "pass" : "FAIL") : "FAIL (non-finite)");
        s += line;
    }
    std::snprintf(line, sizeof(line), "overall max_rel_err %.3e  %s\n", max_rel_err,
                  pass ? "pass" : "FAIL");
    s += line;
    return s;
}

GradCheckReport grad_check(const LossBuilder& build, std::vector<ParamGroup*> groups,
                           double tolerance, double step) {
    // Analytic pass.
    Tape tape(true);
    TapeBindings bindings;
    for (ParamGroup* g : groups) bindings.bind(tape, *g);
    Var loss = build(tape, bindings);
    tape.backward(loss);

    std::vector<GradientRecord> analytic;
    analytic.reserve(groups.size());
    for (ParamGroup* g : groups) analytic.push_back(bindings.collect(tape, *g));

    GradCheckReport report;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        ParamGroup& group = *groups[gi];
        if (!group.trainable) continue;
        for (std::size_t ti = 0; ti < group.tensors.size(); ++ti) {
            GradCheckEntry entry;
            entry.group = group.name;
            entry.tensor = group.tensor_names[ti];
            Tensor& param = group.tensors[ti];
            for (std::size_t j = 0; j < param.size(); ++j) {
                double a = analytic[gi].connected ? analytic[gi].grads[ti][j] : 0.0;
                double saved = param[j];
                param[j] = saved + step;
                double up = loss_value(build, groups);
                param[j] = saved - step;
                double down = loss_value(build, groups);
                param[j] = saved;
                double numeric = (up - down) / (2.0 * step);
                if (!std::isfinite(a) || !std::isfinite(numeric)) {
                    entry.finite = false;
                    continue;
                }
                double rel = std::abs(a - numeric) /
                             std::max(std::abs(a) + std::abs(numeric), 1e-6);
                entry.max_rel_err = std::max(entry.max_rel_err, rel);
            }
            entry.pass = entry.finite && entry.max_rel_err < tolerance;
            report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
            report.pass = report.pass && entry.pass;
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

}  // namespace invseq

#pragma once

// Experiment registry: every CLI-runnable experiment with its schema, runner,
// one-line description, and the statement it exercises.

#include "bbm/experiments_core.hpp"
#include "bbm/experiments_law.hpp"

namespace bbm {

inline const std::vector<ExperimentDef>& experiment_registry() {
    static const std::vector<ExperimentDef> defs = {
        def_invariants(),     def_picard_check(),
        def_blowup(),         def_gaussianize(),
        def_covariance_limit(),
        def_thm13(),          def_thm15(),
        def_appendix_noise(), def_appendix_thm(),
    };
    return defs;
}

inline const ExperimentDef* find_experiment(const std::string& id) {
    for (const ExperimentDef& def : experiment_registry())
        if (def.id == id) return &def;
    return nullptr;
}

}  // namespace bbm

// Drives a study by hand: ask for a batch, evaluate it, tell the results.

#include <iostream>

#include "dynbatch/dynbatch.hpp"

int main() {
    using namespace dynbatch;
    const Objective objective = make_objective("rosenbrock2");
    RunConfig cfg = RunConfig::defaults_for(objective);
    cfg.surrogate = SurrogateRule::fixed(*objective.known_max());
    cfg.seed = 7;

    Study study(objective, cfg);
    int round = 0;
    while (!study.done()) {
        const auto batch = study.ask();
        std::vector<double> ys;
        for (const auto& x : batch) ys.push_back(objective(x));
        study.tell(ys);
        std::cout << (round++ == 0 ? "init " : "round ") << batch.size() << " point(s)\n";
    }
    const RunRecord r = study.record();
    std::cout << "best " << r.best_output << "  regret " << *r.regret << "  rounds " << r.T << "  speedup "
              << r.speedup << '\n';
}

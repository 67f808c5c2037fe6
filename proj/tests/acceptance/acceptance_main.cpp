#include "antipgd/verification.hpp"

#include <cstdio>
#include <cstdlib>

int main() {
    antipgd::VerifyOptions opt;
    opt.workers = antipgd::resolve_workers(std::nullopt);
    int failed = 0;
    antipgd::run_acceptance(opt, [&failed](const antipgd::CriterionResult& r) {
        std::printf("%s\n", antipgd::summary_line(r).c_str());
        std::fflush(stdout);
        if (!r.passed()) {
            ++failed;
        }
    });
    std::printf("%d of 13 criteria failed\n", failed);
    return failed == 0 ? EXIT_SUCCESS : 2;
}

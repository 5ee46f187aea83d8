#include <doctest.h>

#include "grouplift/errors.hpp"
#include "grouplift/gradcheck.hpp"

using namespace grouplift;

TEST_CASE("the gradient check suite passes at the working tolerance") {
    const GradCheckReport report = run_gradient_checks(0, 5, 1e-5);
    REQUIRE(report.items.size() == 6);
    for (const auto& item : report.items) {
        INFO(item.component);
        CHECK(item.trials == 5);
        CHECK(item.worst_rel_err < 1e-5);
        CHECK(item.pass);
    }
    CHECK(report.all_pass());
}

TEST_CASE("an unreachable tolerance is reported as failure, not hidden") {
    const GradCheckReport report = run_gradient_checks(0, 2, 1e-300);
    CHECK_FALSE(report.all_pass());
    for (const auto& item : report.items) {
        CHECK_FALSE(item.pass);
        CHECK(item.worst_rel_err > 0.0);
    }
}

TEST_CASE("gradient checks are deterministic in the seed") {
    const GradCheckReport a = run_gradient_checks(7, 3, 1e-5);
    const GradCheckReport b = run_gradient_checks(7, 3, 1e-5);
    REQUIRE(a.items.size() == b.items.size());
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        CHECK(a.items[i].worst_rel_err == b.items[i].worst_rel_err);
    }
}

TEST_CASE("degenerate gradcheck settings are rejected") {
    CHECK_THROWS_AS(run_gradient_checks(0, 0, 1e-5), argument_error);
    CHECK_THROWS_AS(run_gradient_checks(0, 1, 0.0), argument_error);
    CHECK_THROWS_AS(run_gradient_checks(0, 1, -1.0), argument_error);
}

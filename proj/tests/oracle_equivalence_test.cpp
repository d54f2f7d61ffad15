#include <doctest.h>

#include "support/equivalence.hpp"

TEST_CASE("random block-structured models agree with the reference token game") {
    std::size_t withSub = 0, withError = 0;
    for (std::uint64_t seed = 1000; seed < 1060; ++seed) {
        auto out = equivalence::runSeed(seed);
        INFO(out.failure);
        CHECK(out.failure.empty());
        CHECK(out.elements <= 12);
        withSub += out.usedSubprocess;
        withError += out.raisedError;
    }
    // the generator must actually exercise the hierarchy
    CHECK(withSub > 5);
    CHECK(withError > 0);
}

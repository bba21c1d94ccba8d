#include <catch_amalgamated.hpp>
#include "driftlab/run.hpp"

TEST_CASE("placeholder test_gehring") { CHECK(true); }

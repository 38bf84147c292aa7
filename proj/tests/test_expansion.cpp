#include <catch2/catch_amalgamated.hpp>

TEST_CASE("placeholder", "[expansion]") { FAIL("suite not yet written"); }

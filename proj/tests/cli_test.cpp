#include <gtest/gtest.h>
TEST(Placeholder_cli_test, Todo) { GTEST_SKIP(); }

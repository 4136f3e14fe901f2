#include <gtest/gtest.h>
TEST(Placeholder_archive_test, Todo) { GTEST_SKIP(); }

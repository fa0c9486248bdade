#include <gtest/gtest.h>

#include "drd/allocator.hpp"

int main(int argc, char** argv) {
    drd::tune_allocator();
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}

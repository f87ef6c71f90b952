// Compiles the amalgamated Catch2 implementation (with its default main)
// once; every test target links against this object library.
#include <catch2/catch_amalgamated.cpp>

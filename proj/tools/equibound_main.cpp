#include "equibound/harness.hpp"

int main(int argc, char** argv) { return equibound::harness::cli_dispatch(argc, argv); }

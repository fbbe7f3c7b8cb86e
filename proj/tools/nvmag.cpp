#include "nvmag/runner.hpp"

int main(int argc, char** argv) { return nvmag::runner::main_entry(argc, argv); }

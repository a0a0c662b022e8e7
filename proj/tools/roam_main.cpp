#include "roam/harness.hpp"

int main(int argc, char** argv) { return roam::harness_main(argc, argv); }

#include "svla/harness.hpp"

int main(int argc, char** argv) { return svla::run_cli(argc, argv); }

#include "vforge/cli.hpp"

int main(int argc, char** argv) { return vforge::cli::dispatch(argc, argv); }

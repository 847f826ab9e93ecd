#include "care/cli.hpp"

int main(int argc, char** argv) { return care::cli::run(argc, argv); }

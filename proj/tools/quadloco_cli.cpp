#include "quadloco/cli.hpp"

int main(int argc, char** argv) { return quadloco::cli::run(std::vector<std::string>(argv, argv + argc)); }
